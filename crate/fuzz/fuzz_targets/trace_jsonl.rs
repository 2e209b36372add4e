#![no_main]

use epi_infer_core::trace::{read_jsonl, write_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(traces) = read_jsonl(text) {
        let again = read_jsonl(&write_jsonl(&traces)).expect("written traces reload");
        assert_eq!(traces.len(), again.len());
        for (a, b) in traces.iter().zip(&again) {
            assert!(a.bit_eq(b));
        }
    }
});
