#![no_main]

use epi_infer::output::read_paths_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = read_paths_csv(text);
    }
});
