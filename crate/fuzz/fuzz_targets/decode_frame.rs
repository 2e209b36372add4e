#![no_main]

use epi_infer_core::bridge::wire::{decode_message, encode_message};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = decode_message(data) {
        let again = decode_message(&encode_message(&msg)).expect("re-encoded frame decodes");
        assert_eq!(msg, again);
    }
});
