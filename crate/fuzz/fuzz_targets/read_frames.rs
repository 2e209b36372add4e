#![no_main]

use std::io::Cursor;

use epi_infer_core::bridge::wire::read_message;
use libfuzzer_sys::fuzz_target;

// A byte stream of back-to-back frames, read with a small frame limit.
fuzz_target!(|data: &[u8]| {
    let mut cursor = Cursor::new(data);
    while read_message(&mut cursor, 4096).is_ok() {}
});
