#![no_main]

use epi_infer_core::inference::{read_scan_csv, scan_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(scan) = read_scan_csv(text) {
        let again = read_scan_csv(&scan_to_csv(&scan)).expect("written CSV reloads");
        assert_eq!(scan.rows.len(), again.rows.len());
    }
});
