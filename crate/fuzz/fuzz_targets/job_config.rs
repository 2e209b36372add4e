#![no_main]

use epi_infer::JobConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(job) = JobConfig::parse(text) {
        if let Some(scan) = &job.scan {
            let _ = scan.grid();
        }
    }
});
