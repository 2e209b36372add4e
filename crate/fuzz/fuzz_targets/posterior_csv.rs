#![no_main]

use epi_infer_core::inference::{posterior_to_csv, read_posterior_csv, summarize, Engine};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let labels = ["beta".to_owned(), "gamma".to_owned()];
    if let Ok(post) = read_posterior_csv(text, Engine::Is, &labels) {
        let _ = summarize(&post);
        let again = read_posterior_csv(&posterior_to_csv(&post), Engine::Is, &labels).expect("written CSV reloads");
        assert_eq!(post.len(), again.len());
    }
});
