//! Replays the checked-in fuzz seeds through the same decoders the fuzz
//! targets exercise, so seeds stay valid as formats evolve.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use epi_infer::output::read_paths_csv;
use epi_infer::JobConfig;
use epi_infer_core::bridge::wire::{decode_message, encode_message, read_message, WireError};
use epi_infer_core::inference::{read_posterior_csv, read_scan_csv, scan_to_csv, Engine};
use epi_infer_core::trace::{read_jsonl, write_jsonl};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p: PathBuf| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> &str {
    std::str::from_utf8(bytes).unwrap()
}

#[test]
fn frame_seeds() {
    for (name, bytes) in seeds("decode_frame") {
        match (name.as_str(), decode_message(&bytes)) {
            ("truncated.bin", r) => assert!(matches!(r, Err(WireError::Truncated { .. }))),
            ("too_large.bin", r) => assert!(matches!(r, Err(WireError::FrameTooLarge { .. }))),
            ("unknown_type.bin", r) => assert!(matches!(r, Err(WireError::UnknownType(_)))),
            (_, Ok(msg)) => assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg, "{name}"),
            (_, Err(e)) => panic!("{name}: {e}"),
        }
    }
    let session = &seeds("read_frames")[0];
    assert_eq!(session.0, "session.bin");
    let mut cursor = Cursor::new(&session.1);
    let mut n = 0;
    while read_message(&mut cursor, 4096).is_ok() {
        n += 1;
    }
    assert_eq!(n, 5);
}

#[test]
fn text_seeds() {
    for (name, bytes) in seeds("trace_jsonl") {
        let traces = read_jsonl(text(&bytes)).unwrap_or_else(|(l, e)| panic!("{name} line {l}: {e}"));
        assert_eq!(write_jsonl(&traces), text(&bytes));
    }
    let labels = ["beta".to_owned(), "gamma".to_owned()];
    for (name, bytes) in seeds("posterior_csv") {
        read_posterior_csv(text(&bytes), Engine::Is, &labels).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (_, bytes) in seeds("scan_csv") {
        assert_eq!(scan_to_csv(&read_scan_csv(text(&bytes)).unwrap()), text(&bytes));
    }
    for (name, bytes) in seeds("paths_csv") {
        read_paths_csv(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    for (name, bytes) in seeds("job_config") {
        JobConfig::parse(text(&bytes)).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn readme_job_example_parses() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme.split("```json\n").nth(1).unwrap().split("```").next().unwrap();
    let job = JobConfig::parse(block).unwrap();
    assert_eq!(job.scan.unwrap().grid().unwrap().len(), 10);
}
