//! Output files: each is written to a temporary sibling and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use epi_infer_core::models::EpidemicPath;

use crate::CliError;

pub const TRACES_FILE: &str = "traces.jsonl";
pub const PATHS_FILE: &str = "paths.csv";
pub const POSTERIOR_FILE: &str = "posterior.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SCAN_FILE: &str = "scan.csv";
pub const GRAPH_FILE: &str = "graph.dot";

pub const PATHS_HEADER: &str = "run,day,S,I,R,new_infections,icu";

/// Writes `contents` to `dir/name` via a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, &target).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::io(format!("renaming into {}", target.display()), e)
    })?;
    Ok(target)
}

/// One row per (run, day), days counted from 0.
pub fn paths_to_csv(paths: &[EpidemicPath]) -> String {
    let mut out = String::from(PATHS_HEADER);
    out.push('\n');
    for (run, p) in paths.iter().enumerate() {
        for day in 0..p.days() {
            let _ = writeln!(
                out,
                "{run},{day},{},{},{},{},{}",
                p.susceptible[day], p.infectious[day], p.recovered[day], p.new_infections[day], p.icu[day]
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRow {
    pub run: usize,
    pub day: usize,
    pub values: [u64; 5],
}

/// Parses a paths CSV back into rows.
pub fn read_paths_csv(text: &str) -> Result<Vec<PathRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == PATHS_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(format!("row {}: expected 7 fields, got {}", i + 1, fields.len()));
            }
            let num = |s: &str| s.parse::<u64>().map_err(|e| format!("row {}: {s:?}: {e}", i + 1));
            let mut values = [0u64; 5];
            for (slot, f) in values.iter_mut().zip(&fields[2..]) {
                *slot = num(f)?;
            }
            Ok(PathRow {
                run: num(fields[0])? as usize,
                day: num(fields[1])? as usize,
                values,
            })
        })
        .collect()
}
