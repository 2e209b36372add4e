//! CSV export and re-import of posteriors and policy scans.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::models::InterventionPolicy;
use crate::value::Value;

use super::{Engine, Particle, PolicyScanResult, Posterior, ScanRow};

pub const POSTERIOR_FIXED_COLUMNS: [&str; 2] = ["particle", "log_weight"];
pub const SCAN_HEADER: [&str; 6] = [
    "policy_start_day",
    "contact_reduction",
    "vaccination_coverage",
    "p_constraint",
    "mean_total_cases",
    "n_rollouts",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {message}")]
    Content { row: usize, message: String },
    #[error("unexpected header: {0}")]
    Header(String),
}

/// Formats a real with 17 significant digits, in the style of C's `%.17g`.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn value_cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Vector(_)) => String::new(),
        Some(Value::Real(x)) => format_real(*x),
        Some(Value::Int(i)) => i.to_string(),
        Some(Value::Bool(b)) => b.to_string(),
    }
}

fn parse_cell(cell: &str) -> Option<Value> {
    let cell = cell.trim();
    match cell {
        "" => None,
        "true" => Some(Value::Bool(true)),
        "false" => Some(Value::Bool(false)),
        _ => {
            if let Ok(i) = cell.parse::<i64>() {
                Some(Value::Int(i))
            } else {
                cell.parse::<f64>().ok().map(Value::Real)
            }
        }
    }
}

fn parse_real(cell: &str, row: usize) -> Result<f64, CsvError> {
    match cell.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        "inf" => Ok(f64::INFINITY),
        c => c.parse::<f64>().map_err(|_| CsvError::Content {
            row,
            message: format!("not a number: {c:?}"),
        }),
    }
}

/// One row per particle: `particle,log_weight,<latents...>,<scalar outputs...>`.
pub fn posterior_to_csv(posterior: &Posterior) -> String {
    let outputs = posterior.scalar_output_names();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = POSTERIOR_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(posterior.latent_labels.iter().cloned())
        .chain(outputs.iter().cloned());
    w.write_record(header).expect("in-memory write");
    for (i, p) in posterior.particles.iter().enumerate() {
        let row = [i.to_string(), format_real(p.log_weight)]
            .into_iter()
            .chain(posterior.latent_labels.iter().map(|l| value_cell(p.latents.get(l))))
            .chain(outputs.iter().map(|o| value_cell(p.outputs.get(o))));
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Parses a posterior CSV; columns named in `latent_labels` become latents,
/// the remaining columns become outputs.
pub fn read_posterior_csv(text: &str, engine: Engine, latent_labels: &[String]) -> Result<Posterior, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 2 || header[0] != "particle" || header[1] != "log_weight" {
        return Err(CsvError::Header(header.join(",")));
    }
    let mut particles = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != header.len() {
            return Err(CsvError::Content {
                row,
                message: format!("expected {} columns, found {}", header.len(), rec.len()),
            });
        }
        let log_weight = parse_real(&rec[1], row)?;
        let mut latents = BTreeMap::new();
        let mut outputs = BTreeMap::new();
        for (name, cell) in header.iter().zip(rec.iter()).skip(2) {
            if let Some(v) = parse_cell(cell) {
                if latent_labels.contains(name) {
                    latents.insert(name.clone(), v);
                } else {
                    outputs.insert(name.clone(), v);
                }
            }
        }
        particles.push(Particle {
            latents,
            outputs,
            log_weight,
        });
    }
    Ok(Posterior {
        engine,
        seed: 0,
        latent_labels: latent_labels.to_vec(),
        particles,
        proposals: None,
        traces: None,
    })
}

pub fn scan_to_csv(scan: &PolicyScanResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SCAN_HEADER).expect("in-memory write");
    for row in &scan.rows {
        w.write_record([
            row.policy.start_day.to_string(),
            format_real(row.policy.contact_reduction),
            format_real(row.policy.vaccination_coverage),
            format_real(row.p_constraint),
            format_real(row.mean_total_cases),
            row.n_rollouts.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn read_scan_csv(text: &str) -> Result<PolicyScanResult, CsvError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header != SCAN_HEADER {
        return Err(CsvError::Header(header.join(",")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != SCAN_HEADER.len() {
            return Err(CsvError::Content { row, message: "wrong column count".into() });
        }
        let int = |s: &str| {
            s.trim().parse::<u64>().map_err(|_| CsvError::Content {
                row,
                message: format!("not an unsigned integer: {s:?}"),
            })
        };
        let start_day = u32::try_from(int(&rec[0])?).map_err(|_| CsvError::Content {
            row,
            message: "start day out of range".into(),
        })?;
        rows.push(ScanRow {
            policy: InterventionPolicy::new(start_day, parse_real(&rec[1], row)?, parse_real(&rec[2], row)?),
            p_constraint: parse_real(&rec[3], row)?,
            mean_total_cases: parse_real(&rec[4], row)?,
            n_rollouts: int(&rec[5])?,
        });
    }
    Ok(PolicyScanResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_formatting() {
        assert_eq!(format_real(0.5), "0.5");
        assert_eq!(format_real(0.1), "0.10000000000000001");
        assert_eq!(format_real(2.0), "2");
        assert_eq!(format_real(-1.25e-7), "-1.2499999999999999e-07");
        assert_eq!(format_real(1e20), "1e+20");
        assert_eq!(format_real(123456.0), "123456");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = format_real(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn scan_round_trip() {
        let scan = PolicyScanResult {
            rows: vec![ScanRow {
                policy: InterventionPolicy::new(3, 0.8, 0.1),
                p_constraint: 0.75,
                mean_total_cases: 12.3,
                n_rollouts: 4,
            }],
        };
        let text = scan_to_csv(&scan);
        assert!(text.starts_with("policy_start_day,contact_reduction,vaccination_coverage,p_constraint,mean_total_cases,n_rollouts\n"));
        assert_eq!(read_scan_csv(&text).unwrap(), scan);
    }

    #[test]
    fn posterior_header_and_missing_cells() {
        let mut a = BTreeMap::new();
        a.insert("x".to_string(), Value::Real(0.25));
        let mut out = BTreeMap::new();
        out.insert("total".to_string(), Value::Int(7));
        out.insert("series".to_string(), Value::Vector(vec![1.0]));
        let post = Posterior {
            engine: Engine::Is,
            seed: 1,
            latent_labels: vec!["x".into(), "y".into()],
            particles: vec![Particle { latents: a, outputs: out, log_weight: f64::NEG_INFINITY }],
            proposals: None,
            traces: None,
        };
        let text = posterior_to_csv(&post);
        assert_eq!(text, "particle,log_weight,x,y,total\n0,-inf,0.25,,7\n");
        let back = read_posterior_csv(&text, Engine::Is, &["x".into(), "y".into()]).unwrap();
        assert_eq!(back.particles[0].latents.get("x"), Some(&Value::Real(0.25)));
        assert_eq!(back.particles[0].outputs.get("total"), Some(&Value::Int(7)));
        assert_eq!(back.particles[0].log_weight, f64::NEG_INFINITY);
    }

    #[test]
    fn malformed_csv_is_typed() {
        assert!(matches!(read_posterior_csv("a,b\n", Engine::Is, &[]), Err(CsvError::Header(_))));
        assert!(read_posterior_csv("particle,log_weight\n0,abc\n", Engine::Is, &[]).is_err());
        assert!(read_scan_csv("nope\n").is_err());
    }
}
