//! The four subcommands. Each reads a parsed job, runs it and writes its
//! outputs into the output directory.

use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use epi_infer_core::bridge::{accept_one, BridgedModel, ControllerSettings};
use epi_infer_core::context::{derive_seed, execute_with};
use epi_infer_core::graph::TraceGraph;
use epi_infer_core::inference::{
    posterior_to_csv, run_abc, run_conditioned_event, run_is, run_lmh, scan_policies, scan_to_csv, summarize,
    AbcOptions, LatentSource, LmhOptions, PolicyModel, Posterior, PosteriorSummary,
};
use epi_infer_core::models::{ModelConfig, ObservationSeries, OutcomeConstraint};
use epi_infer_core::trace::{read_jsonl, write_jsonl};
use epi_infer_core::{run_model, ExecutionMode, Model, Trace};
use serde::{Deserialize, Serialize};

use crate::config::{BridgeSection, InferenceSection, JobConfig, JobSource, LatentSourceKind};
use crate::output::{self, write_atomic};
use crate::CliError;

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferSummary {
    #[serde(flatten)]
    pub posterior: PosteriorSummary,
    pub runtime_seconds: f64,
    pub seed: u64,
}

/// Reads and validates a job config file.
pub fn load_config(path: &Path) -> Result<JobConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("(file)", format!("{}: {e}", path.display()), None))?;
    JobConfig::parse(&text)
}

fn connect(bridge: &BridgeSection) -> Result<BridgedModel<TcpStream>, CliError> {
    let settings = ControllerSettings {
        timeout: Duration::from_secs_f64(bridge.timeout_secs),
        max_frame_bytes: bridge.max_frame_bytes,
    };
    eprintln!("waiting for a simulator on {}", bridge.listen);
    let mut session =
        accept_one(&bridge.listen, settings).map_err(|e| CliError::io(format!("listening on {}", bridge.listen), e))?;
    session.handshake()?;
    let model = BridgedModel::new(session, bridge.config.clone());
    Ok(match &bridge.latent_labels {
        Some(labels) => model.with_latent_labels(Some(labels.clone())),
        None => model,
    })
}

/// Runs `io.n_runs` Record-mode simulations. Writes `traces.jsonl`, plus
/// `paths.csv` for the built-in epidemic models.
pub fn cmd_simulate(job: &JobConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let seeds: Vec<u64> = (0..job.io.n_runs as u64).map(|r| derive_seed(job.io.seed, r)).collect();
    let mut traces: Vec<Trace> = Vec::with_capacity(seeds.len());
    let mut paths = Vec::new();
    match &job.source {
        JobSource::Model(model) => {
            for &seed in &seeds {
                let run = execute_with(ExecutionMode::Record, seed, |ctx| model.simulate(ctx))?;
                traces.push(run.trace);
                paths.extend(run.result);
            }
        }
        JobSource::Bridge(b) => {
            let model = connect(b)?;
            for &seed in &seeds {
                traces.push(run_model(&model, ExecutionMode::Record, seed)?);
            }
        }
    }
    let mut written = vec![write_atomic(out_dir, output::TRACES_FILE, &write_jsonl(&traces))?];
    if !paths.is_empty() {
        written.push(write_atomic(out_dir, output::PATHS_FILE, &output::paths_to_csv(&paths))?);
    }
    Ok(written)
}

fn run_engine<M: Model>(
    model: &M,
    section: &InferenceSection,
    data: Option<&ObservationSeries>,
    default_capacity: Option<u64>,
    seed: u64,
) -> Result<Posterior, CliError> {
    Ok(match *section {
        InferenceSection::Is { n_particles } => run_is(model, n_particles, seed)?,
        InferenceSection::Lmh { n_steps, burn_in } => run_lmh(model, n_steps, burn_in, seed, LmhOptions::default())?,
        InferenceSection::Abc { n_particles, tolerance } => {
            let data = data.filter(|d| !d.is_empty()).ok_or_else(|| {
                CliError::config("data", "ABC needs observed data (`data`, or `bridge.config.data`)", None)
            })?;
            run_abc(model, data, n_particles, tolerance, seed, AbcOptions::default())?
        }
        InferenceSection::Event { n_particles, icu_capacity } => {
            let icu_capacity = icu_capacity.or(default_capacity).ok_or_else(|| {
                CliError::config(
                    "inference.icu_capacity",
                    "event conditioning needs an ICU capacity (`icu.capacity` or `inference.icu_capacity`)",
                    None,
                )
            })?;
            run_conditioned_event(model, &OutcomeConstraint { icu_capacity }, n_particles, seed)?
        }
    })
}

fn require_inference(job: &JobConfig) -> Result<&InferenceSection, CliError> {
    job.inference
        .as_ref()
        .ok_or_else(|| CliError::config("inference", "missing section", None))
}

/// Runs the configured engine on the job's model.
pub fn posterior_for(job: &JobConfig, section: &InferenceSection) -> Result<Posterior, CliError> {
    match &job.source {
        JobSource::Model(model) => run_engine(
            model,
            section,
            model.data(),
            model.constraint().map(|c| c.icu_capacity),
            job.io.seed,
        ),
        JobSource::Bridge(b) => {
            let data = b.data()?;
            let model = connect(b)?;
            run_engine(&model, section, data.as_ref(), None, job.io.seed)
        }
    }
}

/// Writes `posterior.csv` and `summary.json`.
pub fn cmd_infer(job: &JobConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let section = require_inference(job)?;
    let started = Instant::now();
    let posterior = posterior_for(job, section)?;
    let summary = InferSummary {
        posterior: summarize(&posterior)?,
        runtime_seconds: started.elapsed().as_secs_f64(),
        seed: job.io.seed,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serialises");
    json.push('\n');
    Ok(vec![
        write_atomic(out_dir, output::POSTERIOR_FILE, &posterior_to_csv(&posterior))?,
        write_atomic(out_dir, output::SUMMARY_FILE, &json)?,
    ])
}

fn scan_with<M: PolicyModel>(
    model: &M,
    job: &JobConfig,
    posterior: Option<&Posterior>,
    capacity: u64,
) -> Result<String, CliError> {
    let scan = job.scan.as_ref().expect("checked by caller");
    let grid = scan.grid()?;
    let source = match posterior {
        Some(p) => LatentSource::Posterior(p),
        None => LatentSource::Prior,
    };
    let constraint = OutcomeConstraint { icu_capacity: capacity };
    let result = scan_policies(model, &grid, source, scan.m_rollouts, &constraint, job.io.seed)?;
    Ok(scan_to_csv(&result))
}

/// Writes `scan.csv`, sorted best policy first.
pub fn cmd_scan(job: &JobConfig, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let scan = job
        .scan
        .as_ref()
        .ok_or_else(|| CliError::config("scan", "missing section", None))?;
    scan.grid()?;
    if let JobSource::Model(model) = &job.source {
        if model.epi().is_none() {
            return Err(CliError::config(
                "model",
                format!("`{}` has no intervention policy to scan", model.kind()),
                None,
            ));
        }
    }
    let default_capacity = match &job.source {
        JobSource::Model(m) => m.constraint().map(|c| c.icu_capacity),
        JobSource::Bridge(_) => None,
    };
    let capacity = scan.icu_capacity.or(default_capacity).ok_or_else(|| {
        CliError::config(
            "scan.icu_capacity",
            "the scan needs an ICU capacity (`icu.capacity` or `scan.icu_capacity`)",
            None,
        )
    })?;
    let csv = match &job.source {
        JobSource::Model(model) => {
            let posterior = match scan.latent_source {
                LatentSourceKind::Prior => None,
                LatentSourceKind::Posterior => Some(posterior_for(job, require_inference(job)?)?),
            };
            scan_with::<ModelConfig>(model, job, posterior.as_ref(), capacity)?
        }
        JobSource::Bridge(b) => {
            let model = connect(b)?;
            let posterior = match scan.latent_source {
                LatentSourceKind::Prior => None,
                LatentSourceKind::Posterior => {
                    let data = b.data()?;
                    Some(run_engine(&model, require_inference(job)?, data.as_ref(), Some(capacity), job.io.seed)?)
                }
            };
            scan_with(&model, job, posterior.as_ref(), capacity)?
        }
    };
    Ok(vec![write_atomic(out_dir, output::SCAN_FILE, &csv)?])
}

/// Reads a trace JSONL file and writes `graph.dot`.
pub fn cmd_graph(traces: &Path, out_dir: &Path, omit_uniform: bool) -> Result<Vec<PathBuf>, CliError> {
    let text = std::fs::read_to_string(traces)
        .map_err(|e| CliError::Input(format!("reading {}: {e}", traces.display())))?;
    let traces_read = read_jsonl(&text)
        .map_err(|(line, e)| CliError::Input(format!("{} line {line}: {e}", traces.display())))?;
    if traces_read.is_empty() {
        return Err(CliError::Input(format!("{} contains no traces", traces.display())));
    }
    let graph = TraceGraph::from_traces(&traces_read, omit_uniform);
    Ok(vec![write_atomic(out_dir, output::GRAPH_FILE, &graph.to_dot())?])
}
