use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epi_infer::commands::{cmd_graph, cmd_infer, cmd_scan, cmd_simulate, load_config};
use epi_infer::output::TRACES_FILE;
use epi_infer::CliError;

#[derive(Parser)]
#[command(name = "epi-infer", version, about = "Epidemic simulation, calibration and policy scans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run `io.n_runs` simulations; writes traces.jsonl and paths.csv.
    Simulate(JobArgs),
    /// Run the `inference` section; writes posterior.csv and summary.json.
    Infer(JobArgs),
    /// Run the `scan` section; writes scan.csv.
    Scan(JobArgs),
    /// Export the address-transition graph of a trace file; writes graph.dot.
    Graph(GraphArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Job config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `io.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Job config; its output directory supplies traces.jsonl unless --traces is given.
    #[arg(long, required_unless_present = "traces")]
    config: Option<PathBuf>,
    /// Trace JSONL file.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Output directory; defaults to the config's `io.out_dir`, else the trace file's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drop Uniform-family nodes and join their neighbours.
    #[arg(long)]
    omit_uniform: bool,
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let job = load_config(&a.config)?;
            cmd_simulate(&job, &a.out.unwrap_or_else(|| job.io.out_dir.clone()))
        }
        Command::Infer(a) => {
            let job = load_config(&a.config)?;
            cmd_infer(&job, &a.out.unwrap_or_else(|| job.io.out_dir.clone()))
        }
        Command::Scan(a) => {
            let job = load_config(&a.config)?;
            cmd_scan(&job, &a.out.unwrap_or_else(|| job.io.out_dir.clone()))
        }
        Command::Graph(a) => {
            let job_dir = a.config.as_deref().map(load_config).transpose()?.map(|j| j.io.out_dir);
            let traces = match (a.traces, &job_dir) {
                (Some(t), _) => t,
                (None, Some(dir)) => dir.join(TRACES_FILE),
                (None, None) => unreachable!("clap requires --config or --traces"),
            };
            let out = a.out.or(job_dir).unwrap_or_else(|| {
                traces
                    .parent()
                    .filter(|p| !p.as_os_str().is_empty())
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            cmd_graph(&traces, &out, a.omit_uniform)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(written) => {
            for path in written {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
