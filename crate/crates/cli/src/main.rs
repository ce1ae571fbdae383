use std::path::PathBuf;
use std::process::ExitCode;

use biggins_cli::{load, run, ExitStatus, Experiment, Overrides};
use clap::Parser;

/// Simulation experiments for the Biggins martingale of a branching random walk.
#[derive(Debug, Parser)]
#[command(name = "biggins", version)]
struct Args {
    /// conditions, moments, simulate, clt-cov, clt-mixture, clt-conditional,
    /// clt-log, lil, renewal, tail-integral or berry-esseen
    experiment: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "BIGGINS_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "BIGGINS_WORKERS")]
    workers: Option<usize>,
    /// Directory for the JSON report and raw CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fail(status: ExitStatus, msg: &str) -> ExitCode {
    eprintln!("biggins: {msg}");
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let experiment: Experiment = match args.experiment.parse() {
        Ok(e) => e,
        Err(e) => return fail(ExitStatus::ConfigError, &e),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(ExitStatus::ConfigError, &format!("{}: {e}", args.config.display())),
    };
    let overrides = Overrides {
        seed: args.seed,
        workers: args.workers,
        out: args.out.map(|p| p.to_string_lossy().into_owned()),
    };
    let cfg = match load(&text, experiment, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(ExitStatus::ConfigError, &format!("{}: {e}", args.config.display())),
    };
    let report = run(&cfg);
    println!("{}", report.to_json());
    let status = ExitStatus::of(&report);
    if let Some(e) = &report.error {
        eprintln!("biggins: {e}");
    } else {
        for t in report.tests.iter().filter(|t| !t.pass) {
            eprintln!("biggins: FAIL {}: {} (target {}, tolerance {})", t.name, t.statistic, t.target, t.tolerance);
        }
    }
    ExitCode::from(status.code() as u8)
}
