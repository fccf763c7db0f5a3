use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hemisphere_ot::config::ExperimentConfig;
use hemisphere_ot::run::{run, Status};

/// Run a solve, benchmark or verification experiment from a JSON config.
#[derive(Parser, Debug)]
#[command(name = "hemiot", version)]
struct Args {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `tol`.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match ExperimentConfig::from_file(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("validation error: {e}");
            return ExitCode::from(Status::ValidationError.exit_code() as u8);
        }
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol {
        cfg.tol = tol;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("validation error: --threads must be at least 1");
            return ExitCode::from(Status::ValidationError.exit_code() as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure thread pool: {e}");
        }
    }
    let outcome = run(&cfg);
    let verdicts = &outcome.report["verdicts"];
    if let Some(map) = verdicts.as_object() {
        for (name, ok) in map {
            println!("{:<40} {}", name, if ok.as_bool() == Some(true) { "pass" } else { "FAIL" });
        }
    }
    if let Some(err) = outcome.report["error"].as_str() {
        eprintln!("{err}");
    }
    println!("status: {:?} -> {}", outcome.status, outcome.out_dir.join("report.json").display());
    ExitCode::from(outcome.status.exit_code() as u8)
}
