//! `cocyclelab <experiment> [--config FILE] [--seed N] [--out DIR] ...`
//!
//! Exit status: 0 when every verdict passes, 1 when one fails, 2 for
//! configuration and precondition errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cocyclelab::experiments::{self, Experiment, ExperimentConfig, ExperimentReport, OutputFormat, Overrides};

#[derive(Parser)]
#[command(
    name = "cocyclelab",
    version,
    about = "Lyapunov exponents, holonomies and fiber measures of symplectic cocycles over a suspension flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov spectrum, pairing residuals and the periodic-leaf oracle
    Spectrum(Flags),
    /// Bunching certificates across the diagonal family
    Bunching(Flags),
    /// Holonomy equivariance, composition, Hölder and truncation checks
    Holonomy(Flags),
    /// Restricted exponents of rotated cocycles on a periodic leaf
    ThetaScan(Flags),
    /// Rotation, homoclinic bump and the su-defect before and after
    SuBreaking(Flags),
    /// Random perturbations around the su-breaking output
    Openness(Flags),
}

#[derive(Args)]
struct Flags {
    /// TOML file with [model], [cocycle] and [experiment] sections
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out/<experiment>)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Format of the series files; report.json is always written
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Json,
    Csv,
}

impl Command {
    fn split(self) -> (Experiment, Flags) {
        match self {
            Command::Spectrum(f) => (Experiment::Spectrum, f),
            Command::Bunching(f) => (Experiment::Bunching, f),
            Command::Holonomy(f) => (Experiment::Holonomy, f),
            Command::ThetaScan(f) => (Experiment::ThetaScan, f),
            Command::SuBreaking(f) => (Experiment::SuBreaking, f),
            Command::Openness(f) => (Experiment::Openness, f),
        }
    }
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig, String> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::from_toml(""),
    }
    .map_err(|e| e.to_string())?;
    cfg.apply(&Overrides {
        seed: flags.seed,
        out: flags.out.clone(),
        n_iter: flags.n_iter,
        n_samples: flags.n_samples,
        tol: flags.tol,
        format: flags.format.map(|f| match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }),
    })
    .map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_outputs(report: &ExperimentReport, dir: &Path, format: OutputFormat, seconds: f64) -> Result<(), String> {
    let io = |e: std::io::Error| format!("{}: {e}", dir.display());
    fs::create_dir_all(dir).map_err(io)?;
    let json = report.to_json().map_err(|e| e.to_string())?;
    fs::write(dir.join("report.json"), json + "\n").map_err(io)?;
    // kept apart from the report so that the report is reproducible
    let timing = serde_json::json!({ "experiment": report.experiment, "wall_seconds": seconds });
    fs::write(dir.join("timing.json"), format!("{timing}\n")).map_err(io)?;
    for s in &report.series {
        match format {
            OutputFormat::Csv => {
                let path = dir.join(format!("{}.csv", s.name));
                let mut w = csv::Writer::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                w.write_record(&s.columns).map_err(|e| e.to_string())?;
                for row in &s.rows {
                    w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| e.to_string())?;
                }
                w.flush().map_err(io)?;
            }
            OutputFormat::Json => {
                let text = serde_json::to_string_pretty(s).map_err(|e| e.to_string())?;
                fs::write(dir.join(format!("{}.json", s.name)), text + "\n").map_err(io)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = cli.command.split();
    let cfg = match load_config(&flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let report = match experiments::run(experiment, &cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {} failed: {e}", experiment.name());
            return ExitCode::from(2);
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let dir = cfg
        .experiment
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
    if let Err(e) = write_outputs(&report, &dir, cfg.experiment.format, seconds) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for v in &report.verdicts {
        let rel = serde_json::to_value(v.relation).unwrap_or_default();
        println!(
            "{} {}: {:e} {} {:e}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.value,
            rel.as_str().unwrap_or("?"),
            v.threshold
        );
    }
    println!("{} ({}) -> {} in {seconds:.1}s", report.experiment, report.id, dir.display());
    if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
