use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perturb_cli::{parse_config_str, run_experiment, ExperimentConfig, Kind, RunOptions};

#[derive(Parser)]
#[command(name = "perturb", version, about = "Run perturbation-bound experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probit data-augmentation Gibbs: exact and approximate kernels, drift check
    Probit(Common),
    /// Minibatch Metropolis for logistic regression: acceptance error against Mahalanobis distance
    LogisticMinibatch(Common),
    /// Gaussian process covariance parameter on a bounded interval with a discretized proposal
    GpBounded(Common),
    /// Preconditioned Crank-Nicolson with low-rank and discretized approximation
    Pcn(Common),
    /// Every bound against exact finite-chain quantities
    OracleAudit(Common),
    /// Evaluate one closed-form bound
    BoundsCalculator(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory [default: results/<command>]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Full-size minibatch experiment (N = 100,000)
    #[arg(long)]
    offline_scale: bool,
}

fn load(kind: Kind, c: &Common) -> Result<ExperimentConfig, String> {
    match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: cannot read config: {e}", path.display()))?;
            parse_config_str(&text, &path.display().to_string(), Some(kind), c.seed).map_err(|e| e.to_string())
        }
        None => c
            .seed
            .map(|s| ExperimentConfig::defaults(kind, s))
            .ok_or_else(|| "seed required for reproducibility: pass --seed or --config".to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (kind, common) = match &cli.command {
        Command::Probit(c) => (Kind::Probit, c),
        Command::LogisticMinibatch(c) => (Kind::LogisticMinibatch, c),
        Command::GpBounded(c) => (Kind::GpBounded, c),
        Command::Pcn(c) => (Kind::Pcn, c),
        Command::OracleAudit(c) => (Kind::OracleAudit, c),
        Command::BoundsCalculator(c) => (Kind::BoundsCalculator, c),
    };
    let cfg = match load(kind, common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("results").join(kind.name()));
    let artifacts = match run_experiment(&cfg, &RunOptions { offline_scale: common.offline_scale }) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{kind}: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if let Err(e) = artifacts.write_to(&out) {
        eprintln!("{kind}: runtime error: cannot write {}: {e}", out.display());
        return ExitCode::from(2);
    }
    for line in &artifacts.summary {
        println!("{line}");
    }
    let names: Vec<&str> = artifacts.files.iter().map(|(n, _)| n.as_str()).collect();
    println!("wrote {} to {}", names.join(", "), out.display());
    if artifacts.audit_failures > 0 {
        eprintln!("{kind}: {} audit failures", artifacts.audit_failures);
        return ExitCode::from(3);
    }
    ExitCode::SUCCESS
}
