use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shs6v_cli::{run, write_report, ExperimentConfig, Format, Kind};

#[derive(Parser)]
#[command(name = "shs6v", version, about = "Stochastic higher spin six vertex model laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact rational checks of the weight and four-point identities.
    IdentityCheck(Common),
    /// Full vertex weight table.
    WeightsDump(Common),
    /// Remainder order of the conditional second moment.
    FourPointScan(Common),
    /// Riemann function values and oracle deltas.
    Riemann(Common),
    /// One height function sample.
    Sample(Common),
    /// Law of large numbers convergence study.
    Lln(Common),
    /// Fluctuation covariance study.
    Clt(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica parallelism.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.command {
        Command::IdentityCheck(c) => (Kind::IdentityCheck, c),
        Command::WeightsDump(c) => (Kind::WeightsDump, c),
        Command::FourPointScan(c) => (Kind::FourPointScan, c),
        Command::Riemann(c) => (Kind::Riemann, c),
        Command::Sample(c) => (Kind::Sample, c),
        Command::Lln(c) => (Kind::Lln, c),
        Command::Clt(c) => (Kind::Clt, c),
    };
    match execute(kind, &common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(kind: Kind, common: &Common) -> Result<bool, Box<dyn std::error::Error>> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    let report = run(kind, &cfg)?;
    let written = write_report(&report, &cfg, &common.out, common.format)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(report.passed())
}
