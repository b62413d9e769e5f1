use std::path::PathBuf;
use std::process::ExitCode;

use circle_rpf_cli::{Pipeline, RunConfig, RunOptions, Stage};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "circle-rpf", version, about = "Transfer-operator pipeline for intermittent circle maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compatibility check of the moduli and expansion radii
    Compat(Args),
    /// Eigenfunction modulus table
    Omega(Args),
    /// Eigenvalue, eigenfunction, eigenmeasure and invariant measure
    Rpf(Args),
    /// Pressure, entropy and the variational probe (needs `rpf`)
    Thermo(Args),
    /// Gibbs ratios on dynamic balls (needs `compat` and `rpf`)
    Gibbs(Args),
    /// Every stage in order
    All(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory [default: config `out`, else ./out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution, overriding the config
    #[arg(long)]
    grid: Option<usize>,
    /// RNG seed, overriding the config [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Also write plot_*.csv tables
    #[arg(long)]
    plot_data: bool,
}

fn run(stages: &[Stage], args: Args) -> circle_rpf_cli::Result<i32> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    let opts = RunOptions {
        out: args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: args.seed.or(cfg.seed).unwrap_or(42),
        plot_data: args.plot_data,
    };
    let summary = Pipeline::new(cfg, opts)?.run(stages)?;
    for r in &summary.stages {
        match &r.status {
            circle_rpf_cli::Status::Passed => eprintln!("{}: passed", r.stage),
            circle_rpf_cli::Status::PropertyFailed(why) => eprintln!("{}: property check failed: {why}", r.stage),
            circle_rpf_cli::Status::Skipped(why) => eprintln!("{}: skipped: {why}", r.stage),
        }
    }
    Ok(summary.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stages, args): (&[Stage], Args) = match cli.command {
        Command::Compat(a) => (&[Stage::Compat], a),
        Command::Omega(a) => (&[Stage::Omega], a),
        Command::Rpf(a) => (&[Stage::Rpf], a),
        Command::Thermo(a) => (&[Stage::Thermo], a),
        Command::Gibbs(a) => (&[Stage::Gibbs], a),
        Command::All(a) => (&Stage::ALL, a),
    };
    match run(stages, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
