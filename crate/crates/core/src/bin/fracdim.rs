use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracdim_core::cli::{self, Kind, CSV_SCHEMAS};

/// Dimension experiments on projected self-similar measures.
#[derive(Parser)]
#[command(name = "fracdim", version, after_help = CSV_SCHEMAS)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct Common {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Exact separation scan of a 1-D system: per-level minimal gaps and overlaps.
    Separation(Common),
    /// Entropy, Lyapunov exponent, similarity dimension and predicted dimension.
    Dims(Common),
    /// Moment equation solutions tau(q) and alpha_min.
    Tau(Common),
    /// Blocked coarse-grained Bernoulli weights and the tau lower-bound check.
    Coarse(Common),
    /// Draw samples of the projected measure.
    Sample(Common),
    /// Monte Carlo dimension estimates of the projected measure.
    Estimate(Common),
    /// Estimates for a convolution of two projected measures.
    Convolve(Common),
    /// Estimates for linear projections of a planar self-similar measure.
    Project(Common),
    /// Estimates for a diagonal self-affine measure.
    Affine(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (kind, common) = match args.command {
        Command::Separation(c) => (Kind::Separation, c),
        Command::Dims(c) => (Kind::Dims, c),
        Command::Tau(c) => (Kind::Tau, c),
        Command::Coarse(c) => (Kind::Coarse, c),
        Command::Sample(c) => (Kind::Sample, c),
        Command::Estimate(c) => (Kind::Estimate, c),
        Command::Convolve(c) => (Kind::Convolve, c),
        Command::Project(c) => (Kind::Project, c),
        Command::Affine(c) => (Kind::Affine, c),
    };
    match cli::run(kind, &common.config, common.out.as_deref()) {
        Ok(dir) => {
            println!("{kind}: wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
