//! Command-line orchestration for the singular-vortex laboratory.
//!
//! Exit codes: 0 = pass, 1 = operational error, 2 = scientific verdict fail.

mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "vortexlab", version, about = "2D Euler loglog-vortex experiments")]
struct Cli {
    /// Cap the worker thread count (results are identical at any count).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (also via VORTEXLAB_OUT; default ./runs).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// CI profile: n = 256, T = 0.1, r-list down to 1e-5.
    #[arg(long)]
    quick: bool,
    /// Also emit gnuplot-ready two-column data files.
    #[arg(long)]
    plot_data: bool,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    grid_half_width: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    snapshot_interval: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated probe radii, e.g. `1e-3,1e-4,1e-5`.
    #[arg(long, value_delimiter = ',')]
    r_list: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the vortex profile, the initial data, and its certificate.
    BuildData(CommonArgs),
    /// Run the transport solver and store snapshots.
    Solve(CommonArgs),
    /// Conservation experiment: norm series against an affine envelope.
    Conservation(CommonArgs),
    /// Breakdown experiment: probe statistics across the radius list.
    Breakdown(CommonArgs),
    /// Offline probe trace against a stored run directory.
    Trace {
        #[command(flatten)]
        common: CommonArgs,
        /// Run directory produced by `solve`.
        #[arg(long)]
        run_dir: PathBuf,
        /// Probe radius.
        #[arg(long)]
        r: f64,
        /// Trace horizon.
        #[arg(long)]
        t: f64,
    },
    /// Cross-method oracle suite.
    Oracles {
        #[command(flatten)]
        common: CommonArgs,
        /// Full-resolution tolerances instead of the quick profile.
        #[arg(long)]
        full: bool,
        /// Fault-injection fixture: corrupt the spectral Green's table.
        #[arg(long, hide = true)]
        corrupt_greens: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some() {
        eprintln!("note: built without the parallel feature; --threads has no effect");
    }

    let result = match cli.command {
        Command::BuildData(common) => commands::build_data(&common),
        Command::Solve(common) => commands::solve(&common),
        Command::Conservation(common) => commands::conservation(&common),
        Command::Breakdown(common) => commands::breakdown(&common),
        Command::Trace { common, run_dir, r, t } => commands::trace(&common, &run_dir, r, t),
        Command::Oracles { common, full, corrupt_greens } => {
            commands::oracles(&common, full, corrupt_greens)
        }
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
