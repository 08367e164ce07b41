//! `helmwave`: run Helmholtz Schwarz experiments and write CSV.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a solve did not
//! converge.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{List, SpecList};

#[derive(Parser, Debug)]
#[command(
    name = "helmwave",
    version,
    about = "Hierarchical Schwarz solvers for the Helmholtz equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and append a result row.
    Solve(ProblemArgs),
    /// Singular values of the interface maps of the first-level subdomains.
    Spectrum {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Leading values by rsvd instead of a full SVD.
        #[arg(long)]
        rank: Option<usize>,
    },
    /// 1D interface basis dump and one-step check.
    Oned(OnedArgs),
    /// Grid of solves, one row per cell.
    Sweep(SweepArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct ProblemArgs {
    /// `key = value` file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// free | layered
    #[arg(long)]
    pub problem: Option<String>,
    /// Wavenumber (free) or frequency (layered); default keeps k_max h = 1.
    #[arg(long, visible_alias = "omega")]
    pub k: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub nlayers: Option<usize>,
    /// Speed of the bottom layer: c1 (= 1) or c0.
    #[arg(long)]
    pub first_layer: Option<String>,
    /// Splits per level, e.g. `2x2,2x2`.
    #[arg(long)]
    pub levels: Option<String>,
    /// Elements per leaf subdomain in each direction.
    #[arg(long)]
    pub n: Option<usize>,
    /// Coarse modes per subdomain for the finest levels; coarser levels double.
    #[arg(long)]
    pub nc: Option<List<usize>>,
    /// Schwarz steps per level (one value applies to all).
    #[arg(long)]
    pub ni: Option<List<usize>>,
    /// Overlap in elements on each side.
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long)]
    pub oversampling: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OnedArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Elements on (0, 1).
    #[arg(long)]
    pub n: Option<usize>,
    /// Wavenumber; defaults to n / 4.
    #[arg(long)]
    pub k: Option<f64>,
    /// Bisection depth of the basis dump.
    #[arg(long)]
    pub bisections: Option<usize>,
    #[arg(long)]
    pub overlap: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Basis CSV (stdout when absent).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// table1 | table2 | table3 | table3-c10 | table3-c10-l64 | table4
    #[arg(long)]
    pub preset: Option<String>,
    /// Values of n.
    #[arg(long)]
    pub ns: Option<List<usize>>,
    /// Preset columns: m for flat tables, levels for hierarchical ones.
    #[arg(long)]
    pub cols: Option<List<usize>>,
    /// Decompositions without a preset, separated by ';'.
    #[arg(long)]
    pub grid_levels: Option<SpecList>,
    /// Finest-level coarse counts without a preset; one cell each.
    #[arg(long)]
    pub ncs: Option<List<usize>>,
    /// Seeds per cell; the row with the median count is written.
    #[arg(long)]
    pub seeds: Option<List<u64>>,
    /// Write every seed's row instead of the median.
    #[arg(long)]
    pub all_seeds: bool,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Solve(args) => commands::solve(&args),
        Command::Spectrum { problem, rank } => commands::spectrum(&problem, rank),
        Command::Oned(args) => commands::oned(&args),
        Command::Sweep(args) => commands::sweep(&args),
    };
    match result {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NotConverged) => ExitCode::from(2),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
