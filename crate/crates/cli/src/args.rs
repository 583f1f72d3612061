//! Command-line grammar. Every subcommand flag is optional so that unset flags
//! fall through to the configuration file and then to the built-in defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "cshlab",
    version,
    about = "Numerical laboratory for the Chern-Simons-Higgs system in Lorenz gauge",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory (env: CSH_OUT_DIR, default ./cshlab-out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Random seed (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (env: CSH_THREADS, default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Suppress the summary on stdout.
    #[arg(short, long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve constraint-compatible data and monitor gauge and constraint residuals.
    Simulate(SimulateArgs),
    /// Verify the null-form decomposition on random Lorenz snapshots and scan the null symbols.
    NullCheck(NullCheckArgs),
    /// Measure restricted bilinear constants on dyadic block triples.
    BilinearScan(BilinearArgs),
    /// Knapp-box amplitude scans and the resonance census.
    KnappScan(KnappArgs),
    /// Structure constants and invariant residuals of su(n).
    LieInfo(LieInfoArgs),
    /// Write a gnuplot script for a CSV produced by a scan.
    PlotScript(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::NullCheck(_) => "null-check",
            Command::BilinearScan(_) => "bilinear-scan",
            Command::KnappScan(_) => "knapp-scan",
            Command::LieInfo(_) => "lie-info",
            Command::PlotScript(_) => "plot-script",
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct LieInfoArgs {
    /// Matrix size of su(n).
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct NullCheckArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Grid points per direction.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub box_length: Option<f64>,
    /// Band limit of the random snapshots.
    #[arg(long)]
    pub band: Option<usize>,
    /// Number of snapshot seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Random frequency pairs for the symbol bound.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Largest admissible relative residual.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct BilinearArgs {
    /// Dyadic frequency scales, used for all three blocks.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Option<Vec<u64>>,
    /// Dyadic modulation scales (shared by the three blocks of a triple).
    #[arg(long, value_delimiter = ',')]
    pub l_values: Option<Vec<u64>>,
    /// Sign patterns (±₀±₁±₂), e.g. `++-`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub signs: Option<Vec<String>>,
    /// Random Gaussian trials per triple.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Refine by power iteration on the restricted bilinear map.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub adversarial: Option<bool>,
    #[arg(long)]
    pub power_iterations: Option<usize>,
    /// Bound on empirical/theoretical checked over the grid.
    #[arg(long)]
    pub global_constant: Option<f64>,
    /// Scales N of the scan N₀ = L = 1, N₁ = N₂ = N (empty disables it).
    #[arg(long, value_delimiter = ',')]
    pub scaling_n: Option<Vec<u64>>,
    /// Sign pattern of the scaling scan.
    #[arg(long, allow_hyphen_values = true)]
    pub scaling_signs: Option<String>,
    #[arg(long)]
    pub scaling_power_iterations: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct KnappArgs {
    /// `second`, `third` or `both`.
    #[arg(long)]
    pub amplitude: Option<String>,
    /// Explicit window indices (otherwise derived from the λ range).
    #[arg(long, value_delimiter = ',')]
    pub k_values: Option<Vec<u64>>,
    /// Smallest target λ (default: first window).
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_decades: Option<f64>,
    /// Target number of λ points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Box constant.
    #[arg(long)]
    pub c: Option<f64>,
    /// Mass in the Klein-Gordon propagator.
    #[arg(long)]
    pub m: Option<f64>,
    /// Monte-Carlo samples per λ.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also sample |ω| per sign tuple over the supports.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub resonance: Option<bool>,
    /// λ = 2^e for these exponents in the resonance scan.
    #[arg(long, value_delimiter = ',')]
    pub resonance_exponents: Option<Vec<i32>>,
    #[arg(long)]
    pub resonance_c: Option<f64>,
    #[arg(long)]
    pub resonance_samples: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    /// Symmetry-breaking scale.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time.
    #[arg(long = "t-final")]
    pub t_final: Option<f64>,
    /// Keep every stride-th step.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Data recipe: `constraint-compatible` or `zero`.
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub gradient_amplitude: Option<f64>,
    #[arg(long)]
    pub band: Option<usize>,
    /// `minus` or `plus`.
    #[arg(long)]
    pub higgs_sign: Option<String>,
    /// `plain` or `covariant`.
    #[arg(long)]
    pub initial_current: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub nonlinear: Option<bool>,
    #[arg(long)]
    pub dealias_order: Option<usize>,
    /// Sobolev index of the monitored norms.
    #[arg(long)]
    pub monitor_s: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub snapshots: Option<bool>,
    /// Also run the Picard iteration and compare with the stepper.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub picard: Option<bool>,
    #[arg(long)]
    pub max_gauge_residual: Option<f64>,
    #[arg(long)]
    pub max_field_residual: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotArgs {
    /// CSV written by a scan.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// `knapp`, `bilinear-scaling`, `resonance` or `monitor` (default: from the file name).
    #[arg(long)]
    pub kind: Option<String>,
}
