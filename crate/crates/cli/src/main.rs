//! `chainwave`: one subcommand per observable family (dispersion,
//! transmission, time evolution, disorder ensembles).
//!
//! Exit codes: 0 success; 1 numerical failure; 2 usage error; 3 invalid
//! configuration; 4 I/O failure; 5 a self-test or verification check failed.

mod commands;
mod verify;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use chainwave::io::OutputFormat;
use chainwave::DisorderShape;

#[derive(Debug, Parser)]
#[command(name = "chainwave", version, about = "Collective dynamics of a Raman-driven atomic chain")]
pub struct Cli {
    /// Chain configuration (TOML); defaults to the 205-atom reference chain.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for disorder draws (overrides the config or ensemble seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Override the mixing angle θ of the configuration (radians).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mixing_angle: Option<f64>,
    /// Override the number of atoms of the configuration.
    #[arg(long, global = true)]
    pub n_atoms: Option<usize>,
    /// Log progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Uniform,
    Gaussian,
}

impl From<Shape> for DisorderShape {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Uniform => DisorderShape::Uniform,
            Shape::Gaussian => DisorderShape::Gaussian,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infinite-chain Bloch bands and the transparency window.
    Dispersion(DispersionArgs),
    /// End-to-end transmittance spectra of the finite chain.
    Transmit(TransmitArgs),
    /// Spin-wave evolution: populations, momentum and far-field snapshots.
    Evolve(EvolveArgs),
    /// Paired disorder ensembles of two drive configurations.
    Disorder(DisorderArgs),
    /// Repeat the run recorded in a manifest.
    Replay(ReplayArgs),
    /// Run the invariant checks.
    #[command(hide = true)]
    Verify,
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[arg(long, default_value_t = 1024)]
    pub k_points: usize,
    /// Check k → −k symmetry (decoupled polarizations) and guided-mode
    /// losslessness; exit 5 on failure.
    #[arg(long)]
    pub self_test: bool,
}

#[derive(Debug, Args)]
pub struct DisorderFlags {
    /// On-site disorder variance W (Γ₀²).
    #[arg(long, default_value_t = 0.0)]
    pub disorder_w: f64,
    #[arg(long, value_enum, default_value_t = Shape::Uniform)]
    pub disorder_shape: Shape,
}

#[derive(Debug, Args)]
pub struct TransmitArgs {
    /// Lower energy (Γ₀); defaults to the transparency window padded by Γ₀.
    #[arg(long, allow_hyphen_values = true)]
    pub e_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub e_max: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub n_points: usize,
    /// Source site of the forward direction.
    #[arg(long, default_value_t = 0)]
    pub from: usize,
    /// Receiving site of the forward direction; defaults to the last site.
    #[arg(long)]
    pub to: Option<usize>,
    /// Boxcar width (Γ₀) of the smoothed columns.
    #[arg(long, default_value_t = chainwave::scattering::DEFAULT_SMOOTHING)]
    pub smoothing: f64,
    #[command(flatten)]
    pub disorder: DisorderFlags,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long, default_value_t = 100.0)]
    pub center_site: f64,
    /// Δx² in units of a².
    #[arg(long, default_value_t = 60.0)]
    pub width_sq: f64,
    /// Carrier k in units of 1/a.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub wavevector: f64,
    #[arg(long, default_value_t = 0.2)]
    pub excited_fraction: f64,
    /// Snapshot times (1/Γ₀), comma separated; defaults to the three bounce
    /// times derived from the group velocity.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Points per side of the far-field x–z map.
    #[arg(long, default_value_t = 41)]
    pub grid_points: usize,
    #[command(flatten)]
    pub disorder: DisorderFlags,
}

#[derive(Debug, Args)]
pub struct DisorderArgs {
    /// Ensemble specification (TOML); defaults to the reference sweep.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Mixing angle of the second configuration; defaults to π/4 when the
    /// base chain is reciprocal and to 0 otherwise.
    #[arg(long, allow_hyphen_values = true)]
    pub pair_theta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .format_timestamp(None)
        .init();
    let argv: Vec<String> = std::env::args().skip(1).collect();
    match commands::run(cli, argv, None) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
