//! `sabre` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input or arguments, 3 filesystem errors.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sabre::SabreError;

#[derive(Parser)]
#[command(name = "sabre", version, about = "Seriation of noisy permuted Robinson matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a signal, a latent order and an observation.
    Generate(GenerateArgs),
    /// Estimate the order of an observation matrix.
    Seriate(SeriateArgs),
    /// Compare an estimated order with the truth.
    Evaluate(EvaluateArgs),
    /// Run a seeded experiment manifest.
    Experiment(ExperimentArgs),
    /// Test a signal matrix for class membership.
    Check(CheckArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    /// f_alpha, vanishing, jump or plateau.
    #[arg(long, default_value = "f_alpha")]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    /// Slope of f_alpha and jump.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Jump height.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Lag of the jump (defaults to n/4).
    #[arg(long)]
    pub l0: Option<usize>,
    /// Plateau length.
    #[arg(long, default_value_t = 2)]
    pub c: usize,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    /// gaussian, rademacher or bernoulli-graph.
    #[arg(long, default_value = "gaussian")]
    pub noise: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Spread of an approximate latent order; 0 draws an exact one.
    #[arg(long, default_value_t = 0)]
    pub zeta: usize,
    /// Skip writing F.csv.
    #[arg(long)]
    pub no_signal: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SeriateArgs {
    /// Observation matrix (CSV, no header).
    #[arg(long)]
    pub input: PathBuf,
    /// Noise level used by the comparison tests.
    #[arg(long)]
    pub sigma: f64,
    /// theoretical, practical, approx, calibrated, ideal-test or manual.
    #[arg(long, default_value = "calibrated")]
    pub tuning: String,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Calibrated constants `c1,c2,c3,c4`.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub constants: Option<Vec<f64>>,
    /// Explicit thresholds `d1,d2,d3,d4`.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    pub thresholds: Option<Vec<f64>>,
    /// Spread used by the approx preset.
    #[arg(long, default_value_t = 0)]
    pub zeta: usize,
    /// tripartition or leave-one-out.
    #[arg(long, default_value = "tripartition")]
    pub mode: String,
    /// or, and.
    #[arg(long, default_value = "or")]
    pub edge_rule: String,
    /// Seed of the tripartition.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run leave-one-out above the size cap.
    #[arg(long)]
    pub allow_large_leave_one_out: bool,
    /// Write unrounded scores instead of integer positions.
    #[arg(long)]
    pub raw: bool,
    /// Also write the final comparison matrix as H.csv.
    #[arg(long)]
    pub write_h: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Estimated positions or scores, one per line.
    #[arg(long)]
    pub est: PathBuf,
    /// True positions, one per line.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "l_max,l_kendall,l_one")]
    pub losses: Vec<String>,
    /// Signal matrix, needed for the Frobenius loss.
    #[arg(long)]
    pub matrix_f: Option<PathBuf>,
    /// Write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory; overrides the manifest's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// robinson, bl or al.
    #[arg(long)]
    pub class: String,
    /// strict or weak (robinson only).
    #[arg(long, default_value = "weak")]
    pub mode: String,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    pub r: f64,
    #[arg(long)]
    pub r_prime: Option<f64>,
    /// Fit the class constants by brute force before checking.
    #[arg(long)]
    pub fit: bool,
    /// Latent positions to read the average-Lipschitz conditions through.
    #[arg(long)]
    pub pi: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Sabre(#[from] SabreError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Sabre(e) if e.is_io() => 3,
            _ => 2,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SABRE_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Usage(format!("SABRE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Seriate(a) => commands::seriate(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Experiment(a) => commands::experiment(&a),
        Command::Check(a) => commands::check(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
