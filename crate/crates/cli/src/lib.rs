//! Command-line driver: argument definitions and subcommand implementations.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use wavescream::nullsim::{ThresholdRule, DEFAULT_SIMULATIONS};
use wavescream::screening::CoefficientKind;

mod commands;
pub mod plot;
mod screen;

pub use commands::{run_fisher, run_nullsim, run_plot, run_power};
pub use screen::{run_screen, ScreenSummary};

/// Genome-wide convention: 0.05 spread over about 6000 windows.
pub const DEFAULT_SIGNIFICANCE: f64 = 0.05 / 6000.0;

/// Bad invocation or missing input; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(UsageError(format!("{what} file not found: {}", path.display())).into());
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "wavescream", version, about = "Regional association screening with Haar wavelet Bayes factors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Screen every window of a cohort.
    ///
    /// Writes to the output directory:
    ///   results.tsv   chrom start end kind n_snps depth lambda_hat log_lambda_hat
    ///                 pi_0..pi_D p_value
    ///   summary.txt   λ₁, null tail fits and the loci passing the threshold
    ///   bf/*.tsv      per-locus `# chrom= start= end= kind=` line, then
    ///                 scale location bf posterior_gamma
    #[command(verbatim_doc_comment)]
    Screen(ScreenArgs),
    /// Simulate (or load from cache) a null sample and fit its tail.
    ///
    /// Cache file: `# lambda1= depth= simulations= seed=` lines, a
    /// `lambda_hat` header, then the sorted sample.
    #[command(verbatim_doc_comment)]
    Nullsim(NullsimArgs),
    /// Run a power experiment from a `key = value` config file.
    ///
    /// Writes power_table.tsv (direction components replicates power_ws_c
    /// power_ws_d power_gwas_lm) and power_replicates.tsv (replicate direction
    /// components p_ws_c p_ws_d p_gwas_lm_min p_gwas_lm_window).
    #[command(verbatim_doc_comment)]
    Power(PowerArgs),
    /// Render a per-locus Bayes-factor file as an SVG pyramid.
    Plot(PlotArgs),
    /// Combine independent p-values with Fisher's method.
    Fisher(FisherArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    C,
    D,
    Both,
}

impl KindArg {
    pub fn kinds(self) -> Vec<CoefficientKind> {
        match self {
            KindArg::C => vec![CoefficientKind::C],
            KindArg::D => vec![CoefficientKind::D],
            KindArg::Both => vec![CoefficientKind::C, CoefficientKind::D],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetailArg {
    All,
    Significant,
    None,
}

fn parse_rule(s: &str) -> Result<ThresholdRule, String> {
    s.parse().map_err(|e: wavescream::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct NullArgs {
    /// Null simulations per depth.
    #[arg(long = "m", default_value_t = DEFAULT_SIMULATIONS)]
    pub m: usize,
    /// Tail threshold: `quantile`, `quantile:<p>` or `van-kerm`.
    #[arg(long, default_value = "quantile:0.99", value_parser = parse_rule)]
    pub threshold_rule: ThresholdRule,
    /// Round λ₁ down, rather than to nearest, at 1e-7 resolution.
    #[arg(long)]
    pub round_lambda1_down: bool,
    /// Null-sample cache directory [default: <output-directory>/null_cache].
    #[arg(long, env = "WAVESCREAM_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScreenArgs {
    /// Genotype TSV: `chrom pos id iq <sample ids...>`.
    #[arg(long)]
    pub genotypes: PathBuf,
    /// One phenotype value per line, in genotype column order.
    #[arg(long)]
    pub phenotype: PathBuf,
    /// Tab-separated covariates, one row per individual.
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    pub window_bp: u64,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_gap_bp: u64,
    #[arg(long, default_value_t = 10.0)]
    pub min_snps_per_coeff: f64,
    #[arg(long, default_value_t = wavescream::bayes::DEFAULT_SIGMA_B)]
    pub sigma_b: f64,
    #[arg(long, value_enum, default_value_t = KindArg::Both)]
    pub coefficient_kind: KindArg,
    #[arg(long)]
    pub depth_cap: Option<u32>,
    #[arg(long, default_value_t = wavescream::data::DEFAULT_MIN_IMPUTATION_QUALITY)]
    pub min_imputation_quality: f64,
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
    pub significance_threshold: f64,
    #[arg(long)]
    pub output_directory: PathBuf,
    /// Sort genotype rows by position instead of rejecting unsorted input.
    #[arg(long)]
    pub sort_input: bool,
    /// Which loci get a Bayes-factor detail file.
    #[arg(long, value_enum, default_value_t = DetailArg::Significant)]
    pub bf_detail: DetailArg,
}

#[derive(Debug, Clone, Args)]
pub struct NullsimArgs {
    /// λ₁ of the design; alternatively give --phenotype.
    #[arg(long, required_unless_present = "phenotype")]
    pub lambda1: Option<f64>,
    #[arg(long, conflicts_with = "lambda1")]
    pub phenotype: Option<PathBuf>,
    #[arg(long, requires = "phenotype")]
    pub covariates: Option<PathBuf>,
    #[arg(long, default_value_t = wavescream::bayes::DEFAULT_SIGMA_B)]
    pub sigma_b: f64,
    #[arg(long)]
    pub depth: u32,
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub output_directory: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    /// `key = value` experiment settings.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub output_directory: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    /// Bayes-factor detail TSV written by `screen`.
    #[arg(long)]
    pub bf_detail: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FisherArgs {
    /// p-values to combine.
    #[arg(required_unless_present = "input")]
    pub p_values: Vec<f64>,
    /// File with one p-value per line.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

/// Run inside a pool of `threads` workers (0 = all cores).
pub(crate) fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    Ok(pool.install(f))
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Screen(a) => run_screen(&a).map(|s| print!("{}", s.text)),
        Command::Nullsim(a) => run_nullsim(&a),
        Command::Power(a) => run_power(&a),
        Command::Plot(a) => run_plot(&a),
        Command::Fisher(a) => run_fisher(&a),
    }
}
