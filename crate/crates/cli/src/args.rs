use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cfnorm",
    version,
    about = "Characteristic-function tests for multivariate normality"
)]
pub struct Cli {
    /// Worker threads for the Monte Carlo engines (0 = all cores).
    #[arg(long, global = true, env = "CFNORM_THREADS", default_value_t = 0)]
    pub threads: usize,

    /// Suppress progress messages on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a CSV data set for normality.
    Test(TestArgs),
    /// Tabulate Monte Carlo critical values of the scaled statistic.
    Critvals(CritvalsArgs),
    /// Estimate rejection rates under an alternative.
    Power(PowerArgs),
    /// Estimate coverage of the asymptotic confidence interval for Delta_a.
    Coverage(CoverageArgs),
    /// Evaluate the population distance Delta_a.
    Delta(DeltaArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file, one observation per row, optional header.
    #[arg(long)]
    pub data: PathBuf,
    /// Weight parameters; `inf` selects the skewness limit statistic.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10")]
    pub a: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Level used for the reject/accept column.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also run BHEP, HZ, HV and energy tests.
    #[arg(long)]
    pub competitors: bool,
    /// Also write the report to this path (`.csv` for a table).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CritvalsArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Table destination: CSV for `.csv`, JSON otherwise.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    /// Alternative, e.g. `nmix1`, `t:3`, `gamma:5,1`, `uniform`.
    #[arg(long)]
    pub alt: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10")]
    pub a: Vec<String>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub competitors: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long)]
    pub alt: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub a: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Target value; computed by quadrature when omitted.
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[arg(long)]
    pub alt: String,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
    pub a: Vec<String>,
    /// Also estimate the large-a and small-a limits by simulation.
    #[arg(long)]
    pub limits: bool,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
