use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "flattop", version, about = "Flat-top kernel CDF and survival estimation")]
pub struct Cli {
    /// Replay a resolved configuration previously echoed by this tool.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Also write the resolved configuration to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub save_config: Option<PathBuf>,

    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Smoothed distribution function on a grid.
    Estimate(EstimateArgs),
    /// Smoothed Kaplan–Meier survival function on a grid.
    Survival(EstimateArgs),
    /// Select a bandwidth without estimating.
    Bandwidth(BandwidthArgs),
    /// Deficiency of one estimator relative to another.
    Deficiency(DeficiencyArgs),
    /// Monte Carlo MSE study or zero-bias experiment.
    Simulate(SimulateArgs),
    /// Tabulate a flat-top kernel.
    KernelTable(KernelTableArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Trapezoid,
    SmoothTrapezoid,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Threshold,
    Plateau,
}

#[derive(Debug, Clone, Args)]
pub struct KernelOpts {
    #[arg(long, value_enum, default_value = "trapezoid")]
    pub kernel: KernelArg,
    /// Flat-top radius (default 0.75 trapezoid, 0.05 smooth trapezoid).
    #[arg(long)]
    pub c: Option<f64>,
    /// Smooth-trapezoid smoothness (default 1).
    #[arg(long)]
    pub b: Option<f64>,
    /// Radius used by the bandwidth rule.
    #[arg(long)]
    pub effective_c: Option<f64>,
    /// Kernel table interpolation tolerance.
    #[arg(long)]
    pub table_tol: Option<f64>,
    /// Directory for cached kernel tables.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BandwidthOpts {
    /// `auto`, `cv` or a positive number.
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    #[arg(long, value_enum, default_value = "plateau")]
    pub bw_mode: ModeArg,
    /// Threshold constant C.
    #[arg(long = "bw-C")]
    pub bw_c: Option<f64>,
    /// Window width ε.
    #[arg(long)]
    pub bw_eps: Option<f64>,
    /// Largest frequency of the ECF grid.
    #[arg(long)]
    pub freq_max: Option<f64>,
    /// Points on the ECF grid.
    #[arg(long)]
    pub freq_points: Option<usize>,
    /// Write the ECF curve used by `auto` as CSV.
    #[arg(long)]
    pub ecf_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub bw: BandwidthOpts,
    /// Left support boundary for reflection.
    #[arg(long, allow_hyphen_values = true)]
    pub boundary: Option<f64>,
    /// Rectify into a monotone path within [0, 1].
    #[arg(long)]
    pub standardize: bool,
    /// `min:max:count` or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BandwidthArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[command(flatten)]
    pub bw: BandwidthOpts,
}

#[derive(Debug, Clone, Args)]
pub struct DeficiencyArgs {
    /// Leading MSE constant shared by both estimators.
    #[arg(long = "lead", allow_hyphen_values = true)]
    pub lead: Option<f64>,
    /// Leading MSE rate r.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Second-order constant of the baseline S.
    #[arg(long = "second-s", allow_hyphen_values = true)]
    pub second_s: Option<f64>,
    /// Second-order constant of the competitor T.
    #[arg(long = "second-t", allow_hyphen_values = true)]
    pub second_t: Option<f64>,
    /// Second-order shape: `power:<delta>` or `log`.
    #[arg(long)]
    pub kind: Option<String>,
    /// Smoothness class `A:p`, `B:d:D` or `C:b`; selects the EDF comparison.
    #[arg(long)]
    pub assumption: Option<String>,
    /// F(t) for the EDF comparison.
    #[arg(long)]
    pub cdf: Option<f64>,
    /// f(t) for the EDF comparison.
    #[arg(long)]
    pub density: Option<f64>,
    /// Bandwidth scale a of the rate-optimal preset.
    #[arg(long)]
    pub scale: Option<f64>,
    #[command(flatten)]
    pub kernel: KernelOpts,
    #[arg(long)]
    pub n: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "normal-iid")]
    pub scenario: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "15,30")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Comma-separated subset of edf, gauss-cv, trapezoid, smooth-trapezoid.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "plateau")]
    pub bw_mode: ModeArg,
    #[arg(long = "bw-C")]
    pub bw_c: Option<f64>,
    #[arg(long)]
    pub bw_eps: Option<f64>,
    #[arg(long)]
    pub table_tol: Option<f64>,
    /// Record per-replication bandwidths in the JSON report.
    #[arg(long)]
    pub trace: bool,
    /// Run the fixed-bandwidth bias experiment on Polya-type data instead.
    #[arg(long)]
    pub zero_bias: bool,
    /// Bandwidth of the zero-bias experiment.
    #[arg(long)]
    pub h: Option<f64>,
    /// Evaluation points of the zero-bias experiment.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eval_points: Option<Vec<f64>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KernelTableArgs {
    #[command(flatten)]
    pub kernel: KernelOpts,
    /// Write the binary table here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also dump `x,K,Kbar,Kbar_rectified` at these points as CSV.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub csv_out: Option<PathBuf>,
}
