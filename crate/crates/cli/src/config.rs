//! Fully resolved invocations. Every default is filled in before any
//! computation so the echoed JSON replays the run exactly.

use std::path::PathBuf;

use flattop::bandwidth::{log_grid, BandwidthMode};
use flattop::sim::EstimatorKind;
use flattop::{AssumptionTag, BandwidthRule, FlatTopSpec, MseExpansion, Scenario};
use serde::{Deserialize, Serialize};

use crate::args::{KernelArg, KernelOpts, ModeArg};
use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub schema: u32,
    #[serde(flatten)]
    pub run: Resolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Resolved {
    Estimate(EstimateConfig),
    Survival(EstimateConfig),
    Bandwidth(BandwidthConfig),
    Deficiency(DeficiencyConfig),
    Simulate(SimulateConfig),
    ZeroBias(ZeroBiasConfig),
    KernelTable(KernelTableConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelConfig {
    Trapezoid {
        c: f64,
        effective_c: f64,
        table_tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_dir: Option<PathBuf>,
    },
    SmoothTrapezoid {
        b: f64,
        c: f64,
        effective_c: f64,
        table_tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cache_dir: Option<PathBuf>,
    },
    Gaussian,
}

pub const DEFAULT_TABLE_TOL: f64 = 1e-8;

impl KernelConfig {
    pub fn resolve(opts: &KernelOpts) -> Result<Self, CliError> {
        let table_tol = opts.table_tol.unwrap_or(DEFAULT_TABLE_TOL);
        let cache_dir = opts.cache_dir.clone();
        match opts.kernel {
            KernelArg::Trapezoid => {
                if opts.b.is_some() {
                    return Err(CliError::usage("--b applies to the smooth trapezoid only"));
                }
                let c = opts.c.unwrap_or(0.75);
                let spec = FlatTopSpec::trapezoid(c)?;
                if let Some(e) = opts.effective_c {
                    spec.with_effective_c(e)?;
                }
                Ok(KernelConfig::Trapezoid {
                    c,
                    effective_c: spec.effective_c,
                    table_tol,
                    cache_dir,
                })
            }
            KernelArg::SmoothTrapezoid => {
                let mut spec = FlatTopSpec::smooth_trapezoid(opts.b.unwrap_or(1.0), opts.c.unwrap_or(0.05))?;
                if let Some(e) = opts.effective_c {
                    spec = spec.with_effective_c(e)?;
                }
                Ok(KernelConfig::SmoothTrapezoid {
                    b: spec.b,
                    c: spec.c,
                    effective_c: spec.effective_c,
                    table_tol,
                    cache_dir,
                })
            }
            KernelArg::Gaussian => {
                if opts.c.is_some() || opts.b.is_some() || opts.effective_c.is_some() {
                    return Err(CliError::usage("--c, --b and --effective-c do not apply to the Gaussian kernel"));
                }
                Ok(KernelConfig::Gaussian)
            }
        }
    }

    /// Flat-top spec, table tolerance and cache directory; `None` for the Gaussian.
    pub fn flat_top(&self) -> Result<Option<(FlatTopSpec, f64, Option<PathBuf>)>, CliError> {
        Ok(match self {
            KernelConfig::Trapezoid {
                c,
                effective_c,
                table_tol,
                cache_dir,
            } => Some((
                FlatTopSpec::trapezoid(*c)?.with_effective_c(*effective_c)?,
                *table_tol,
                cache_dir.clone(),
            )),
            KernelConfig::SmoothTrapezoid {
                b,
                c,
                effective_c,
                table_tol,
                cache_dir,
            } => Some((
                FlatTopSpec::smooth_trapezoid(*b, *c)?.with_effective_c(*effective_c)?,
                *table_tol,
                cache_dir.clone(),
            )),
            KernelConfig::Gaussian => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum BandwidthChoice {
    Fixed {
        h: f64,
    },
    /// Log-spaced grid for Gaussian cross-validation.
    Cv {
        h_min: f64,
        h_max: f64,
        points: usize,
    },
    Auto {
        #[serde(flatten)]
        rule: BandwidthRule,
        freq_max: f64,
        freq_points: usize,
    },
}

impl BandwidthChoice {
    pub fn cv_grid(&self) -> Option<Vec<f64>> {
        match *self {
            BandwidthChoice::Cv { h_min, h_max, points } => Some(log_grid(h_min, h_max, points)),
            _ => None,
        }
    }
}

pub fn mode(arg: ModeArg) -> BandwidthMode {
    match arg {
        ModeArg::Threshold => BandwidthMode::Threshold,
        ModeArg::Plateau => BandwidthMode::Plateau,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub bandwidth: BandwidthChoice,
    pub boundary: Option<f64>,
    pub standardize: bool,
    pub grid: String,
    pub json: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecf_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub input: PathBuf,
    pub output: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub bandwidth: BandwidthChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecf_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "comparison", rename_all = "kebab-case")]
pub enum DeficiencyConfig {
    /// Two MSE expansions sharing their leading term.
    Expansions {
        s: MseExpansion,
        t: MseExpansion,
        n: f64,
        output: Option<PathBuf>,
    },
    /// Smoothed estimator against the EDF at one point.
    Edf {
        assumption: AssumptionTag,
        cdf: f64,
        density: f64,
        scale: f64,
        n: usize,
        kernel: KernelConfig,
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub scenario: Scenario,
    pub estimators: Vec<EstimatorKind>,
    pub bw_mode: BandwidthMode,
    #[serde(rename = "bw_C")]
    pub bw_c: f64,
    /// `None` keeps the per-sample-size default window.
    pub bw_eps: Option<f64>,
    pub table_tol: f64,
    pub path_points: usize,
    pub cv_points: usize,
    pub max_attempts: u32,
    pub trace: bool,
    pub output: Option<PathBuf>,
    pub json: bool,
    /// Rules in force per sample size; informational.
    #[serde(default, skip_deserializing)]
    pub rules: Vec<RuleEcho>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEcho {
    pub n: usize,
    pub estimator: EstimatorKind,
    #[serde(flatten)]
    pub rule: BandwidthRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBiasConfig {
    pub kernel: KernelConfig,
    pub n: usize,
    pub h: f64,
    pub reps: usize,
    pub seed: u64,
    pub eval_points: Vec<f64>,
    pub output: Option<PathBuf>,
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTableConfig {
    pub kernel: KernelConfig,
    pub output: Option<PathBuf>,
    pub grid: Option<String>,
    pub csv_out: Option<PathBuf>,
}
