//! Seeded Monte Carlo harness for the MSE studies and the zero-bias check.
//!
//! Every replication draws from its own ChaCha8 stream keyed by sample size,
//! replication index, attempt and purpose, so results do not depend on how
//! replications are scheduled across threads.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{
    cv_bandwidth_gaussian_measure, default_frequency_grid, ecf_of_measure, log_grid, mass_measure, select_bandwidth,
    BandwidthMode, BandwidthRule,
};
use crate::cdf::{iqr, standardize_path, standardize_survival_path, CensoredSample, EstimatorConfig, StepEstimate};
use crate::error::{Error, Result};
use crate::kernel::{trapezoid_kbar, FlatTopSpec, KernelTable, SmoothingKernel};
use crate::special::{normal_cdf, normal_pdf, normal_quantile};

pub const REPORT_SCHEMA: u32 = 1;

const PURPOSE_LIFETIME: u64 = 1;
const PURPOSE_CENSOR: u64 = 2;

/// Stream for one draw of one replication.
pub fn replication_rng(seed: u64, n: usize, rep: usize, attempt: u32, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 40) | ((rep as u64) << 16) | ((attempt as u64) << 4) | purpose);
    rng
}

/// Uniform draw on the open interval (0, 1).
fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Weibull { shape: f64, scale: f64 },
    /// Density `(1 - cos x) / (π x²)` with characteristic function `(1 - |t|)⁺`.
    Polya,
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Normal { sd, mean } if !(sd > 0.0 && mean.is_finite()) => {
                Err(Error::param("normal distribution needs sd > 0"))
            }
            Distribution::Weibull { shape, scale } if !(shape > 0.0 && scale > 0.0) => {
                Err(Error::param("Weibull distribution needs positive shape and scale"))
            }
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-(x / scale).powf(shape)).exp_m1()
                }
            }
            Distribution::Polya => trapezoid_kbar(0.0, x),
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Distribution::Weibull { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    (-(x / scale).powf(shape)).exp()
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => normal_pdf((x - mean) / sd) / sd,
            Distribution::Weibull { shape, scale } => {
                if x < 0.0 {
                    0.0
                } else {
                    let z = x / scale;
                    shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
                }
            }
            Distribution::Polya => {
                if x == 0.0 {
                    1.0 / (2.0 * std::f64::consts::PI)
                } else {
                    let s = (0.5 * x).sin();
                    2.0 * s * s / (std::f64::consts::PI * x * x)
                }
            }
        }
    }

    /// Quantile function where it has a closed form.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        match *self {
            Distribution::Normal { mean, sd } => Some(mean + sd * normal_quantile(p)),
            Distribution::Weibull { shape, scale } => Some(scale * (-(-p).ln_1p()).powf(1.0 / shape)),
            Distribution::Polya => None,
        }
    }

    /// Inverse-CDF sampling, or Cauchy-envelope rejection for the Polya law.
    pub fn sample(&self, rng: &mut impl RngCore, count: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match self {
            Distribution::Polya => (0..count).map(|_| sample_polya(rng)).collect(),
            _ => Ok((0..count)
                .map(|_| self.quantile(open_unit(rng)).expect("closed-form quantile"))
                .collect()),
        }
    }
}

/// `f(x) <= 2.5 g(x)` for the standard Cauchy density `g`: `(1 - cos x)/x²`
/// is at most `min(1/2, 2/x²)`.
const POLYA_ENVELOPE: f64 = 2.5;

fn sample_polya(rng: &mut impl RngCore) -> Result<f64> {
    for _ in 0..10_000 {
        let x = (std::f64::consts::PI * (open_unit(rng) - 0.5)).tan();
        let g = 1.0 / (std::f64::consts::PI * (1.0 + x * x));
        if open_unit(rng) * POLYA_ENVELOPE * g <= Distribution::Polya.pdf(x) {
            return Ok(x);
        }
    }
    Err(Error::Degenerate("Polya rejection sampler exhausted its envelope".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub lifetime: Distribution,
    pub censoring: Option<Distribution>,
    /// Left support boundary used for reflection.
    pub boundary: Option<f64>,
    pub eval_points: Vec<f64>,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl Scenario {
    /// Standard normal lifetimes, CDF estimated at -1.5, 0 and 1.5.
    pub fn normal_iid(sample_sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            name: "normal-iid".into(),
            lifetime: Distribution::Normal { mean: 0.0, sd: 1.0 },
            censoring: None,
            boundary: None,
            eval_points: vec![-1.5, 0.0, 1.5],
            sample_sizes,
            replications,
            seed,
        }
    }

    /// Weibull(3, 1.5) lifetimes censored by Weibull(4, 3), survival
    /// estimated at 0.75, 1.25 and 1.75 with reflection at zero.
    pub fn weibull_censored(sample_sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            name: "weibull-censored".into(),
            lifetime: Distribution::Weibull { shape: 3.0, scale: 1.5 },
            censoring: Some(Distribution::Weibull { shape: 4.0, scale: 3.0 }),
            boundary: Some(0.0),
            eval_points: vec![0.75, 1.25, 1.75],
            sample_sizes,
            replications,
            seed,
        }
    }

    /// Polya-type lifetimes whose characteristic function vanishes beyond 1.
    pub fn polya_bandlimited(sample_sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        Self {
            name: "polya-bandlimited".into(),
            lifetime: Distribution::Polya,
            censoring: None,
            boundary: None,
            eval_points: vec![0.0, 2.0, 5.0],
            sample_sizes,
            replications,
            seed,
        }
    }

    pub fn preset(name: &str, sample_sizes: Vec<usize>, replications: usize, seed: u64) -> Result<Self> {
        match name {
            "normal-iid" => Ok(Self::normal_iid(sample_sizes, replications, seed)),
            "weibull-censored" => Ok(Self::weibull_censored(sample_sizes, replications, seed)),
            "polya-bandlimited" => Ok(Self::polya_bandlimited(sample_sizes, replications, seed)),
            other => Err(Error::param(format!(
                "unknown scenario `{other}`; expected normal-iid, weibull-censored or polya-bandlimited"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_points.is_empty() {
            return Err(Error::param("scenario needs at least one evaluation point"));
        }
        if self.replications == 0 {
            return Err(Error::param("scenario needs at least one replication"));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 2) {
            return Err(Error::param("sample sizes must be at least 2"));
        }
        if self.eval_points.iter().any(|t| !t.is_finite()) {
            return Err(Error::param("evaluation points must be finite"));
        }
        self.lifetime.validate()?;
        if let Some(c) = &self.censoring {
            c.validate()?;
        }
        Ok(())
    }

    /// Survival function under censoring, distribution function otherwise.
    pub fn estimates_survival(&self) -> bool {
        self.censoring.is_some()
    }

    pub fn truth(&self, t: f64) -> f64 {
        if self.estimates_survival() {
            self.lifetime.survival(t)
        } else {
            self.lifetime.cdf(t)
        }
    }

    fn draw(&self, n: usize, rep: usize, attempt: u32) -> Result<CensoredSample> {
        let mut rng = replication_rng(self.seed, n, rep, attempt, PURPOSE_LIFETIME);
        let life = self.lifetime.sample(&mut rng, n)?;
        match &self.censoring {
            None => CensoredSample::uncensored(life),
            Some(c) => {
                let mut rng = replication_rng(self.seed, n, rep, attempt, PURPOSE_CENSOR);
                let cens = c.sample(&mut rng, n)?;
                let times = life.iter().zip(&cens).map(|(&x, &c)| x.min(c)).collect();
                let event = life.iter().zip(&cens).map(|(&x, &c)| x <= c).collect();
                CensoredSample::new(times, event)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// EDF, or Kaplan–Meier under censoring.
    Empirical,
    /// Gaussian kernel with cross-validated bandwidth.
    GaussianCv,
    /// Trapezoid flat-top kernel with automatic bandwidth.
    Trapezoid,
    /// Smooth trapezoid flat-top kernel with automatic bandwidth.
    SmoothTrapezoid,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Empirical,
        EstimatorKind::GaussianCv,
        EstimatorKind::Trapezoid,
        EstimatorKind::SmoothTrapezoid,
    ];

    fn label(self, survival: bool) -> &'static str {
        match self {
            EstimatorKind::Empirical if survival => "km",
            EstimatorKind::Empirical => "edf",
            EstimatorKind::GaussianCv => "gauss_cv",
            EstimatorKind::Trapezoid => "trap",
            EstimatorKind::SmoothTrapezoid => "smooth",
        }
    }

    fn flat_top(self) -> bool {
        matches!(self, EstimatorKind::Trapezoid | EstimatorKind::SmoothTrapezoid)
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edf" | "km" | "empirical" => Ok(EstimatorKind::Empirical),
            "gauss" | "gauss-cv" | "gauss_cv" | "gaussian" => Ok(EstimatorKind::GaussianCv),
            "trap" | "trapezoid" => Ok(EstimatorKind::Trapezoid),
            "smooth" | "smooth-trapezoid" => Ok(EstimatorKind::SmoothTrapezoid),
            other => Err(Error::param(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Kernels and tuning shared by all replications.
#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub trapezoid: Arc<KernelTable>,
    pub smooth: Arc<KernelTable>,
    pub bw_mode: BandwidthMode,
    /// Overrides the mode's default threshold constant.
    pub bw_c: Option<f64>,
    /// Overrides the mode's default window width.
    pub bw_eps: Option<f64>,
    /// Points on the per-replication grid used by standardized paths.
    pub path_points: usize,
    /// Points on the log-spaced cross-validation bandwidth grid.
    pub cv_points: usize,
    /// Draws per replication before giving up on bandwidth selection.
    pub max_attempts: u32,
    /// Record the bandwidths of every replication.
    pub trace: bool,
}

/// Default tolerance of the simulation kernel tables.
pub const HARNESS_TABLE_TOL: f64 = 1e-7;

impl HarnessConfig {
    /// Trapezoid with `c = 0.75` and the `(b, c) = (1, 0.05)` smooth trapezoid.
    pub fn new(table_tol: f64) -> Result<Self> {
        let trap = KernelTable::build(FlatTopSpec::trapezoid(0.75)?, table_tol)?;
        let smooth = KernelTable::build(FlatTopSpec::smooth_trapezoid(1.0, 0.05)?, table_tol)?;
        Ok(Self::with_tables(Arc::new(trap), Arc::new(smooth)))
    }

    pub fn with_tables(trapezoid: Arc<KernelTable>, smooth: Arc<KernelTable>) -> Self {
        Self {
            trapezoid,
            smooth,
            bw_mode: BandwidthMode::Plateau,
            bw_c: None,
            bw_eps: None,
            path_points: 256,
            cv_points: 30,
            max_attempts: 50,
            trace: false,
        }
    }

    /// Fully resolved rule for sample size `n`.
    pub fn rule(&self, n: usize, effective_c: f64) -> BandwidthRule {
        let mut rule = BandwidthRule::for_mode(self.bw_mode, n, effective_c);
        if let Some(c) = self.bw_c {
            rule.c_const = c;
        }
        if let Some(e) = self.bw_eps {
            rule.epsilon = e;
        }
        rule
    }

    fn table(&self, kind: EstimatorKind) -> &KernelTable {
        match kind {
            EstimatorKind::SmoothTrapezoid => &self.smooth,
            _ => &self.trapezoid,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseCell {
    pub estimator: String,
    pub t: f64,
    pub n: usize,
    pub mse: f64,
    pub bias: f64,
    pub var: f64,
    /// Monte Carlo standard error of the MSE; `None` with one replication.
    pub se: Option<f64>,
    pub reps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryCount {
    pub n: usize,
    pub retries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCheck {
    pub estimator: String,
    pub n: usize,
    /// Replications whose standardized path left [0, 1] or lost monotonicity.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSummary {
    pub estimator: String,
    pub n: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub rep: usize,
    pub attempts: u32,
    pub estimator: String,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub replications: usize,
    pub cells: Vec<MseCell>,
    pub retries: Vec<RetryCount>,
    pub path_checks: Vec<PathCheck>,
    pub bandwidths: Vec<BandwidthSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceRow>,
}

impl MseReport {
    pub fn cell(&self, estimator: &str, t: f64, n: usize) -> Option<&MseCell> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.t == t && c.n == n)
    }

    /// One row per cell: `estimator,t,n,mse,bias,var,se,reps`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,t,n,mse,bias,var,se,reps\n");
        for c in &self.cells {
            let se = c.se.map(|v| v.to_string()).unwrap_or_else(|| "NaN".into());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.estimator, c.t, c.n, c.mse, c.bias, c.var, se, c.reps
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Replication {
    /// `values[k][j]`: output column `k` at evaluation point `j`.
    values: Vec<Vec<f64>>,
    retries: u32,
    violations: Vec<bool>,
    bandwidths: Vec<(EstimatorKind, f64)>,
}

/// Output columns: each estimator, plus a standardized twin for flat-top kinds.
fn output_columns(kinds: &[EstimatorKind], survival: bool) -> Vec<(EstimatorKind, bool, String)> {
    let mut cols = Vec::new();
    for &k in kinds {
        cols.push((k, false, k.label(survival).to_string()));
        if k.flat_top() {
            cols.push((k, true, format!("{}_std", k.label(survival))));
        }
    }
    cols
}

fn fit_replication(
    scenario: &Scenario,
    kinds: &[EstimatorKind],
    cfg: &HarnessConfig,
    n: usize,
    rep: usize,
) -> Result<Replication> {
    let survival = scenario.estimates_survival();
    let mut last_err = None;
    for attempt in 0..cfg.max_attempts {
        let sample = scenario.draw(n, rep, attempt)?;
        let measure = match mass_measure(&sample) {
            Ok(m) => m,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        match bandwidths(&measure, kinds, cfg, n) {
            Ok(hs) => {
                let mut out = evaluate_replication(scenario, kinds, cfg, &measure, &hs, survival)?;
                out.retries = attempt;
                return Ok(out);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::param("no replication attempts configured")))
}

fn bandwidths(
    measure: &StepEstimate,
    kinds: &[EstimatorKind],
    cfg: &HarnessConfig,
    n: usize,
) -> Result<Vec<(EstimatorKind, f64)>> {
    let mut hs = Vec::new();
    let mut curve = None;
    for &k in kinds {
        match k {
            EstimatorKind::Empirical => {}
            EstimatorKind::GaussianCv => {
                let scale = iqr(measure.jump_locations()) / 1.349;
                let scale = if scale > 0.0 { scale } else { 1.0 };
                let grid: Vec<f64> = log_grid(0.05, 2.0, cfg.cv_points).iter().map(|h| h * scale).collect();
                hs.push((k, cv_bandwidth_gaussian_measure(measure, &grid)?));
            }
            EstimatorKind::Trapezoid | EstimatorKind::SmoothTrapezoid => {
                if curve.is_none() {
                    let freqs = default_frequency_grid(measure.jump_locations())?;
                    curve = Some(ecf_of_measure(measure, n, &freqs)?);
                }
                let rule = cfg.rule(n, cfg.table(k).spec().effective_c);
                hs.push((k, select_bandwidth(curve.as_ref().unwrap(), &rule)?));
            }
        }
    }
    Ok(hs)
}

fn evaluate_replication(
    scenario: &Scenario,
    kinds: &[EstimatorKind],
    cfg: &HarnessConfig,
    measure: &StepEstimate,
    hs: &[(EstimatorKind, f64)],
    survival: bool,
) -> Result<Replication> {
    let pts = &scenario.eval_points;
    let mass = measure.total_mass();
    let mut values = Vec::new();
    let mut violations = Vec::new();
    for (kind, standardized, _) in output_columns(kinds, survival) {
        if kind == EstimatorKind::Empirical {
            values.push(
                pts.iter()
                    .map(|&t| {
                        let cum = measure.cumulative(t);
                        if survival {
                            1.0 - cum
                        } else {
                            cum
                        }
                    })
                    .collect(),
            );
            violations.push(false);
            continue;
        }
        let h = hs.iter().find(|(k, _)| *k == kind).map(|p| p.1).expect("bandwidth computed");
        let kernel = match kind {
            EstimatorKind::GaussianCv => SmoothingKernel::Gaussian,
            _ => SmoothingKernel::FlatTop(cfg.table(kind)),
        };
        let mut est = EstimatorConfig::new(kernel, h);
        est.boundary = scenario.boundary;
        est.validate(measure.jump_locations())?;
        let point = |t: f64| {
            let f = est.smoothed_mass(measure, t);
            if survival {
                mass - f
            } else {
                f
            }
        };
        if !standardized {
            values.push(pts.iter().map(|&t| point(t)).collect());
            violations.push(false);
            continue;
        }
        let grid = path_grid(scenario, measure, h, cfg.path_points);
        let raw: Vec<f64> = grid.iter().map(|&t| point(t)).collect();
        let path = if survival {
            standardize_survival_path(&raw)
        } else {
            standardize_path(&raw)
        };
        let monotone = if survival {
            path.windows(2).all(|w| w[0] >= w[1])
        } else {
            path.windows(2).all(|w| w[0] <= w[1])
        };
        let bad = !monotone || path.iter().any(|v| !(0.0..=1.0).contains(v));
        violations.push(bad);
        values.push(
            pts.iter()
                .map(|t| path[grid.partition_point(|g| g < t)])
                .collect(),
        );
    }
    Ok(Replication {
        values,
        retries: 0,
        violations,
        bandwidths: hs.to_vec(),
    })
}

/// Ascending grid from the left support boundary (or ten bandwidths below
/// the smallest observation) to the largest evaluation point, merged with
/// the evaluation points.
fn path_grid(scenario: &Scenario, measure: &StepEstimate, h: f64, points: usize) -> Vec<f64> {
    let top = scenario.eval_points.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let start = scenario
        .boundary
        .unwrap_or(measure.jump_locations()[0] - 10.0 * h)
        .min(top);
    let points = points.max(2);
    let mut grid: Vec<f64> = (0..points)
        .map(|i| start + (top - start) * i as f64 / (points - 1) as f64)
        .chain(scenario.eval_points.iter().cloned())
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Monte Carlo MSE, bias and variance of each estimator at each evaluation
/// point and sample size.
pub fn run_scenario(scenario: &Scenario, kinds: &[EstimatorKind], cfg: &HarnessConfig) -> Result<MseReport> {
    scenario.validate()?;
    if kinds.is_empty() {
        return Err(Error::param("no estimators requested"));
    }
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    let survival = scenario.estimates_survival();
    let columns = output_columns(&kinds, survival);
    let truth: Vec<f64> = scenario.eval_points.iter().map(|&t| scenario.truth(t)).collect();
    let reps = scenario.replications;

    let mut report = MseReport {
        schema: REPORT_SCHEMA,
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        replications: reps,
        cells: Vec::new(),
        retries: Vec::new(),
        path_checks: Vec::new(),
        bandwidths: Vec::new(),
        trace: Vec::new(),
    };
    for &n in &scenario.sample_sizes {
        let outcomes: Vec<Replication> = (0..reps)
            .into_par_iter()
            .map(|rep| fit_replication(scenario, &kinds, cfg, n, rep))
            .collect::<Result<_>>()?;

        for (k, (_, standardized, label)) in columns.iter().enumerate() {
            for (j, &t) in scenario.eval_points.iter().enumerate() {
                let errors: Vec<f64> = outcomes.iter().map(|o| o.values[k][j] - truth[j]).collect();
                report.cells.push(aggregate(label, t, n, &errors, scenario.seed));
            }
            if *standardized {
                report.path_checks.push(PathCheck {
                    estimator: label.clone(),
                    n,
                    violations: outcomes.iter().filter(|o| o.violations[k]).count(),
                });
            }
        }
        report.retries.push(RetryCount {
            n,
            retries: outcomes.iter().map(|o| o.retries as usize).sum(),
        });
        let mut by_kind: BTreeMap<EstimatorKind, Vec<f64>> = BTreeMap::new();
        for (rep, o) in outcomes.iter().enumerate() {
            for &(kind, h) in &o.bandwidths {
                by_kind.entry(kind).or_default().push(h);
                if cfg.trace {
                    report.trace.push(TraceRow {
                        n,
                        rep,
                        attempts: o.retries + 1,
                        estimator: kind.label(survival).into(),
                        h,
                    });
                }
            }
        }
        for (kind, mut hs) in by_kind {
            hs.sort_by(f64::total_cmp);
            report.bandwidths.push(BandwidthSummary {
                estimator: kind.label(survival).into(),
                n,
                median: median_sorted(&hs),
                min: hs[0],
                max: hs[hs.len() - 1],
            });
        }
    }
    Ok(report)
}

/// [`run_scenario`] on a dedicated pool of `workers` threads.
pub fn run_scenario_with_workers(
    scenario: &Scenario,
    kinds: &[EstimatorKind],
    cfg: &HarnessConfig,
    workers: usize,
) -> Result<MseReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_scenario(scenario, kinds, cfg))
}

fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn aggregate(label: &str, t: f64, n: usize, errors: &[f64], seed: u64) -> MseCell {
    let r = errors.len() as f64;
    let bias = errors.iter().sum::<f64>() / r;
    let var = errors.iter().map(|e| (e - bias) * (e - bias)).sum::<f64>() / r;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / r;
    let se = (errors.len() > 1).then(|| {
        let ss = errors.iter().map(|e| (e * e - mse) * (e * e - mse)).sum::<f64>() / (r - 1.0);
        (ss / r).sqrt()
    });
    MseCell {
        estimator: label.to_string(),
        t,
        n,
        mse,
        bias,
        var,
        se,
        reps: errors.len(),
        seed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBiasPoint {
    pub t: f64,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Standard error of the mean estimate; `None` with one replication.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroBiasReport {
    pub schema: u32,
    pub n: usize,
    pub h: f64,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<ZeroBiasPoint>,
    pub insufficient_replications: bool,
}

/// Bias of the smoothed CDF estimator with fixed bandwidth `h` under the
/// Polya-type density.
pub fn zero_bias_experiment(
    table: &KernelTable,
    n: usize,
    h: f64,
    reps: usize,
    seed: u64,
    eval_points: &[f64],
) -> Result<ZeroBiasReport> {
    if reps == 0 || n == 0 {
        return Err(Error::param("need at least one replication of at least one draw"));
    }
    let scenario = Scenario::polya_bandlimited(vec![n], reps, seed);
    let est = EstimatorConfig::new(SmoothingKernel::FlatTop(table), h);
    est.validate(&[])?;
    let values: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sample = scenario.draw(n, rep, 0)?;
            let measure = mass_measure(&sample)?;
            Ok(eval_points.iter().map(|&t| est.smoothed_mass(&measure, t)).collect())
        })
        .collect::<Result<_>>()?;
    let r = reps as f64;
    let points = eval_points
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let truth = Distribution::Polya.cdf(t);
            let mean = values.iter().map(|v| v[j]).sum::<f64>() / r;
            let se = (reps > 1).then(|| {
                let ss = values.iter().map(|v| (v[j] - mean) * (v[j] - mean)).sum::<f64>() / (r - 1.0);
                (ss / r).sqrt()
            });
            ZeroBiasPoint {
                t,
                truth,
                mean,
                bias: mean - truth,
                se,
            }
        })
        .collect();
    Ok(ZeroBiasReport {
        schema: REPORT_SCHEMA,
        n,
        h,
        reps,
        seed,
        points,
        insufficient_replications: reps < 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};
    use approx::assert_abs_diff_eq;

    #[test]
    fn weibull_median_and_normal_mean() {
        let w = Distribution::Weibull { shape: 3.0, scale: 1.5 };
        let mut rng = replication_rng(7, 1, 0, 0, PURPOSE_LIFETIME);
        let mut xs = w.sample(&mut rng, 100_000).unwrap();
        xs.sort_by(f64::total_cmp);
        let median = 0.5 * (xs[49_999] + xs[50_000]);
        assert_abs_diff_eq!(median, 1.5 * 2f64.ln().powf(1.0 / 3.0), epsilon = 0.01);
        assert_abs_diff_eq!(w.quantile(0.5).unwrap(), 1.327_495_566_750_776_6, epsilon = 1e-12);

        let nrm = Distribution::Normal { mean: 0.0, sd: 1.0 };
        let xs = nrm.sample(&mut rng, 10_000).unwrap();
        let mean = xs.iter().sum::<f64>() / 1e4;
        assert!(mean.abs() < 3.0 / 100.0);
    }

    #[test]
    fn polya_law_is_band_limited() {
        let mut rng = replication_rng(11, 1, 0, 0, PURPOSE_LIFETIME);
        let count = 50_000;
        let xs = Distribution::Polya.sample(&mut rng, count).unwrap();
        // real part of the ECF at t = 1.5; its variance is at most 1/(2 count)
        let re = xs.iter().map(|x| (1.5 * x).cos()).sum::<f64>() / count as f64;
        let se = (0.5 / count as f64).sqrt();
        assert!(re.abs() < 3.0 * se, "{re}");
        let re1 = xs.iter().map(|x| (0.5 * x).cos()).sum::<f64>() / count as f64;
        assert!((re1 - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn polya_cdf_matches_density_quadrature() {
        let opts = QuadOptions::new(1e-12);
        for &x in &[0.5, 2.0, 5.0] {
            let q = integrate(|s| Distribution::Polya.pdf(s), 0.0, x, &opts).unwrap().value;
            assert_abs_diff_eq!(Distribution::Polya.cdf(x) - 0.5, q, epsilon = 1e-11);
        }
    }

    #[test]
    fn aggregate_decomposes() {
        let c = aggregate("x", 0.0, 5, &[0.1, -0.3, 0.25, 0.0, 0.7], 1);
        assert!((c.mse - (c.bias * c.bias + c.var)).abs() <= 1e-12 * c.mse);
        assert!(aggregate("x", 0.0, 5, &[0.2], 1).se.is_none());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a = replication_rng(1, 15, 3, 0, PURPOSE_LIFETIME).next_u64();
        assert_eq!(a, replication_rng(1, 15, 3, 0, PURPOSE_LIFETIME).next_u64());
        assert_ne!(a, replication_rng(1, 15, 4, 0, PURPOSE_LIFETIME).next_u64());
        assert_ne!(a, replication_rng(1, 15, 3, 1, PURPOSE_LIFETIME).next_u64());
        assert_ne!(a, replication_rng(1, 15, 3, 0, PURPOSE_CENSOR).next_u64());
    }

    #[test]
    fn single_replication_flags_insufficiency() {
        let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-6).unwrap();
        let r = zero_bias_experiment(&table, 20, 0.5, 1, 3, &[0.0, 2.0]).unwrap();
        assert!(r.insufficient_replications);
        assert!(r.points.iter().all(|p| p.se.is_none()));
    }
}
