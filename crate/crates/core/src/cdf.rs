//! Empirical and kernel-smoothed distribution function estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::SmoothingKernel;

/// Observed times with event indicators. An all-true `event` vector encodes
/// an uncensored iid sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    times: Vec<f64>,
    event: Vec<bool>,
}

impl CensoredSample {
    pub fn new(times: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::sample("sample is empty"));
        }
        if times.len() != event.len() {
            return Err(Error::sample(format!(
                "{} times but {} event indicators",
                times.len(),
                event.len()
            )));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::sample(format!("observation {} is not finite", i + 1)));
        }
        Ok(Self { times, event })
    }

    pub fn uncensored(times: Vec<f64>) -> Result<Self> {
        let event = vec![true; times.len()];
        Self::new(times, event)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_uncensored(&self) -> bool {
        self.event.iter().all(|&e| e)
    }

    pub fn event_count(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    /// The same sample with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.times.iter().map(|t| t * factor).collect(), self.event.clone())
    }
}

/// Right-continuous step function given by its jumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEstimate {
    jump_locations: Vec<f64>,
    jump_heights: Vec<f64>,
}

impl StepEstimate {
    pub fn new(jump_locations: Vec<f64>, jump_heights: Vec<f64>) -> Result<Self> {
        if jump_locations.len() != jump_heights.len() {
            return Err(Error::param("jump locations and heights differ in length"));
        }
        if jump_locations.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::param("jump locations must be strictly ascending"));
        }
        if jump_heights.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::param("jump heights must be positive"));
        }
        let total: f64 = jump_heights.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::param(format!("jump heights sum to {total} > 1")));
        }
        Ok(Self {
            jump_locations,
            jump_heights,
        })
    }

    pub(crate) fn from_parts_unchecked(jump_locations: Vec<f64>, jump_heights: Vec<f64>) -> Self {
        Self {
            jump_locations,
            jump_heights,
        }
    }

    pub fn jump_locations(&self) -> &[f64] {
        &self.jump_locations
    }

    pub fn jump_heights(&self) -> &[f64] {
        &self.jump_heights
    }

    pub fn total_mass(&self) -> f64 {
        self.jump_heights.iter().sum()
    }

    /// Cumulative mass at `t`: the sum of heights at locations `<= t`.
    pub fn cumulative(&self, t: f64) -> f64 {
        let k = self.jump_locations.partition_point(|&x| x <= t);
        self.jump_heights[..k].iter().sum()
    }

    /// Interquartile range of the jump locations, ignoring the heights
    /// (linear interpolation between order statistics).
    pub fn location_iqr(&self) -> f64 {
        iqr(&self.jump_locations)
    }
}

/// Interquartile range with linear interpolation between order statistics.
pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25)
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Empirical distribution function: mass `count / n` at each distinct value.
pub fn edf(sample: &CensoredSample) -> Result<StepEstimate> {
    if !sample.is_uncensored() {
        return Err(Error::sample("the empirical distribution function needs uncensored data"));
    }
    let mut sorted = sample.times().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut locations = Vec::new();
    let mut heights = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        locations.push(sorted[i]);
        heights.push((j - i) as f64 / n);
        i = j;
    }
    Ok(StepEstimate::from_parts_unchecked(locations, heights))
}

/// Smoothing settings shared by the CDF and survival estimators.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorConfig<'a> {
    pub kernel: SmoothingKernel<'a>,
    pub bandwidth: f64,
    /// Left end of the support; enables reflection.
    pub boundary: Option<f64>,
    /// Rectify evaluated paths into valid distribution (or survival) paths.
    pub standardize: bool,
}

impl<'a> EstimatorConfig<'a> {
    pub fn new(kernel: SmoothingKernel<'a>, bandwidth: f64) -> Self {
        Self {
            kernel,
            bandwidth,
            boundary: None,
            standardize: false,
        }
    }

    pub fn with_boundary(mut self, a: f64) -> Self {
        self.boundary = Some(a);
        self
    }

    pub fn standardized(mut self, on: bool) -> Self {
        self.standardize = on;
        self
    }

    pub fn validate(&self, locations: &[f64]) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::param(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if let Some(a) = self.boundary {
            if !a.is_finite() {
                return Err(Error::param("boundary must be finite"));
            }
            if let Some(x) = locations.iter().find(|&&x| x < a) {
                return Err(Error::sample(format!("observation {x} lies below the boundary {a}")));
            }
        }
        Ok(())
    }

    /// `Σ s_j K̄((t - X_j)/h)` without reflection.
    pub(crate) fn smooth_sum(&self, steps: &StepEstimate, t: f64) -> f64 {
        let h = self.bandwidth;
        steps
            .jump_locations
            .iter()
            .zip(&steps.jump_heights)
            .map(|(&x, &s)| s * self.kernel.kbar((t - x) / h))
            .sum()
    }

    /// Smoothed cumulative mass at `t`, reflected about the boundary when set.
    pub(crate) fn smoothed_mass(&self, steps: &StepEstimate, t: f64) -> f64 {
        match self.boundary {
            None => self.smooth_sum(steps, t),
            Some(a) if t < a => 0.0,
            Some(a) => self.smooth_sum(steps, t) - self.smooth_sum(steps, 2.0 * a - t),
        }
    }
}

/// Kernel-smoothed CDF at a single point. With standardization on, the value
/// is clamped to [0, 1]; use [`evaluate_on_grid`] for the running supremum.
pub fn smoothed_cdf(sample: &CensoredSample, cfg: &EstimatorConfig<'_>, t: f64) -> Result<f64> {
    let steps = edf(sample)?;
    cfg.validate(steps.jump_locations())?;
    let v = cfg.smoothed_mass(&steps, t);
    Ok(if cfg.standardize { v.clamp(0.0, 1.0) } else { v })
}

/// Kernel-smoothed CDF of an arbitrary jump measure over an ascending grid.
pub fn smoothed_cdf_steps(steps: &StepEstimate, cfg: &EstimatorConfig<'_>, grid: &[f64]) -> Result<Vec<f64>> {
    cfg.validate(steps.jump_locations())?;
    check_grid(grid)?;
    let raw: Vec<f64> = grid.iter().map(|&t| cfg.smoothed_mass(steps, t)).collect();
    Ok(if cfg.standardize { standardize_path(&raw) } else { raw })
}

/// Kernel-smoothed CDF of an uncensored sample over an ascending grid.
pub fn evaluate_on_grid(sample: &CensoredSample, cfg: &EstimatorConfig<'_>, grid: &[f64]) -> Result<Vec<f64>> {
    smoothed_cdf_steps(&edf(sample)?, cfg, grid)
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| t.is_nan()) {
        return Err(Error::param("evaluation grid contains NaN"));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("evaluation grid must be ascending"));
    }
    Ok(())
}

/// Running maximum along the path, then clipping to [0, 1].
pub fn standardize_path(raw: &[f64]) -> Vec<f64> {
    crate::kernel::rectify(raw)
}

/// Running minimum along the path, then clipping to [0, 1].
pub fn standardize_survival_path(raw: &[f64]) -> Vec<f64> {
    let mut run = f64::INFINITY;
    raw.iter()
        .map(|&v| {
            run = run.min(v);
            run.clamp(0.0, 1.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{FlatTopSpec, KernelTable};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample(xs: &[f64]) -> CensoredSample {
        CensoredSample::uncensored(xs.to_vec()).unwrap()
    }

    #[test]
    fn edf_counts_and_ties() {
        let e = edf(&sample(&[1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(e.cumulative(2.0), 2.0 / 3.0, epsilon = 1e-15);
        let e = edf(&sample(&[1.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.jump_locations(), &[1.0, 2.0]);
        assert_abs_diff_eq!(e.cumulative(1.0), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(e.cumulative(0.5), 0.0);
        assert_abs_diff_eq!(e.cumulative(2.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn edf_rejects_censoring() {
        let s = CensoredSample::new(vec![1.0, 2.0], vec![true, false]).unwrap();
        assert!(edf(&s).is_err());
        assert!(CensoredSample::new(vec![], vec![]).is_err());
        assert!(CensoredSample::new(vec![f64::NAN], vec![true]).is_err());
    }

    #[test]
    fn smoothed_cdf_basics() {
        let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
        let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), 1.0);
        let s = sample(&[0.0]);
        assert_abs_diff_eq!(smoothed_cdf(&s, &cfg, 0.0).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(smoothed_cdf(&s, &cfg, 1e9).unwrap(), 1.0);
        assert_eq!(smoothed_cdf(&s, &cfg, -1e9).unwrap(), 0.0);
        let b = cfg.with_boundary(0.0);
        let s = sample(&[0.0, 0.3, 2.0]);
        assert_eq!(smoothed_cdf(&s, &b, 0.0).unwrap(), 0.0);
        assert_eq!(smoothed_cdf(&s, &b, -0.1).unwrap(), 0.0);
        assert!(smoothed_cdf(&sample(&[-1.0]), &b, 0.0).is_err());
        assert!(smoothed_cdf(&s, &EstimatorConfig::new(SmoothingKernel::Gaussian, 0.0), 0.0).is_err());
    }

    #[test]
    fn grid_matches_scalar_path() {
        let s = sample(&[-0.4, 0.1, 0.9, 1.3]);
        let cfg = EstimatorConfig::new(SmoothingKernel::Gaussian, 0.4);
        assert!(evaluate_on_grid(&s, &cfg, &[]).unwrap().is_empty());
        let v = evaluate_on_grid(&s, &cfg, &[0.2]).unwrap();
        assert_eq!(v, vec![smoothed_cdf(&s, &cfg, 0.2).unwrap()]);
        assert!(evaluate_on_grid(&s, &cfg, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize_path(&[0.1, 0.05, 0.3]), vec![0.1, 0.1, 0.3]);
        assert_eq!(standardize_path(&[-0.02, 0.5, 1.01]), vec![0.0, 0.5, 1.0]);
        let cdf = vec![0.0, 0.2, 0.2, 0.7, 1.0];
        assert_eq!(standardize_path(&cdf), cdf);
        assert_eq!(standardize_survival_path(&[0.9, 0.95, 1.02, 0.4, -0.1]), vec![0.9, 0.9, 0.9, 0.4, 0.0]);
    }

    #[test]
    fn small_bandwidth_recovers_edf() {
        let table = KernelTable::build(FlatTopSpec::trapezoid(0.75).unwrap(), 1e-8).unwrap();
        let s = sample(&[-1.0, 0.0, 0.5, 2.0]);
        let e = edf(&s).unwrap();
        let grid = [-1.5, -0.5, 0.25, 1.0, 3.0];
        let mut last = f64::INFINITY;
        for &h in &[0.1, 0.01, 0.001] {
            let cfg = EstimatorConfig::new(SmoothingKernel::FlatTop(&table), h);
            let v = evaluate_on_grid(&s, &cfg, &grid).unwrap();
            let err = grid
                .iter()
                .zip(&v)
                .map(|(&t, &f)| (f - e.cumulative(t)).abs())
                .fold(0.0, f64::max);
            assert!(err < last);
            last = err;
        }
        assert!(last < 1e-3);
    }

    proptest! {
        #[test]
        fn standardized_paths_are_cdf_paths(raw in proptest::collection::vec(-0.5f64..1.5, 0..60)) {
            let p = standardize_path(&raw);
            prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert_eq!(standardize_path(&p), p);
        }

        #[test]
        fn boundary_estimate_vanishes_left_of_a(
            xs in proptest::collection::vec(0.0f64..5.0, 1..20),
            t in -5.0f64..0.0,
            h in 0.05f64..2.0,
        ) {
            let cfg = EstimatorConfig::new(SmoothingKernel::Gaussian, h).with_boundary(0.0);
            prop_assert_eq!(smoothed_cdf(&sample(&xs), &cfg, t).unwrap(), 0.0);
        }

        #[test]
        fn edf_has_unit_mass(xs in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let e = edf(&sample(&xs)).unwrap();
            prop_assert!((e.total_mass() - 1.0).abs() < 1e-12);
            prop_assert_eq!(e.cumulative(-11.0), 0.0);
        }
    }
}
