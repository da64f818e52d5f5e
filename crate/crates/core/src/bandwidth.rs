//! Bandwidth selection from the empirical characteristic function, plus a
//! leave-one-out cross-validation bandwidth for the Gaussian comparator.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::{edf, quantile_sorted, CensoredSample, StepEstimate};
use crate::error::{Error, Result};
use crate::special::normal_cdf;
use crate::survival::kaplan_meier;

/// Points on the default frequency grid.
pub const DEFAULT_FREQ_POINTS: usize = 512;

/// `|φ̂|` sampled on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcfCurve {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthMode {
    /// First frequency after which `|φ̂|` stays below the threshold.
    Threshold,
    /// First frequency at which `|φ̂|` levels off.
    Plateau,
}

impl std::str::FromStr for BandwidthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(BandwidthMode::Threshold),
            "plateau" => Ok(BandwidthMode::Plateau),
            other => Err(Error::param(format!("unknown bandwidth mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRule {
    #[serde(rename = "C")]
    pub c_const: f64,
    pub epsilon: f64,
    pub effective_c: f64,
    pub mode: BandwidthMode,
}

/// `max(1, log₁₀ n)`.
pub fn default_epsilon(n: usize) -> f64 {
    (n as f64).log10().max(1.0)
}

/// `C √(log₁₀ n / n)`.
pub fn threshold_level(c_const: f64, n: usize) -> f64 {
    let n = n as f64;
    c_const * (n.log10() / n).sqrt()
}

impl BandwidthRule {
    /// `C = 2`, `ε = max(1, log₁₀ n)`.
    pub fn threshold(n: usize, effective_c: f64) -> Self {
        Self {
            c_const: 2.0,
            epsilon: default_epsilon(n),
            effective_c,
            mode: BandwidthMode::Threshold,
        }
    }

    /// `C = 0.5`, `ε = max(1, log₁₀ n) / 2`. The slope tolerance `C√(log₁₀ n / n) / ε`
    /// then equals `√(log₁₀ n / n) / max(1, log₁₀ n)`.
    pub fn plateau(n: usize, effective_c: f64) -> Self {
        Self {
            c_const: 0.5,
            epsilon: 0.5 * default_epsilon(n),
            effective_c,
            mode: BandwidthMode::Plateau,
        }
    }

    pub fn for_mode(mode: BandwidthMode, n: usize, effective_c: f64) -> Self {
        match mode {
            BandwidthMode::Threshold => Self::threshold(n, effective_c),
            BandwidthMode::Plateau => Self::plateau(n, effective_c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_const > 0.0 && self.c_const.is_finite()) {
            return Err(Error::param(format!("threshold constant C must be positive, got {}", self.c_const)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::param(format!("window width must be positive, got {}", self.epsilon)));
        }
        if !(self.effective_c > 0.0 && self.effective_c <= 1.0) {
            return Err(Error::param(format!(
                "effective flat-top radius must lie in (0, 1], got {}",
                self.effective_c
            )));
        }
        Ok(())
    }
}

/// Jump measure used for the ECF: the EDF for uncensored data, the
/// Kaplan–Meier jumps otherwise.
pub fn mass_measure(sample: &CensoredSample) -> Result<StepEstimate> {
    if sample.is_uncensored() {
        edf(sample)
    } else {
        kaplan_meier(sample)
    }
}

/// `|Σ s_j e^{itX_j}|` on `freqs`; `n` is recorded for the threshold.
pub fn ecf_of_measure(measure: &StepEstimate, n: usize, freqs: &[f64]) -> Result<EcfCurve> {
    if measure.jump_locations().is_empty() {
        return Err(Error::sample("empty sample"));
    }
    if freqs.iter().any(|f| !(*f >= 0.0)) || freqs.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("frequencies must be nonnegative and ascending"));
    }
    let xs = measure.jump_locations();
    let ws = measure.jump_heights();
    let at = |f: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (&x, &w) in xs.iter().zip(ws) {
            let (s, c) = (f * x).sin_cos();
            re += w * c;
            im += w * s;
        }
        re.hypot(im)
    };
    let magnitudes = if xs.len() * freqs.len() > 200_000 {
        freqs.par_iter().map(|&f| at(f)).collect()
    } else {
        freqs.iter().map(|&f| at(f)).collect()
    };
    Ok(EcfCurve {
        freqs: freqs.to_vec(),
        magnitudes,
        n,
    })
}

/// Normalized ECF of a sample; Kaplan–Meier weighted under censoring.
pub fn ecf(sample: &CensoredSample, freqs: &[f64]) -> Result<EcfCurve> {
    ecf_of_measure(&mass_measure(sample)?, sample.len(), freqs)
}

/// 512 equispaced frequencies on `[0, 4π / (IQR / 1.349)]`, with the IQR
/// taken over the mass-carrying locations.
pub fn default_frequency_grid(locations: &[f64]) -> Result<Vec<f64>> {
    frequency_grid(locations, DEFAULT_FREQ_POINTS)
}

pub fn frequency_grid(locations: &[f64], points: usize) -> Result<Vec<f64>> {
    uniform_frequency_grid(default_frequency_max(locations)?, points)
}

/// `4π / (IQR / 1.349)` over the mass-carrying locations.
pub fn default_frequency_max(locations: &[f64]) -> Result<f64> {
    let mut v = locations.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return Err(Error::sample("empty sample"));
    }
    let spread = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    if !(spread > 0.0) {
        return Err(Error::Degenerate(
            "interquartile range is zero; supply an explicit frequency grid".into(),
        ));
    }
    Ok(4.0 * PI / (spread / 1.349))
}

/// `points` equispaced frequencies on `[0, top]`.
pub fn uniform_frequency_grid(top: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::param("frequency grid needs at least two points"));
    }
    if !(top > 0.0 && top.is_finite()) {
        return Err(Error::param(format!("maximum frequency must be positive, got {top}")));
    }
    Ok((0..points).map(|i| top * i as f64 / (points - 1) as f64).collect())
}

/// Cutoff frequency `t*` selected by `rule`.
pub fn select_cutoff(curve: &EcfCurve, rule: &BandwidthRule) -> Result<f64> {
    rule.validate()?;
    if curve.freqs.len() < 3 || curve.freqs.len() != curve.magnitudes.len() {
        return Err(Error::param("ECF curve needs at least three matching points"));
    }
    if curve.n < 2 {
        return Err(Error::sample("bandwidth selection needs at least two observations"));
    }
    let fr = &curve.freqs;
    let max_freq = *fr.last().unwrap();
    let thr = threshold_level(rule.c_const, curve.n);
    match rule.mode {
        BandwidthMode::Threshold => {
            // Smallest positive grid t with |φ̂| < thr on every grid point of (t, t + ε).
            let above: Vec<bool> = curve.magnitudes.iter().map(|&m| !(m < thr)).collect();
            for i in 1..fr.len() {
                if fr[i] + rule.epsilon > max_freq {
                    break;
                }
                let end = fr.partition_point(|&f| f < fr[i] + rule.epsilon);
                if !above[i + 1..end].iter().any(|&a| a) {
                    return Ok(fr[i]);
                }
            }
            Err(Error::NoPlateau { max_freq })
        }
        BandwidthMode::Plateau => {
            let df = fr[1] - fr[0];
            let width = ((rule.epsilon / df).round() as usize).max(2);
            if width > fr.len() {
                return Err(Error::NoPlateau { max_freq });
            }
            let slopes = window_slopes(fr, &curve.magnitudes, width);
            let tol = thr / rule.epsilon;
            let steepest = slopes
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            let flat: Vec<bool> = slopes.iter().map(|&s| s >= -tol).collect();
            let start = steepest.max(1);
            for i in start..flat.len() {
                if i + width > flat.len() {
                    break;
                }
                if flat[i..i + width].iter().all(|&f| f) {
                    return Ok(fr[i]);
                }
            }
            Err(Error::NoPlateau { max_freq })
        }
    }
}

/// `ĥ = effective_c / t*`.
pub fn select_bandwidth(curve: &EcfCurve, rule: &BandwidthRule) -> Result<f64> {
    Ok(rule.effective_c / select_cutoff(curve, rule)?)
}

/// Least-squares slopes of `y` over every window of `width` consecutive points.
fn window_slopes(x: &[f64], y: &[f64], width: usize) -> Vec<f64> {
    let w = width as f64;
    (0..=x.len() - width)
        .map(|i| {
            let xs = &x[i..i + width];
            let ys = &y[i..i + width];
            let mx = xs.iter().sum::<f64>() / w;
            let my = ys.iter().sum::<f64>() / w;
            let (sxy, sxx) = xs.iter().zip(ys).fold((0.0, 0.0), |(sxy, sxx), (&a, &b)| {
                (sxy + (a - mx) * (b - my), sxx + (a - mx) * (a - mx))
            });
            sxy / sxx
        })
        .collect()
}

/// `count` log-spaced bandwidths on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Points of the fixed quadrature grid in the CV objective.
const CV_POINTS: usize = 101;

/// Leave-one-out cross-validation score for the Gaussian-kernel CDF estimator
/// of a jump measure (weights normalized to one), integrated with unit weight
/// over the sample range extended by `3h`.
pub fn cv_score_gaussian(measure: &StepEstimate, h: f64) -> Result<f64> {
    let xs = measure.jump_locations();
    let total = measure.total_mass();
    let ws: Vec<f64> = measure.jump_heights().iter().map(|w| w / total).collect();
    if ws.iter().any(|&w| w >= 1.0) {
        return Err(Error::sample("cross-validation needs at least two distinct points"));
    }
    let lo = xs[0] - 3.0 * h;
    let hi = xs[xs.len() - 1] + 3.0 * h;
    let dt = (hi - lo) / (CV_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..CV_POINTS).map(|k| lo + dt * k as f64).collect();
    let phi: Vec<Vec<f64>> = xs
        .iter()
        .map(|&x| grid.iter().map(|&t| normal_cdf((t - x) / h)).collect())
        .collect();
    let full: Vec<f64> = (0..CV_POINTS)
        .map(|k| ws.iter().zip(&phi).map(|(w, p)| w * p[k]).sum())
        .collect();
    let mut score = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..CV_POINTS {
            let loo = (full[k] - ws[i] * phi[i][k]) / (1.0 - ws[i]);
            let ind = if x <= grid[k] { 1.0 } else { 0.0 };
            let r = ind - loo;
            let weight = if k == 0 || k == CV_POINTS - 1 { 0.5 } else { 1.0 };
            acc += weight * r * r;
        }
        score += ws[i] * acc * dt;
    }
    Ok(score)
}

/// Argmin of the CV score over `h_grid`. Scores within a relative `1e-9` of
/// the minimum count as ties, resolved toward the larger bandwidth.
pub fn cv_bandwidth_gaussian(sample: &CensoredSample, h_grid: &[f64]) -> Result<f64> {
    cv_bandwidth_gaussian_measure(&mass_measure(sample)?, h_grid)
}

pub fn cv_bandwidth_gaussian_measure(measure: &StepEstimate, h_grid: &[f64]) -> Result<f64> {
    if h_grid.is_empty() {
        return Err(Error::param("bandwidth grid is empty"));
    }
    if h_grid.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(Error::param("bandwidth grid values must be positive"));
    }
    if h_grid.len() == 1 {
        return Ok(h_grid[0]);
    }
    let xs = measure.jump_locations();
    if xs.len() == 1 {
        // One distinct location: the score does not depend on h.
        return Ok(h_grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    let scores = h_grid
        .iter()
        .map(|&h| cv_score_gaussian(measure, h))
        .collect::<Result<Vec<f64>>>()?;
    let best = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let cut = best + 1e-9 * best.abs();
    Ok(h_grid
        .iter()
        .zip(&scores)
        .filter(|(_, &s)| s <= cut)
        .map(|(&h, _)| h)
        .fold(f64::NEG_INFINITY, f64::max))
}
