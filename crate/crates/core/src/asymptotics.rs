//! Asymptotic MSE formulas: the variance expansion of the smoothed CDF
//! estimator, bias bounds, rate-optimal bandwidths and deficiencies.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::exp_int_e1;

/// Shape of the second-order MSE term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SecondOrderKind {
    /// `n^{-(r+δ)}`
    Power { delta: f64 },
    /// `n^{-r} / log n`
    LogFactor,
}

/// `MSE(n) = c n^{-r} + second · (second-order term)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseExpansion {
    pub c: f64,
    pub r: f64,
    pub second: f64,
    pub kind: SecondOrderKind,
}

impl MseExpansion {
    pub fn new(c: f64, r: f64, second: f64, kind: SecondOrderKind) -> Result<Self> {
        let e = Self { c, r, second, kind };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.r > 0.0) {
            return Err(Error::param("leading constant and rate must be positive"));
        }
        if !self.second.is_finite() {
            return Err(Error::param("second-order constant must be finite"));
        }
        if let SecondOrderKind::Power { delta } = self.kind {
            if !(delta > 0.0) {
                return Err(Error::param("power second-order term needs delta > 0"));
            }
        }
        Ok(())
    }

    /// The expansion evaluated at a real sample size.
    pub fn mse(&self, n: f64) -> f64 {
        let lead = self.c * n.powf(-self.r);
        match self.kind {
            SecondOrderKind::Power { delta } => lead + self.second * n.powf(-(self.r + delta)),
            SecondOrderKind::LogFactor => lead + self.second * n.powf(-self.r) / n.ln(),
        }
    }
}

/// Smoothness class of the target density through its characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum AssumptionTag {
    /// `∫ |s|^p |φ(s)| ds < ∞`
    A { p: f64 },
    /// `|φ(s)| <= D e^{-d|s|}`
    B {
        d: f64,
        #[serde(rename = "D")]
        big_d: f64,
    },
    /// `φ(s) = 0` for `|s| >= b`
    C { b: f64 },
}

impl AssumptionTag {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            AssumptionTag::A { p } => p > 0.0,
            AssumptionTag::B { d, big_d } => d > 0.0 && big_d > 0.0,
            AssumptionTag::C { b } => b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::param("assumption parameters must be positive"))
        }
    }
}

impl std::str::FromStr for AssumptionTag {
    type Err = Error;

    /// `A:p`, `B:d:D` or `C:b`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::param(format!("assumption `{s}` is missing a parameter")))?
                .parse::<f64>()
                .map_err(|e| Error::param(format!("assumption `{s}`: {e}")))
        };
        let tag = match (parts[0], parts.len()) {
            ("A", 2) => AssumptionTag::A { p: num(1)? },
            ("B", 3) => AssumptionTag::B { d: num(1)?, big_d: num(2)? },
            ("C", 2) => AssumptionTag::C { b: num(1)? },
            _ => return Err(Error::param(format!("cannot parse assumption `{s}`; use A:p, B:d:D or C:b"))),
        };
        tag.validate()?;
        Ok(tag)
    }
}

/// `F(1-F)/n - 2 f(t) · cross_moment · h / n`.
pub fn variance_expansion(f_cdf: f64, f_density: f64, h: f64, n: usize, cross_moment: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_cdf) || f_density < 0.0 || h < 0.0 || n == 0 {
        return Err(Error::param("variance expansion inputs out of range"));
    }
    let n = n as f64;
    Ok(f_cdf * (1.0 - f_cdf) / n - 2.0 * f_density * cross_moment * h / n)
}

/// Source of `|φ|` for [`bias_bound`].
#[derive(Debug, Clone, PartialEq)]
pub enum CharacteristicBound {
    /// Closed form for a smoothness class. `A(p)` is read as `|φ(s)| <= |s|^{-p}`.
    Assumption(AssumptionTag),
    /// `|φ|` sampled on ascending nonnegative frequencies.
    Table { freqs: Vec<f64>, magnitudes: Vec<f64> },
}

/// `(1/π) ∫_{|s| > 1/h} |φ(s)| / |s| ds`, the sup-norm bias bound of a
/// flat-top estimator with bandwidth `h`.
pub fn bias_bound(source: &CharacteristicBound, h: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::param("bandwidth must be positive"));
    }
    let lo = 1.0 / h;
    match source {
        CharacteristicBound::Assumption(tag) => {
            tag.validate()?;
            Ok(match *tag {
                AssumptionTag::A { p } => 2.0 * h.powf(p) / (PI * p),
                AssumptionTag::B { d, big_d } => 2.0 * big_d * exp_int_e1(d * lo) / PI,
                AssumptionTag::C { b } => {
                    if lo >= b {
                        0.0
                    } else {
                        2.0 * (b * h).ln() / PI
                    }
                }
            })
        }
        CharacteristicBound::Table { freqs, magnitudes } => table_bias_bound(freqs, magnitudes, lo),
    }
}

fn table_bias_bound(freqs: &[f64], mags: &[f64], lo: f64) -> Result<f64> {
    let n = freqs.len();
    if n < 4 || mags.len() != n {
        return Err(Error::param("|phi| table needs at least four matching points"));
    }
    if freqs[0] < 0.0 || freqs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::param("|phi| table frequencies must be nonnegative and increasing"));
    }
    // Power-law tail fitted to the last quarter of the positive entries.
    let tail: Vec<(f64, f64)> = freqs[3 * n / 4..]
        .iter()
        .zip(&mags[3 * n / 4..])
        .filter(|(&s, &m)| s > 0.0 && m > 0.0)
        .map(|(&s, &m)| (s.ln(), m.abs().ln()))
        .collect();
    let last = mags[n - 1].abs();
    let top = freqs[n - 1];
    let decay = if last == 0.0 {
        f64::INFINITY
    } else {
        if tail.len() < 2 {
            return Err(Error::DivergentTail { exponent: 0.0 });
        }
        let k = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / k;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / k;
        let slope = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / tail.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
        let decay = -slope;
        if !(decay > 0.0) {
            return Err(Error::DivergentTail { exponent: decay });
        }
        decay
    };
    // Exact integral of the piecewise-linear interpolant divided by s.
    let mut body = 0.0;
    for i in 0..n - 1 {
        let (s0, s1) = (freqs[i].max(lo), freqs[i + 1]);
        if s1 <= s0 {
            continue;
        }
        let slope = (mags[i + 1].abs() - mags[i].abs()) / (freqs[i + 1] - freqs[i]);
        let at = |s: f64| mags[i].abs() + slope * (s - freqs[i]);
        let intercept = at(s0) - slope * s0;
        if s0 <= 0.0 {
            return Err(Error::DivergentTail { exponent: f64::NAN });
        }
        body += intercept * (s1 / s0).ln() + slope * (s1 - s0);
    }
    // ∫_{max(lo, top)}^∞ last (s/top)^{-decay} / s ds
    let tail_part = if last == 0.0 {
        0.0
    } else {
        last / decay * (lo.max(top) / top).powf(-decay)
    };
    Ok(2.0 * (body + tail_part) / PI)
}

/// Rate-optimal bandwidth: `a n^{-1/(2p+1)}`, `a / log n` or `min(a, 1/b)`.
pub fn optimal_bandwidth_preset(tag: &AssumptionTag, n: usize, a: f64) -> Result<f64> {
    tag.validate()?;
    if !(a > 0.0) || n < 2 {
        return Err(Error::param("need a > 0 and n >= 2"));
    }
    let nf = n as f64;
    match *tag {
        AssumptionTag::A { p } => Ok(a * nf.powf(-1.0 / (2.0 * p + 1.0))),
        AssumptionTag::B { d, .. } => {
            if a >= 2.0 * d {
                return Err(Error::param(format!("assumption B needs a < 2d = {}", 2.0 * d)));
            }
            Ok(a / nf.ln())
        }
        AssumptionTag::C { b } => Ok(a.min(1.0 / b)),
    }
}

/// Growth rate of the deficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RateDescriptor {
    /// `d ~ n^{exponent}`
    Power { exponent: f64 },
    /// `d ~ n / log n`
    NOverLog,
}

impl RateDescriptor {
    pub fn at(&self, n: f64) -> f64 {
        match *self {
            RateDescriptor::Power { exponent } => n.powf(exponent),
            RateDescriptor::NOverLog => n / n.ln(),
        }
    }
}

impl std::fmt::Display for RateDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateDescriptor::Power { exponent } => write!(f, "n^{exponent}"),
            RateDescriptor::NOverLog => write!(f, "n/log n"),
        }
    }
}

fn check_matching(s: &MseExpansion, t: &MseExpansion) -> Result<()> {
    s.validate()?;
    t.validate()?;
    if s.c != t.c || s.r != t.r {
        return Err(Error::MismatchedExpansions(
            "leading terms differ, so the relative efficiency is not one".into(),
        ));
    }
    if s.kind != t.kind {
        return Err(Error::MismatchedExpansions("second-order terms are of different kinds".into()));
    }
    Ok(())
}

/// Limit of `d / rate(n)` where `d = m - n` and `MSE_T(m) = MSE_S(n)`.
pub fn deficiency_rate(s: &MseExpansion, t: &MseExpansion) -> Result<(f64, RateDescriptor)> {
    check_matching(s, t)?;
    let limit = (t.second - s.second) / (s.c * s.r);
    let rate = match s.kind {
        SecondOrderKind::Power { delta } => RateDescriptor::Power { exponent: 1.0 - delta },
        SecondOrderKind::LogFactor => RateDescriptor::NOverLog,
    };
    Ok((limit, rate))
}

/// Real `d` with `MSE_T(n + d) = MSE_S(n)`, found by bisection on the
/// expansions with their remainders dropped.
pub fn deficiency_exact(s: &MseExpansion, t: &MseExpansion, n: f64) -> Result<f64> {
    check_matching(s, t)?;
    if !(n > 1.0) {
        return Err(Error::param("sample size must exceed one"));
    }
    // Scaled by n^r: c·((1+d/n)^{-r} - 1) + b·g(n+d)·n^r - a·g(n)·n^r.
    let second = |m: f64| match s.kind {
        SecondOrderKind::Power { delta } => m.powf(-(s.r + delta)) * n.powf(s.r),
        SecondOrderKind::LogFactor => (n / m).powf(s.r) / m.ln(),
    };
    let gap = |d: f64| {
        s.c * (-s.r * (d / n).ln_1p()).exp_m1() + t.second * second(n + d) - s.second * second(n)
    };
    let mut lo = -0.9 * n;
    let mut hi = n;
    let mut g_lo = gap(lo);
    while gap(hi).signum() == g_lo.signum() {
        if hi > 1e6 * n {
            return Err(Error::param("deficiency root is not bracketed"));
        }
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid);
        if g == 0.0 || (hi - lo) <= 1e-12 * n.max(1.0) {
            return Ok(mid);
        }
        if g.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Deficiency of the smoothed CDF estimator relative to the EDF at a point:
/// `κ_A n^{2p/(2p+1)}`, `κ_A n / log n` or `κ_C n`, where
/// `κ_A = 2 a f cm / (F(1-F))` and `κ_C = 2 f cm / (F(1-F))`.
pub fn edf_deficiency(
    tag: &AssumptionTag,
    f_cdf: f64,
    f_density: f64,
    cross_moment: f64,
    n: usize,
    a: f64,
) -> Result<f64> {
    tag.validate()?;
    let binom = f_cdf * (1.0 - f_cdf);
    if !(binom > 0.0) {
        return Err(Error::Degenerate("F(t)(1 - F(t)) must be nonzero".into()));
    }
    let nf = n as f64;
    Ok(match *tag {
        AssumptionTag::A { p } => 2.0 * a * f_density * cross_moment / binom * nf.powf(2.0 * p / (2.0 * p + 1.0)),
        AssumptionTag::B { .. } => 2.0 * a * f_density * cross_moment / binom * nf / nf.ln(),
        AssumptionTag::C { .. } => 2.0 * f_density * cross_moment / binom * nf,
    })
}
