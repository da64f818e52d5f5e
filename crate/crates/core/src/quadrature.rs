//! Globally adaptive Gauss–Kronrod (7/15) integration.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below the absolute tolerance. Running into the depth or
//! interval limit is an error, never a silently truncated value.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub max_depth: u32,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            max_depth: 60,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Integrate `f` over the finite interval `[lo, hi]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, opts: &QuadOptions) -> Result<Integral> {
    if lo == hi {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
        });
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::param("integration limits must be finite"));
    }
    let (value, error) = kronrod(&f, lo, hi);
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        lo,
        hi,
        value,
        error,
        depth: 0,
    });
    let mut total_error = error;
    let mut total_abs = value.abs();
    loop {
        // Past ~50 ulps of the accumulated magnitude the estimate is roundoff.
        if total_error <= opts.abs_tol.max(50.0 * f64::EPSILON * total_abs) {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature {
                lo,
                hi,
                tol: opts.abs_tol,
                estimate: total_error,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        if worst.depth >= opts.max_depth {
            return Err(Error::Quadrature {
                lo,
                hi,
                tol: opts.abs_tol,
                estimate: total_error,
            });
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1) = kronrod(&f, worst.lo, mid);
        let (v2, e2) = kronrod(&f, mid, worst.hi);
        total_error += e1 + e2 - worst.error;
        total_abs += v1.abs() + v2.abs() - worst.value.abs();
        for (a, b, v, e) in [(worst.lo, mid, v1, e1), (mid, worst.hi, v2, e2)] {
            heap.push(Segment {
                lo: a,
                hi: b,
                value: v,
                error: e,
                depth: worst.depth + 1,
            });
        }
    }
    // Re-sum from the segments in order so the value is independent of heap history.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let value = segs.iter().map(|s| s.value).sum();
    let abs_error = segs.iter().map(|s| s.error).sum::<f64>().max(0.0);
    Ok(Integral { value, abs_error })
}

/// Integrate `f` over `[lo, ∞)` through the map `x = lo + (1 - u) / u`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, lo: f64, opts: &QuadOptions) -> Result<Integral> {
    integrate(
        |u: f64| {
            let x = lo + (1.0 - u) / u;
            f(x) / (u * u)
        },
        0.0,
        1.0,
        opts,
    )
}

/// Integrate over the union of consecutive breakpoints, summing values and
/// error estimates; each piece gets a share of the tolerance.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], opts: &QuadOptions) -> Result<Integral> {
    let pieces = breaks.len().saturating_sub(1).max(1);
    let local = QuadOptions {
        abs_tol: opts.abs_tol / pieces as f64,
        ..*opts
    };
    let mut out = Integral {
        value: 0.0,
        abs_error: 0.0,
    };
    for w in breaks.windows(2) {
        let r = integrate(&f, w[0], w[1], &local)?;
        out.value += r.value;
        out.abs_error += r.abs_error;
    }
    Ok(out)
}
