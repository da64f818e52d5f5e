//! Special functions used by the kernel closed forms and the true-distribution
//! oracles: sine/cosine integrals, the exponential integral E1 and the
//! standard normal CDF and quantile.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, SQRT_2};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 500;

/// Sine and cosine integrals `(Si(x), Ci(x))`.
///
/// Power series for `|x| <= 2`, Lentz continued fraction for the complex
/// exponential integral `E1(ix)` beyond. Both branches are accurate to a few
/// ulps; `Ci(0)` is `-inf`.
pub fn sici(x: f64) -> (f64, f64) {
    let t = x.abs();
    if t == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let (si, ci) = if t > 2.0 {
        let mut b = Complex64::new(1.0, t);
        let mut c = Complex64::new(1.0 / FPMIN, 0.0);
        let mut d = b.inv();
        let mut h = d;
        for i in 2..MAX_ITER {
            let a = -(((i - 1) * (i - 1)) as f64);
            b += Complex64::new(2.0, 0.0);
            d = (d * a + b).inv();
            c = b + c.inv() * a;
            let del = c * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex64::new(t.cos(), -t.sin());
        (FRAC_PI_2 + h.im, -h.re)
    } else {
        // Si and Ci series interleave: odd powers feed Si, even powers feed Ci.
        let mut sum_s = 0.0;
        let mut sum_c = 0.0;
        let mut fact = 1.0;
        let mut sign = 1.0;
        for k in 1..MAX_ITER {
            fact *= t / k as f64;
            let term = fact / k as f64;
            if k % 2 == 1 {
                sum_s += sign * term;
            } else {
                sign = -sign;
                sum_c += sign * term;
            }
            if term < 1e-18 {
                break;
            }
        }
        (sum_s, sum_c + t.ln() + EULER_GAMMA)
    };
    if x < 0.0 {
        (-si, ci)
    } else {
        (si, ci)
    }
}

pub fn si(x: f64) -> f64 {
    sici(x).0
}

pub fn ci(x: f64) -> f64 {
    sici(x).1
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-s}/s ds` for `x > 0`.
pub fn exp_int_e1(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    if x > 1.0 {
        let mut b = x + 1.0;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let a = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h * (-x).exp()
    } else {
        let mut ans = -x.ln() - EULER_GAMMA;
        let mut fact = 1.0;
        for i in 1..MAX_ITER {
            fact *= -x / i as f64;
            let del = -fact / i as f64;
            ans += del;
            if del.abs() < ans.abs() * EPS {
                break;
            }
        }
        ans
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // one Newton step against the accurate CDF
    let d = normal_pdf(x);
    if d > 0.0 {
        x - (normal_cdf(x) - p) / d
    } else {
        x
    }
}
