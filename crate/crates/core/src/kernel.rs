//! Flat-top functions κ and the infinite-order kernels they generate.
//!
//! A flat-top function equals one on `|s| <= c` and decays to zero by
//! `|s| = 1`. Its inverse Fourier transform is the kernel
//!
//! ```text
//! K(x)  = (1/π) ∫₀¹ κ(s) cos(sx) ds
//! K̄(t) = 1/2 + (1/π) ∫₀¹ κ(s) sin(st)/s ds      (K̄' = K)
//! ```
//!
//! The trapezoid family has closed forms for both; the smooth trapezoid is
//! integrated numerically. [`KernelTable`] tabulates `K` and `K̄` once so the
//! estimators can evaluate `K̄` by Hermite interpolation.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_pieces, QuadOptions};
use crate::special::{ci, normal_cdf, normal_pdf, si};

/// Below this `|x|` the trapezoid kernel switches to its Taylor expansion.
const TAYLOR_CUTOFF: f64 = 1e-3;
/// Absolute tolerance of the pointwise quadrature behind the smooth family.
const POINT_QUAD_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlatTopFamily {
    /// `g(x) = ((1 - x) / (1 - c))⁺`
    Trapezoid,
    /// `g(x) = exp(-b exp(-b / (x - c)²) / (x - 1)²)`
    SmoothTrapezoid,
}

impl FlatTopFamily {
    pub fn name(self) -> &'static str {
        match self {
            FlatTopFamily::Trapezoid => "trapezoid",
            FlatTopFamily::SmoothTrapezoid => "smooth-trapezoid",
        }
    }
}

impl std::str::FromStr for FlatTopFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" | "trap" => Ok(FlatTopFamily::Trapezoid),
            "smooth-trapezoid" | "smooth" => Ok(FlatTopFamily::SmoothTrapezoid),
            other => Err(Error::param(format!("unknown flat-top family `{other}`"))),
        }
    }
}

/// Parametric description of a flat-top function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatTopSpec {
    pub family: FlatTopFamily,
    /// Exact flat-top radius.
    pub c: f64,
    /// Smoothness parameter; only read by the smooth trapezoid.
    pub b: f64,
    /// Radius used by the bandwidth rule `h = effective_c / t*`.
    pub effective_c: f64,
}

impl FlatTopSpec {
    pub fn trapezoid(c: f64) -> Result<Self> {
        let spec = FlatTopSpec {
            family: FlatTopFamily::Trapezoid,
            c,
            b: 0.0,
            effective_c: c,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Smooth trapezoid. The effective radius defaults to 0.5 for the
    /// `(b, c) = (1, 0.05)` member and to `c` otherwise.
    pub fn smooth_trapezoid(b: f64, c: f64) -> Result<Self> {
        let effective_c = if b == 1.0 && c == 0.05 { 0.5 } else { c };
        let spec = FlatTopSpec {
            family: FlatTopFamily::SmoothTrapezoid,
            c,
            b,
            effective_c,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_effective_c(mut self, effective_c: f64) -> Result<Self> {
        self.effective_c = effective_c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::param(format!("flat-top radius c must lie in (0, 1), got {}", self.c)));
        }
        match self.family {
            FlatTopFamily::Trapezoid => {
                if self.effective_c != self.c {
                    return Err(Error::param("trapezoid effective radius must equal c"));
                }
            }
            FlatTopFamily::SmoothTrapezoid => {
                if !(self.b > 0.0 && self.b.is_finite()) {
                    return Err(Error::param(format!("smoothness b must be positive, got {}", self.b)));
                }
                if !(self.effective_c >= self.c && self.effective_c <= 1.0) {
                    return Err(Error::param(format!(
                        "effective radius must lie in [c, 1], got {}",
                        self.effective_c
                    )));
                }
            }
        }
        Ok(())
    }

    /// κ(s).
    pub fn kappa(&self, s: f64) -> f64 {
        let a = s.abs();
        if a <= self.c {
            return 1.0;
        }
        if a >= 1.0 {
            return 0.0;
        }
        match self.family {
            FlatTopFamily::Trapezoid => (1.0 - a) / (1.0 - self.c),
            FlatTopFamily::SmoothTrapezoid => {
                let inner = (-self.b / ((a - self.c) * (a - self.c))).exp();
                (-self.b * inner / ((a - 1.0) * (a - 1.0))).exp()
            }
        }
    }

    /// K(x).
    pub fn kernel(&self, x: f64) -> f64 {
        match self.family {
            FlatTopFamily::Trapezoid => trapezoid_kernel(self.c, x),
            FlatTopFamily::SmoothTrapezoid => self
                .kernel_by_quadrature(x)
                .unwrap_or_else(|e| panic!("smooth flat-top kernel at x={x}: {e}")),
        }
    }

    /// K̄(t) = ∫_{-∞}^t K.
    pub fn kbar(&self, t: f64) -> f64 {
        match self.family {
            FlatTopFamily::Trapezoid => trapezoid_kbar(self.c, t),
            FlatTopFamily::SmoothTrapezoid => self
                .kbar_by_quadrature(t)
                .unwrap_or_else(|e| panic!("smooth flat-top integrated kernel at t={t}: {e}")),
        }
    }

    /// `(1/π) ∫₀¹ κ(s) cos(sx) ds` by adaptive quadrature, for any family.
    pub fn kernel_by_quadrature(&self, x: f64) -> Result<f64> {
        let opts = QuadOptions::new(POINT_QUAD_TOL);
        let flat = if x == 0.0 { self.c } else { (self.c * x).sin() / x };
        let rest = integrate_pieces(
            |s| self.kappa(s) * (s * x).cos(),
            &oscillation_breaks(self.c, 1.0, x),
            &opts,
        )?;
        Ok((flat + rest.value) / PI)
    }

    /// `1/2 + (1/π) ∫₀¹ κ(s) sin(st)/s ds` by adaptive quadrature, for any family.
    pub fn kbar_by_quadrature(&self, t: f64) -> Result<f64> {
        let opts = QuadOptions::new(POINT_QUAD_TOL);
        let rest = integrate_pieces(
            |s| self.kappa(s) * (s * t).sin() / s,
            &oscillation_breaks(self.c, 1.0, t),
            &opts,
        )?;
        Ok(0.5 + (si(self.c * t) + rest.value) / PI)
    }

    /// Bound on `|1 - K̄(t)|` for `t > 0` from two integrations by parts of
    /// the Si asymptotics. Only available in closed form for the trapezoid.
    fn trapezoid_tail_bound(&self, t: f64) -> f64 {
        let c = self.c;
        ((1.0 + 1.0 / c) / (t * t) + 2.0 * (1.0 + 1.0 / (c * c)) / (t * t * t)) / (PI * (1.0 - c))
    }

    fn cache_key(&self, tol: f64) -> String {
        format!(
            "{}-c{:016x}-b{:016x}-e{:016x}-tol{:016x}",
            self.family.name(),
            self.c.to_bits(),
            self.b.to_bits(),
            self.effective_c.to_bits(),
            tol.to_bits()
        )
    }
}

type ScalarFn<'a> = Box<dyn Fn(f64) -> f64 + Sync + 'a>;

/// Breakpoints on `[lo, hi]` roughly every half period of `sin(s·x)` so each
/// quadrature piece sees a bounded number of oscillations.
fn oscillation_breaks(lo: f64, hi: f64, x: f64) -> Vec<f64> {
    let pieces = ((hi - lo) * x.abs() / PI).ceil().clamp(1.0, 4096.0) as usize;
    (0..=pieces)
        .map(|i| lo + (hi - lo) * i as f64 / pieces as f64)
        .collect()
}

fn trapezoid_kernel(c: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax < TAYLOR_CUTOFF {
        let x2 = x * x;
        let c2 = c * c;
        let series = (1.0 - c2) / 2.0 - (1.0 - c2 * c2) * x2 / 24.0 + (1.0 - c2 * c2 * c2) * x2 * x2 / 720.0
            - (1.0 - c2 * c2 * c2 * c2) * x2 * x2 * x2 / 40320.0;
        return series / (PI * (1.0 - c));
    }
    // cos(cx) - cos(x) = 2 sin((1+c)x/2) sin((1-c)x/2), free of cancellation.
    let num = 2.0 * ((1.0 + c) * ax / 2.0).sin() * ((1.0 - c) * ax / 2.0).sin();
    num / (PI * (1.0 - c) * ax * ax)
}

/// Closed form of K̄ for a trapezoid flat-top with radius `c` in `[0, 1)`.
/// `c = 0` gives the CDF of the density `(1 - cos x) / (π x²)`.
pub(crate) fn trapezoid_kbar(c: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let cos_diff = -2.0 * ((1.0 + c) * t / 2.0).sin() * ((1.0 - c) * t / 2.0).sin();
    let bracket = cos_diff / t + si(t) - c * si(c * t);
    0.5 + bracket / (PI * (1.0 - c))
}

#[derive(Debug, Clone, Copy)]
pub struct TableOptions {
    pub max_points: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { max_points: 1 << 22 }
    }
}

/// `K` and `K̄` tabulated on a uniform symmetric grid over `[-T, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    spec: FlatTopSpec,
    tol: f64,
    tail_cutoff: f64,
    step: f64,
    k_values: Vec<f64>,
    kbar_raw: Vec<f64>,
    kbar_values: Vec<f64>,
}

impl KernelTable {
    /// Build a table whose interpolated `K̄` is within `tol` of the exact
    /// integrated kernel everywhere, tails included.
    pub fn build(spec: FlatTopSpec, tol: f64) -> Result<Self> {
        Self::build_with(spec, tol, TableOptions::default())
    }

    pub fn build_with(spec: FlatTopSpec, tol: f64, opts: TableOptions) -> Result<Self> {
        spec.validate()?;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::param(format!("table tolerance must be positive, got {tol}")));
        }
        // Half the budget each for interpolation and tail truncation.
        // Hermite error <= step⁴/384 · max|K'''|, and |K'''| <= 1/(4π).
        let step_max = (384.0 * 0.5 * tol * 4.0 * PI).powf(0.25).min(1.0);
        // Grid points needed for a tail cutoff `t`, or the error if over the limit.
        let points_for = |t: f64| -> Result<usize> {
            let intervals = (2.0 * t / step_max).ceil();
            if intervals + 2.0 > opts.max_points as f64 {
                return Err(Error::ToleranceUnattainable {
                    tol,
                    needed: (intervals + 2.0).min(usize::MAX as f64) as usize,
                    limit: opts.max_points,
                });
            }
            Ok(intervals as usize)
        };
        let tail_cutoff = match spec.family {
            FlatTopFamily::Trapezoid => {
                let mut t = 1.0;
                while spec.trapezoid_tail_bound(t) > 0.5 * tol {
                    t *= 1.05;
                }
                t
            }
            FlatTopFamily::SmoothTrapezoid => smooth_tail_cutoff(&spec, 0.5 * tol, &points_for)?,
        };
        let intervals = points_for(tail_cutoff)?;
        // even interval count keeps x = 0 on the grid
        let intervals = intervals + intervals % 2;
        if intervals + 1 > opts.max_points {
            return Err(Error::ToleranceUnattainable {
                tol,
                needed: intervals + 1,
                limit: opts.max_points,
            });
        }
        let step = 2.0 * tail_cutoff / intervals as f64;
        let node = |i: usize| -tail_cutoff + step * i as f64;

        let pairs: Vec<(f64, f64)> = match spec.family {
            FlatTopFamily::Trapezoid => (0..=intervals)
                .into_par_iter()
                .map(|i| {
                    let x = node(i);
                    (trapezoid_kernel(spec.c, x), trapezoid_kbar(spec.c, x))
                })
                .collect(),
            FlatTopFamily::SmoothTrapezoid => {
                // K̄ is odd about 1/2, so only the right half is integrated.
                let half = intervals / 2;
                let right: Vec<(f64, f64)> = (half..=intervals)
                    .into_par_iter()
                    .map(|i| {
                        let x = node(i);
                        Ok((spec.kernel_by_quadrature(x)?, spec.kbar_by_quadrature(x)?))
                    })
                    .collect::<Result<_>>()?;
                let mut all = Vec::with_capacity(intervals + 1);
                for i in 0..half {
                    let (k, kb) = right[half - i];
                    all.push((k, 1.0 - kb));
                }
                all.extend_from_slice(&right);
                all
            }
        };
        let (k_values, kbar_raw): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let kbar_values = rectify(&kbar_raw);
        Ok(KernelTable {
            spec,
            tol,
            tail_cutoff,
            step,
            k_values,
            kbar_raw,
            kbar_values,
        })
    }

    pub fn spec(&self) -> &FlatTopSpec {
        &self.spec
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn tail_cutoff(&self) -> f64 {
        self.tail_cutoff
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.k_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_values.is_empty()
    }

    /// Grid abscissae.
    pub fn grid(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| -self.tail_cutoff + self.step * i as f64)
    }

    pub fn k_values(&self) -> &[f64] {
        &self.k_values
    }

    /// Integrated kernel exactly as computed at the nodes.
    pub fn kbar_raw(&self) -> &[f64] {
        &self.kbar_raw
    }

    /// Integrated kernel at the nodes after running max and clipping to [0, 1].
    pub fn kbar_values(&self) -> &[f64] {
        &self.kbar_values
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let pos = (x + self.tail_cutoff) / self.step;
        let i = (pos.floor() as usize).min(self.len() - 2);
        (i, pos - i as f64)
    }

    /// Interpolated K̄(t); exactly 0 below `-T` and 1 above `T`.
    #[inline]
    pub fn kbar(&self, t: f64) -> f64 {
        if t <= -self.tail_cutoff {
            return 0.0;
        }
        if t >= self.tail_cutoff {
            return 1.0;
        }
        let (i, u) = self.locate(t);
        let (y0, y1) = (self.kbar_raw[i], self.kbar_raw[i + 1]);
        let (d0, d1) = (self.k_values[i] * self.step, self.k_values[i + 1] * self.step);
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    }

    /// Rectified K̄(t): nondecreasing and inside [0, 1]. Cells untouched by
    /// rectification keep the Hermite value, clamped between their nodes;
    /// the others interpolate the rectified nodes linearly.
    pub fn kbar_rectified(&self, t: f64) -> f64 {
        if t <= -self.tail_cutoff {
            return 0.0;
        }
        if t >= self.tail_cutoff {
            return 1.0;
        }
        let (i, u) = self.locate(t);
        let (r0, r1) = (self.kbar_values[i], self.kbar_values[i + 1]);
        if r0 == self.kbar_raw[i] && r1 == self.kbar_raw[i + 1] {
            self.kbar(t).clamp(r0, r1)
        } else {
            r0 + u * (r1 - r0)
        }
    }

    /// Interpolated K(x) (four-point Lagrange); zero outside `[-T, T]`.
    pub fn kernel(&self, x: f64) -> f64 {
        if x.abs() >= self.tail_cutoff {
            return 0.0;
        }
        let (i, u) = self.locate(x);
        let n = self.len();
        if i == 0 || i + 2 >= n {
            let (a, b) = (self.k_values[i], self.k_values[i + 1]);
            return a + u * (b - a);
        }
        let (ym, y0, y1, y2) = (
            self.k_values[i - 1],
            self.k_values[i],
            self.k_values[i + 1],
            self.k_values[i + 2],
        );
        -u * (u - 1.0) * (u - 2.0) / 6.0 * ym + (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0 * y0
            - (u + 1.0) * u * (u - 2.0) / 2.0 * y1
            + (u + 1.0) * u * (u - 1.0) / 6.0 * y2
    }

    /// Trapezoidal sum of the tabulated kernel over `[-T, T]`.
    pub fn kernel_mass(&self) -> f64 {
        let n = self.len();
        let inner: f64 = self.k_values[1..n - 1].iter().sum();
        self.step * (inner + 0.5 * (self.k_values[0] + self.k_values[n - 1]))
    }

    // ---- cache -------------------------------------------------------

    const MAGIC: &'static [u8; 8] = b"FLTKTAB\0";
    const VERSION: u32 = 1;

    pub fn cache_path(dir: &Path, spec: &FlatTopSpec, tol: f64) -> PathBuf {
        dir.join(format!("{}.kt", spec.cache_key(tol)))
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        let family: u32 = match self.spec.family {
            FlatTopFamily::Trapezoid => 0,
            FlatTopFamily::SmoothTrapezoid => 1,
        };
        w.write_all(&family.to_le_bytes())?;
        for v in [self.spec.c, self.spec.b, self.spec.effective_c, self.tol, self.tail_cutoff, self.step] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for column in [&self.k_values, &self.kbar_raw] {
            for v in column.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let corrupt = |what: &str| Error::param(format!("kernel table cache: {what}"));
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(corrupt("bad magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != Self::VERSION {
            return Err(corrupt("unsupported version"));
        }
        r.read_exact(&mut b4)?;
        let family = match u32::from_le_bytes(b4) {
            0 => FlatTopFamily::Trapezoid,
            1 => FlatTopFamily::SmoothTrapezoid,
            _ => return Err(corrupt("unknown family")),
        };
        let mut b8 = [0u8; 8];
        let mut next_f64 = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let c = next_f64(&mut r)?;
        let b = next_f64(&mut r)?;
        let effective_c = next_f64(&mut r)?;
        let tol = next_f64(&mut r)?;
        let tail_cutoff = next_f64(&mut r)?;
        let step = next_f64(&mut r)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        if n < 2 || n > TableOptions::default().max_points {
            return Err(corrupt("implausible length"));
        }
        let mut read_column = |r: &mut R| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                out.push(f64::from_le_bytes(b8));
            }
            Ok(out)
        };
        let k_values = read_column(&mut r)?;
        let kbar_raw = read_column(&mut r)?;
        let spec = FlatTopSpec {
            family,
            c,
            b,
            effective_c,
        };
        spec.validate()?;
        let kbar_values = rectify(&kbar_raw);
        Ok(KernelTable {
            spec,
            tol,
            tail_cutoff,
            step,
            k_values,
            kbar_raw,
            kbar_values,
        })
    }

    /// Load a cached table for `(spec, tol)` from `dir`, rebuilding and
    /// rewriting it when the file is missing, unreadable or keyed differently.
    pub fn load_or_build(dir: &Path, spec: FlatTopSpec, tol: f64) -> Result<Self> {
        let path = Self::cache_path(dir, &spec, tol);
        if let Ok(f) = File::open(&path) {
            if let Ok(table) = Self::read_binary(BufReader::new(f)) {
                if table.spec == spec && table.tol == tol {
                    return Ok(table);
                }
            }
        }
        let table = Self::build(spec, tol)?;
        std::fs::create_dir_all(dir)?;
        let tmp = path.with_extension("kt.tmp");
        {
            let mut w = BufWriter::new(File::create(&tmp)?);
            table.write_binary(&mut w)?;
            w.flush()?;
        }
        std::fs::rename(&tmp, &path)?;
        Ok(table)
    }
}

/// Running maximum followed by clipping to [0, 1].
pub fn rectify(values: &[f64]) -> Vec<f64> {
    let mut run = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            run = run.max(v);
            run.clamp(0.0, 1.0)
        })
        .collect()
}

/// Smallest power-of-two multiple of 8 beyond which the sampled tail of the
/// smooth kernel stays below `tol` over four further doublings.
fn smooth_tail_cutoff(spec: &FlatTopSpec, tol: f64, points_for: &dyn Fn(f64) -> Result<usize>) -> Result<f64> {
    let mut t: f64 = 8.0;
    while t < 1e6 {
        points_for(t)?;
        let hi = 16.0 * t;
        let samples = ((hi - t) / 0.25).ceil() as usize;
        let worst = (0..=samples)
            .into_par_iter()
            .map(|i| {
                let x = t + (hi - t) * i as f64 / samples as f64;
                spec.kbar_by_quadrature(x).map(|v| (1.0 - v).abs())
            })
            .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
        if worst <= 0.5 * tol {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(Error::param("smooth flat-top tail does not decay within 1e6"))
}

/// Kernel used for smoothing: a tabulated flat-top kernel or the Gaussian
/// second-order comparator.
#[derive(Debug, Clone, Copy)]
pub enum SmoothingKernel<'a> {
    FlatTop(&'a KernelTable),
    Gaussian,
}

impl SmoothingKernel<'_> {
    #[inline]
    pub fn kbar(&self, t: f64) -> f64 {
        match self {
            SmoothingKernel::FlatTop(table) => table.kbar(t),
            SmoothingKernel::Gaussian => normal_cdf(t),
        }
    }

    pub fn kernel(&self, x: f64) -> f64 {
        match self {
            SmoothingKernel::FlatTop(table) => table.kernel(x),
            SmoothingKernel::Gaussian => normal_pdf(x),
        }
    }
}

/// Value of `∫ u K̄(u) K(u) du` with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMoment {
    pub value: f64,
    pub abs_error: f64,
}

/// Which quadrature route `kernel_cross_moment` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossMomentRoute {
    /// `∫_{-T}^{T} u K̄(u) K(u) du`
    FullLine,
    /// `2 ∫_0^T u K(u) (K̄(u) - 1/2) du`
    FoldedHalfLine,
}

const CROSS_MOMENT_SPAN: f64 = 400.0;
/// Closed forms are cheap, so the trapezoid integrates further out.
const TRAPEZOID_CROSS_MOMENT_SPAN: f64 = 4000.0;

/// `∫ u K̄(u) K(u) du`, the constant of the second-order variance term.
pub fn kernel_cross_moment(kernel: SmoothingKernel<'_>) -> Result<CrossMoment> {
    kernel_cross_moment_via(kernel, CrossMomentRoute::FoldedHalfLine)
}

pub fn kernel_cross_moment_via(kernel: SmoothingKernel<'_>, route: CrossMomentRoute) -> Result<CrossMoment> {
    let opts = QuadOptions::new(1e-12);
    match kernel {
        SmoothingKernel::Gaussian => {
            let span = 12.0;
            let r = match route {
                CrossMomentRoute::FullLine => {
                    integrate(|u| u * normal_cdf(u) * normal_pdf(u), -span, span, &opts)?
                }
                CrossMomentRoute::FoldedHalfLine => {
                    integrate(|u| 2.0 * u * normal_pdf(u) * (normal_cdf(u) - 0.5), 0.0, span, &opts)?
                }
            };
            // Tail mass beyond 12 is below 1e-30.
            Ok(CrossMoment {
                value: r.value,
                abs_error: r.abs_error,
            })
        }
        SmoothingKernel::FlatTop(table) => {
            let spec = *table.spec();
            let span = match spec.family {
                FlatTopFamily::Trapezoid => TRAPEZOID_CROSS_MOMENT_SPAN,
                FlatTopFamily::SmoothTrapezoid => CROSS_MOMENT_SPAN.min(table.tail_cutoff()),
            };
            let (k, kb): (ScalarFn<'_>, ScalarFn<'_>) = match spec.family {
                FlatTopFamily::Trapezoid => (
                    Box::new(move |x| trapezoid_kernel(spec.c, x)),
                    Box::new(move |x| trapezoid_kbar(spec.c, x)),
                ),
                FlatTopFamily::SmoothTrapezoid => (Box::new(|x| table.kernel(x)), Box::new(|x| table.kbar(x))),
            };
            let body = match route {
                CrossMomentRoute::FullLine => {
                    let breaks = half_period_breaks(-span, span);
                    integrate_pieces(|u| u * kb(u) * k(u), &breaks, &opts)?
                }
                CrossMomentRoute::FoldedHalfLine => {
                    let breaks = half_period_breaks(0.0, span);
                    integrate_pieces(|u| 2.0 * u * k(u) * (kb(u) - 0.5), &breaks, &opts)?
                }
            };
            let (tail, tail_err) = match spec.family {
                FlatTopFamily::Trapezoid => {
                    // For u > span, u·K(u)·(2K̄(u) - 1) = u·K(u) + O(u⁻³); the
                    // leading part integrates to (Ci(span) - Ci(c·span)) / (π(1-c)).
                    let c = spec.c;
                    let lead = (ci(span) - ci(c * span)) / (PI * (1.0 - c));
                    let rem = 2.0 * 2.0 / (PI * (1.0 - c)) * spec.trapezoid_tail_bound(span);
                    (lead, rem)
                }
                FlatTopFamily::SmoothTrapezoid => (0.0, table.tol() * (1.0 + span)),
            };
            Ok(CrossMoment {
                value: body.value + tail,
                abs_error: body.abs_error + tail_err,
            })
        }
    }
}

fn half_period_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let pieces = ((hi - lo) / PI).ceil().max(1.0) as usize;
    (0..=pieces)
        .map(|i| lo + (hi - lo) * i as f64 / pieces as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trap() -> FlatTopSpec {
        FlatTopSpec::trapezoid(0.75).unwrap()
    }

    fn smooth() -> FlatTopSpec {
        FlatTopSpec::smooth_trapezoid(1.0, 0.05).unwrap()
    }

    #[test]
    fn kappa_examples() {
        assert_abs_diff_eq!(trap().kappa(0.9), 0.4, epsilon = 1e-15);
        assert_eq!(trap().kappa(0.0), 1.0);
        assert_eq!(smooth().kappa(0.0), 1.0);
        assert_eq!(smooth().kappa(1.2), 0.0);
        assert_eq!(smooth().kappa(-1.0), 0.0);
        assert_eq!(trap().kappa(-0.75), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(FlatTopSpec::trapezoid(0.0).is_err());
        assert!(FlatTopSpec::trapezoid(1.0).is_err());
        assert!(FlatTopSpec::smooth_trapezoid(0.0, 0.05).is_err());
        assert!(smooth().with_effective_c(0.01).is_err());
        assert_eq!(smooth().effective_c, 0.5);
        assert_eq!(FlatTopSpec::smooth_trapezoid(2.0, 0.1).unwrap().effective_c, 0.1);
        assert_eq!(trap().effective_c, 0.75);
    }

    #[test]
    fn trapezoid_kernel_at_zero_and_pi() {
        // oracle: (1/π)∫₀¹ κ(s) ds = (1 + c) / (2π)
        let k0 = trap().kernel(0.0);
        assert_abs_diff_eq!(k0, 1.75 / (2.0 * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(k0, 0.278_521, epsilon = 1e-6);
        let kpi = trap().kernel(PI);
        let expected = ((0.75 * PI).cos() + 1.0) / (PI * 0.25 * PI * PI);
        assert_abs_diff_eq!(kpi, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(kpi, 0.037_785_022_927_250_8, epsilon = 1e-12);
        assert_abs_diff_eq!(trap().kernel_by_quadrature(PI).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn taylor_branch_is_continuous() {
        let s = trap();
        for &x in &[0.999e-3, 1.001e-3, -0.5e-3] {
            let q = s.kernel_by_quadrature(x).unwrap();
            assert_abs_diff_eq!(s.kernel(x), q, epsilon = 1e-12);
        }
    }

    #[test]
    fn kbar_two_routes_agree_at_two() {
        let s = trap();
        let closed = s.kbar(2.0);
        let quad = s.kbar_by_quadrature(2.0).unwrap();
        assert!((closed - quad).abs() <= 1e-8, "{closed} vs {quad}");
        assert_eq!(s.kbar(0.0), 0.5);
        assert_abs_diff_eq!(s.kbar(1e7), 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(s.kbar(-1e7), 0.0, epsilon = 1e-7);
    }

    #[test]
    fn smooth_kernel_is_even() {
        let s = smooth();
        for &x in &[0.3, 2.0, 7.5] {
            assert_abs_diff_eq!(s.kernel(x), s.kernel(-x), epsilon = 1e-14);
            assert_abs_diff_eq!(s.kbar(x) + s.kbar(-x), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trapezoid_tail_bound_holds() {
        let s = trap();
        for &t in &[5.0, 20.0, 77.7, 400.0, 3000.0] {
            assert!((1.0 - s.kbar(t)).abs() <= s.trapezoid_tail_bound(t));
        }
    }

    #[test]
    fn table_contract_trapezoid() {
        let table = KernelTable::build(trap(), 1e-7).unwrap();
        assert!(table.kbar_raw()[0] <= table.tol());
        assert!(*table.kbar_raw().last().unwrap() >= 1.0 - table.tol());
        assert_abs_diff_eq!(table.kbar(0.0), 0.5, epsilon = 1e-12);
        let mass = table.kernel_mass();
        assert!((mass - 1.0).abs() <= 10.0 * table.tol(), "mass {mass}");
        let n = table.len();
        for i in (0..n / 2).step_by(997) {
            assert_abs_diff_eq!(table.k_values()[i], table.k_values()[n - 1 - i], epsilon = 1e-12);
        }
    }

    #[test]
    fn rectified_lookup_is_monotone_and_accurate() {
        let table = KernelTable::build(smooth(), 1e-6).unwrap();
        let xs: Vec<f64> = (0..20_001).map(|i| -40.0 + 0.004 * i as f64).collect();
        let vs: Vec<f64> = xs.iter().map(|&x| table.kbar_rectified(x)).collect();
        assert!(vs.windows(2).all(|w| w[0] <= w[1]));
        assert!(vs.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_abs_diff_eq!(table.kbar_rectified(1.0), table.kbar(1.0), epsilon = 1e-12);
    }

    #[test]
    fn rectified_table_is_a_cdf_path() {
        let table = KernelTable::build(smooth(), 1e-7).unwrap();
        let r = table.kbar_values();
        assert!(r.windows(2).all(|w| w[0] <= w[1]));
        assert!(r.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_abs_diff_eq!(table.kbar(0.0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn unattainable_tolerance_is_reported() {
        let err = KernelTable::build_with(trap(), 1e-12, TableOptions { max_points: 10_000 }).unwrap_err();
        assert!(matches!(err, Error::ToleranceUnattainable { .. }));
        assert!(KernelTable::build(trap(), 0.0).is_err());
    }

    #[test]
    fn binary_cache_roundtrip_and_invalidation() {
        let dir = std::env::temp_dir().join(format!("flattop-cache-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let a = KernelTable::load_or_build(&dir, trap(), 1e-5).unwrap();
        let b = KernelTable::load_or_build(&dir, trap(), 1e-5).unwrap();
        assert_eq!(a, b);
        let other = FlatTopSpec::trapezoid(0.5).unwrap();
        let p1 = KernelTable::cache_path(&dir, &trap(), 1e-5);
        let p2 = KernelTable::cache_path(&dir, &other, 1e-5);
        assert_ne!(p1, p2);
        // a file whose key disagrees with the request is rebuilt
        std::fs::copy(&p1, &p2).unwrap();
        let c = KernelTable::load_or_build(&dir, other, 1e-5).unwrap();
        assert_eq!(c.spec().c, 0.5);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn gaussian_cross_moment() {
        let cm = kernel_cross_moment(SmoothingKernel::Gaussian).unwrap();
        assert_abs_diff_eq!(cm.value, 1.0 / (2.0 * PI.sqrt()), epsilon = 1e-10);
        let full = kernel_cross_moment_via(SmoothingKernel::Gaussian, CrossMomentRoute::FullLine).unwrap();
        assert_abs_diff_eq!(full.value, cm.value, epsilon = 1e-11);
    }
}
