//! One-dimensional adaptive quadrature: Gauss–Kronrod (7/15) and Simpson.
//!
//! Two unrelated rules are kept on purpose so reference values can be
//! cross-checked against each other.

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature did not reach tolerance (estimate {estimate}, error {error})")]
    NotConverged { estimate: f64, error: f64 },
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("integrand returned a non-finite value at {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Truncation radius for integrals over the real line.
    pub domain_halfwidth: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            domain_halfwidth: 60.0,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(QuadratureError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.domain_halfwidth > 0.0 && self.domain_halfwidth.is_finite()) {
            return Err(QuadratureError::InvalidConfig(
                "domain_halfwidth must be positive and finite",
            ));
        }
        Ok(())
    }
}

const MAX_DEPTH: usize = 60;
const MAX_INTERVALS: usize = 50_000;

// Kronrod 15-point nodes and weights; odd indices 1,3,5 and the centre carry
// the embedded 7-point Gauss rule.
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
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64), QuadratureError> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = eval(f, c)?;
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = eval(f, c - dx)? + eval(f, c + dx)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kron * h, ((kron - gauss) * h).abs()))
}

fn eval<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, QuadratureError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(QuadratureError::NonFinite(x))
    }
}

struct Interval {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64, QuadratureError> {
    // Seed panels so a narrow bulk inside a wide domain is not missed by
    // the first 15-point rule.
    const PANELS: usize = 24;
    let mut heap = std::collections::BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    let h = (b - a) / PANELS as f64;
    for p in 0..PANELS {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == PANELS { b } else { lo + h };
        let (value, error) = gk15(&f, lo, hi)?;
        total += value;
        err += error;
        heap.push(Interval { lo, hi, value, error });
    }
    loop {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            // re-sum to shed accumulated rounding from the running updates
            return Ok(heap.iter().map(|iv| iv.value).sum());
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(QuadratureError::NotConverged {
                estimate: total,
                error: err,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        let (v1, e1) = gk15(&f, worst.lo, mid)?;
        let (v2, e2) = gk15(&f, mid, worst.hi)?;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Interval {
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Interval {
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
        });
    }
}

/// Recursive adaptive Simpson integration of `f` over `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<f64, QuadratureError> {
    // Seed with a uniform panel split so narrow features are not skipped.
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for p in 0..PANELS {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == PANELS { b } else { lo + h };
        let (flo, fhi, fm) = (eval(&f, lo)?, eval(&f, hi)?, eval(&f, 0.5 * (lo + hi))?);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        total += simpson_rec(&f, lo, hi, flo, fm, fhi, whole, abs_tol / PANELS as f64, 0)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, QuadratureError> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (eval(f, lm)?, eval(f, rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= MAX_DEPTH {
        return Err(QuadratureError::NotConverged {
            estimate: left + right,
            error: delta.abs(),
        });
    }
    Ok(simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1)?
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)?)
}
