//! Chain diagnostics and the one-dimensional quadrature oracle.
//!
//! Conventions:
//! - ESS is single-chain, from FFT autocorrelations truncated by Geyer's
//!   initial monotone positive sequence, and capped at `n`. A chain with zero
//!   variance reports `n`.
//! - Quantiles use linear interpolation of order statistics at position
//!   `(n − 1)p` (type 7).
//! - Monte Carlo standard errors are `sqrt(var / ESS)`.

use ndarray::{Array2, ArrayView1, Axis};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

pub use crate::quadrature::QuadratureConfig;
use crate::quadrature::{adaptive_simpson, gauss_kronrod, QuadratureError};
use crate::model::TargetModel;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("the quadrature oracle needs a one-dimensional model, got dimension {0}")]
    NotOneDimensional(usize),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Which rule [`quadrature_expectation_1d_with`] uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    GaussKronrod,
    Simpson,
}

/// `∫φρ / ∫ρ` for a one-dimensional model, by adaptive Gauss–Kronrod.
pub fn quadrature_expectation_1d<F: Fn(f64) -> f64>(
    phi: F,
    model: &TargetModel,
    quad: &QuadratureConfig,
) -> Result<f64, DiagnosticsError> {
    quadrature_expectation_1d_with(phi, model, quad, QuadratureRule::GaussKronrod)
}

/// `∫φρ / ∫ρ` with the chosen rule. The domain `[−R, R]` is split at the kink
/// `x = 0` and, for the quadratic term, at the mode of the smooth part; the
/// log density is shifted by its maximum before exponentiating.
pub fn quadrature_expectation_1d_with<F: Fn(f64) -> f64>(
    phi: F,
    model: &TargetModel,
    quad: &QuadratureConfig,
    rule: QuadratureRule,
) -> Result<f64, DiagnosticsError> {
    if model.dim() != 1 {
        return Err(DiagnosticsError::NotOneDimensional(model.dim()));
    }
    quad.validate()?;
    let r = quad.domain_halfwidth;
    let logp = |x: f64| model.rho_log_unnormalized(&[x]).expect("dimension checked");
    // crude scan for the maximum so the integrand peaks at 1
    let shift = (0..=4000)
        .map(|k| logp(-r + 2.0 * r * k as f64 / 4000.0))
        .fold(logp(0.0), f64::max);
    let dens = |x: f64| (logp(x) - shift).exp();
    let mut cuts = vec![-r, 0.0, r];
    let grid_peak = (0..=4000)
        .map(|k| -r + 2.0 * r * k as f64 / 4000.0)
        .max_by(|a, b| logp(*a).total_cmp(&logp(*b)))
        .unwrap_or(0.0);
    if grid_peak.abs() > 1e-9 && grid_peak.abs() < r {
        cuts.push(grid_peak);
    }
    cuts.sort_by(f64::total_cmp);
    let integrate = |f: &dyn Fn(f64) -> f64| -> Result<f64, QuadratureError> {
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += match rule {
                QuadratureRule::GaussKronrod => gauss_kronrod(f, w[0], w[1], quad.abs_tol, quad.rel_tol)?,
                QuadratureRule::Simpson => adaptive_simpson(f, w[0], w[1], quad.abs_tol)?,
            };
        }
        Ok(total)
    };
    let z = integrate(&dens)?;
    let num = integrate(&|x| phi(x) * dens(x))?;
    Ok(num / z)
}

/// Autocorrelations `ρ_0..ρ_{n−1}` (biased estimator, divisor `n`).
pub fn autocorrelation(samples: &[f64]) -> Vec<f64> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 {
        return vec![1.0; n.min(1)];
    }
    buf[..n].iter().map(|c| c.re / c0).collect()
}

/// Effective sample size of a single chain.
pub fn ess(samples: &[f64]) -> Result<f64, DiagnosticsError> {
    let n = samples.len();
    if n < 10 {
        return Err(DiagnosticsError::TooShort { needed: 10, got: n });
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Ok(n as f64);
    }
    let rho = autocorrelation(samples);
    // Geyer: pair sums Γ_m = ρ_{2m} + ρ_{2m+1}, kept while positive and
    // forced to be non-increasing.
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let gamma = rho[2 * m] + rho[2 * m + 1];
        if gamma <= 0.0 {
            break;
        }
        let gamma = gamma.min(prev);
        sum += gamma;
        prev = gamma;
        m += 1;
    }
    let tau = (2.0 * sum - 1.0).max(1.0);
    Ok(n as f64 / tau)
}

/// Sup distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x).clamp(0.0, 1.0);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Type-7 quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub mean: f64,
    /// Unbiased sample variance (0 for a single sample).
    pub variance: f64,
    pub q05: f64,
    pub q95: f64,
    pub ess: f64,
    pub mcse: f64,
}

pub fn summarize(column: ArrayView1<f64>) -> CoordinateSummary {
    let data: Vec<f64> = column.iter().cloned().collect();
    let n = data.len();
    let mean = data.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let ess_value = ess(&data).unwrap_or(n as f64);
    let mut sorted = data;
    sorted.sort_by(f64::total_cmp);
    CoordinateSummary {
        mean,
        variance,
        q05: quantile_sorted(&sorted, 0.05),
        q95: quantile_sorted(&sorted, 0.95),
        ess: ess_value,
        mcse: (variance / ess_value).sqrt(),
    }
}

/// Per-column summaries of an `n × d` sample matrix (n ≥ 1).
pub fn moments_and_quantiles(samples: &Array2<f64>) -> Vec<CoordinateSummary> {
    samples.axis_iter(Axis(1)).map(summarize).collect()
}

/// Least-squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Closed-form CDFs used by the marginal checks.
pub mod cdf {
    use statrs::distribution::{ContinuousCDF, Gamma, Normal};

    /// Laplace with density `(rate/2) exp(−rate|x|)`.
    pub fn laplace(x: f64, rate: f64) -> f64 {
        if x < 0.0 {
            0.5 * (rate * x).exp()
        } else {
            1.0 - 0.5 * (-rate * x).exp()
        }
    }

    pub fn rayleigh(x: f64, sigma: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            1.0 - (-x * x / (2.0 * sigma * sigma)).exp()
        }
    }

    pub fn normal(x: f64, sd: f64) -> f64 {
        Normal::new(0.0, sd).expect("positive sd").cdf(x)
    }

    pub fn gamma(x: f64, shape: f64, rate: f64) -> f64 {
        Gamma::new(shape, rate).expect("positive parameters").cdf(x.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearOperator;
    use crate::model::DataTerm;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    fn scalar_model() -> TargetModel {
        let op = LinearOperator::dense(1, 1, vec![1.0]).unwrap();
        TargetModel::new(2.7, 1.0, DataTerm::quadratic(op, vec![3.0]).unwrap()).unwrap()
    }

    #[test]
    fn oracle_basic_values() {
        let quad = QuadratureConfig::default();
        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(1)).unwrap();
        assert_abs_diff_eq!(quadrature_expectation_1d(|_| 1.0, &m0, &quad).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(quadrature_expectation_1d(|x| x.abs(), &m0, &quad).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(quadrature_expectation_1d(|x| x * x, &m0, &quad).unwrap(), 2.0, epsilon = 1e-9);
        let m2 = TargetModel::new(1.0, 1.0, DataTerm::zero(2)).unwrap();
        assert_eq!(
            quadrature_expectation_1d(|x| x, &m2, &quad),
            Err(DiagnosticsError::NotOneDimensional(2))
        );
    }

    #[test]
    fn oracle_rules_agree_on_the_scalar_model() {
        let quad = QuadratureConfig::default();
        let m = scalar_model();
        for phi in [|x: f64| x, |x: f64| x * x] {
            let gk = quadrature_expectation_1d_with(phi, &m, &quad, QuadratureRule::GaussKronrod).unwrap();
            let si = quadrature_expectation_1d_with(phi, &m, &quad, QuadratureRule::Simpson).unwrap();
            assert!((gk - si).abs() <= 1e-8, "{gk} vs {si}");
        }
        // posterior x ∝ exp(−2.7|x| − (x−3)²/2): on x > 0 a N(0.3, 1) piece,
        // on x < 0 a N(5.7, 1) piece; closed form via normal CDFs
        let phi = |z: f64| (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let big_phi = |z: f64| cdf::normal(z, 1.0);
        let (mp, mn) = (0.3f64, 5.7f64);
        let (ep, en) = ((mp * mp / 2.0).exp(), (mn * mn / 2.0).exp());
        let z = ep * big_phi(mp) + en * big_phi(-mn);
        let pos = (mp * mp + 1.0) * big_phi(mp) + mp * phi(mp);
        let neg = (mn * mn + 1.0) * big_phi(-mn) - mn * phi(mn);
        let ex2 = (ep * pos + en * neg) / z;
        let gk = quadrature_expectation_1d(|x| x * x, &m, &quad).unwrap();
        assert!((gk - ex2).abs() <= 1e-9, "{gk} vs closed form {ex2}");
    }

    #[test]
    fn split_invariance() {
        let m = scalar_model();
        let logp = |x: f64| m.rho_log_unnormalized(&[x]).unwrap();
        let f = |x: f64| x * x * logp(x).exp();
        // 0 is not a seed-panel boundary on [−50, 60]
        let whole = gauss_kronrod(f, -50.0, 60.0, 1e-15, 1e-13).unwrap();
        let split = gauss_kronrod(f, -50.0, 0.0, 1e-15, 1e-13).unwrap() + gauss_kronrod(f, 0.0, 60.0, 1e-15, 1e-13).unwrap();
        assert!((whole - split).abs() <= 1e-10 * whole.abs(), "{whole} vs {split}");
    }

    #[test]
    fn ess_of_iid_and_ar1() {
        let mut rng = RngStream::new(12, 0);
        let iid = rng.sample_standard_normal_vec(10_000).unwrap();
        let e = ess(&iid).unwrap();
        assert!((8_000.0..=12_000.0).contains(&e), "{e}");

        let n = 100_000;
        let phi = 0.9;
        let mut x = 0.0;
        let ar: Vec<f64> = (0..n)
            .map(|_| {
                x = phi * x + (1.0f64 - phi * phi).sqrt() * rng.standard_normal();
                x
            })
            .collect();
        let e = ess(&ar).unwrap();
        let want = n as f64 / 19.0;
        assert!((e - want).abs() <= 0.25 * want, "{e} vs {want}");
        assert!(e <= n as f64);
    }

    #[test]
    fn ess_conventions() {
        assert_eq!(ess(&[2.5; 50]).unwrap(), 50.0);
        assert!(matches!(ess(&[1.0; 5]), Err(DiagnosticsError::TooShort { .. })));
        // antithetic chains would exceed n without the cap
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!(ess(&alt).unwrap() <= 100.0);
    }

    #[test]
    fn ess_is_affine_invariant() {
        let mut rng = RngStream::new(13, 0);
        let x = rng.sample_standard_normal_vec(5000).unwrap();
        let mut acc = 0.0;
        let walk: Vec<f64> = x.iter().map(|v| { acc = 0.7 * acc + v; acc }).collect();
        let moved: Vec<f64> = walk.iter().map(|v| 3.0 * v - 7.0).collect();
        assert_abs_diff_eq!(ess(&walk).unwrap(), ess(&moved).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_statistic(&[0.0], |x| cdf::normal(x, 1.0)), 0.5);
        let d = ks_statistic(&[-100.0, -90.0], |x| cdf::rayleigh(x, 1.0));
        assert_eq!(d, 1.0);
        let mut rng = RngStream::new(14, 0);
        let s = rng.sample_standard_normal_vec(1_000_000).unwrap();
        let d = ks_statistic(&s, |x| cdf::normal(x, 1.0));
        assert!(d <= 0.005, "{d}");
        assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn quantile_and_moments() {
        let seq: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_abs_diff_eq!(quantile_sorted(&seq, 0.05), 5.95, epsilon = 1e-12);
        let col = Array1::from_elem(20, 4.0);
        let s = summarize(col.view());
        assert_eq!((s.mean, s.variance, s.q05, s.q95), (4.0, 0.0, 4.0, 4.0));
        let mut rng = RngStream::new(15, 0);
        let draws = rng.sample_standard_normal_vec(1_000_000).unwrap();
        let m = Array2::from_shape_vec((1_000_000, 1), draws).unwrap();
        let s = &moments_and_quantiles(&m)[0];
        assert!((s.q95 - 1.645).abs() <= 0.01, "{}", s.q95);
        assert!(s.mcse > 0.0 && s.mcse < 0.002);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let f = linear_fit(&x, &y);
        assert_abs_diff_eq!(f.slope, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(f.intercept, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-14);
    }
}
