//! Linear operators used as forward models: dense matrices, the orthonormal
//! Haar transform, zero-phase circular convolution, masking and composition.
//!
//! Conventions:
//! - Haar coefficients are laid out as `[approx, coarsest details, ..., finest
//!   details]`, each level scaled by `1/sqrt(2)` so the transform is orthonormal.
//! - A convolution kernel of length `L` has its tap `j` at offset
//!   `j - L/2` (integer division), so odd symmetric kernels are zero-phase and
//!   `(k * x)_i = sum_j k_j x_{(i - j + L/2) mod n}`.

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::RngStream;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LinopError {
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("haar transform needs a power-of-two length, got {0}")]
    NotPowerOfTwo(usize),
    #[error("haar depth {levels} exceeds log2 of length {len}")]
    TooManyLevels { levels: usize, len: usize },
    #[error("convolution kernel is empty")]
    EmptyKernel,
    #[error("convolution kernel of length {kernel} exceeds signal length {signal}")]
    KernelTooLong { kernel: usize, signal: usize },
    #[error("mask index {index} out of range for length {len}")]
    MaskIndexOutOfRange { index: usize, len: usize },
    #[error("composition mismatch: inner produces {inner_rows} rows, outer expects {outer_cols} columns")]
    CompositionMismatch { inner_rows: usize, outer_cols: usize },
    #[error("dense matrix data has {got} entries, expected {rows}x{cols}")]
    BadDenseShape { rows: usize, cols: usize, got: usize },
    #[error("operator must have at least one row and one column")]
    Empty,
}

/// Direction of a Haar operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaarDirection {
    /// Signal to coefficients.
    Analysis,
    /// Coefficients to signal.
    Synthesis,
}

#[derive(Debug, Clone)]
pub enum LinearOperator {
    /// Row-major dense matrix.
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    Haar {
        levels: usize,
        len: usize,
        direction: HaarDirection,
    },
    Conv {
        kernel: Vec<f64>,
        len: usize,
    },
    /// Keeps the listed entries, in the listed order.
    Mask {
        indices: Vec<usize>,
        len: usize,
    },
    /// `outer ∘ inner`.
    Compose {
        outer: Box<LinearOperator>,
        inner: Box<LinearOperator>,
    },
}

impl LinearOperator {
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinopError> {
        if rows == 0 || cols == 0 {
            return Err(LinopError::Empty);
        }
        if data.len() != rows * cols {
            return Err(LinopError::BadDenseShape {
                rows,
                cols,
                got: data.len(),
            });
        }
        Ok(Self::Dense { rows, cols, data })
    }

    pub fn identity(n: usize) -> Result<Self, LinopError> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::dense(n, n, data)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self, LinopError> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::dense(n, n, data)
    }

    /// Dense matrix with i.i.d. `N(0, variance)` entries drawn from `rng`.
    pub fn gaussian(
        rows: usize,
        cols: usize,
        variance: f64,
        rng: &mut RngStream,
    ) -> Result<Self, LinopError> {
        let sd = variance.sqrt();
        let data = (0..rows * cols).map(|_| sd * rng.standard_normal()).collect();
        Self::dense(rows, cols, data)
    }

    /// Full-depth Haar operator.
    pub fn haar(len: usize, direction: HaarDirection) -> Result<Self, LinopError> {
        if !len.is_power_of_two() {
            return Err(LinopError::NotPowerOfTwo(len));
        }
        Self::haar_with_levels(len, len.trailing_zeros() as usize, direction)
    }

    pub fn haar_with_levels(
        len: usize,
        levels: usize,
        direction: HaarDirection,
    ) -> Result<Self, LinopError> {
        if !len.is_power_of_two() {
            return Err(LinopError::NotPowerOfTwo(len));
        }
        if levels > len.trailing_zeros() as usize {
            return Err(LinopError::TooManyLevels { levels, len });
        }
        Ok(Self::Haar {
            levels,
            len,
            direction,
        })
    }

    pub fn conv(kernel: Vec<f64>, len: usize) -> Result<Self, LinopError> {
        if kernel.is_empty() {
            return Err(LinopError::EmptyKernel);
        }
        if kernel.len() > len {
            return Err(LinopError::KernelTooLong {
                kernel: kernel.len(),
                signal: len,
            });
        }
        Ok(Self::Conv { kernel, len })
    }

    pub fn mask(indices: Vec<usize>, len: usize) -> Result<Self, LinopError> {
        if let Some(&index) = indices.iter().find(|&&i| i >= len) {
            return Err(LinopError::MaskIndexOutOfRange { index, len });
        }
        if indices.is_empty() {
            return Err(LinopError::Empty);
        }
        Ok(Self::Mask { indices, len })
    }

    pub fn compose(outer: LinearOperator, inner: LinearOperator) -> Result<Self, LinopError> {
        if inner.rows() != outer.cols() {
            return Err(LinopError::CompositionMismatch {
                inner_rows: inner.rows(),
                outer_cols: outer.cols(),
            });
        }
        Ok(Self::Compose {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    pub fn rows(&self) -> usize {
        match self {
            Self::Dense { rows, .. } => *rows,
            Self::Haar { len, .. } | Self::Conv { len, .. } => *len,
            Self::Mask { indices, .. } => indices.len(),
            Self::Compose { outer, .. } => outer.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Self::Dense { cols, .. } => *cols,
            Self::Haar { len, .. } | Self::Conv { len, .. } | Self::Mask { len, .. } => *len,
            Self::Compose { inner, .. } => inner.cols(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinopError> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_adjoint(&self, w: &[f64]) -> Result<Vec<f64>, LinopError> {
        let mut out = vec![0.0; self.cols()];
        self.apply_adjoint_into(w, &mut out)?;
        Ok(out)
    }

    /// Writes `A x` into `out` (length `rows`).
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), LinopError> {
        check_len(self.cols(), x.len())?;
        check_len(self.rows(), out.len())?;
        match self {
            Self::Dense { cols, data, .. } => {
                for (o, row) in out.iter_mut().zip(data.chunks_exact(*cols)) {
                    *o = dot(row, x);
                }
            }
            Self::Haar {
                levels, direction, ..
            } => {
                out.copy_from_slice(x);
                match direction {
                    HaarDirection::Analysis => haar_forward_in_place(out, *levels),
                    HaarDirection::Synthesis => haar_inverse_in_place(out, *levels),
                }
            }
            Self::Conv { kernel, .. } => convolve_into(kernel, x, out, false),
            Self::Mask { indices, .. } => {
                for (o, &i) in out.iter_mut().zip(indices) {
                    *o = x[i];
                }
            }
            Self::Compose { outer, inner } => {
                let mid = inner.apply(x)?;
                outer.apply_into(&mid, out)?;
            }
        }
        Ok(())
    }

    /// Writes `Aᵀ w` into `out` (length `cols`).
    pub fn apply_adjoint_into(&self, w: &[f64], out: &mut [f64]) -> Result<(), LinopError> {
        check_len(self.rows(), w.len())?;
        check_len(self.cols(), out.len())?;
        match self {
            Self::Dense { cols, data, .. } => {
                out.fill(0.0);
                for (row, &wi) in data.chunks_exact(*cols).zip(w) {
                    for (o, &a) in out.iter_mut().zip(row) {
                        *o += a * wi;
                    }
                }
            }
            Self::Haar {
                levels, direction, ..
            } => {
                out.copy_from_slice(w);
                match direction {
                    HaarDirection::Analysis => haar_inverse_in_place(out, *levels),
                    HaarDirection::Synthesis => haar_forward_in_place(out, *levels),
                }
            }
            Self::Conv { kernel, .. } => convolve_into(kernel, w, out, true),
            Self::Mask { indices, .. } => {
                out.fill(0.0);
                for (&wi, &i) in w.iter().zip(indices) {
                    out[i] += wi;
                }
            }
            Self::Compose { outer, inner } => {
                let mid = outer.apply_adjoint(w)?;
                inner.apply_adjoint_into(&mid, out)?;
            }
        }
        Ok(())
    }

    /// Dense row-major copy of the operator, built column by column.
    pub fn to_dense(&self) -> Vec<f64> {
        let (rows, cols) = (self.rows(), self.cols());
        let mut dense = vec![0.0; rows * cols];
        let mut e = vec![0.0; cols];
        let mut col = vec![0.0; rows];
        for j in 0..cols {
            e[j] = 1.0;
            self.apply_into(&e, &mut col)
                .expect("basis vector has the operator's column count");
            for i in 0..rows {
                dense[i * cols + j] = col[i];
            }
            e[j] = 0.0;
        }
        dense
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), LinopError> {
    if expected == got {
        Ok(())
    } else {
        Err(LinopError::DimensionMismatch { expected, got })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn haar_forward_in_place(x: &mut [f64], levels: usize) {
    let mut tmp = vec![0.0; x.len()];
    let mut n = x.len();
    for _ in 0..levels {
        let half = n / 2;
        for i in 0..half {
            let (a, b) = (x[2 * i], x[2 * i + 1]);
            tmp[i] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
            tmp[half + i] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
        }
        x[..n].copy_from_slice(&tmp[..n]);
        n = half;
    }
}

fn haar_inverse_in_place(c: &mut [f64], levels: usize) {
    let mut tmp = vec![0.0; c.len()];
    let mut n = c.len() >> levels;
    for _ in 0..levels {
        let half = n;
        n *= 2;
        for i in 0..half {
            let (a, d) = (c[i], c[half + i]);
            tmp[2 * i] = (a + d) * std::f64::consts::FRAC_1_SQRT_2;
            tmp[2 * i + 1] = (a - d) * std::f64::consts::FRAC_1_SQRT_2;
        }
        c[..n].copy_from_slice(&tmp[..n]);
    }
}

/// Orthonormal full-depth Haar analysis.
pub fn haar_forward(x: &[f64]) -> Result<Vec<f64>, LinopError> {
    if !x.len().is_power_of_two() {
        return Err(LinopError::NotPowerOfTwo(x.len()));
    }
    let mut out = x.to_vec();
    haar_forward_in_place(&mut out, x.len().trailing_zeros() as usize);
    Ok(out)
}

/// Inverse of [`haar_forward`].
pub fn haar_inverse(c: &[f64]) -> Result<Vec<f64>, LinopError> {
    if !c.len().is_power_of_two() {
        return Err(LinopError::NotPowerOfTwo(c.len()));
    }
    let mut out = c.to_vec();
    haar_inverse_in_place(&mut out, c.len().trailing_zeros() as usize);
    Ok(out)
}

fn convolve_into(kernel: &[f64], x: &[f64], out: &mut [f64], adjoint: bool) {
    let n = x.len();
    let center = kernel.len() / 2;
    out.fill(0.0);
    for (j, &k) in kernel.iter().enumerate() {
        // offset o = j - center; forward reads x[i - o], adjoint reads x[i + o]
        let shift = if adjoint {
            (j + n - center) % n
        } else {
            (center + n - j) % n
        };
        for (i, o) in out.iter_mut().enumerate() {
            let mut idx = i + shift;
            if idx >= n {
                idx -= n;
            }
            *o += k * x[idx];
        }
    }
}

/// Zero-phase circular convolution of `x` with `kernel`.
pub fn circular_convolve(kernel: &[f64], x: &[f64]) -> Result<Vec<f64>, LinopError> {
    if kernel.is_empty() {
        return Err(LinopError::EmptyKernel);
    }
    if kernel.len() > x.len() {
        return Err(LinopError::KernelTooLong {
            kernel: kernel.len(),
            signal: x.len(),
        });
    }
    let mut out = vec![0.0; x.len()];
    convolve_into(kernel, x, &mut out, false);
    Ok(out)
}

/// Discrete Gaussian kernel with standard deviation `sigma` (in samples),
/// truncated at `truncate * sigma` and normalized to sum 1.
pub fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f64> {
    let half = (truncate * sigma).ceil().max(0.0) as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|o| (-(o as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Estimated spectral norm `‖A‖`.
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NormEstimate {
    /// Lipschitz constant `‖A‖²` of `x ↦ Aᵀ(Ax − y)`.
    pub fn lipschitz(&self) -> f64 {
        self.norm * self.norm
    }
}

/// Power iteration on `AᵀA`. Stops when successive norm estimates agree to
/// relative tolerance `tol`; if `max_iters` is hit the last estimate is
/// returned with `converged = false` and a warning is logged.
pub fn operator_norm_estimate(op: &LinearOperator, tol: f64, max_iters: usize) -> NormEstimate {
    let n = op.cols();
    // fixed start vector so the estimate is reproducible
    let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed0_fa11);
    let mut x: Vec<f64> = (0..n)
        .map(|_| 1.0 + 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let mut ax = vec![0.0; op.rows()];
    let mut atax = vec![0.0; n];
    let mut prev = 0.0;
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    for it in 1..=max_iters {
        op.apply_into(&x, &mut ax).expect("sized by the operator");
        op.apply_adjoint_into(&ax, &mut atax)
            .expect("sized by the operator");
        // Rayleigh quotient xᵀAᵀAx with ‖x‖ = 1
        let sigma = dot(&ax, &ax).sqrt();
        let nrm = norm2(&atax);
        if nrm == 0.0 {
            return NormEstimate {
                norm: 0.0,
                iterations: it,
                converged: true,
            };
        }
        for (xi, &v) in x.iter_mut().zip(&atax) {
            *xi = v / nrm;
        }
        if it > 1 && (sigma - prev).abs() <= tol * sigma {
            return NormEstimate {
                norm: sigma,
                iterations: it,
                converged: true,
            };
        }
        prev = sigma;
    }
    warn!("power iteration did not converge in {max_iters} iterations");
    NormEstimate {
        norm: prev,
        iterations: max_iters,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_vec(rng: &mut RngStream, n: usize) -> Vec<f64> {
        rng.sample_standard_normal_vec(n).unwrap()
    }

    fn all_variants(rng: &mut RngStream) -> Vec<LinearOperator> {
        let n = 32;
        let conv = LinearOperator::conv(gaussian_kernel(2.0, 4.0), n).unwrap();
        let synth = LinearOperator::haar(n, HaarDirection::Synthesis).unwrap();
        vec![
            LinearOperator::gaussian(7, 5, 1.0, rng).unwrap(),
            LinearOperator::haar(n, HaarDirection::Analysis).unwrap(),
            synth.clone(),
            LinearOperator::haar_with_levels(n, 2, HaarDirection::Analysis).unwrap(),
            conv.clone(),
            LinearOperator::conv(vec![0.2, 0.5, 0.3, 0.1], n).unwrap(),
            LinearOperator::mask(vec![3, 0, 17, 31], n).unwrap(),
            LinearOperator::compose(conv.clone(), synth.clone()).unwrap(),
            LinearOperator::compose(
                LinearOperator::mask(vec![1, 2, 5], n).unwrap(),
                LinearOperator::compose(conv, synth).unwrap(),
            )
            .unwrap(),
        ]
    }

    #[test]
    fn identity_and_mask_apply() {
        let id = LinearOperator::identity(3).unwrap();
        assert_eq!(id.apply(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        assert_eq!(id.apply_adjoint(&[4.0, 5.0, 6.0]).unwrap(), vec![4.0, 5.0, 6.0]);
        let m = LinearOperator::mask(vec![0], 2).unwrap();
        assert_eq!(m.apply(&[5.0, 7.0]).unwrap(), vec![5.0]);
        assert_eq!(m.apply_adjoint(&[5.0]).unwrap(), vec![5.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let id = LinearOperator::identity(3).unwrap();
        assert_eq!(
            id.apply(&[1.0]),
            Err(LinopError::DimensionMismatch {
                expected: 3,
                got: 1
            })
        );
        assert!(id.apply_adjoint(&[1.0; 4]).is_err());
    }

    #[test]
    fn haar_small_cases() {
        let c = haar_forward(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        for (got, want) in c.iter().zip([2.0, 0.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        let c = haar_forward(&[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(c[0], 0.0);
        assert_abs_diff_eq!(c[1], 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(haar_forward(&[1.0; 6]), Err(LinopError::NotPowerOfTwo(6)));
        assert!(LinearOperator::haar(12, HaarDirection::Analysis).is_err());
    }

    #[test]
    fn haar_round_trip_and_parseval_1024() {
        let mut rng = RngStream::new(11, 0);
        let x = random_vec(&mut rng, 1024);
        let c = haar_forward(&x).unwrap();
        let back = haar_inverse(&c).unwrap();
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-12, "round trip error {err}");
        assert_abs_diff_eq!(norm2(&x), norm2(&c), epsilon = 1e-12 * norm2(&x));
    }

    #[test]
    fn convolution_conventions() {
        let x = [1.5, -2.0, 0.25, 4.0, 7.0];
        assert_eq!(circular_convolve(&[1.0], &x).unwrap(), x.to_vec());
        assert_eq!(
            circular_convolve(&[0.5, 0.5], &[1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![0.5, 0.0, 0.0, 0.5]
        );
        assert_eq!(circular_convolve(&[], &x), Err(LinopError::EmptyKernel));
        assert!(circular_convolve(&[1.0; 6], &x).is_err());
    }

    #[test]
    fn convolution_matches_dense_materialization() {
        let n = 64;
        let k = gaussian_kernel(2.0, 4.0);
        assert_abs_diff_eq!(k.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_eq!(k.len(), 17);
        // independent dense circulant built from the offset convention
        let center = k.len() as i64 / 2;
        let mut dense = vec![0.0; n * n];
        for i in 0..n as i64 {
            for (j, &kj) in k.iter().enumerate() {
                let src = (i - (j as i64 - center)).rem_euclid(n as i64);
                dense[(i as usize) * n + src as usize] += kj;
            }
        }
        let mut rng = RngStream::new(3, 0);
        let x = random_vec(&mut rng, n);
        let got = circular_convolve(&k, &x).unwrap();
        for i in 0..n {
            let want = dot(&dense[i * n..(i + 1) * n], &x);
            assert_abs_diff_eq!(got[i], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolution_commutes_with_shift() {
        let mut rng = RngStream::new(5, 0);
        let x = random_vec(&mut rng, 16);
        let k = [0.1, 0.3, 0.4, 0.2];
        let mut shifted = x.clone();
        shifted.rotate_right(3);
        let mut a = circular_convolve(&k, &x).unwrap();
        a.rotate_right(3);
        let b = circular_convolve(&k, &shifted).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-14);
        }
    }

    #[test]
    fn composed_atom_matches_dense_oracle() {
        let n = 16;
        let k = gaussian_kernel(1.5, 4.0);
        let conv = LinearOperator::conv(k, n).unwrap();
        let synth = LinearOperator::haar(n, HaarDirection::Synthesis).unwrap();
        let a = LinearOperator::compose(conv.clone(), synth.clone()).unwrap();
        let (cd, sd) = (conv.to_dense(), synth.to_dense());
        let mut e = vec![0.0; n];
        e[5] = 1.0;
        let got = a.apply(&e).unwrap();
        for i in 0..n {
            let want: f64 = (0..n).map(|l| cd[i * n + l] * sd[l * n + 5]).sum();
            assert_abs_diff_eq!(got[i], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_all_variants() {
        let mut rng = RngStream::new(7, 1);
        for op in all_variants(&mut rng) {
            for _ in 0..100 {
                let x = random_vec(&mut rng, op.cols());
                let w = random_vec(&mut rng, op.rows());
                let lhs = dot(&op.apply(&x).unwrap(), &w);
                let rhs = dot(&x, &op.apply_adjoint(&w).unwrap());
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * norm2(&x) * norm2(&w),
                    "{op:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn mask_projection_is_idempotent_and_self_adjoint() {
        let m = LinearOperator::mask(vec![1, 4, 6], 8).unwrap();
        let proj = |x: &[f64]| m.apply_adjoint(&m.apply(x).unwrap()).unwrap();
        let mut rng = RngStream::new(9, 0);
        let x = random_vec(&mut rng, 8);
        let y = random_vec(&mut rng, 8);
        let px = proj(&x);
        assert_eq!(proj(&px), px);
        assert_abs_diff_eq!(dot(&px, &y), dot(&x, &proj(&y)), epsilon = 1e-14);
    }

    #[test]
    fn norm_estimate_simple() {
        let id = operator_norm_estimate(&LinearOperator::identity(5).unwrap(), 1e-12, 100);
        assert!(id.converged);
        assert_abs_diff_eq!(id.norm, 1.0, epsilon = 1e-12);
        let d = operator_norm_estimate(&LinearOperator::diagonal(&[3.0, 1.0]).unwrap(), 1e-12, 1000);
        assert_abs_diff_eq!(d.norm, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(d.lipschitz(), 9.0, epsilon = 1e-8);
    }

    #[test]
    fn norm_estimate_matches_svd() {
        let mut rng = RngStream::new(2024, 0);
        let op = LinearOperator::gaussian(40, 20, 1.0, &mut rng).unwrap();
        let est = operator_norm_estimate(&op, 1e-12, 100_000);
        let m = nalgebra::DMatrix::from_row_slice(40, 20, &op.to_dense());
        let sv = m.singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        assert!(est.converged);
        assert!((est.norm - top).abs() <= 1e-6 * top, "{} vs {top}", est.norm);
    }

    #[test]
    fn norm_estimate_reports_non_convergence() {
        let mut rng = RngStream::new(1, 0);
        let op = LinearOperator::gaussian(30, 30, 1.0, &mut rng).unwrap();
        let est = operator_norm_estimate(&op, 1e-15, 2);
        assert!(!est.converged);
        assert!(est.norm > 0.0);
    }

    #[test]
    fn norm_bounds_every_ratio() {
        let mut rng = RngStream::new(4, 0);
        for op in all_variants(&mut rng) {
            let est = operator_norm_estimate(&op, 1e-10, 100_000);
            for _ in 0..20 {
                let x = random_vec(&mut rng, op.cols());
                let ratio = norm2(&op.apply(&x).unwrap()) / norm2(&x);
                assert!(ratio <= est.norm * (1.0 + 1e-6), "{ratio} > {}", est.norm);
            }
        }
    }
}
