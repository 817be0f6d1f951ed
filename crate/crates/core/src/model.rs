//! Target densities for ℓ1-regularized posteriors.
//!
//! The target on `x ∈ ℝᵈ` is `ρ(x) ∝ exp(−β(λ‖x‖₁ + G(x)))`. Its Hadamard
//! lift on `(u, v) ∈ ℝ₊ᵈ × ℝᵈ` is
//! `π(u, v) ∝ ∏ uᵢ · exp(−β(½λ(‖u‖² + ‖v‖²) + G(u ⊙ v)))`, whose pushforward
//! under `(u, v) ↦ u ⊙ v` is exactly `ρ`. Everything here is unnormalized and
//! in log space.

use crate::linops::{dot, operator_norm_estimate, LinearOperator};
use crate::quadrature::{gauss_kronrod, QuadratureConfig, QuadratureError};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("u[{index}] = {value} is outside the support u > 0")]
    OutOfDomain { index: usize, value: f64 },
    #[error("invalid model parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("group structure is not a partition: {0}")]
    BadGroups(String),
    #[error(transparent)]
    Linop(#[from] crate::linops::LinopError),
}

#[derive(Debug, Clone)]
pub enum DataTermKind {
    /// `G(x) = ½‖Ax − y‖²`.
    Quadratic { op: LinearOperator, y: Vec<f64> },
    /// `G ≡ 0` on `ℝᵈ`.
    Zero { dim: usize },
}

#[derive(Debug, Clone)]
pub struct DataTerm {
    pub kind: DataTermKind,
    /// `L = ‖A‖²`, the Lipschitz constant of `∇G`.
    pub lipschitz: f64,
    /// Optional bound on `‖∇G‖∞`; reported only, never enforced.
    pub grad_bound: Option<f64>,
    /// `(AᵀA, Aᵀy)` cached for small `d`, where `∇G(x) = AᵀAx − Aᵀy` is
    /// cheaper than two operator applications.
    normal: Option<(Vec<f64>, Vec<f64>)>,
}

/// Largest `d` for which the Gram matrix is cached.
const GRAM_MAX_DIM: usize = 64;

impl DataTerm {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: DataTermKind::Zero { dim },
            lipschitz: 0.0,
            grad_bound: Some(0.0),
            normal: None,
        }
    }

    /// Quadratic data term; `L` is estimated by power iteration.
    pub fn quadratic(op: LinearOperator, y: Vec<f64>) -> Result<Self, ModelError> {
        if y.len() != op.rows() {
            return Err(ModelError::DimensionMismatch {
                expected: op.rows(),
                got: y.len(),
            });
        }
        let est = operator_norm_estimate(&op, 1e-12, 100_000);
        let d = op.cols();
        let normal = if d <= GRAM_MAX_DIM && d <= 2 * op.rows() {
            let mut gram = vec![0.0; d * d];
            let mut e = vec![0.0; d];
            for j in 0..d {
                e[j] = 1.0;
                let col = op.apply_adjoint(&op.apply(&e)?)?;
                for i in 0..d {
                    gram[i * d + j] = col[i];
                }
                e[j] = 0.0;
            }
            Some((gram, op.apply_adjoint(&y)?))
        } else {
            None
        };
        Ok(Self {
            kind: DataTermKind::Quadratic { op, y },
            lipschitz: est.lipschitz(),
            grad_bound: None,
            normal,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DataTermKind::Quadratic { op, .. } => op.cols(),
            DataTermKind::Zero { dim } => *dim,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DataTermKind::Quadratic { op, y } => {
                let ax = op.apply(x).expect("checked by caller");
                0.5 * ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            DataTermKind::Zero { .. } => 0.0,
        }
    }

    /// Writes `∇G(x)` into `out`; `resid` must have the operator's row count
    /// (unused for the zero term).
    pub fn gradient_into(&self, x: &[f64], resid: &mut Vec<f64>, out: &mut [f64]) {
        if let Some((gram, aty)) = &self.normal {
            let d = aty.len();
            for ((o, row), b) in out.iter_mut().zip(gram.chunks_exact(d)).zip(aty) {
                *o = dot(row, x) - b;
            }
            return;
        }
        match &self.kind {
            DataTermKind::Quadratic { op, y } => {
                resid.resize(op.rows(), 0.0);
                op.apply_into(x, resid).expect("checked by caller");
                for (r, yi) in resid.iter_mut().zip(y) {
                    *r -= yi;
                }
                op.apply_adjoint_into(resid, out).expect("checked by caller");
            }
            DataTermKind::Zero { .. } => out.fill(0.0),
        }
    }

    /// Lower bound `K` with `xᵀ∇G(x) ≥ −K` for all `x`. For the quadratic
    /// term `xᵀAᵀ(Ax − y) = ‖Ax‖² − (Ax)ᵀy ≥ −‖y‖²/4`.
    pub fn inner_product_lower_bound(&self) -> f64 {
        match &self.kind {
            DataTermKind::Quadratic { y, .. } => dot(y, y) / 4.0,
            DataTermKind::Zero { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TargetModel {
    lambda: f64,
    beta: f64,
    data: DataTerm,
}

impl TargetModel {
    pub fn new(lambda: f64, beta: f64, data: DataTerm) -> Result<Self, ModelError> {
        for (name, value) in [("lambda", lambda), ("beta", beta)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ModelError::InvalidParameter { name, value });
            }
        }
        Ok(Self { lambda, beta, data })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn data(&self) -> &DataTerm {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    fn check_dim(&self, got: usize) -> Result<(), ModelError> {
        let expected = self.dim();
        if expected == got {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch { expected, got })
        }
    }

    /// `−β(λ‖x‖₁ + G(x))`.
    pub fn rho_log_unnormalized(&self, x: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(x.len())?;
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        Ok(-self.beta * (self.lambda * l1 + self.data.value(x)))
    }

    /// `Σ log uᵢ − β(½λ(‖u‖² + ‖v‖²) + G(u ⊙ v))`.
    pub fn pi_log_unnormalized(&self, u: &[f64], v: &[f64]) -> Result<f64, ModelError> {
        self.check_dim(u.len())?;
        self.check_dim(v.len())?;
        check_positive(u)?;
        let x: Vec<f64> = u.iter().zip(v).map(|(a, b)| a * b).collect();
        let log_u: f64 = u.iter().map(|a| a.ln()).sum();
        let sq = dot(u, u) + dot(v, v);
        Ok(log_u - self.beta * (0.5 * self.lambda * sq + self.data.value(&x)))
    }

    pub fn grad_g(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; x.len()];
        self.data.gradient_into(x, &mut Vec::new(), &mut out);
        Ok(out)
    }
}

pub(crate) fn check_positive(u: &[f64]) -> Result<(), ModelError> {
    match u.iter().position(|&a| !(a > 0.0)) {
        Some(index) => Err(ModelError::OutOfDomain {
            index,
            value: u[index],
        }),
        None => Ok(()),
    }
}

/// Partition of `{0..d}` into nonempty disjoint blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    blocks: Vec<Vec<usize>>,
    /// block index of every coordinate
    owner: Vec<usize>,
}

impl GroupStructure {
    pub fn new(blocks: Vec<Vec<usize>>, dim: usize) -> Result<Self, ModelError> {
        let mut owner = vec![usize::MAX; dim];
        for (j, b) in blocks.iter().enumerate() {
            if b.is_empty() {
                return Err(ModelError::BadGroups(format!("block {j} is empty")));
            }
            for &i in b {
                if i >= dim {
                    return Err(ModelError::BadGroups(format!(
                        "index {i} in block {j} is out of range for dimension {dim}"
                    )));
                }
                if owner[i] != usize::MAX {
                    return Err(ModelError::BadGroups(format!(
                        "index {i} appears in blocks {} and {j}",
                        owner[i]
                    )));
                }
                owner[i] = j;
            }
        }
        if let Some(i) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(ModelError::BadGroups(format!("index {i} is not covered")));
        }
        Ok(Self { blocks, owner })
    }

    /// One block per coordinate.
    pub fn singletons(dim: usize) -> Self {
        Self {
            blocks: (0..dim).map(|i| vec![i]).collect(),
            owner: (0..dim).collect(),
        }
    }

    /// Consecutive blocks of equal size.
    pub fn contiguous(dim: usize, block_size: usize) -> Result<Self, ModelError> {
        if block_size == 0 || !dim.is_multiple_of(block_size) {
            return Err(ModelError::BadGroups(format!(
                "block size {block_size} does not divide dimension {dim}"
            )));
        }
        let blocks = (0..dim / block_size)
            .map(|j| (j * block_size..(j + 1) * block_size).collect())
            .collect();
        Self::new(blocks, dim)
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.owner.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn owner(&self, i: usize) -> usize {
        self.owner[i]
    }
}

/// `|∫ integrand − exp(−a|z|)|` for the Gaussian scale-mixture form of the
/// Laplace density, `exp(−a|z|) = a/√(2π) ∫₀^∞ η^{−½} exp(−z²/(2η) − a²η/2) dη`.
///
/// The integral is evaluated in `s = √η`, which removes the `η^{−½}`
/// singularity at the origin; the upper limit is where `a²s²/2` reaches 40.
pub fn laplace_mixture_residual(
    z: f64,
    a: f64,
    quad: &QuadratureConfig,
) -> Result<f64, QuadratureError> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(QuadratureError::InvalidConfig("a must be positive"));
    }
    quad.validate()?;
    let s_max = (80.0f64).sqrt() / a + z.abs().sqrt();
    let integrand = |s: f64| {
        if s == 0.0 {
            0.0
        } else {
            2.0 * (-z * z / (2.0 * s * s) - a * a * s * s / 2.0).exp()
        }
    };
    // the peak sits at s = √(|z|/a); split there so both sides are smooth
    let peak = (z.abs() / a).sqrt().min(s_max);
    let left = gauss_kronrod(integrand, 0.0, peak, quad.abs_tol, quad.rel_tol)?;
    let right = gauss_kronrod(integrand, peak, s_max, quad.abs_tol, quad.rel_tol)?;
    let value = a / (2.0 * std::f64::consts::PI).sqrt() * (left + right);
    Ok((value - (-a * z.abs()).exp()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scalar_model(lambda: f64, beta: f64) -> TargetModel {
        let op = LinearOperator::dense(1, 1, vec![1.0]).unwrap();
        TargetModel::new(lambda, beta, DataTerm::quadratic(op, vec![3.0]).unwrap()).unwrap()
    }

    #[test]
    fn rho_examples() {
        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(3)).unwrap();
        assert_eq!(m0.rho_log_unnormalized(&[0.0; 3]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            scalar_model(2.7, 1.0).rho_log_unnormalized(&[3.0]).unwrap(),
            -8.1,
            epsilon = 1e-12
        );
        let m = TargetModel::new(1.0, 2.0, DataTerm::zero(2)).unwrap();
        assert_eq!(m.rho_log_unnormalized(&[1.0, -1.0]).unwrap(), -4.0);
        assert!(matches!(
            m.rho_log_unnormalized(&[1.0]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pi_examples() {
        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(1)).unwrap();
        assert_abs_diff_eq!(m0.pi_log_unnormalized(&[1.0], &[0.0]).unwrap(), -0.5);
        assert_abs_diff_eq!(
            scalar_model(2.7, 1.0).pi_log_unnormalized(&[1.0], &[1.0]).unwrap(),
            -4.7,
            epsilon = 1e-12
        );
        assert_eq!(
            m0.pi_log_unnormalized(&[0.0], &[1.0]),
            Err(ModelError::OutOfDomain {
                index: 0,
                value: 0.0
            })
        );
    }

    #[test]
    fn grad_examples() {
        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(2)).unwrap();
        assert_eq!(m0.grad_g(&[3.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(scalar_model(1.0, 1.0).grad_g(&[1.0]).unwrap(), vec![-2.0]);
        let op = LinearOperator::diagonal(&[2.0, 2.0]).unwrap();
        let m = TargetModel::new(1.0, 1.0, DataTerm::quadratic(op, vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(m.grad_g(&[1.0, 1.0]).unwrap(), vec![4.0, 4.0]);
        assert_abs_diff_eq!(m.data().lipschitz, 4.0, epsilon = 1e-9);
    }

    #[test]
    fn cached_gradient_matches_residual_form() {
        let data: Vec<f64> = (0..12).map(|k| ((k * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let op = LinearOperator::dense(4, 3, data).unwrap();
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let x = [0.7, -1.3, 2.1];
        let ax = op.apply(&x).unwrap();
        let r: Vec<f64> = ax.iter().zip(&y).map(|(a, b)| a - b).collect();
        let expected = op.apply_adjoint(&r).unwrap();
        let m = TargetModel::new(1.0, 1.0, DataTerm::quadratic(op, y).unwrap()).unwrap();
        for (g, e) in m.grad_g(&x).unwrap().iter().zip(&expected) {
            assert_abs_diff_eq!(g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(TargetModel::new(0.0, 1.0, DataTerm::zero(1)).is_err());
        assert!(TargetModel::new(1.0, -1.0, DataTerm::zero(1)).is_err());
        let op = LinearOperator::identity(2).unwrap();
        assert!(DataTerm::quadratic(op, vec![1.0]).is_err());
    }

    #[test]
    fn mixture_identity_on_grid() {
        let quad = QuadratureConfig::default();
        for &a in &[0.5, 1.0, 2.7] {
            for z in -5..=5 {
                let r = laplace_mixture_residual(z as f64, a, &quad).unwrap();
                assert!(r <= 1e-8, "z={z} a={a} residual {r}");
            }
        }
        let r0 = laplace_mixture_residual(0.0, 1.0, &quad).unwrap();
        let r1 = laplace_mixture_residual(1.0, 1.0, &quad).unwrap();
        let r2 = laplace_mixture_residual(-2.0, 0.5, &quad).unwrap();
        assert!(r0 <= 1e-8 && r1 <= 1e-8 && r2 <= 1e-8);
        assert!(laplace_mixture_residual(1.0, 0.0, &quad).is_err());
    }

    #[test]
    fn groups_validate_partition() {
        assert!(GroupStructure::new(vec![vec![0, 1], vec![2]], 3).is_ok());
        assert!(GroupStructure::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
        assert!(GroupStructure::new(vec![vec![0], vec![]], 1).is_err());
        assert!(GroupStructure::new(vec![vec![0]], 2).is_err());
        assert!(GroupStructure::contiguous(6, 4).is_err());
        let g = GroupStructure::contiguous(6, 2).unwrap();
        assert_eq!(g.n_groups(), 3);
        assert_eq!(g.owner(5), 2);
    }

    proptest! {
        #[test]
        fn zero_term_pi_is_even_in_v(u in prop::collection::vec(0.01f64..5.0, 3), v in prop::collection::vec(-5.0f64..5.0, 3), flip in 0usize..3) {
            let m = TargetModel::new(1.3, 0.7, DataTerm::zero(3)).unwrap();
            let mut w = v.clone();
            w[flip] = -w[flip];
            prop_assert_eq!(m.pi_log_unnormalized(&u, &v).unwrap(), m.pi_log_unnormalized(&u, &w).unwrap());
        }

        #[test]
        fn zero_term_pi_factorizes(u in prop::collection::vec(0.01f64..5.0, 4), v in prop::collection::vec(-5.0f64..5.0, 4)) {
            let (lambda, beta) = (1.7, 2.0);
            let m = TargetModel::new(lambda, beta, DataTerm::zero(4)).unwrap();
            let m1 = TargetModel::new(lambda, beta, DataTerm::zero(1)).unwrap();
            let joint = m.pi_log_unnormalized(&u, &v).unwrap();
            let sum: f64 = u.iter().zip(&v).map(|(&a, &b)| m1.pi_log_unnormalized(&[a], &[b]).unwrap()).sum();
            prop_assert!((joint - sum).abs() <= 1e-12 * (1.0 + joint.abs()));
        }

        #[test]
        fn rho_difference_matches_direct_arithmetic(x in -10.0f64..10.0, lambda in 0.1f64..5.0, beta in 0.1f64..5.0) {
            let m = scalar_model(lambda, beta);
            let diff = m.rho_log_unnormalized(&[x]).unwrap() - m.rho_log_unnormalized(&[0.0]).unwrap();
            let g = |t: f64| 0.5 * (t - 3.0) * (t - 3.0);
            let want = -beta * (lambda * x.abs() + g(x) - g(0.0));
            prop_assert!((diff - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }
}
