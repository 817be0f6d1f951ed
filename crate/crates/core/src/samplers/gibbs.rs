//! Bayesian-lasso Gibbs sampler on the scale-mixture augmentation
//! `π̃(x, η) ∝ ∏ η_i^{−½} exp(−Σ(x_i²/(2η_i) + β²λ²η_i/2) − βG(x))`.
//!
//! Conditionals:
//! - `x | η ~ N(m, P⁻¹)` with `P = βAᵀA + diag(1/η)` and `P m = βAᵀy`;
//! - `1/η_i | x ~ IG(βλ/|x_i|, β²λ²)`, degenerating to
//!   `η_i ~ Gamma(½, rate β²λ²/2)` as `x_i → 0`.

use nalgebra::{DMatrix, DVector};

use super::{GibbsState, MarkovKernel, SamplerError};
use crate::model::{DataTermKind, TargetModel};
use crate::rng::RngStream;

pub struct Gibbs<'a> {
    model: &'a TargetModel,
    /// `βAᵀA`
    scaled_gram: DMatrix<f64>,
    /// `βAᵀy`
    scaled_rhs: DVector<f64>,
    xi: DVector<f64>,
}

impl<'a> Gibbs<'a> {
    pub fn new(model: &'a TargetModel) -> Result<Self, SamplerError> {
        let DataTermKind::Quadratic { op, y } = &model.data().kind else {
            return Err(SamplerError::NotQuadratic);
        };
        let (rows, cols) = (op.rows(), op.cols());
        let a = DMatrix::from_row_slice(rows, cols, &op.to_dense());
        let beta = model.beta();
        let scaled_gram = a.tr_mul(&a) * beta;
        let scaled_rhs = a.tr_mul(&DVector::from_column_slice(y)) * beta;
        Ok(Self {
            model,
            scaled_gram,
            scaled_rhs,
            xi: DVector::zeros(cols),
        })
    }

    /// Threshold below which `x_i` takes the Gamma branch.
    pub fn degenerate_threshold(x: &[f64]) -> f64 {
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1e-12 * (1.0 + sup)
    }

    /// Mean and Cholesky factor of `x | η`.
    pub fn x_conditional(&self, eta: &[f64]) -> Result<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>), SamplerError> {
        let mut precision = self.scaled_gram.clone();
        for (i, &e) in eta.iter().enumerate() {
            precision[(i, i)] += 1.0 / e;
        }
        let chol = precision.cholesky().ok_or(SamplerError::SingularPrecision)?;
        let mean = chol.solve(&self.scaled_rhs);
        Ok((mean, chol))
    }

    fn draw_x(&mut self, state: &mut GibbsState, rng: &mut RngStream) -> Result<(), SamplerError> {
        let (mean, chol) = self.x_conditional(&state.eta)?;
        rng.fill_standard_normal(self.xi.as_mut_slice());
        // P = L Lᵀ, so Lᵀ z = ξ gives z ~ N(0, P⁻¹)
        let z = chol
            .l()
            .transpose()
            .solve_upper_triangular(&self.xi)
            .ok_or(SamplerError::SingularPrecision)?;
        for (x, (m, zi)) in state.x.iter_mut().zip(mean.iter().zip(z.iter())) {
            *x = m + zi;
        }
        Ok(())
    }

    fn draw_eta(&self, state: &mut GibbsState, rng: &mut RngStream) -> Result<(), SamplerError> {
        let bl = self.model.beta() * self.model.lambda();
        let eps = Self::degenerate_threshold(&state.x);
        for (eta, &x) in state.eta.iter_mut().zip(&state.x) {
            *eta = if x.abs() >= eps {
                1.0 / rng.sample_inverse_gaussian(bl / x.abs(), bl * bl)?
            } else {
                rng.sample_gamma(0.5, bl * bl / 2.0)?
            };
        }
        Ok(())
    }
}

impl MarkovKernel for Gibbs<'_> {
    type State = GibbsState;

    fn step(&mut self, state: &mut GibbsState, rng: &mut RngStream) -> Result<bool, SamplerError> {
        let d = self.model.dim();
        for len in [state.x.len(), state.eta.len()] {
            if len != d {
                return Err(SamplerError::DimensionMismatch { expected: d, got: len });
            }
        }
        self.draw_x(state, rng)?;
        self.draw_eta(state, rng)?;
        Ok(true)
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn observe(&self, state: &GibbsState, out: &mut [f64]) {
        out.copy_from_slice(&state.x);
    }
}

/// One full Gibbs sweep: `x | η`, then `η | x`.
pub fn gibbs_step(
    state: &GibbsState,
    model: &TargetModel,
    rng: &mut RngStream,
) -> Result<GibbsState, SamplerError> {
    let mut kernel = Gibbs::new(model)?;
    let mut next = state.clone();
    kernel.step(&mut next, rng)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearOperator;
    use crate::model::DataTerm;
    use crate::quadrature::gauss_kronrod;
    use approx::assert_abs_diff_eq;

    fn scalar_model(lambda: f64) -> TargetModel {
        let op = LinearOperator::dense(1, 1, vec![1.0]).unwrap();
        TargetModel::new(lambda, 1.0, DataTerm::quadratic(op, vec![3.0]).unwrap()).unwrap()
    }

    #[test]
    fn x_conditional_matches_quadrature() {
        // x | η=1 has density ∝ exp(−x²/2 − (x−3)²/2)
        let m = scalar_model(2.7);
        let g = Gibbs::new(&m).unwrap();
        let (mean, chol) = g.x_conditional(&[1.0]).unwrap();
        let var = chol.inverse()[(0, 0)];
        assert_abs_diff_eq!(mean[0], 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(var, 0.5, epsilon = 1e-14);
        let dens = |x: f64| (-x * x / 2.0 - (x - 3.0) * (x - 3.0) / 2.0).exp();
        let z = gauss_kronrod(dens, -20.0, 20.0, 1e-14, 1e-12).unwrap();
        let m1 = gauss_kronrod(|x| x * dens(x), -20.0, 20.0, 1e-14, 1e-12).unwrap() / z;
        let m2 = gauss_kronrod(|x| x * x * dens(x), -20.0, 20.0, 1e-14, 1e-12).unwrap() / z;
        assert_abs_diff_eq!(m1, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(m2 - m1 * m1, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn eta_conditional_matches_quadrature() {
        // 1/η | x=3 ∝ w^{−3/2} exp(−x²w/2 − β²λ²/(2w)), expected IG(0.9, 7.29)
        let (x, bl) = (3.0f64, 2.7f64);
        let dens = |w: f64| w.powf(-1.5) * (-x * x * w / 2.0 - bl * bl / (2.0 * w)).exp();
        let z = gauss_kronrod(dens, 1e-6, 30.0, 1e-16, 1e-12).unwrap();
        let mean = gauss_kronrod(|w| w * dens(w), 1e-6, 30.0, 1e-16, 1e-12).unwrap() / z;
        let second = gauss_kronrod(|w| w * w * dens(w), 1e-6, 30.0, 1e-16, 1e-12).unwrap() / z;
        let (mu, shape) = (bl / x, bl * bl);
        assert_abs_diff_eq!(mu, 0.9, epsilon = 1e-15);
        assert_abs_diff_eq!(mean, mu, epsilon = 1e-8);
        assert_abs_diff_eq!(second - mean * mean, mu.powi(3) / shape, epsilon = 1e-8);

        let m = scalar_model(2.7);
        let g = Gibbs::new(&m).unwrap();
        let mut rng = RngStream::new(8, 0);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut s = GibbsState { x: vec![3.0], eta: vec![1.0] };
            g.draw_eta(&mut s, &mut rng).unwrap();
            sum += 1.0 / s.eta[0];
        }
        let sd = (mu.powi(3) / shape).sqrt();
        assert!((sum / n as f64 - mu).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn degenerate_branch_is_gamma() {
        // η^{−½} exp(−β²λ²η/2) at x=0: Gamma(½, β²λ²/2), mean 0.13717
        let m = scalar_model(2.7);
        let g = Gibbs::new(&m).unwrap();
        let mut rng = RngStream::new(9, 0);
        let n = 400_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut s = GibbsState { x: vec![0.0], eta: vec![1.0] };
            g.draw_eta(&mut s, &mut rng).unwrap();
            sum += s.eta[0];
        }
        let rate = 2.7f64 * 2.7 / 2.0;
        let mean = 0.5 / rate;
        assert_abs_diff_eq!(mean, 0.13717, epsilon = 1e-5);
        let sd = (0.5f64).sqrt() / rate;
        assert!((sum / n as f64 - mean).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn zero_data_term_is_rejected() {
        let m = TargetModel::new(1.0, 1.0, DataTerm::zero(2)).unwrap();
        assert!(matches!(Gibbs::new(&m), Err(SamplerError::NotQuadratic)));
    }

    #[test]
    fn step_keeps_eta_positive() {
        let m = scalar_model(2.7);
        let mut rng = RngStream::new(10, 0);
        let mut s = GibbsState::default_init(1);
        for _ in 0..1000 {
            s = gibbs_step(&s, &m, &mut rng).unwrap();
            assert!(s.eta[0] > 0.0);
        }
    }
}
