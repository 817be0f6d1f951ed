//! Moreau–Yosida regularized ULA: ULA on `G + λ‖·‖₁` with the ℓ1 term
//! replaced by its Moreau envelope of parameter `γ`.

use super::{MarkovKernel, SamplerError, StepConfig};
use crate::model::TargetModel;
use crate::rng::RngStream;

/// Soft thresholding, the proximal map of `threshold·‖·‖₁`.
pub fn prox_l1(x: &[f64], threshold: f64) -> Vec<f64> {
    x.iter().map(|&v| soft_threshold(v, threshold)).collect()
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub struct Myula<'a> {
    model: &'a TargetModel,
    dt: f64,
    gamma: f64,
    grad: Vec<f64>,
    resid: Vec<f64>,
    xi: Vec<f64>,
}

impl<'a> Myula<'a> {
    pub fn new(model: &'a TargetModel, cfg: StepConfig) -> Result<Self, SamplerError> {
        cfg.validate()?;
        let gamma = cfg.moreau_gamma.ok_or(SamplerError::MissingGamma)?;
        let d = model.dim();
        Ok(Self {
            model,
            dt: cfg.dt,
            gamma,
            grad: vec![0.0; d],
            resid: Vec::new(),
            xi: vec![0.0; d],
        })
    }

    /// `x ← x − Δt(∇G(x) + (x − prox_{γλ}(x))/γ) + √(2Δt/β)·ξ`.
    pub fn step_with_noise(&mut self, x: &mut [f64], xi: &[f64]) -> Result<(), SamplerError> {
        self.model.data().gradient_into(x, &mut self.resid, &mut self.grad);
        if let Some(index) = self.grad.iter().position(|g| !g.is_finite()) {
            return Err(SamplerError::NonFiniteDrift { index });
        }
        let (dt, gamma) = (self.dt, self.gamma);
        let threshold = gamma * self.model.lambda();
        let noise = (2.0 * dt / self.model.beta()).sqrt();
        for ((xi_, &g), &z) in x.iter_mut().zip(&self.grad).zip(xi) {
            let envelope = (*xi_ - soft_threshold(*xi_, threshold)) / gamma;
            *xi_ += -dt * (g + envelope) + noise * z;
        }
        Ok(())
    }
}

impl MarkovKernel for Myula<'_> {
    type State = Vec<f64>;

    fn step(&mut self, state: &mut Vec<f64>, rng: &mut RngStream) -> Result<bool, SamplerError> {
        let mut xi = std::mem::take(&mut self.xi);
        rng.fill_standard_normal(&mut xi);
        let out = self.step_with_noise(state, &xi);
        self.xi = xi;
        out.map(|_| true)
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn observe(&self, state: &Vec<f64>, out: &mut [f64]) {
        out.copy_from_slice(state);
    }
}

/// One MYULA step; `cfg.moreau_gamma` must be set.
pub fn myula_step(
    x: &[f64],
    model: &TargetModel,
    cfg: &StepConfig,
    rng: &mut RngStream,
) -> Result<Vec<f64>, SamplerError> {
    let mut kernel = Myula::new(model, *cfg)?;
    if x.len() != model.dim() {
        return Err(SamplerError::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let mut next = x.to_vec();
    kernel.step(&mut next, rng)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::LinearOperator;
    use crate::model::DataTerm;
    use approx::assert_abs_diff_eq;

    #[test]
    fn prox_examples() {
        assert_eq!(prox_l1(&[3.0], 1.0), vec![2.0]);
        assert_eq!(prox_l1(&[-0.5], 1.0), vec![0.0]);
        assert_eq!(prox_l1(&[0.0], 0.3), vec![0.0]);
        assert_eq!(prox_l1(&[-4.0, 1.5], 0.0), vec![-4.0, 1.5]);
    }

    #[test]
    fn deterministic_steps() {
        let op = LinearOperator::dense(1, 1, vec![1.0]).unwrap();
        let m = TargetModel::new(1.0, 1.0, DataTerm::quadratic(op, vec![3.0]).unwrap()).unwrap();
        let dt = 0.05;
        let mut k = Myula::new(&m, StepConfig::with_gamma(dt, 1.0)).unwrap();
        let mut x = vec![3.0];
        k.step_with_noise(&mut x, &[0.0]).unwrap();
        assert_abs_diff_eq!(x[0], 3.0 - dt, epsilon = 1e-15);

        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(1)).unwrap();
        let mut k = Myula::new(&m0, StepConfig::with_gamma(0.1, 0.5)).unwrap();
        let mut x = vec![0.0];
        k.step_with_noise(&mut x, &[0.0]).unwrap();
        assert_eq!(x, vec![0.0]);
    }

    #[test]
    fn envelope_gradient_tends_to_sign() {
        // noise-free step with G = 0: x⁺ = x − Δt·∇R_γ(x)
        let lambda = 1.7;
        let m0 = TargetModel::new(lambda, 1.0, DataTerm::zero(2)).unwrap();
        let dt = 0.01;
        let mut k = Myula::new(&m0, StepConfig::with_gamma(dt, 1e-6)).unwrap();
        let mut x = vec![2.0, -0.5];
        k.step_with_noise(&mut x, &[0.0, 0.0]).unwrap();
        let grad = [(2.0 - x[0]) / dt, (-0.5 - x[1]) / dt];
        assert!((grad[0] - lambda).abs() <= 1e-4);
        assert!((grad[1] + lambda).abs() <= 1e-4);
    }

    #[test]
    fn missing_gamma_is_an_error() {
        let m0 = TargetModel::new(1.0, 1.0, DataTerm::zero(1)).unwrap();
        let mut rng = RngStream::new(0, 0);
        assert_eq!(
            myula_step(&[0.0], &m0, &StepConfig::new(0.1), &mut rng).unwrap_err(),
            SamplerError::MissingGamma
        );
    }
}
