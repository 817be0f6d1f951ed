//! The Hadamard–Langevin scheme and its Metropolis-adjusted variant.
//!
//! One step is explicit in the data term and the noise and implicit in the
//! ridge term and the `1/(βu)` barrier:
//!
//! ```text
//! w      = u − Δt·v⊙∇G(u⊙v) + √(2Δt/β)·ξ¹
//! v½     = v − Δt·u⊙∇G(u⊙v) + √(2Δt/β)·ξ²
//! u⁺     = positive root of (1+Δtλ)·t² − w·t − Δt/β = 0
//! v⁺     = v½ / (1+Δtλ)
//! ```
//!
//! so `u⁺ > 0` holds exactly, whatever the noise.

use serde::{Deserialize, Serialize};

use super::{MarkovKernel, SamplerError, SamplerState, StepConfig};
use crate::model::{check_positive, TargetModel};
use crate::rng::RngStream;

/// Positive root of `a·t² − w·t − c = 0` for `a, c > 0`.
///
/// For `w < 0` the rationalized form `2c / (√(w² + 4ac) − w)` is used so the
/// result does not cancel to zero.
#[inline]
pub fn positive_root(w: f64, a: f64, c: f64) -> f64 {
    let disc = (w * w + 4.0 * a * c).sqrt();
    if w >= 0.0 {
        (w + disc) / (2.0 * a)
    } else {
        2.0 * c / (disc - w)
    }
}

#[derive(Debug, Default, Clone)]
pub(crate) struct Work {
    pub x: Vec<f64>,
    pub grad: Vec<f64>,
    pub resid: Vec<f64>,
}

impl Work {
    pub fn new(d: usize) -> Self {
        Self {
            x: vec![0.0; d],
            grad: vec![0.0; d],
            resid: Vec::new(),
        }
    }

    /// Fills `x = u ⊙ v` and `grad = ∇G(x)`; rejects non-finite gradients.
    pub fn gradient_at(&mut self, model: &TargetModel, u: &[f64], v: &[f64]) -> Result<(), SamplerError> {
        for ((x, a), b) in self.x.iter_mut().zip(u).zip(v) {
            *x = a * b;
        }
        model.data().gradient_into(&self.x, &mut self.resid, &mut self.grad);
        match self.grad.iter().position(|g| !g.is_finite()) {
            Some(index) => Err(SamplerError::NonFiniteDrift { index }),
            None => Ok(()),
        }
    }
}

fn check_state(model: &TargetModel, state: &SamplerState) -> Result<(), SamplerError> {
    let d = model.dim();
    for len in [state.u.len(), state.v.len()] {
        if len != d {
            return Err(SamplerError::DimensionMismatch { expected: d, got: len });
        }
    }
    Ok(())
}

/// In-place step driven by caller-supplied standard normals.
pub(crate) fn step_in_place(
    model: &TargetModel,
    dt: f64,
    state: &mut SamplerState,
    xi_u: &[f64],
    xi_v: &[f64],
    work: &mut Work,
) -> Result<(), SamplerError> {
    work.gradient_at(model, &state.u, &state.v)?;
    let (lambda, beta) = (model.lambda(), model.beta());
    let a = 1.0 + dt * lambda;
    let c = dt / beta;
    let noise = (2.0 * dt / beta).sqrt();
    for i in 0..state.u.len() {
        let (u, v, g) = (state.u[i], state.v[i], work.grad[i]);
        let w = u - dt * (v * g) + noise * xi_u[i];
        let vh = v - dt * (u * g) + noise * xi_v[i];
        let up = positive_root(w, a, c);
        if !(up > 0.0) {
            return Err(SamplerError::Positivity { index: i, value: up });
        }
        state.u[i] = up;
        state.v[i] = vh / a;
    }
    Ok(())
}

/// One Hadamard–Langevin step with explicit standard-normal draws `ξ¹, ξ²`.
pub fn hadamard_step_with_noise(
    state: &SamplerState,
    model: &TargetModel,
    cfg: &StepConfig,
    xi_u: &[f64],
    xi_v: &[f64],
) -> Result<SamplerState, SamplerError> {
    cfg.validate()?;
    check_state(model, state)?;
    check_positive(&state.u)?;
    let d = model.dim();
    for len in [xi_u.len(), xi_v.len()] {
        if len != d {
            return Err(SamplerError::DimensionMismatch { expected: d, got: len });
        }
    }
    let mut next = state.clone();
    step_in_place(model, cfg.dt, &mut next, xi_u, xi_v, &mut Work::new(d))?;
    Ok(next)
}

/// One Hadamard–Langevin step. Draws `ξ¹` (d normals) then `ξ²` (d normals).
pub fn hadamard_step(
    state: &SamplerState,
    model: &TargetModel,
    cfg: &StepConfig,
    rng: &mut RngStream,
) -> Result<SamplerState, SamplerError> {
    let mut kernel = HadamardUla::new(model, *cfg)?;
    check_state(model, state)?;
    check_positive(&state.u)?;
    let mut next = state.clone();
    kernel.step(&mut next, rng)?;
    Ok(next)
}

/// Log density of one scheme transition `from → to`, up to an additive
/// constant that depends on neither state.
///
/// The `u` component is the Gaussian half-step density pulled back through
/// `t ↦ (1+Δtλ)t − Δt/(βt)`, whose Jacobian `(1+Δtλ) + Δt/(βt²)` is taken at
/// the destination `t = u⁺`.
pub fn hadamard_transition_logdensity(
    from: &SamplerState,
    to: &SamplerState,
    model: &TargetModel,
    cfg: &StepConfig,
) -> Result<f64, SamplerError> {
    cfg.validate()?;
    check_state(model, from)?;
    check_state(model, to)?;
    check_positive(&from.u)?;
    check_positive(&to.u)?;
    let mut work = Work::new(model.dim());
    work.gradient_at(model, &from.u, &from.v)?;
    Ok(transition_logdensity_with_grad(from, to, &work.grad, model.lambda(), model.beta(), cfg.dt))
}

fn transition_logdensity_with_grad(
    from: &SamplerState,
    to: &SamplerState,
    grad: &[f64],
    lambda: f64,
    beta: f64,
    dt: f64,
) -> f64 {
    let a = 1.0 + dt * lambda;
    let c = dt / beta;
    let mut quad = 0.0;
    let mut jac = 0.0;
    for i in 0..grad.len() {
        let (u, v, g) = (from.u[i], from.v[i], grad[i]);
        let (up, vp) = (to.u[i], to.v[i]);
        let ru = a * up - c / up - u + dt * v * g;
        let rv = a * vp - v + dt * u * g;
        quad += ru * ru + rv * rv;
        jac += (a + c / (up * up)).ln();
    }
    -beta / (4.0 * dt) * quad + jac
}

/// Unadjusted Hadamard–Langevin kernel.
pub struct HadamardUla<'a> {
    model: &'a TargetModel,
    dt: f64,
    work: Work,
    xi_u: Vec<f64>,
    xi_v: Vec<f64>,
}

impl<'a> HadamardUla<'a> {
    pub fn new(model: &'a TargetModel, cfg: StepConfig) -> Result<Self, SamplerError> {
        cfg.validate()?;
        let d = model.dim();
        Ok(Self {
            model,
            dt: cfg.dt,
            work: Work::new(d),
            xi_u: vec![0.0; d],
            xi_v: vec![0.0; d],
        })
    }

    /// Step with caller-supplied standard normals (for coupled paths).
    pub fn step_with_noise(
        &mut self,
        state: &mut SamplerState,
        xi_u: &[f64],
        xi_v: &[f64],
    ) -> Result<(), SamplerError> {
        step_in_place(self.model, self.dt, state, xi_u, xi_v, &mut self.work)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

impl MarkovKernel for HadamardUla<'_> {
    type State = SamplerState;

    fn step(&mut self, state: &mut SamplerState, rng: &mut RngStream) -> Result<bool, SamplerError> {
        rng.fill_standard_normal(&mut self.xi_u);
        rng.fill_standard_normal(&mut self.xi_v);
        step_in_place(self.model, self.dt, state, &self.xi_u, &self.xi_v, &mut self.work)?;
        Ok(true)
    }

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn observe(&self, state: &SamplerState, out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(&state.u).zip(&state.v) {
            *o = a * b;
        }
    }

    fn min_u(&self, state: &SamplerState) -> Option<f64> {
        Some(state.min_u())
    }
}

/// Hadamard–Langevin proposal with a Metropolis–Hastings correction against
/// `π`, using the exact transition density of the scheme.
pub struct HadamardMala<'a> {
    ula: HadamardUla<'a>,
    proposal: SamplerState,
    grad_from: Vec<f64>,
}

impl<'a> HadamardMala<'a> {
    pub fn new(model: &'a TargetModel, cfg: StepConfig) -> Result<Self, SamplerError> {
        let d = model.dim();
        Ok(Self {
            ula: HadamardUla::new(model, cfg)?,
            proposal: SamplerState::default_init(d, d),
            grad_from: vec![0.0; d],
        })
    }

    /// Log acceptance ratio for moving `from → to` given `∇G` at both ends.
    fn log_ratio(
        &self,
        from: &SamplerState,
        to: &SamplerState,
        grad_from: &[f64],
        grad_to: &[f64],
    ) -> Result<f64, SamplerError> {
        let m = self.ula.model;
        let (lambda, beta, dt) = (m.lambda(), m.beta(), self.ula.dt);
        let forward = transition_logdensity_with_grad(from, to, grad_from, lambda, beta, dt);
        let backward = transition_logdensity_with_grad(to, from, grad_to, lambda, beta, dt);
        Ok(m.pi_log_unnormalized(&to.u, &to.v)? + backward - m.pi_log_unnormalized(&from.u, &from.v)? - forward)
    }

    /// Runs one proposal with the given normals and a given uniform; returns
    /// `(accepted, log acceptance ratio)`.
    pub fn step_with_noise(
        &mut self,
        state: &mut SamplerState,
        xi_u: &[f64],
        xi_v: &[f64],
        uniform: f64,
    ) -> Result<(bool, f64), SamplerError> {
        self.proposal.clone_from(state);
        self.ula.step_with_noise(&mut self.proposal, xi_u, xi_v)?;
        self.grad_from.clone_from(&self.ula.work.grad);
        self.ula.work.gradient_at(self.ula.model, &self.proposal.u, &self.proposal.v)?;
        let log_alpha = self.log_ratio(state, &self.proposal, &self.grad_from, &self.ula.work.grad)?;
        let accept = log_alpha >= 0.0 || uniform.ln() < log_alpha;
        if accept {
            state.clone_from(&self.proposal);
        }
        Ok((accept, log_alpha))
    }
}

impl MarkovKernel for HadamardMala<'_> {
    type State = SamplerState;

    fn step(&mut self, state: &mut SamplerState, rng: &mut RngStream) -> Result<bool, SamplerError> {
        let mut xi_u = std::mem::take(&mut self.ula.xi_u);
        let mut xi_v = std::mem::take(&mut self.ula.xi_v);
        rng.fill_standard_normal(&mut xi_u);
        rng.fill_standard_normal(&mut xi_v);
        let uniform = rng.uniform();
        let out = self.step_with_noise(state, &xi_u, &xi_v, uniform);
        self.ula.xi_u = xi_u;
        self.ula.xi_v = xi_v;
        Ok(out?.0)
    }

    fn dim(&self) -> usize {
        self.ula.dim()
    }

    fn observe(&self, state: &SamplerState, out: &mut [f64]) {
        self.ula.observe(state, out)
    }

    fn min_u(&self, state: &SamplerState) -> Option<f64> {
        Some(state.min_u())
    }

    fn is_metropolized(&self) -> bool {
        true
    }
}

/// One Metropolis-adjusted step; returns the new state and whether the
/// proposal was accepted.
pub fn hadamard_mala_step(
    state: &SamplerState,
    model: &TargetModel,
    cfg: &StepConfig,
    rng: &mut RngStream,
) -> Result<(SamplerState, bool), SamplerError> {
    check_state(model, state)?;
    check_positive(&state.u)?;
    let mut kernel = HadamardMala::new(model, *cfg)?;
    let mut next = state.clone();
    let accepted = kernel.step(&mut next, rng)?;
    Ok((next, accepted))
}

/// Constants of the one-step drift bound
/// `E[V(next) | current] ≤ αV(current) + R` with `V(u, v) = 1 + ‖(u, v)‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConstants {
    pub alpha: f64,
    pub r: f64,
}

/// `α = (1 + Δt²B²)/(1 + λΔt)²` and
/// `R = (1 − α) + 4KΔt/(1 + λΔt)² + (4(1 + Δtλ)d + 4d)Δt/(β(1 + λΔt)²)`,
/// where `B` bounds `‖∇G‖∞`, `xᵀ∇G(x) ≥ −K` and `d` is the dimension.
/// `α < 1` needs `Δt < λ/B²`.
pub fn drift_constants(lambda: f64, beta: f64, dt: f64, b: f64, k: f64, d: usize) -> DriftConstants {
    let a2 = (1.0 + lambda * dt).powi(2);
    let alpha = (1.0 + dt * dt * b * b) / a2;
    let d = d as f64;
    let r = (1.0 - alpha) + 4.0 * k * dt / a2 + (4.0 * (1.0 + dt * lambda) * d + 4.0 * d) * dt / (beta * a2);
    DriftConstants { alpha, r }
}
