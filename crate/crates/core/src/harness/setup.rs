//! Turning a [`ModelSpec`] into a [`TargetModel`], including synthetic data.

use serde::{Deserialize, Serialize};

use super::config::{LambdaRule, ModelSpec, OperatorKind, SamplerKind, SamplerSpec, SignalKind};
use super::HarnessError;
use crate::linops::{gaussian_kernel, haar_inverse, HaarDirection, LinearOperator};
use crate::model::{DataTerm, DataTermKind, TargetModel};
use crate::rng::RngStream;
use crate::samplers::StepConfig;

/// Stream reserved for data synthesis; chains never use it.
pub(crate) const DATA_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub values: Vec<f64>,
    /// Nonzero indices (k-sparse) or first index of each new level
    /// (piecewise constant), ascending.
    pub positions: Vec<usize>,
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// `k` distinct indices from `lo..hi`, ascending, by partial Fisher–Yates.
fn distinct_indices(k: usize, lo: usize, hi: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut pool: Vec<usize> = (lo..hi).collect();
    for i in 0..k {
        let j = i + ((rng.uniform() * (pool.len() - i) as f64) as usize).min(pool.len() - i - 1);
        pool.swap(i, j);
    }
    let mut out = pool[..k].to_vec();
    out.sort_unstable();
    out
}

/// Random sign times a magnitude in `[1, 2)`.
fn unit_amplitude(rng: &mut RngStream) -> f64 {
    let sign = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    sign * (1.0 + rng.uniform())
}

/// Ground-truth signal: `k` unit-scale spikes, or a piecewise-constant signal
/// with `n` jumps at uniform positions.
pub fn synthesize_signal(kind: SignalKind, count: usize, d: usize, rng: &mut RngStream) -> Result<Signal, HarnessError> {
    match kind {
        SignalKind::KSparse => {
            if count > d {
                return Err(invalid("model.sparsity", format!("{count} > dim {d}")));
            }
            let positions = distinct_indices(count, 0, d, rng);
            let mut values = vec![0.0; d];
            for &i in &positions {
                values[i] = unit_amplitude(rng);
            }
            Ok(Signal { values, positions })
        }
        SignalKind::PiecewiseConstant => {
            if count >= d {
                return Err(invalid("model.n_jumps", format!("{count} ≥ dim {d}")));
            }
            let positions = distinct_indices(count, 1, d, rng);
            let mut level = 2.0 * rng.uniform() - 1.0;
            let mut values = Vec::with_capacity(d);
            let mut next = positions.iter().peekable();
            for i in 0..d {
                if next.peek() == Some(&&i) {
                    level += unit_amplitude(rng);
                    next.next();
                }
                values.push(level);
            }
            Ok(Signal { values, positions })
        }
    }
}

/// A model ready to sample, with whatever ground truth was synthesized.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: TargetModel,
    /// Ground truth in the sampled variable, when synthesized.
    pub truth: Option<Signal>,
    /// Ground truth in the signal domain (differs from `truth` for Haar).
    pub signal: Option<Signal>,
    pub y: Vec<f64>,
}

impl BuiltModel {
    /// Maps a sampled vector to the signal domain.
    pub fn to_signal(&self, spec: &ModelSpec, x: &[f64]) -> Vec<f64> {
        match spec.operator {
            OperatorKind::HaarConv => haar_inverse(x).expect("power-of-two length"),
            _ => x.to_vec(),
        }
    }
}

pub fn build_model(spec: &ModelSpec, seed: u64) -> Result<BuiltModel, HarnessError> {
    let mut rng = RngStream::new(seed, DATA_STREAM);
    let d = spec.dim;
    let (op, truth, signal) = match spec.operator {
        OperatorKind::Zero => {
            let model = TargetModel::new(spec.lambda, spec.beta, DataTerm::zero(d))?;
            return Ok(BuiltModel {
                model,
                truth: None,
                signal: None,
                y: Vec::new(),
            });
        }
        OperatorKind::Dense => (LinearOperator::dense(spec.rows, d, spec.matrix.clone())?, None, None),
        OperatorKind::Gaussian => (LinearOperator::gaussian(spec.rows, d, spec.variance, &mut rng)?, None, None),
        OperatorKind::HaarConv => {
            let blur = LinearOperator::conv(gaussian_kernel(spec.kernel_sigma, spec.kernel_truncate), d)?;
            let synth = LinearOperator::haar(d, HaarDirection::Synthesis)?;
            (LinearOperator::compose(blur, synth)?, None, None)
        }
    };
    let (y, truth, signal) = if spec.y.is_empty() {
        let count = match spec.signal {
            SignalKind::KSparse => spec.sparsity,
            SignalKind::PiecewiseConstant => spec.n_jumps,
        };
        let sig = synthesize_signal(spec.signal, count, d, &mut rng)?;
        // the sampled variable: Haar coefficients of the signal, or the
        // signal itself
        let coeffs = match spec.operator {
            OperatorKind::HaarConv => Signal {
                values: crate::linops::haar_forward(&sig.values)?,
                positions: Vec::new(),
            },
            _ => sig.clone(),
        };
        let mut y = op.apply(&coeffs.values)?;
        if spec.noise_sd > 0.0 {
            for v in y.iter_mut() {
                *v += spec.noise_sd * rng.standard_normal();
            }
        }
        (y, Some(coeffs), Some(sig))
    } else {
        (spec.y.clone(), truth, signal)
    };
    let lambda = match spec.lambda_rule {
        LambdaRule::Fixed => spec.lambda,
        LambdaRule::HalfAtySup => {
            let aty = op.apply_adjoint(&y)?;
            let sup = aty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !(sup > 0.0) {
                return Err(invalid("model.lambda_rule", "Aᵀy = 0, so ½‖Aᵀy‖∞ is not a valid λ"));
            }
            0.5 * sup
        }
    };
    let model = TargetModel::new(lambda, spec.beta, DataTerm::quadratic(op, y.clone())?)?;
    Ok(BuiltModel {
        model,
        truth,
        signal,
        y,
    })
}

/// `γ` from the recipe `Δt = γ/(5(γL + 1))` for a given `Δt`.
pub fn myula_gamma_for_step(dt: f64, lipschitz: f64) -> Result<f64, HarnessError> {
    let denom = 1.0 - 5.0 * dt * lipschitz;
    if denom <= 0.0 {
        return Err(invalid(
            "myula.dt",
            format!("step {dt} too large for the recipe with L = {lipschitz}; set myula.gamma explicitly"),
        ));
    }
    Ok(5.0 * dt / denom)
}

/// Concrete step parameters for one sampler on one model.
pub fn step_config(spec: &SamplerSpec, model: &TargetModel) -> Result<StepConfig, HarnessError> {
    let lipschitz = model.data().lipschitz;
    let cfg = match spec.kind {
        SamplerKind::Myula => {
            // with G = 0 the envelope alone sets the scale; use L = 1 there
            let l = if lipschitz > 0.0 { lipschitz } else { 1.0 };
            match (spec.dt, spec.gamma) {
                (Some(dt), Some(g)) => StepConfig::with_gamma(dt, g),
                (Some(dt), None) => StepConfig::with_gamma(dt, myula_gamma_for_step(dt, l)?),
                (None, Some(g)) => StepConfig::with_gamma(g / (5.0 * (g * l + 1.0)), g),
                (None, None) => StepConfig::myula_recipe(l, 1.0),
            }
        }
        SamplerKind::Gibbs => StepConfig::new(1.0),
        _ => StepConfig::new(spec.dt.ok_or_else(|| invalid(&format!("{}.dt", spec.kind.name()), "is required"))?),
    };
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn is_quadratic(model: &TargetModel) -> bool {
    matches!(model.data().kind, DataTermKind::Quadratic { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_sparse_has_exactly_k_nonzeros() {
        let mut rng = RngStream::new(3, 0);
        let s = synthesize_signal(SignalKind::KSparse, 2, 20, &mut rng).unwrap();
        assert_eq!(s.values.iter().filter(|v| **v != 0.0).count(), 2);
        assert_eq!(s.positions.len(), 2);
        assert!(s.values.iter().all(|v| v.abs() < 2.0));
    }

    #[test]
    fn piecewise_constant_levels() {
        let mut rng = RngStream::new(3, 0);
        let flat = synthesize_signal(SignalKind::PiecewiseConstant, 0, 8, &mut rng).unwrap();
        assert!(flat.values.iter().all(|v| *v == flat.values[0]));
        let s = synthesize_signal(SignalKind::PiecewiseConstant, 5, 64, &mut rng).unwrap();
        let changes: Vec<usize> = (1..64).filter(|&i| s.values[i] != s.values[i - 1]).collect();
        assert_eq!(changes, s.positions);
        assert!(synthesize_signal(SignalKind::PiecewiseConstant, 8, 8, &mut rng).is_err());
        assert!(synthesize_signal(SignalKind::KSparse, 9, 8, &mut rng).is_err());
    }

    #[test]
    fn replay_gives_identical_signal() {
        let a = synthesize_signal(SignalKind::PiecewiseConstant, 4, 32, &mut RngStream::new(8, 1)).unwrap();
        let b = synthesize_signal(SignalKind::PiecewiseConstant, 4, 32, &mut RngStream::new(8, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recipe_inverse_round_trips() {
        let g = myula_gamma_for_step(0.1, 1.0).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!((g / (5.0 * (g + 1.0)) - 0.1).abs() < 1e-15);
        assert!(myula_gamma_for_step(0.2, 1.0).is_err());
    }
}
