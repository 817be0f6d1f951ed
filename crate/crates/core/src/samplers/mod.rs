//! Markov kernels for ℓ1 posteriors and the generic chain runner.
//!
//! Every sampler is a [`MarkovKernel`]: it owns its scratch space, borrows the
//! model, and advances a state in place. [`run_chain`] handles burn-in,
//! thinning and bookkeeping for any of them.

mod gibbs;
mod group;
mod hadamard;
mod myula;

use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use gibbs::{gibbs_step, Gibbs};
pub use group::{group_hadamard_step, group_hadamard_step_with_noise, GroupHadamard};
pub use hadamard::{
    drift_constants, hadamard_mala_step, hadamard_step, hadamard_step_with_noise, hadamard_transition_logdensity,
    positive_root, DriftConstants, HadamardMala, HadamardUla,
};
pub use myula::{myula_step, prox_l1, Myula};

use crate::model::ModelError;
use crate::rng::{RngError, RngStream};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SamplerError {
    #[error("non-finite drift at coordinate {index}")]
    NonFiniteDrift { index: usize },
    #[error("u[{index}] = {value} left the positive half-line")]
    Positivity { index: usize, value: f64 },
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("MYULA needs a Moreau-Yosida parameter gamma")]
    MissingGamma,
    #[error("invalid step configuration: {0}")]
    InvalidStep(String),
    #[error("the Gibbs sampler requires a quadratic data term")]
    NotQuadratic,
    #[error("Gaussian conditional precision is not positive definite")]
    SingularPrecision,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rng(#[from] RngError),
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("step {step} failed: {source}")]
pub struct ChainError {
    pub step: usize,
    #[source]
    pub source: SamplerError,
}

/// State `(u, v)` of an overparameterized chain; `u` is strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SamplerState {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Self {
        Self { u, v }
    }

    /// `u = 1`, `v = 0`.
    pub fn default_init(dim_u: usize, dim_v: usize) -> Self {
        Self {
            u: vec![1.0; dim_u],
            v: vec![0.0; dim_v],
        }
    }

    /// `u ⊙ v` for equal lengths.
    pub fn product(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).map(|(a, b)| a * b).collect()
    }

    pub fn min_u(&self) -> f64 {
        self.u.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Latent-scale state of the Gibbs sampler; `eta > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsState {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
}

impl GibbsState {
    /// `x = 0`, `η = 1`.
    pub fn default_init(dim: usize) -> Self {
        Self {
            x: vec![0.0; dim],
            eta: vec![1.0; dim],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    /// Moreau–Yosida smoothing parameter (MYULA only).
    pub moreau_gamma: Option<f64>,
}

impl StepConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            moreau_gamma: None,
        }
    }

    pub fn with_gamma(dt: f64, gamma: f64) -> Self {
        Self {
            dt,
            moreau_gamma: Some(gamma),
        }
    }

    /// `γ = 1/(K L)` and `Δt = γ / (5(γL + 1))`.
    pub fn myula_recipe(lipschitz: f64, k: f64) -> Self {
        let gamma = 1.0 / (k * lipschitz);
        Self::with_gamma(gamma / (5.0 * (gamma * lipschitz + 1.0)), gamma)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SamplerError::InvalidStep(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(g) = self.moreau_gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(SamplerError::InvalidStep(format!(
                    "moreau_gamma must be positive, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// One transition of a Markov chain.
pub trait MarkovKernel {
    type State: Clone;

    /// Advances `state` in place. Returns whether a proposal was accepted
    /// (always `true` for unadjusted kernels).
    fn step(&mut self, state: &mut Self::State, rng: &mut RngStream) -> Result<bool, SamplerError>;

    /// Dimension of the observed variable `x`.
    fn dim(&self) -> usize;

    /// Writes the observed `x` (e.g. `u ⊙ v`) into `out`.
    fn observe(&self, state: &Self::State, out: &mut [f64]);

    /// Smallest `u` entry, for overparameterized chains.
    fn min_u(&self, _state: &Self::State) -> Option<f64> {
        None
    }

    /// Whether the kernel has an accept/reject step.
    fn is_metropolized(&self) -> bool {
        false
    }
}

/// Output of [`run_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    /// `n_samples × d` matrix of recorded `x`.
    pub samples: Array2<f64>,
    pub acceptance_rate: Option<f64>,
    /// Smallest `u` entry over every visited state, including the initial one.
    pub min_u_seen: Option<f64>,
    pub wall_time: f64,
}

/// Runs `n_burn` steps, then records `n_samples` states taken every `thin`
/// steps. Errors carry the (1-based) index of the failing step.
pub fn run_chain<K: MarkovKernel>(
    kernel: &mut K,
    init: K::State,
    n_burn: usize,
    n_samples: usize,
    thin: usize,
    rng: &mut RngStream,
) -> Result<(ChainRecord, K::State), ChainError> {
    if thin == 0 {
        return Err(ChainError {
            step: 0,
            source: SamplerError::InvalidStep("thin must be at least 1".into()),
        });
    }
    let start = Instant::now();
    let d = kernel.dim();
    let mut state = init;
    let mut min_u = kernel.min_u(&state);
    let mut accepted = 0usize;
    let mut steps = 0usize;
    let mut samples = Array2::<f64>::zeros((n_samples, d));
    let mut advance = |kernel: &mut K, state: &mut K::State, steps: &mut usize| {
        *steps += 1;
        let ok = kernel.step(state, rng).map_err(|source| ChainError {
            step: *steps,
            source,
        })?;
        if ok {
            accepted += 1;
        }
        if let (Some(m), Some(cur)) = (min_u.as_mut(), kernel.min_u(state)) {
            *m = m.min(cur);
        }
        Ok::<(), ChainError>(())
    };
    for _ in 0..n_burn {
        advance(kernel, &mut state, &mut steps)?;
    }
    let mut obs = vec![0.0; d];
    for mut row in samples.rows_mut() {
        for _ in 0..thin {
            advance(kernel, &mut state, &mut steps)?;
        }
        kernel.observe(&state, &mut obs);
        row.iter_mut().zip(&obs).for_each(|(r, o)| *r = *o);
    }
    let acceptance_rate = (kernel.is_metropolized() && steps > 0).then(|| accepted as f64 / steps as f64);
    Ok((
        ChainRecord {
            samples,
            acceptance_rate,
            min_u_seen: min_u,
            wall_time: start.elapsed().as_secs_f64(),
        },
        state,
    ))
}
