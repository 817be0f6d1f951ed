//! Langevin samplers for posteriors with ℓ1 and group-ℓ1 priors.
//!
//! The target is `ρ(x) ∝ exp(−β(λ‖x‖₁ + G(x)))`. Writing `x = u⊙v` with
//! `u > 0` turns it into the smooth lifted density
//! `π(u, v) ∝ ∏u_i exp(−β(½λ‖(u, v)‖² + G(u⊙v)))`, whose `x`-marginal is
//! exactly `ρ`. The Hadamard samplers discretize Langevin dynamics on `π`
//! with a step that is implicit in the `λ` and `1/(βu)` terms and so keeps
//! `u` positive.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod harness;
pub mod linops;
pub mod model;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod samplers;

pub use linops::{LinearOperator, LinopError};
pub use model::{DataTerm, GroupStructure, ModelError, TargetModel};
pub use rng::{RngError, RngStream};
pub use samplers::{ChainRecord, GibbsState, SamplerError, SamplerState, StepConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
