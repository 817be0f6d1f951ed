//! One enum over every sampler so the runners can treat them uniformly.

use super::config::SamplerKind;
use crate::model::{GroupStructure, TargetModel};
use crate::rng::RngStream;
use crate::samplers::{
    Gibbs, GibbsState, GroupHadamard, HadamardMala, HadamardUla, MarkovKernel, Myula, SamplerError, SamplerState,
    StepConfig,
};

#[derive(Debug, Clone, PartialEq)]
pub enum AnyState {
    Lifted(SamplerState),
    Plain(Vec<f64>),
    Gibbs(GibbsState),
}

pub enum AnyKernel<'a> {
    Ula(HadamardUla<'a>),
    Mala(HadamardMala<'a>),
    Myula(Myula<'a>),
    Gibbs(Gibbs<'a>),
    Group(GroupHadamard<'a>),
}

impl<'a> AnyKernel<'a> {
    pub fn new(
        kind: SamplerKind,
        model: &'a TargetModel,
        groups: &'a GroupStructure,
        cfg: StepConfig,
    ) -> Result<Self, SamplerError> {
        Ok(match kind {
            SamplerKind::Hadamard => AnyKernel::Ula(HadamardUla::new(model, cfg)?),
            SamplerKind::Mala => AnyKernel::Mala(HadamardMala::new(model, cfg)?),
            SamplerKind::Myula => AnyKernel::Myula(Myula::new(model, cfg)?),
            SamplerKind::Gibbs => AnyKernel::Gibbs(Gibbs::new(model)?),
            SamplerKind::GroupHadamard => AnyKernel::Group(GroupHadamard::new(model, groups, cfg)?),
        })
    }

    /// The documented starting point of each sampler.
    pub fn initial_state(kind: SamplerKind, dim: usize, groups: &GroupStructure) -> AnyState {
        match kind {
            SamplerKind::Hadamard | SamplerKind::Mala => AnyState::Lifted(SamplerState::default_init(dim, dim)),
            SamplerKind::GroupHadamard => AnyState::Lifted(SamplerState::default_init(groups.n_groups(), dim)),
            SamplerKind::Myula => AnyState::Plain(vec![0.0; dim]),
            SamplerKind::Gibbs => AnyState::Gibbs(GibbsState::default_init(dim)),
        }
    }
}

fn wrong_state() -> SamplerError {
    SamplerError::InvalidStep("state does not match the sampler".into())
}

impl MarkovKernel for AnyKernel<'_> {
    type State = AnyState;

    fn step(&mut self, state: &mut AnyState, rng: &mut RngStream) -> Result<bool, SamplerError> {
        match (self, state) {
            (AnyKernel::Ula(k), AnyState::Lifted(s)) => k.step(s, rng),
            (AnyKernel::Mala(k), AnyState::Lifted(s)) => k.step(s, rng),
            (AnyKernel::Group(k), AnyState::Lifted(s)) => k.step(s, rng),
            (AnyKernel::Myula(k), AnyState::Plain(x)) => k.step(x, rng),
            (AnyKernel::Gibbs(k), AnyState::Gibbs(s)) => k.step(s, rng),
            _ => Err(wrong_state()),
        }
    }

    fn dim(&self) -> usize {
        match self {
            AnyKernel::Ula(k) => k.dim(),
            AnyKernel::Mala(k) => k.dim(),
            AnyKernel::Myula(k) => k.dim(),
            AnyKernel::Gibbs(k) => k.dim(),
            AnyKernel::Group(k) => k.dim(),
        }
    }

    fn observe(&self, state: &AnyState, out: &mut [f64]) {
        match (self, state) {
            (AnyKernel::Ula(k), AnyState::Lifted(s)) => k.observe(s, out),
            (AnyKernel::Mala(k), AnyState::Lifted(s)) => k.observe(s, out),
            (AnyKernel::Group(k), AnyState::Lifted(s)) => k.observe(s, out),
            (AnyKernel::Myula(k), AnyState::Plain(x)) => k.observe(x, out),
            (AnyKernel::Gibbs(k), AnyState::Gibbs(s)) => k.observe(s, out),
            _ => panic!("state does not match the sampler"),
        }
    }

    fn min_u(&self, state: &AnyState) -> Option<f64> {
        match state {
            AnyState::Lifted(s) => Some(s.min_u()),
            _ => None,
        }
    }

    fn is_metropolized(&self) -> bool {
        matches!(self, AnyKernel::Mala(_))
    }
}
