//! Experiment configuration: TOML in, fully resolved [`ExperimentConfig`] out.
//!
//! Every key is optional except `preset`; missing keys take the preset's
//! defaults and the resolved values are what gets hashed and written to the
//! summary. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[serde(rename = "rate_1d")]
    Rate1d,
    #[serde(rename = "mixing_1d")]
    Mixing1d,
    Dim20,
    HaarDeconv,
    NullG0,
    StrongRate,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Rate1d,
        Preset::Mixing1d,
        Preset::Dim20,
        Preset::HaarDeconv,
        Preset::NullG0,
        Preset::StrongRate,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Rate1d => "rate_1d",
            Preset::Mixing1d => "mixing_1d",
            Preset::Dim20 => "dim20",
            Preset::HaarDeconv => "haar_deconv",
            Preset::NullG0 => "null_g0",
            Preset::StrongRate => "strong_rate",
            Preset::Custom => "custom",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Preset::Rate1d => "1D stationary bias of E[x^2] against a step-size sweep",
            Preset::Mixing1d => "cross-chain convergence of E[x^2] from a fixed start",
            Preset::Dim20 => "20-dimensional sparse regression, per-dimension ESS for three samplers",
            Preset::HaarDeconv => "Haar-wavelet deconvolution of a piecewise-constant signal",
            Preset::NullG0 => "prior only: marginals of x, u and v against closed forms",
            Preset::StrongRate => "pathwise error against a 64x finer reference under shared noise",
            Preset::Custom => "run the listed samplers and write summaries only",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Hadamard,
    Mala,
    Myula,
    Gibbs,
    GroupHadamard,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Hadamard => "hadamard",
            SamplerKind::Mala => "mala",
            SamplerKind::Myula => "myula",
            SamplerKind::Gibbs => "gibbs",
            SamplerKind::GroupHadamard => "group_hadamard",
        }
    }

    /// Stable tag mixed into RNG stream ids.
    pub(crate) fn stream_tag(self) -> u64 {
        match self {
            SamplerKind::Hadamard => 1,
            SamplerKind::Mala => 2,
            SamplerKind::Myula => 3,
            SamplerKind::Gibbs => 4,
            SamplerKind::GroupHadamard => 5,
        }
    }

    pub fn is_lifted(self) -> bool {
        matches!(self, SamplerKind::Hadamard | SamplerKind::Mala | SamplerKind::GroupHadamard)
    }

    pub fn initialization(self) -> &'static str {
        match self {
            SamplerKind::Hadamard | SamplerKind::Mala | SamplerKind::GroupHadamard => "u = 1, v = 0",
            SamplerKind::Myula => "x = 0",
            SamplerKind::Gibbs => "x = 0, eta = 1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// `G = 0`.
    Zero,
    /// Explicit row-major matrix from `model.matrix`.
    Dense,
    /// i.i.d. `N(0, variance)` entries, `rows × dim`.
    Gaussian,
    /// Gaussian blur composed with Haar synthesis; `dim` a power of two.
    HaarConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    KSparse,
    PiecewiseConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Fixed,
    /// `λ = ½‖Aᵀy‖∞`
    HalfAtySup,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    lambda: Option<f64>,
    lambda_rule: Option<LambdaRule>,
    beta: Option<f64>,
    dim: Option<usize>,
    operator: Option<OperatorKind>,
    rows: Option<usize>,
    matrix: Option<Vec<f64>>,
    variance: Option<f64>,
    kernel_sigma: Option<f64>,
    kernel_truncate: Option<f64>,
    y: Option<Vec<f64>>,
    signal: Option<SignalKind>,
    sparsity: Option<usize>,
    n_jumps: Option<usize>,
    noise_sd: Option<f64>,
    group_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampler {
    dt: Option<f64>,
    gamma: Option<f64>,
    n_burn: Option<usize>,
    n_samples: Option<usize>,
    thin: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    dt: Option<Vec<f64>>,
    burn_time: Option<f64>,
    sample_spacing: Option<f64>,
    myula_gamma_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMixing {
    iterations: Option<usize>,
    tail: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStrong {
    dt: Option<Vec<f64>>,
    refine: Option<usize>,
    horizon: Option<f64>,
    paths: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeconv {
    top_k: Option<usize>,
    window: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    write_samples: Option<bool>,
    max_sample_values: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Preset,
    seed: Option<u64>,
    n_chains: Option<usize>,
    n_burn: Option<usize>,
    n_samples: Option<usize>,
    thin: Option<usize>,
    samplers: Option<Vec<SamplerKind>>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    hadamard: RawSampler,
    #[serde(default)]
    mala: RawSampler,
    #[serde(default)]
    myula: RawSampler,
    #[serde(default)]
    gibbs: RawSampler,
    #[serde(default)]
    group_hadamard: RawSampler,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    mixing: RawMixing,
    #[serde(default)]
    strong: RawStrong,
    #[serde(default)]
    deconv: RawDeconv,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub lambda_rule: LambdaRule,
    /// Used when `lambda_rule = fixed`.
    pub lambda: f64,
    pub beta: f64,
    pub dim: usize,
    pub operator: OperatorKind,
    pub rows: usize,
    pub matrix: Vec<f64>,
    pub variance: f64,
    pub kernel_sigma: f64,
    pub kernel_truncate: f64,
    /// Observations; empty means synthesize `y = A x₀ + noise`.
    pub y: Vec<f64>,
    pub signal: SignalKind,
    pub sparsity: usize,
    pub n_jumps: usize,
    pub noise_sd: f64,
    pub group_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// `None` for Gibbs, and for MYULA when the step follows the recipe.
    pub dt: Option<f64>,
    /// MYULA only; `None` means derived from `dt` by the recipe.
    pub gamma: Option<f64>,
    pub n_burn: usize,
    pub n_samples: usize,
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub dt: Vec<f64>,
    /// Model time discarded before recording, per chain.
    pub burn_time: f64,
    /// Model time between recorded samples.
    pub sample_spacing: f64,
    /// MYULA smoothing `γ = ratio · Δt` at each swept step, unless
    /// `myula.gamma` is set.
    pub myula_gamma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub iterations: usize,
    /// Trailing iterations averaged for the long-run value.
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongSpec {
    pub dt: Vec<f64>,
    pub refine: usize,
    pub horizon: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvSpec {
    pub top_k: usize,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub write_samples: bool,
    /// Per-chain dumps larger than this many values are skipped.
    pub max_sample_values: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    pub n_chains: usize,
    pub model: ModelSpec,
    pub samplers: Vec<SamplerSpec>,
    pub sweep: SweepSpec,
    pub mixing: MixingSpec,
    pub strong: StrongSpec,
    pub deconv: DeconvSpec,
    /// Not part of the hash: where results go does not change them.
    pub output: OutputSpec,
}

struct Defaults {
    seed: u64,
    n_chains: usize,
    n_burn: usize,
    n_samples: usize,
    thin: usize,
    samplers: Vec<SamplerKind>,
    model: ModelSpec,
    dt: f64,
}

fn base_model() -> ModelSpec {
    ModelSpec {
        lambda_rule: LambdaRule::Fixed,
        lambda: 1.0,
        beta: 1.0,
        dim: 1,
        operator: OperatorKind::Zero,
        rows: 1,
        matrix: Vec::new(),
        variance: 1.0,
        kernel_sigma: 2.0,
        kernel_truncate: 4.0,
        y: Vec::new(),
        signal: SignalKind::KSparse,
        sparsity: 2,
        n_jumps: 6,
        noise_sd: 0.0,
        group_size: 1,
    }
}

fn scalar_model() -> ModelSpec {
    ModelSpec {
        lambda: 2.7,
        operator: OperatorKind::Dense,
        matrix: vec![1.0],
        y: vec![3.0],
        ..base_model()
    }
}

fn defaults(preset: Preset) -> Defaults {
    use SamplerKind::*;
    match preset {
        Preset::Rate1d => Defaults {
            seed: 1,
            n_chains: 16,
            n_burn: 0,
            n_samples: 125_000,
            thin: 1,
            samplers: vec![Hadamard, Myula],
            model: scalar_model(),
            dt: 0.01,
        },
        Preset::Mixing1d => Defaults {
            seed: 1,
            n_chains: 4096,
            n_burn: 0,
            n_samples: 0,
            thin: 1,
            samplers: vec![Hadamard],
            model: scalar_model(),
            dt: 5e-4,
        },
        Preset::Dim20 => Defaults {
            seed: 1,
            n_chains: 1,
            n_burn: 10_000,
            n_samples: 100_000,
            thin: 1,
            samplers: vec![Myula, Hadamard, Gibbs],
            model: ModelSpec {
                lambda_rule: LambdaRule::HalfAtySup,
                dim: 20,
                operator: OperatorKind::Gaussian,
                rows: 40,
                variance: 1.0 / (16.0 * 40.0),
                signal: SignalKind::KSparse,
                sparsity: 2,
                ..base_model()
            },
            dt: 0.05,
        },
        Preset::HaarDeconv => Defaults {
            seed: 1,
            n_chains: 1,
            n_burn: 1_000,
            n_samples: 10_000,
            thin: 1,
            samplers: vec![Hadamard, Myula],
            model: ModelSpec {
                lambda: 1.0,
                beta: 10.0,
                dim: 1024,
                operator: OperatorKind::HaarConv,
                rows: 1024,
                signal: SignalKind::PiecewiseConstant,
                n_jumps: 6,
                noise_sd: 0.05,
                ..base_model()
            },
            dt: 0.01,
        },
        Preset::NullG0 => Defaults {
            seed: 1,
            n_chains: 16,
            n_burn: 100_000,
            n_samples: 62_500,
            thin: 100,
            samplers: vec![Hadamard],
            model: ModelSpec { dim: 4, ..base_model() },
            dt: 1e-3,
        },
        Preset::StrongRate => Defaults {
            seed: 1,
            n_chains: 1,
            n_burn: 0,
            n_samples: 0,
            thin: 1,
            samplers: vec![Hadamard],
            model: base_model(),
            dt: 2f64.powi(-5),
        },
        Preset::Custom => Defaults {
            seed: 1,
            n_chains: 1,
            n_burn: 1_000,
            n_samples: 10_000,
            thin: 1,
            samplers: vec![Hadamard],
            model: scalar_model(),
            dt: 0.01,
        },
    }
}

fn invalid(field: &str, message: impl Into<String>) -> HarnessError {
    HarnessError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses TOML text into a resolved, validated config.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, HarnessError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    let cfg = resolve(raw)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// The preset's resolved defaults, as if parsed from `preset = "<name>"`.
pub fn preset_config(preset: Preset) -> ExperimentConfig {
    parse_config_str(&format!("preset = \"{}\"", preset.name())).expect("preset defaults are valid")
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig, HarnessError> {
    let d = defaults(raw.preset);
    let m = raw.model;
    let dm = d.model;
    let model = ModelSpec {
        lambda_rule: m.lambda_rule.unwrap_or(if m.lambda.is_some() { LambdaRule::Fixed } else { dm.lambda_rule }),
        lambda: m.lambda.unwrap_or(dm.lambda),
        beta: m.beta.unwrap_or(dm.beta),
        dim: m.dim.unwrap_or(dm.dim),
        operator: m.operator.unwrap_or(dm.operator),
        rows: m.rows.unwrap_or(dm.rows),
        matrix: m.matrix.unwrap_or(dm.matrix),
        variance: m.variance.unwrap_or(dm.variance),
        kernel_sigma: m.kernel_sigma.unwrap_or(dm.kernel_sigma),
        kernel_truncate: m.kernel_truncate.unwrap_or(dm.kernel_truncate),
        y: m.y.unwrap_or(dm.y),
        signal: m.signal.unwrap_or(dm.signal),
        sparsity: m.sparsity.unwrap_or(dm.sparsity),
        n_jumps: m.n_jumps.unwrap_or(dm.n_jumps),
        noise_sd: m.noise_sd.unwrap_or(dm.noise_sd),
        group_size: m.group_size.unwrap_or(dm.group_size),
    };
    let n_burn = raw.n_burn.unwrap_or(d.n_burn);
    let n_samples = raw.n_samples.unwrap_or(d.n_samples);
    let thin = raw.thin.unwrap_or(d.thin);
    let kinds = raw.samplers.unwrap_or(d.samplers);
    let mut samplers = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let r = match kind {
            SamplerKind::Hadamard => &raw.hadamard,
            SamplerKind::Mala => &raw.mala,
            SamplerKind::Myula => &raw.myula,
            SamplerKind::Gibbs => &raw.gibbs,
            SamplerKind::GroupHadamard => &raw.group_hadamard,
        };
        let (mut dt, mut burn, mut samples) = (r.dt.or(Some(d.dt)), r.n_burn.unwrap_or(n_burn), r.n_samples.unwrap_or(n_samples));
        match (raw.preset, kind) {
            // Gibbs mixes in a handful of sweeps
            (Preset::Dim20, SamplerKind::Gibbs) => {
                burn = r.n_burn.unwrap_or(10);
                samples = r.n_samples.unwrap_or(10_000);
            }
            (Preset::Dim20, SamplerKind::Hadamard) => dt = r.dt.or(Some(0.1)),
            (Preset::HaarDeconv, _) => {}
            // step left to the recipe once L is known
            (_, SamplerKind::Myula) => dt = r.dt,
            _ => {}
        }
        if kind == SamplerKind::Gibbs {
            dt = None;
        }
        let gamma = r.gamma;
        samplers.push(SamplerSpec {
            kind,
            dt,
            gamma,
            n_burn: burn,
            n_samples: samples,
            thin: r.thin.unwrap_or(thin),
        });
    }
    let sweep = SweepSpec {
        dt: raw.sweep.dt.unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125, 0.00625]),
        burn_time: raw.sweep.burn_time.unwrap_or(800.0),
        sample_spacing: raw.sweep.sample_spacing.unwrap_or(1.0),
        myula_gamma_ratio: raw.sweep.myula_gamma_ratio.unwrap_or(1.0),
    };
    let mixing = MixingSpec {
        iterations: raw.mixing.iterations.unwrap_or(10_000),
        tail: raw.mixing.tail.unwrap_or(1_000),
    };
    let strong = StrongSpec {
        dt: raw.strong.dt.unwrap_or_else(|| (5..=10).map(|k| 2f64.powi(-k)).collect()),
        refine: raw.strong.refine.unwrap_or(64),
        horizon: raw.strong.horizon.unwrap_or(1.0),
        paths: raw.strong.paths.unwrap_or(500),
    };
    let deconv = DeconvSpec {
        top_k: raw.deconv.top_k.unwrap_or(10),
        window: raw.deconv.window.unwrap_or(8),
    };
    let output = OutputSpec {
        dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("results")),
        write_samples: raw.output.write_samples.unwrap_or(false),
        max_sample_values: raw.output.max_sample_values.unwrap_or(10_000_000),
    };
    Ok(ExperimentConfig {
        preset: raw.preset,
        seed: raw.seed.unwrap_or(d.seed),
        n_chains: raw.n_chains.unwrap_or(d.n_chains),
        model,
        samplers,
        sweep,
        mixing,
        strong,
        deconv,
        output,
    })
}

fn positive(field: &str, v: f64) -> Result<(), HarnessError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let m = &self.model;
        if m.lambda_rule == LambdaRule::Fixed {
            positive("model.lambda", m.lambda)?;
        }
        positive("model.beta", m.beta)?;
        if m.dim == 0 {
            return Err(invalid("model.dim", "must be at least 1"));
        }
        match m.operator {
            OperatorKind::Zero => {
                if m.lambda_rule == LambdaRule::HalfAtySup {
                    return Err(invalid("model.lambda_rule", "half_aty_sup needs a data term"));
                }
            }
            OperatorKind::Dense => {
                if m.matrix.len() != m.rows * m.dim {
                    return Err(invalid(
                        "model.matrix",
                        format!("expected rows × dim = {} entries, got {}", m.rows * m.dim, m.matrix.len()),
                    ));
                }
            }
            OperatorKind::Gaussian => positive("model.variance", m.variance)?,
            OperatorKind::HaarConv => {
                if !m.dim.is_power_of_two() || m.dim < 2 {
                    return Err(invalid("model.dim", "haar_conv needs a power of two ≥ 2"));
                }
                positive("model.kernel_sigma", m.kernel_sigma)?;
                positive("model.kernel_truncate", m.kernel_truncate)?;
            }
        }
        if matches!(m.operator, OperatorKind::Dense | OperatorKind::Gaussian) && m.rows == 0 {
            return Err(invalid("model.rows", "must be at least 1"));
        }
        if m.operator != OperatorKind::Zero && !m.y.is_empty() {
            let rows = if m.operator == OperatorKind::HaarConv { m.dim } else { m.rows };
            if m.y.len() != rows {
                return Err(invalid("model.y", format!("expected {rows} observations, got {}", m.y.len())));
            }
        }
        if !(m.noise_sd >= 0.0 && m.noise_sd.is_finite()) {
            return Err(invalid("model.noise_sd", "must be finite and ≥ 0"));
        }
        let synthesized = m.operator != OperatorKind::Zero && m.y.is_empty();
        match m.signal {
            _ if !synthesized => {}
            SignalKind::KSparse if m.sparsity > m.dim => {
                return Err(invalid("model.sparsity", format!("must be ≤ dim = {}", m.dim)));
            }
            SignalKind::PiecewiseConstant if m.n_jumps >= m.dim => {
                return Err(invalid("model.n_jumps", format!("must be < dim = {}", m.dim)));
            }
            _ => {}
        }
        if m.group_size == 0 || !m.dim.is_multiple_of(m.group_size) {
            return Err(invalid("model.group_size", "must be ≥ 1 and divide dim"));
        }
        if self.samplers.is_empty() {
            return Err(invalid(
                "samplers",
                "at least one sampler is required (hadamard, mala, myula, gibbs, group_hadamard)",
            ));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.samplers {
            let name = s.kind.name();
            if !seen.insert(s.kind) {
                return Err(invalid("samplers", format!("{name} is listed twice")));
            }
            if let Some(dt) = s.dt {
                positive(&format!("{name}.dt"), dt)?;
            } else if s.kind != SamplerKind::Gibbs && s.kind != SamplerKind::Myula {
                return Err(invalid(&format!("{name}.dt"), "is required"));
            }
            if let Some(g) = s.gamma {
                positive(&format!("{name}.gamma"), g)?;
            }
            if s.thin == 0 {
                return Err(invalid(&format!("{name}.thin"), "must be at least 1"));
            }
            if s.kind == SamplerKind::Gibbs && m.operator == OperatorKind::Zero {
                return Err(invalid("samplers", "gibbs needs a quadratic data term"));
            }
        }
        if self.n_chains == 0 {
            return Err(invalid("n_chains", "must be at least 1"));
        }
        match self.preset {
            Preset::Rate1d => {
                if m.dim != 1 {
                    return Err(invalid("model.dim", "rate_1d needs a one-dimensional model"));
                }
                if self.sweep.dt.len() < 2 {
                    return Err(invalid("sweep.dt", "need at least two step sizes"));
                }
                for &dt in &self.sweep.dt {
                    positive("sweep.dt", dt)?;
                }
                positive("sweep.sample_spacing", self.sweep.sample_spacing)?;
                positive("sweep.myula_gamma_ratio", self.sweep.myula_gamma_ratio)?;
                if !(self.sweep.burn_time >= 0.0) {
                    return Err(invalid("sweep.burn_time", "must be ≥ 0"));
                }
                self.require_subset(&[SamplerKind::Hadamard, SamplerKind::Mala, SamplerKind::Myula])?;
                if self.n_chains > self.samplers[0].n_samples.max(1) {
                    return Err(invalid("n_chains", "more chains than samples"));
                }
            }
            Preset::Mixing1d => {
                self.require_subset(&[SamplerKind::Hadamard, SamplerKind::Mala, SamplerKind::Myula])?;
                if self.mixing.iterations < 2 || self.mixing.tail == 0 || self.mixing.tail >= self.mixing.iterations {
                    return Err(invalid("mixing.tail", "need 0 < tail < iterations"));
                }
            }
            Preset::NullG0 => {
                if m.operator != OperatorKind::Zero {
                    return Err(invalid("model.operator", "null_g0 needs operator = \"zero\""));
                }
                self.require_subset(&[SamplerKind::Hadamard, SamplerKind::Mala])?;
            }
            Preset::StrongRate => {
                self.require_subset(&[SamplerKind::Hadamard])?;
                if self.strong.dt.len() < 2 {
                    return Err(invalid("strong.dt", "need at least two step sizes"));
                }
                for &dt in &self.strong.dt {
                    positive("strong.dt", dt)?;
                }
                positive("strong.horizon", self.strong.horizon)?;
                if self.strong.refine < 2 || self.strong.paths == 0 {
                    return Err(invalid("strong.refine", "need refine ≥ 2 and paths ≥ 1"));
                }
            }
            Preset::HaarDeconv => {
                if m.operator != OperatorKind::HaarConv {
                    return Err(invalid("model.operator", "haar_deconv needs operator = \"haar_conv\""));
                }
                if m.signal != SignalKind::PiecewiseConstant || m.n_jumps == 0 {
                    return Err(invalid("model.signal", "haar_deconv needs a piecewise_constant signal with jumps"));
                }
                if self.deconv.top_k == 0 || self.deconv.top_k > m.dim {
                    return Err(invalid("deconv.top_k", "must be in 1..=dim"));
                }
            }
            Preset::Dim20 | Preset::Custom => {}
        }
        Ok(())
    }

    fn require_subset(&self, allowed: &[SamplerKind]) -> Result<(), HarnessError> {
        for s in &self.samplers {
            if !allowed.contains(&s.kind) {
                let names: Vec<&str> = allowed.iter().map(|k| k.name()).collect();
                return Err(invalid(
                    "samplers",
                    format!("{} does not support {}; valid here: {}", self.preset, s.kind.name(), names.join(", ")),
                ));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of everything except `output`.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(&self.hashed_view()).expect("config serializes").as_bytes());
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The config as recorded in summaries.
    pub fn hashed_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("output");
        }
        v
    }

    pub fn sampler(&self, kind: SamplerKind) -> Option<&SamplerSpec> {
        self.samplers.iter().find(|s| s.kind == kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_1d_defaults() {
        let cfg = parse_config_str("preset = \"rate_1d\"\nseed = 4").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.model.matrix, vec![1.0]);
        assert_eq!(cfg.model.y, vec![3.0]);
        assert_eq!(cfg.model.lambda, 2.7);
        assert_eq!(cfg.model.beta, 1.0);
    }

    #[test]
    fn dotted_keys_and_tables_agree() {
        let a = parse_config_str("preset = \"custom\"\nhadamard.dt = 0.02\nmodel.lambda = 1.5").unwrap();
        let b = parse_config_str("preset = \"custom\"\n[hadamard]\ndt = 0.02\n[model]\nlambda = 1.5").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samplers[0].dt, Some(0.02));
    }

    #[test]
    fn field_level_errors() {
        let err = parse_config_str("preset = \"custom\"\nhadamard.dt = -1.0").unwrap_err();
        assert!(matches!(&err, HarnessError::Invalid { field, .. } if field == "hadamard.dt"), "{err}");
        let err = parse_config_str("preset = \"custom\"\nhadamard.dt = 0.0").unwrap_err();
        assert!(err.to_string().contains("hadamard.dt"));
        let err = parse_config_str("preset = \"custom\"\nsamplers = []").unwrap_err();
        assert!(matches!(&err, HarnessError::Invalid { field, .. } if field == "samplers"));
    }

    #[test]
    fn unknown_names_are_rejected() {
        let err = parse_config_str("preset = \"custom\"\nsamplers = [\"nuts\"]").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("hadamard") && msg.contains("gibbs"), "{msg}");
        assert!(parse_config_str("preset = \"custom\"\nunknown_key = 1").is_err());
        assert!(parse_config_str("preset = \"custom\"\nmodel.lamda = 1").is_err());
        assert!(parse_config_str("preset = \"rate_2d\"").is_err());
    }

    #[test]
    fn hash_ignores_output_only() {
        let a = parse_config_str("preset = \"dim20\"\noutput.dir = \"a\"").unwrap();
        let b = parse_config_str("preset = \"dim20\"\noutput.dir = \"b\"").unwrap();
        let c = parse_config_str("preset = \"dim20\"\nseed = 2").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn every_preset_resolves() {
        for p in Preset::ALL {
            let cfg = preset_config(p);
            assert_eq!(cfg.preset, p);
        }
    }
}
