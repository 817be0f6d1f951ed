//! Experiment harness: configs, presets, chain jobs and report files.
//!
//! [`run_experiment`] builds the model, runs every (sampler × chain) job on
//! the worker pool, merges results in (sampler, chain) order and writes
//! `summary.json` plus the preset's CSV tables into the output directory.

pub mod config;
pub mod kernel;
pub mod report;
pub mod run;
pub mod setup;

use std::path::{Path, PathBuf};

pub use config::{
    parse_config, parse_config_str, preset_config, ExperimentConfig, LambdaRule, ModelSpec, OperatorKind, Preset,
    SamplerKind, SamplerSpec, SignalKind,
};
pub use report::{Metrics, Report, Summary};
pub use run::{compute, pooled_summary};
pub use setup::{build_model, synthesize_signal, BuiltModel, Signal};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "SAMPLER_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("model setup failed: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("operator setup failed: {0}")]
    Linop(#[from] crate::linops::LinopError),
    #[error("sampler setup failed: {0}")]
    Sampler(#[from] crate::samplers::SamplerError),
    #[error("oracle failed: {0}")]
    Diagnostics(#[from] crate::diagnostics::DiagnosticsError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Whether the error comes from the configuration rather than a run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, HarnessError::Parse(_) | HarnessError::Invalid { .. })
    }
}

/// Output directory: explicit argument, then the environment variable, then
/// the config.
pub fn resolve_output_dir(cfg: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

/// Runs the experiment and writes its files to `cfg.output.dir`. Job
/// failures do not abort the run; they are listed in the summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Report, Vec<PathBuf>), HarnessError> {
    let report = compute(cfg)?;
    let files = report::write_report(&report, &cfg.output.dir)?;
    Ok((report, files))
}
