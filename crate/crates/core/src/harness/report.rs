//! Summary and table types, and writing them to disk.
//!
//! Every file carries the config hash and library version: the summary as
//! JSON fields, CSVs as a leading `# config_hash=… library_version=…` line
//! before the header row. Floats are written with Rust's shortest
//! round-trip formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::SamplerKind;
use super::HarnessError;
use crate::diagnostics::{CoordinateSummary, LinearFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain_id: usize,
    pub n_samples: usize,
    pub acceptance_rate: Option<f64>,
    pub min_u_seen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSummary {
    pub sampler: SamplerKind,
    /// Set when one sampler runs at several step sizes.
    pub dt: Option<f64>,
    pub n_chains_ok: usize,
    /// Mean over chains.
    pub acceptance_rate: Option<f64>,
    /// Minimum over chains.
    pub min_u_seen: Option<f64>,
    /// Pooled over chains; ESS is the sum of per-chain ESS.
    pub coordinates: Vec<CoordinateSummary>,
    pub chains: Vec<ChainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobFailure {
    pub sampler: SamplerKind,
    pub dt: Option<f64>,
    pub chain_id: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTiming {
    pub sampler: SamplerKind,
    pub dt: Option<f64>,
    pub chain_id: usize,
    pub seconds: f64,
}

/// Facts about this particular run that are not reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub output_dir: String,
    pub total_seconds: f64,
    pub parallel: bool,
    pub chains: Vec<ChainTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSampler {
    pub sampler: SamplerKind,
    pub dt: Option<f64>,
    pub gamma: Option<f64>,
    pub initialization: String,
}

/// Values derived while building the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedModel {
    pub lambda: f64,
    pub beta: f64,
    pub lipschitz: f64,
    pub truth_positions: Option<Vec<usize>>,
    pub samplers: Vec<ResolvedSampler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub sampler: SamplerKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub sampler: SamplerKind,
    pub dt: f64,
    pub gamma: Option<f64>,
    pub first_moment: f64,
    pub first_stderr: f64,
    pub second_moment: f64,
    pub second_stderr: f64,
    /// `|E[x²] − oracle|`
    pub abs_error: f64,
}

/// Log-log fits of the absolute moment errors against `Δt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub sampler: SamplerKind,
    pub second_moment: LinearFit,
    pub first_moment: LinearFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMetrics {
    pub oracle_first_moment: f64,
    pub oracle_second_moment: f64,
    /// Largest disagreement between the two quadrature rules.
    pub oracle_rule_gap: f64,
    pub rows: Vec<RateRow>,
    pub fits: Vec<RateFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingMetrics {
    pub sampler: SamplerKind,
    pub n_chains: usize,
    pub long_run_value: f64,
    pub noise_floor: f64,
    /// Iterations before the error first drops below the noise floor.
    pub window_end: usize,
    /// `ln |error|` against iteration over the window.
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim20Metrics {
    pub lambda: f64,
    pub min_ess: Vec<NamedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvSampler {
    pub sampler: SamplerKind,
    pub top_indices: Vec<usize>,
    /// Top indices within `window` of a jump.
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeconvMetrics {
    pub jumps: Vec<usize>,
    pub top_k: usize,
    pub window: usize,
    pub samplers: Vec<DeconvSampler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSampler {
    pub sampler: SamplerKind,
    pub ks_x: Vec<f64>,
    pub ks_u: Vec<f64>,
    pub ks_v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullMetrics {
    pub samplers: Vec<NullSampler>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongRow {
    pub dt: f64,
    pub mean_sup_error: f64,
    pub stderr: f64,
    pub paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongMetrics {
    pub refine: usize,
    pub horizon: f64,
    pub rows: Vec<StrongRow>,
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Metrics {
    None,
    #[serde(rename = "rate_1d")]
    Rate1d(RateMetrics),
    #[serde(rename = "mixing_1d")]
    Mixing1d(MixingMetrics),
    Dim20(Dim20Metrics),
    HaarDeconv(DeconvMetrics),
    NullG0(NullMetrics),
    StrongRate(StrongMetrics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub library_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub resolved: ResolvedModel,
    pub samplers: Vec<SamplerSummary>,
    pub metrics: Metrics,
    pub failures: Vec<JobFailure>,
    /// Excluded from reproducibility comparisons.
    pub run_info: RunInfo,
}

impl Summary {
    /// The summary without `run_info`, serialized; identical for identical
    /// configs.
    pub fn reproducible_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("summary serializes");
        v.as_object_mut().expect("object").remove("run_info");
        serde_json::to_string_pretty(&v).expect("value serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub summary: Summary,
    pub tables: Vec<Table>,
    /// `(file name, samples)` per chain, when requested.
    pub dumps: Vec<(String, Array2<f64>)>,
}

impl Report {
    pub fn failed_jobs(&self) -> usize {
        self.summary.failures.len()
    }
}

fn provenance_line(summary: &Summary) -> String {
    format!(
        "# config_hash={} library_version={}\n",
        summary.config_hash, summary.library_version
    )
}

pub fn render_table(summary: &Summary, table: &Table) -> String {
    let mut s = provenance_line(summary);
    s.push_str(&table.header.join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn render_samples(summary: &Summary, samples: &Array2<f64>) -> String {
    let mut s = provenance_line(summary);
    let header: Vec<String> = (0..samples.ncols()).map(|j| format!("x{j}")).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in samples.rows() {
        let mut first = true;
        for v in row {
            if !first {
                s.push(',');
            }
            first = false;
            write!(s, "{v}").expect("writing to a String");
        }
        s.push('\n');
    }
    s
}

/// Writes `summary.json`, every table and every sample dump into `dir`.
pub fn write_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |e: std::io::Error, p: &Path| HarnessError::Io(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let mut written = Vec::new();
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| io(e, &path))?;
    written.push(path);
    for t in &report.tables {
        let path = dir.join(&t.name);
        std::fs::write(&path, render_table(&report.summary, t)).map_err(|e| io(e, &path))?;
        written.push(path);
    }
    for (name, samples) in &report.dumps {
        let path = dir.join(name);
        std::fs::write(&path, render_samples(&report.summary, samples)).map_err(|e| io(e, &path))?;
        written.push(path);
    }
    Ok(written)
}
