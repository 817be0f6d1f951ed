//! Per-preset experiment runners.

use std::time::Instant;

use ndarray::{Array2, Axis};

use super::config::{ExperimentConfig, Preset, SamplerKind, SamplerSpec};
use super::kernel::{AnyKernel, AnyState};
use super::report::{
    ChainSummary, ChainTiming, DeconvMetrics, DeconvSampler, Dim20Metrics, JobFailure, Metrics, MixingMetrics,
    NamedValue, NullMetrics, NullSampler, RateFit, RateMetrics, RateRow, Report, RunInfo, SamplerSummary,
    StrongMetrics, StrongRow, Summary, Table,
};
use super::setup::{build_model, is_quadratic, step_config, BuiltModel};
use super::HarnessError;
use crate::diagnostics::{
    cdf, ess, ks_statistic, linear_fit, quadrature_expectation_1d_with, quantile_sorted, CoordinateSummary,
    QuadratureConfig, QuadratureRule,
};
use crate::model::{GroupStructure, TargetModel};
use crate::par;
use crate::rng::RngStream;
use crate::samplers::{run_chain, ChainError, ChainRecord, HadamardUla, MarkovKernel, SamplerError, StepConfig};

/// Stream id for chain `chain` of `kind` in sub-experiment `slot`.
fn stream_id(kind: SamplerKind, slot: u64, chain: u64) -> u64 {
    (kind.stream_tag() << 56) | (slot << 32) | chain
}

/// Everything a chain job needs, borrowed by every job.
struct Ctx<'a> {
    model: &'a TargetModel,
    groups: &'a GroupStructure,
    seed: u64,
}

type ChainResult = Result<ChainRecord, ChainError>;

fn setup_error(e: SamplerError) -> ChainError {
    ChainError { step: 0, source: e }
}

#[allow(clippy::too_many_arguments)]
fn run_chains(
    ctx: &Ctx,
    kind: SamplerKind,
    cfg: StepConfig,
    slot: u64,
    n_chains: usize,
    n_burn: usize,
    n_samples: usize,
    thin: usize,
) -> Vec<ChainResult> {
    par::map((0..n_chains as u64).collect(), |chain| {
        let mut kernel = AnyKernel::new(kind, ctx.model, ctx.groups, cfg).map_err(setup_error)?;
        let init = AnyKernel::initial_state(kind, ctx.model.dim(), ctx.groups);
        let mut rng = RngStream::new(ctx.seed, stream_id(kind, slot, chain));
        run_chain(&mut kernel, init, n_burn, n_samples, thin, &mut rng).map(|(rec, _)| rec)
    })
}

/// Pooled per-coordinate summary: moments and quantiles over all rows of all
/// chains, ESS summed over chains.
pub fn pooled_summary(records: &[&ChainRecord]) -> Vec<CoordinateSummary> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let d = first.samples.ncols();
    let total: usize = records.iter().map(|r| r.samples.nrows()).sum();
    if total == 0 {
        return Vec::new();
    }
    (0..d)
        .map(|j| {
            let mut pooled = Vec::with_capacity(total);
            let mut ess_sum = 0.0;
            for r in records {
                let col: Vec<f64> = r.samples.column(j).to_vec();
                ess_sum += ess(&col).unwrap_or(col.len() as f64);
                pooled.extend_from_slice(&col);
            }
            let n = pooled.len() as f64;
            let mean = pooled.iter().sum::<f64>() / n;
            let variance = if pooled.len() > 1 {
                pooled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            pooled.sort_by(f64::total_cmp);
            CoordinateSummary {
                mean,
                variance,
                q05: quantile_sorted(&pooled, 0.05),
                q95: quantile_sorted(&pooled, 0.95),
                ess: ess_sum,
                mcse: (variance / ess_sum).sqrt(),
            }
        })
        .collect()
}

/// Collects successes, records failures and timing, and builds the summary
/// entry for one sampler.
fn summarize_sampler(
    kind: SamplerKind,
    dt: Option<f64>,
    results: Vec<ChainResult>,
    keep_coordinates: bool,
    failures: &mut Vec<JobFailure>,
    timings: &mut Vec<ChainTiming>,
) -> (SamplerSummary, Vec<ChainRecord>) {
    let mut ok = Vec::new();
    let mut chains = Vec::new();
    for (chain_id, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => {
                timings.push(ChainTiming {
                    sampler: kind,
                    dt,
                    chain_id,
                    seconds: rec.wall_time,
                });
                chains.push(ChainSummary {
                    chain_id,
                    n_samples: rec.samples.nrows(),
                    acceptance_rate: rec.acceptance_rate,
                    min_u_seen: rec.min_u_seen,
                });
                ok.push(rec);
            }
            Err(e) => failures.push(JobFailure {
                sampler: kind,
                dt,
                chain_id,
                error: e.to_string(),
            }),
        }
    }
    let refs: Vec<&ChainRecord> = ok.iter().collect();
    let coordinates = if keep_coordinates { pooled_summary(&refs) } else { Vec::new() };
    let acceptance_rate = mean_of(ok.iter().filter_map(|r| r.acceptance_rate));
    let min_u_seen = ok.iter().filter_map(|r| r.min_u_seen).reduce(f64::min);
    (
        SamplerSummary {
            sampler: kind,
            dt,
            n_chains_ok: ok.len(),
            acceptance_rate,
            min_u_seen,
            coordinates,
            chains,
        },
        ok,
    )
}

fn mean_of(it: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = it.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

struct Resolved {
    kind: SamplerKind,
    cfg: StepConfig,
}

fn resolve_steps(specs: &[SamplerSpec], model: &TargetModel) -> Result<Vec<Resolved>, HarnessError> {
    specs
        .iter()
        .map(|s| {
            Ok(Resolved {
                kind: s.kind,
                cfg: step_config(s, model)?,
            })
        })
        .collect()
}

/// Runs the experiment described by `cfg` without touching the filesystem.
pub fn compute(cfg: &ExperimentConfig) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let built = build_model(&cfg.model, cfg.seed)?;
    if cfg.samplers.iter().any(|s| s.kind == SamplerKind::Gibbs) && !is_quadratic(&built.model) {
        return Err(HarnessError::Invalid {
            field: "samplers".into(),
            message: "gibbs needs a quadratic data term".into(),
        });
    }
    let groups = GroupStructure::contiguous(cfg.model.dim, cfg.model.group_size)?;
    let steps = resolve_steps(&cfg.samplers, &built.model)?;
    let ctx = Ctx {
        model: &built.model,
        groups: &groups,
        seed: cfg.seed,
    };
    let mut out = Outcome::default();
    let metrics = match cfg.preset {
        Preset::Custom => {
            run_plain(cfg, &ctx, &steps, &mut out);
            Metrics::None
        }
        Preset::Dim20 => {
            run_plain(cfg, &ctx, &steps, &mut out);
            match dim20_metrics(&built, &out) {
                Some((m, table)) => {
                    out.tables.push(table);
                    m
                }
                None => Metrics::None,
            }
        }
        Preset::HaarDeconv => run_deconv(cfg, &ctx, &built, &steps, &mut out),
        Preset::NullG0 => run_null(cfg, &ctx, &steps, &mut out),
        Preset::Rate1d => run_rate(cfg, &ctx, &steps, &mut out)?,
        Preset::Mixing1d => run_mixing(cfg, &ctx, &steps, &mut out),
        Preset::StrongRate => run_strong(cfg, &ctx, &mut out),
    };
    let resolved_samplers = steps
        .iter()
        .map(|r| super::report::ResolvedSampler {
            sampler: r.kind,
            dt: (r.kind != SamplerKind::Gibbs).then_some(r.cfg.dt),
            gamma: r.cfg.moreau_gamma,
            initialization: r.kind.initialization().to_string(),
        })
        .collect();
    let summary = Summary {
        library_version: crate::VERSION.to_string(),
        config_hash: cfg.hash(),
        config: cfg.hashed_view(),
        resolved: super::report::ResolvedModel {
            lambda: built.model.lambda(),
            beta: built.model.beta(),
            lipschitz: built.model.data().lipschitz,
            truth_positions: built.signal.as_ref().map(|s| s.positions.clone()),
            samplers: resolved_samplers,
        },
        samplers: out.summaries,
        metrics,
        failures: out.failures,
        run_info: RunInfo {
            output_dir: cfg.output.dir.display().to_string(),
            total_seconds: start.elapsed().as_secs_f64(),
            parallel: par::parallel_enabled(),
            chains: out.timings,
        },
    };
    Ok(Report {
        summary,
        tables: out.tables,
        dumps: out.dumps,
    })
}

#[derive(Default)]
struct Outcome {
    summaries: Vec<SamplerSummary>,
    failures: Vec<JobFailure>,
    timings: Vec<ChainTiming>,
    tables: Vec<Table>,
    dumps: Vec<(String, Array2<f64>)>,
    /// Successful records per sampler, in config order.
    records: Vec<(SamplerKind, Vec<ChainRecord>)>,
}

impl Outcome {
    fn absorb(&mut self, cfg: &ExperimentConfig, kind: SamplerKind, dt: Option<f64>, results: Vec<ChainResult>, keep: bool) {
        let (summary, records) = summarize_sampler(kind, dt, results, true, &mut self.failures, &mut self.timings);
        if cfg.output.write_samples {
            for (c, rec) in summary.chains.iter().zip(&records) {
                if rec.samples.len() <= cfg.output.max_sample_values {
                    let tag = dt.map(|d| format!("_dt{d}")).unwrap_or_default();
                    self.dumps
                        .push((format!("samples_{}{tag}_chain{}.csv", kind.name(), c.chain_id), rec.samples.clone()));
                } else {
                    log::warn!(
                        "skipping sample dump for {} chain {}: {} values exceed the limit",
                        kind.name(),
                        c.chain_id,
                        rec.samples.len()
                    );
                }
            }
        }
        self.summaries.push(summary);
        if keep {
            self.records.push((kind, records));
        }
    }
}

fn spec_of(cfg: &ExperimentConfig, kind: SamplerKind) -> &SamplerSpec {
    cfg.sampler(kind).expect("resolved from the same list")
}

fn run_plain(cfg: &ExperimentConfig, ctx: &Ctx, steps: &[Resolved], out: &mut Outcome) {
    for r in steps {
        let s = spec_of(cfg, r.kind);
        let results = run_chains(ctx, r.kind, r.cfg, 0, cfg.n_chains, s.n_burn, s.n_samples, s.thin);
        out.absorb(cfg, r.kind, None, results, true);
    }
}

fn dim20_metrics(built: &BuiltModel, out: &Outcome) -> Option<(Metrics, Table)> {
    let d = built.model.dim();
    let mut min_ess = Vec::new();
    let mut header = vec!["dim".to_string()];
    let mut columns = Vec::new();
    for s in &out.summaries {
        if s.coordinates.is_empty() {
            continue;
        }
        header.push(s.sampler.name().to_string());
        let ess: Vec<f64> = s.coordinates.iter().map(|c| c.ess).collect();
        min_ess.push(NamedValue {
            sampler: s.sampler,
            value: ess.iter().cloned().fold(f64::INFINITY, f64::min),
        });
        columns.push(ess);
    }
    if columns.is_empty() {
        return None;
    }
    let rows = (0..d)
        .map(|i| {
            let mut row = vec![i.to_string()];
            row.extend(columns.iter().map(|c| c[i].to_string()));
            row
        })
        .collect();
    Some((
        Metrics::Dim20(Dim20Metrics {
            lambda: built.model.lambda(),
            min_ess,
        }),
        Table {
            name: "dim20_ess.csv".into(),
            header,
            rows,
        },
    ))
}

fn run_deconv(cfg: &ExperimentConfig, ctx: &Ctx, built: &BuiltModel, steps: &[Resolved], out: &mut Outcome) -> Metrics {
    run_plain(cfg, ctx, steps, out);
    let signal = built.signal.as_ref().expect("haar_deconv synthesizes its signal");
    let jumps = signal.positions.clone();
    let d = cfg.model.dim;
    let mut per_sampler = Vec::new();
    let mut header = vec!["index".to_string(), "truth".to_string()];
    let mut columns = Vec::new();
    for (kind, records) in &out.records {
        if records.is_empty() {
            continue;
        }
        // quantile gaps in the signal domain
        let total: usize = records.iter().map(|r| r.samples.nrows()).sum();
        let mut sig = Array2::<f64>::zeros((total, d));
        let mut row_out = sig.axis_iter_mut(Axis(0));
        for rec in records {
            for row in rec.samples.axis_iter(Axis(0)) {
                let s = built.to_signal(&cfg.model, row.as_slice().expect("row-major"));
                row_out.next().expect("sized").iter_mut().zip(&s).for_each(|(o, v)| *o = *v);
            }
        }
        let gaps: Vec<f64> = sig
            .axis_iter(Axis(1))
            .map(|col| {
                let mut c = col.to_vec();
                c.sort_by(f64::total_cmp);
                quantile_sorted(&c, 0.95) - quantile_sorted(&c, 0.05)
            })
            .collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));
        let top: Vec<usize> = order[..cfg.deconv.top_k].to_vec();
        let near = |i: usize| {
            jumps.iter().any(|&j| {
                // a jump sits between j − 1 and j
                let dist = if i >= j { i - j } else { j - 1 - i };
                dist <= cfg.deconv.window
            })
        };
        let hits = top.iter().filter(|&&i| near(i)).count();
        header.push(format!("gap_{}", kind.name()));
        columns.push(gaps);
        per_sampler.push(DeconvSampler {
            sampler: *kind,
            top_indices: top,
            hits,
        });
    }
    let rows = (0..d)
        .map(|i| {
            let mut row = vec![i.to_string(), signal.values[i].to_string()];
            row.extend(columns.iter().map(|c| c[i].to_string()));
            row
        })
        .collect();
    out.tables.push(Table {
        name: "haar_quantile_gap.csv".into(),
        header,
        rows,
    });
    Metrics::HaarDeconv(DeconvMetrics {
        jumps,
        top_k: cfg.deconv.top_k,
        window: cfg.deconv.window,
        samplers: per_sampler,
    })
}

/// Prior-only run recording `u` and `v` alongside `x`.
fn run_null(cfg: &ExperimentConfig, ctx: &Ctx, steps: &[Resolved], out: &mut Outcome) -> Metrics {
    let d = ctx.model.dim();
    let bl = ctx.model.beta() * ctx.model.lambda();
    let mut per_sampler = Vec::new();
    for r in steps {
        let s = spec_of(cfg, r.kind);
        type Lifted = (ChainRecord, Array2<f64>, Array2<f64>);
        let results: Vec<Result<Lifted, ChainError>> = par::map((0..cfg.n_chains as u64).collect(), |chain| {
            let mut kernel = AnyKernel::new(r.kind, ctx.model, ctx.groups, r.cfg).map_err(setup_error)?;
            let mut state = AnyKernel::initial_state(r.kind, d, ctx.groups);
            let mut rng = RngStream::new(ctx.seed, stream_id(r.kind, 0, chain));
            let started = Instant::now();
            let (mut steps_done, mut accepted) = (0usize, 0usize);
            let mut min_u = kernel.min_u(&state);
            let mut advance = |state: &mut AnyState| -> Result<(), ChainError> {
                steps_done += 1;
                let acc = kernel.step(state, &mut rng).map_err(|source| ChainError {
                    step: steps_done,
                    source,
                })?;
                accepted += acc as usize;
                if let (Some(m), Some(c)) = (min_u.as_mut(), kernel.min_u(state)) {
                    *m = m.min(c);
                }
                Ok(())
            };
            for _ in 0..s.n_burn {
                advance(&mut state)?;
            }
            let mut xs = Array2::zeros((s.n_samples, d));
            let mut us = Array2::zeros((s.n_samples, d));
            let mut vs = Array2::zeros((s.n_samples, d));
            for k in 0..s.n_samples {
                for _ in 0..s.thin {
                    advance(&mut state)?;
                }
                let AnyState::Lifted(st) = &state else { unreachable!("null_g0 runs lifted samplers") };
                for i in 0..d {
                    us[[k, i]] = st.u[i];
                    vs[[k, i]] = st.v[i];
                    xs[[k, i]] = st.u[i] * st.v[i];
                }
            }
            let rec = ChainRecord {
                samples: xs,
                acceptance_rate: (r.kind == SamplerKind::Mala).then(|| accepted as f64 / steps_done.max(1) as f64),
                min_u_seen: min_u,
                wall_time: started.elapsed().as_secs_f64(),
            };
            Ok((rec, us, vs))
        });
        let mut lifted_u = Vec::new();
        let mut lifted_v = Vec::new();
        let mut plain = Vec::with_capacity(results.len());
        for r in results {
            plain.push(r.map(|(rec, u, v)| {
                lifted_u.push(u);
                lifted_v.push(v);
                rec
            }));
        }
        out.absorb(cfg, r.kind, None, plain, true);
        let records = &out.records.last().expect("just pushed").1;
        if records.is_empty() {
            continue;
        }
        let column = |mats: &[&Array2<f64>], i: usize| -> Vec<f64> { mats.iter().flat_map(|m| m.column(i).to_vec()).collect() };
        let xs: Vec<&Array2<f64>> = records.iter().map(|r| &r.samples).collect();
        let us: Vec<&Array2<f64>> = lifted_u.iter().collect();
        let vs: Vec<&Array2<f64>> = lifted_v.iter().collect();
        let sigma = 1.0 / bl.sqrt();
        let ks_x: Vec<f64> = (0..d).map(|i| ks_statistic(&column(&xs, i), |t| cdf::laplace(t, bl))).collect();
        let ks_u: Vec<f64> = (0..d).map(|i| ks_statistic(&column(&us, i), |t| cdf::rayleigh(t, sigma))).collect();
        let ks_v: Vec<f64> = (0..d).map(|i| ks_statistic(&column(&vs, i), |t| cdf::normal(t, sigma))).collect();
        per_sampler.push(NullSampler {
            sampler: r.kind,
            ks_x,
            ks_u,
            ks_v,
        });
    }
    Metrics::NullG0(NullMetrics { samplers: per_sampler })
}

fn oracle_moments(model: &TargetModel) -> Result<(f64, f64, f64), HarnessError> {
    let quad = QuadratureConfig::default();
    let m1 = quadrature_expectation_1d_with(|x| x, model, &quad, QuadratureRule::GaussKronrod)?;
    let m2 = quadrature_expectation_1d_with(|x| x * x, model, &quad, QuadratureRule::GaussKronrod)?;
    let m1s = quadrature_expectation_1d_with(|x| x, model, &quad, QuadratureRule::Simpson)?;
    let m2s = quadrature_expectation_1d_with(|x| x * x, model, &quad, QuadratureRule::Simpson)?;
    Ok((m1, m2, (m1 - m1s).abs().max((m2 - m2s).abs())))
}

/// Mean and ESS-based standard error of `f(x)` over one chain's samples.
fn chain_moment(rec: &ChainRecord, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let vals: Vec<f64> = rec.samples.column(0).iter().map(|&x| f(x)).collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let e = ess(&vals).unwrap_or(n);
    (mean, (var / e).sqrt())
}

/// Pooled mean over equal-length chains and its standard error.
fn pooled_moment(records: &[ChainRecord], f: impl Fn(f64) -> f64 + Copy) -> (f64, f64) {
    let parts: Vec<(f64, f64)> = records.iter().map(|r| chain_moment(r, f)).collect();
    let k = parts.len() as f64;
    let mean = parts.iter().map(|p| p.0).sum::<f64>() / k;
    let se = parts.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt() / k;
    (mean, se)
}

fn run_rate(cfg: &ExperimentConfig, ctx: &Ctx, steps: &[Resolved], out: &mut Outcome) -> Result<Metrics, HarnessError> {
    let (oracle_first, oracle_second, rule_gap) = oracle_moments(ctx.model)?;
    let mut rows = Vec::new();
    for r in steps {
        let s = spec_of(cfg, r.kind);
        for (slot, &dt) in cfg.sweep.dt.iter().enumerate() {
            let step = match r.kind {
                SamplerKind::Myula => StepConfig::with_gamma(dt, match s.gamma {
                    Some(g) => g,
                    None => cfg.sweep.myula_gamma_ratio * dt,
                }),
                _ => StepConfig::new(dt),
            };
            let n_burn = (cfg.sweep.burn_time / dt).ceil() as usize;
            let thin = ((cfg.sweep.sample_spacing / dt).round() as usize).max(1);
            let results = run_chains(ctx, r.kind, step, slot as u64, cfg.n_chains, n_burn, s.n_samples, thin);
            out.absorb(cfg, r.kind, Some(dt), results, true);
            let (_, records) = out.records.pop().expect("just pushed");
            if records.is_empty() {
                continue;
            }
            let (m1, se1) = pooled_moment(&records, |x| x);
            let (m2, se2) = pooled_moment(&records, |x| x * x);
            rows.push(RateRow {
                sampler: r.kind,
                dt,
                gamma: step.moreau_gamma,
                first_moment: m1,
                first_stderr: se1,
                second_moment: m2,
                second_stderr: se2,
                abs_error: (m2 - oracle_second).abs(),
            });
        }
    }
    let mut fits = Vec::new();
    for r in steps {
        let mine: Vec<&RateRow> = rows.iter().filter(|row| row.sampler == r.kind).collect();
        if mine.len() < 2 {
            continue;
        }
        let lx: Vec<f64> = mine.iter().map(|row| row.dt.ln()).collect();
        let fit_of = |err: &dyn Fn(&RateRow) -> f64| {
            let ly: Vec<f64> = mine.iter().map(|row| err(row).max(f64::MIN_POSITIVE).ln()).collect();
            linear_fit(&lx, &ly)
        };
        let second = fit_of(&|row| row.abs_error);
        let first = fit_of(&|row| (row.first_moment - oracle_first).abs());
        fits.push(RateFit {
            sampler: r.kind,
            second_moment: second,
            first_moment: first,
        });
    }
    out.tables.push(Table {
        name: "rate_1d.csv".into(),
        header: ["sampler", "dt", "gamma", "estimate", "stderr", "oracle", "abs_error"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .iter()
            .map(|row| {
                vec![
                    row.sampler.name().to_string(),
                    row.dt.to_string(),
                    row.gamma.map(|g| g.to_string()).unwrap_or_default(),
                    row.second_moment.to_string(),
                    row.second_stderr.to_string(),
                    oracle_second.to_string(),
                    row.abs_error.to_string(),
                ]
            })
            .collect(),
    });
    Ok(Metrics::Rate1d(RateMetrics {
        oracle_first_moment: oracle_first,
        oracle_second_moment: oracle_second,
        oracle_rule_gap: rule_gap,
        rows,
        fits,
    }))
}

/// Cross-chain mean of `x²` per iteration, accumulated in blocks so memory
/// stays `O(iterations)`.
fn run_mixing(cfg: &ExperimentConfig, ctx: &Ctx, steps: &[Resolved], out: &mut Outcome) -> Metrics {
    const BLOCK: usize = 64;
    let iters = cfg.mixing.iterations;
    let mut metrics = Metrics::None;
    for r in steps {
        let blocks: Vec<(usize, usize)> = (0..cfg.n_chains)
            .step_by(BLOCK)
            .map(|lo| (lo, (lo + BLOCK).min(cfg.n_chains)))
            .collect();
        type BlockSums = (Vec<f64>, Vec<f64>, Option<f64>, f64);
        let sums: Vec<Result<BlockSums, (usize, ChainError)>> = par::map(blocks, |(lo, hi)| {
            let started = Instant::now();
            let mut s1 = vec![0.0; iters];
            let mut s2 = vec![0.0; iters];
            let mut min_u: Option<f64> = None;
            let d = ctx.model.dim();
            let mut obs = vec![0.0; d];
            for chain in lo..hi {
                let mut kernel = AnyKernel::new(r.kind, ctx.model, ctx.groups, r.cfg).map_err(|e| (chain, setup_error(e)))?;
                let mut state = AnyKernel::initial_state(r.kind, d, ctx.groups);
                let mut rng = RngStream::new(ctx.seed, stream_id(r.kind, 0, chain as u64));
                for k in 0..iters {
                    kernel
                        .step(&mut state, &mut rng)
                        .map_err(|source| (chain, ChainError { step: k + 1, source }))?;
                    if let Some(m) = kernel.min_u(&state) {
                        min_u = Some(min_u.map_or(m, |c: f64| c.min(m)));
                    }
                    kernel.observe(&state, &mut obs);
                    let x2 = obs[0] * obs[0];
                    s1[k] += x2;
                    s2[k] += x2 * x2;
                }
            }
            Ok((s1, s2, min_u, started.elapsed().as_secs_f64()))
        });
        let mut total1 = vec![0.0; iters];
        let mut total2 = vec![0.0; iters];
        let mut n_ok = 0usize;
        let mut min_u: Option<f64> = None;
        for (b, res) in sums.into_iter().enumerate() {
            match res {
                Ok((s1, s2, mu, secs)) => {
                    let lo = b * BLOCK;
                    n_ok += (lo + BLOCK).min(cfg.n_chains) - lo;
                    total1.iter_mut().zip(&s1).for_each(|(t, s)| *t += s);
                    total2.iter_mut().zip(&s2).for_each(|(t, s)| *t += s);
                    if let Some(m) = mu {
                        min_u = Some(min_u.map_or(m, |c: f64| c.min(m)));
                    }
                    out.timings.push(ChainTiming {
                        sampler: r.kind,
                        dt: Some(r.cfg.dt),
                        chain_id: lo,
                        seconds: secs,
                    });
                }
                Err((chain_id, e)) => out.failures.push(JobFailure {
                    sampler: r.kind,
                    dt: Some(r.cfg.dt),
                    chain_id,
                    error: e.to_string(),
                }),
            }
        }
        out.summaries.push(SamplerSummary {
            sampler: r.kind,
            dt: Some(r.cfg.dt),
            n_chains_ok: n_ok,
            acceptance_rate: None,
            min_u_seen: min_u,
            coordinates: Vec::new(),
            chains: Vec::new(),
        });
        if n_ok < 2 {
            continue;
        }
        let n = n_ok as f64;
        let means: Vec<f64> = total1.iter().map(|s| s / n).collect();
        let sds: Vec<f64> = total2
            .iter()
            .zip(&means)
            .map(|(s2, m)| ((s2 / n - m * m) * n / (n - 1.0)).max(0.0).sqrt())
            .collect();
        let tail = &means[iters - cfg.mixing.tail..];
        let long_run = tail.iter().sum::<f64>() / tail.len() as f64;
        let tail_sd = sds[iters - cfg.mixing.tail..].iter().sum::<f64>() / cfg.mixing.tail as f64;
        let noise_floor = 3.0 * tail_sd / n.sqrt();
        let errors: Vec<f64> = means.iter().map(|m| (m - long_run).abs()).collect();
        let window_end = errors.iter().position(|&e| e < noise_floor).unwrap_or(iters);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..window_end).map(|k| ((k + 1) as f64, errors[k].ln())).unzip();
        let fit = (xs.len() >= 3).then(|| linear_fit(&xs, &ys));
        out.tables.push(Table {
            name: format!("mixing_1d_{}.csv", r.kind.name()),
            header: ["iteration", "cross_chain_mean", "abs_error"].map(String::from).to_vec(),
            rows: (0..iters)
                .map(|k| vec![(k + 1).to_string(), means[k].to_string(), errors[k].to_string()])
                .collect(),
        });
        metrics = Metrics::Mixing1d(MixingMetrics {
            sampler: r.kind,
            n_chains: n_ok,
            long_run_value: long_run,
            noise_floor,
            window_end,
            fit,
        });
    }
    metrics
}

/// Coupled coarse/fine Hadamard paths under shared Brownian increments.
fn run_strong(cfg: &ExperimentConfig, ctx: &Ctx, out: &mut Outcome) -> Metrics {
    let d = ctx.model.dim();
    let spec = &cfg.strong;
    let refine = spec.refine;
    let mut rows = Vec::new();
    let mut min_u_all: Option<f64> = None;
    let started = Instant::now();
    for (slot, &dt) in spec.dt.iter().enumerate() {
        let n_coarse = (spec.horizon / dt).round() as usize;
        let fine_dt = dt / refine as f64;
        let errs: Vec<Result<(f64, f64), ChainError>> = par::map((0..spec.paths as u64).collect(), |path| {
            let mut coarse = HadamardUla::new(ctx.model, StepConfig::new(dt)).map_err(setup_error)?;
            let mut fine = HadamardUla::new(ctx.model, StepConfig::new(fine_dt)).map_err(setup_error)?;
            let mut rng = RngStream::new(ctx.seed, stream_id(SamplerKind::Hadamard, slot as u64, path));
            let mut sc = crate::samplers::SamplerState::default_init(d, d);
            let mut sf = sc.clone();
            let (mut xi_u, mut xi_v) = (vec![0.0; d], vec![0.0; d]);
            let (mut acc_u, mut acc_v) = (vec![0.0; d], vec![0.0; d]);
            let scale = 1.0 / (refine as f64).sqrt();
            let mut sup = 0.0f64;
            let mut min_u = f64::INFINITY;
            for k in 0..n_coarse {
                acc_u.iter_mut().for_each(|a| *a = 0.0);
                acc_v.iter_mut().for_each(|a| *a = 0.0);
                for j in 0..refine {
                    rng.fill_standard_normal(&mut xi_u);
                    rng.fill_standard_normal(&mut xi_v);
                    fine.step_with_noise(&mut sf, &xi_u, &xi_v)
                        .map_err(|source| ChainError { step: k * refine + j + 1, source })?;
                    acc_u.iter_mut().zip(&xi_u).for_each(|(a, x)| *a += x);
                    acc_v.iter_mut().zip(&xi_v).for_each(|(a, x)| *a += x);
                    min_u = min_u.min(sf.min_u());
                }
                // coarse noise is the normalized sum of the fine noise
                acc_u.iter_mut().for_each(|a| *a *= scale);
                acc_v.iter_mut().for_each(|a| *a *= scale);
                coarse
                    .step_with_noise(&mut sc, &acc_u, &acc_v)
                    .map_err(|source| ChainError { step: k + 1, source })?;
                min_u = min_u.min(sc.min_u());
                let e2: f64 = sc.u.iter().zip(&sf.u).chain(sc.v.iter().zip(&sf.v)).map(|(a, b)| (a - b) * (a - b)).sum();
                sup = sup.max(e2.sqrt());
            }
            Ok((sup, min_u))
        });
        let mut sups = Vec::new();
        for (path, e) in errs.into_iter().enumerate() {
            match e {
                Ok((s, m)) => {
                    sups.push(s);
                    min_u_all = Some(min_u_all.map_or(m, |c: f64| c.min(m)));
                }
                Err(e) => out.failures.push(JobFailure {
                    sampler: SamplerKind::Hadamard,
                    dt: Some(dt),
                    chain_id: path,
                    error: e.to_string(),
                }),
            }
        }
        if sups.len() < 2 {
            continue;
        }
        let n = sups.len() as f64;
        let mean = sups.iter().sum::<f64>() / n;
        let sd = (sups.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        rows.push(StrongRow {
            dt,
            mean_sup_error: mean,
            stderr: sd / n.sqrt(),
            paths: sups.len(),
        });
    }
    out.timings.push(ChainTiming {
        sampler: SamplerKind::Hadamard,
        dt: None,
        chain_id: 0,
        seconds: started.elapsed().as_secs_f64(),
    });
    out.summaries.push(SamplerSummary {
        sampler: SamplerKind::Hadamard,
        dt: None,
        n_chains_ok: rows.iter().map(|r| r.paths).sum(),
        acceptance_rate: None,
        min_u_seen: min_u_all,
        coordinates: Vec::new(),
        chains: Vec::new(),
    });
    let fit = (rows.len() >= 2).then(|| {
        let lx: Vec<f64> = rows.iter().map(|r| r.dt.ln()).collect();
        let ly: Vec<f64> = rows.iter().map(|r| r.mean_sup_error.max(f64::MIN_POSITIVE).ln()).collect();
        linear_fit(&lx, &ly)
    });
    out.tables.push(Table {
        name: "strong_rate.csv".into(),
        header: ["dt", "mean_sup_error", "stderr", "paths"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|r| vec![r.dt.to_string(), r.mean_sup_error.to_string(), r.stderr.to_string(), r.paths.to_string()])
            .collect(),
    });
    Metrics::StrongRate(StrongMetrics {
        refine,
        horizon: spec.horizon,
        rows,
        fit,
    })
}
