//! Gaussian disorder ensembles around the ideal chain.
//!
//! Instance `i` draws its parameters from a ChaCha8 stream seeded by
//! `instance_seed(master_seed, i)`, so its realization depends on neither
//! the ensemble size nor the worker count.

use std::fmt;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{self, ConditionReport, PairSet};
use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::model::{problem_diagonal, ChainParams, Schedule};
use crate::propagation::{final_ground_state, Protocol, StepKernel};
use crate::spectrum::{default_levels, gap_trace, scan_minimum_gap};
use crate::stats::{mean, std_dev};

pub const MAX_SIGMA_REL: f64 = 0.5;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 1024;
pub const DEFAULT_SCAN_POINTS: usize = 101;
pub const DEFAULT_HIST_BINS: usize = 32;

/// Disorder target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Lambda,
    H,
    J,
}

impl ParamKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamKind::Lambda => "lambda",
            ParamKind::H => "h",
            ParamKind::J => "j",
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ParamKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lambda" => Ok(ParamKind::Lambda),
            "h" => Ok(ParamKind::H),
            "j" => Ok(ParamKind::J),
            other => Err(Error::InvalidDisorder(format!("unknown disorder target {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderSpec {
    pub sigma_rel: f64,
    /// Sorted and deduplicated by [`DisorderSpec::new`].
    pub targets: Vec<ParamKind>,
    pub master_seed: u64,
    pub ensemble_size: usize,
}

impl DisorderSpec {
    pub fn new(sigma_rel: f64, targets: &[ParamKind], master_seed: u64, ensemble_size: usize) -> Result<Self> {
        let mut targets = targets.to_vec();
        targets.sort();
        targets.dedup();
        let spec = Self { sigma_rel, targets, master_seed, ensemble_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_rel.is_finite() || self.sigma_rel < 0.0 || self.sigma_rel > MAX_SIGMA_REL {
            return Err(Error::InvalidDisorder(format!(
                "sigma_rel must lie in [0, {MAX_SIGMA_REL}], got {}",
                self.sigma_rel
            )));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidDisorder("no disorder targets".into()));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidDisorder("ensemble_size must be positive".into()));
        }
        Ok(())
    }

    /// `lambda`, `h`, `j` or a `+`-joined combination.
    pub fn label(&self) -> String {
        self.targets.iter().map(|t| t.as_str()).collect::<Vec<_>>().join("+")
    }

    fn targets(&self, kind: ParamKind) -> bool {
        self.targets.contains(&kind)
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-instance seed derived from `(master_seed, index)`.
pub fn instance_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn draw(values: &mut [f64], rng: &mut ChaCha8Rng, sigma_rel: f64, apply: bool) {
    for x in values.iter_mut() {
        let dist = Normal::new(*x, sigma_rel * x.abs()).expect("finite, non-negative std");
        // always consume the draw so the stream layout is target-independent
        let v = dist.sample(rng);
        if apply && sigma_rel > 0.0 {
            *x = v;
        }
    }
}

/// Draw instance `index`. Untargeted parameters keep their ideal values.
pub fn sample_instance(ideal: &ChainParams, spec: &DisorderSpec, index: u64) -> ChainParams {
    let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(spec.master_seed, index));
    let mut p = ideal.clone();
    draw(&mut p.lambda, &mut rng, spec.sigma_rel, spec.targets(ParamKind::Lambda));
    draw(&mut p.h, &mut rng, spec.sigma_rel, spec.targets(ParamKind::H));
    draw(&mut p.j, &mut rng, spec.sigma_rel, spec.targets(ParamKind::J));
    p
}

/// Unique argmin of the problem diagonal, or `None` on a tie.
fn classical_ground_state(params: &ChainParams) -> Option<usize> {
    let d = problem_diagonal(params);
    let (arg, min) = d
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(ai, am), (i, &v)| if v < am { (i, v) } else { (ai, am) });
    let ties = d.iter().filter(|&&v| v == min).count();
    (ties == 1).then_some(arg)
}

/// Whether the instance's classical ground state equals the ideal one.
/// A degenerate minimum on either side counts as a mismatch.
pub fn ground_state_matches(instance: &ChainParams, ideal: &ChainParams) -> bool {
    if instance.n_qubits() != ideal.n_qubits() {
        return false;
    }
    match (classical_ground_state(instance), classical_ground_state(ideal)) {
        (Some(a), Some(b)) => a == b,
        _ => {
            log::warn!("degenerate problem ground state; counted as mismatch");
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleOptions {
    /// Fixed midpoint steps per instance (taken from the ideal calibration).
    pub steps: usize,
    /// Values-only scan used for Δ_min when conditions are off.
    pub scan_points: usize,
    /// Grid of the full trace used when conditions are on.
    pub trace_points: usize,
    pub pair_set: PairSet,
    pub workers: usize,
    pub kernel: StepKernel,
}

impl EnsembleOptions {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            scan_points: DEFAULT_SCAN_POINTS,
            trace_points: crate::spectrum::DEFAULT_GRID_POINTS,
            pair_set: PairSet::Ground,
            workers: 1,
            kernel: StepKernel::Taylor,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub index: u64,
    pub seed: u64,
    pub params: ChainParams,
    pub p_s: f64,
    pub delta_min: f64,
    pub s_star: f64,
    pub gs_match: bool,
    pub conditions: Option<ConditionReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFailure {
    pub index: u64,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub ideal: f64,
    pub mean: f64,
}

impl Histogram {
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = CsvWriter::new(out, &["bin_left", "bin_right", "count"])?;
        for (i, c) in self.counts.iter().enumerate() {
            w.row(&[fmt_f64(self.edges[i]), fmt_f64(self.edges[i + 1]), c.to_string()])?;
        }
        w.raw_line(&format!("# ideal_dmin,{}", fmt_f64(self.ideal)))?;
        w.raw_line(&format!("# mean_dmin,{}", fmt_f64(self.mean)))
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        crate::io::write_file(path, |f| self.write_csv(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub spec: DisorderSpec,
    pub n_qubits: usize,
    /// Successful instances.
    pub size: usize,
    pub mean_ps: f64,
    pub std_ps: f64,
    pub mean_dmin: f64,
    pub std_dmin: f64,
    pub gs_match_fraction: f64,
    /// Mean P_S over instances whose final ground state matches the ideal.
    pub mean_ps_matched: f64,
    pub histogram: Histogram,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub summary: EnsembleSummary,
    pub records: Vec<InstanceRecord>,
    pub failures: Vec<InstanceFailure>,
}

/// Uniform bins over `[min, max]` of the observed Δ_min.
pub fn dmin_histogram(records: &[InstanceRecord], bins: usize, ideal_dmin: f64) -> Result<Histogram> {
    if records.is_empty() {
        return Err(Error::Precondition("histogram of an empty ensemble".into()));
    }
    let values: Vec<f64> = records.iter().map(|r| r.delta_min).collect();
    Ok(histogram_of(&values, bins.max(1), ideal_dmin))
}

fn histogram_of(values: &[f64], bins: usize, ideal: f64) -> Histogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m = mean(values);
    if lo == hi {
        return Histogram { edges: vec![lo, hi], counts: vec![values.len()], ideal, mean: m };
    }
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts, ideal, mean: m }
}

fn evaluate_instance(
    ideal: &ChainParams,
    spec: &DisorderSpec,
    sched: &Schedule,
    target: &crate::propagation::State,
    opts: &EnsembleOptions,
    with_conditions: bool,
    index: u64,
) -> Result<InstanceRecord> {
    let params = sample_instance(ideal, spec, index);
    params.validate()?;
    let run = Protocol::with_target(&params, sched, target.clone())?.run(opts.steps, opts.kernel)?;
    let (delta_min, s_star, conditions) = if with_conditions {
        let mut trace = gap_trace(&params, sched, opts.trace_points, default_levels(params.n_qubits()))?;
        trace.refine(&params, sched)?;
        let report = conditions::evaluate(&params, sched, &trace, opts.pair_set)?;
        (trace.delta_min, trace.s_star, Some(report))
    } else {
        let g = scan_minimum_gap(&params, sched, opts.scan_points)?;
        (g.delta_min, g.s_star, None)
    };
    Ok(InstanceRecord {
        index,
        seed: instance_seed(spec.master_seed, index),
        gs_match: ground_state_matches(&params, ideal),
        params,
        p_s: run.success_probability,
        delta_min,
        s_star,
        conditions,
    })
}

/// Evaluate the ensemble on `opts.workers` threads. Results are collected
/// in index order, so the output does not depend on the worker count.
pub fn run_ensemble(
    ideal: &ChainParams,
    spec: &DisorderSpec,
    sched: &Schedule,
    with_conditions: bool,
    opts: &EnsembleOptions,
) -> Result<EnsembleRun> {
    spec.validate()?;
    ideal.validate()?;
    let target = final_ground_state(ideal)?;
    let ideal_dmin = scan_minimum_gap(ideal, sched, opts.scan_points)?.delta_min;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers.max(1))
        .build()
        .map_err(|e| Error::Precondition(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<InstanceRecord>> = pool.install(|| {
        (0..spec.ensemble_size as u64)
            .into_par_iter()
            .map(|i| evaluate_instance(ideal, spec, sched, &target, opts, with_conditions, i))
            .collect()
    });

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("instance {i} failed: {e}");
                failures.push(InstanceFailure {
                    index: i as u64,
                    seed: instance_seed(spec.master_seed, i as u64),
                    message: e.to_string(),
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Precondition(format!("all {} instances failed", failures.len())));
    }
    let summary = summarize(ideal.n_qubits(), spec, &records, failures.len(), ideal_dmin)?;
    Ok(EnsembleRun { summary, records, failures })
}

pub fn summarize(
    n_qubits: usize,
    spec: &DisorderSpec,
    records: &[InstanceRecord],
    failures: usize,
    ideal_dmin: f64,
) -> Result<EnsembleSummary> {
    let ps: Vec<f64> = records.iter().map(|r| r.p_s).collect();
    let dm: Vec<f64> = records.iter().map(|r| r.delta_min).collect();
    let matched: Vec<f64> = records.iter().filter(|r| r.gs_match).map(|r| r.p_s).collect();
    Ok(EnsembleSummary {
        spec: spec.clone(),
        n_qubits,
        size: records.len(),
        mean_ps: mean(&ps),
        std_ps: std_dev(&ps),
        mean_dmin: mean(&dm),
        std_dmin: std_dev(&dm),
        gs_match_fraction: matched.len() as f64 / records.len() as f64,
        mean_ps_matched: mean(&matched),
        histogram: dmin_histogram(records, DEFAULT_HIST_BINS, ideal_dmin)?,
        failures,
    })
}

pub const INSTANCES_HEADER: [&str; 10] = ["index", "seed", "ps", "dmin", "s_star", "gs_match", "c1", "c2", "c3", "c4"];
pub const SUMMARY_HEADER: [&str; 9] =
    ["param_kind", "sigma_rel", "N", "size", "mean_ps", "std_ps", "mean_dmin", "std_dmin", "gs_match_fraction"];
pub const FAILURES_HEADER: [&str; 5] = ["param_kind", "sigma_rel", "N", "index", "message"];

pub fn write_instances<W: Write>(records: &[InstanceRecord], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &INSTANCES_HEADER)?;
    for r in records {
        let mut fields = vec![
            r.index.to_string(),
            r.seed.to_string(),
            fmt_f64(r.p_s),
            fmt_f64(r.delta_min),
            fmt_f64(r.s_star),
            u8::from(r.gs_match).to_string(),
        ];
        match &r.conditions {
            Some(c) => fields.extend(c.values().iter().map(|&v| fmt_f64(v))),
            None => fields.extend(std::iter::repeat_n(String::new(), 4)),
        }
        w.row(&fields)?;
    }
    Ok(())
}

pub fn save_instances(records: &[InstanceRecord], path: &Path) -> std::io::Result<()> {
    crate::io::write_file(path, |f| write_instances(records, f))
}

pub fn summary_row(s: &EnsembleSummary) -> Vec<String> {
    vec![
        s.spec.label(),
        fmt_f64(s.spec.sigma_rel),
        s.n_qubits.to_string(),
        s.size.to_string(),
        fmt_f64(s.mean_ps),
        fmt_f64(s.std_ps),
        fmt_f64(s.mean_dmin),
        fmt_f64(s.std_dmin),
        fmt_f64(s.gs_match_fraction),
    ]
}

pub fn write_summaries<W: Write>(summaries: &[EnsembleSummary], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &SUMMARY_HEADER)?;
    for s in summaries {
        w.row(&summary_row(s))?;
    }
    Ok(())
}

pub fn save_summaries(summaries: &[EnsembleSummary], path: &Path) -> std::io::Result<()> {
    crate::io::write_file(path, |f| write_summaries(summaries, f))
}

/// Single-line CSV field: commas and newlines in error text are replaced.
pub fn failure_row(spec: &DisorderSpec, n_qubits: usize, f: &InstanceFailure) -> Vec<String> {
    vec![
        spec.label(),
        fmt_f64(spec.sigma_rel),
        n_qubits.to_string(),
        f.index.to_string(),
        f.message.replace([',', '\n'], ";"),
    ]
}
