//! Protocol-duration calibration: the shortest `t_f` at which the ideal
//! chain reaches the fidelity target.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, read_csv, round_sig12, CsvWriter};
use crate::model::{ChainParams, Schedule, DEFAULT_EPSILON0};
use crate::propagation::{Protocol, DEFAULT_AUTO_TOL};
use crate::spectrum::{scan_minimum_gap, DEFAULT_GRID_POINTS};

pub const DEFAULT_TARGET: f64 = 0.999975;
pub const DEFAULT_TF_CAP: f64 = 1e6;
pub const DEFAULT_RESOLUTION: f64 = 1e-3;
/// Ratio between consecutive probes of the fine exponential search.
/// Fidelity is not monotone in `t_f`; with plain doubling the search steps
/// over the first passing window for N ≥ 7 and lands on a later one.
pub const DEFAULT_GROWTH: f64 = 1.044_273_782_427_413_8; // 2^(1/16)
/// Probes with infidelity above this multiple of `1 − target` are far
/// enough from any passing window to keep doubling.
pub const COARSE_MARGIN: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRecord {
    pub n_qubits: usize,
    /// Duration in ns.
    pub t_f: f64,
    pub achieved_fidelity: f64,
    pub target: f64,
    /// Ideal-chain minimum gap in rad/ns.
    pub delta_min: f64,
    /// Step count of the converged propagation at `t_f`.
    pub steps: usize,
}

impl CalibrationRecord {
    pub fn schedule(&self, epsilon0: f64) -> Result<Schedule> {
        Schedule::new(epsilon0, self.t_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub epsilon0: f64,
    pub ideal_lambda: f64,
    pub ideal_h: f64,
    pub ideal_j: f64,
    pub target: f64,
    pub tf_cap: f64,
    /// Exponential-search growth factor, > 1.
    pub growth: f64,
    /// Relative bisection resolution on `t_f`.
    pub resolution: f64,
    /// Convergence tolerance handed to the step-doubling propagator.
    pub propagation_tol: f64,
    pub grid_points: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            epsilon0: DEFAULT_EPSILON0,
            ideal_lambda: crate::model::IDEAL_LAMBDA,
            ideal_h: crate::model::IDEAL_H,
            ideal_j: crate::model::IDEAL_J,
            target: DEFAULT_TARGET,
            tf_cap: DEFAULT_TF_CAP,
            growth: DEFAULT_GROWTH,
            resolution: DEFAULT_RESOLUTION,
            propagation_tol: DEFAULT_AUTO_TOL,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

struct Probe {
    fidelity: f64,
    steps: usize,
}

fn probe(params: &ChainParams, opts: &CalibrationOptions, t_f: f64) -> Result<Probe> {
    let sched = Schedule::new(opts.epsilon0, t_f)?;
    let run = Protocol::new(params, &sched)?.auto(opts.propagation_tol)?;
    Ok(Probe { fidelity: run.success_probability, steps: run.steps_used })
}

/// Calibrate `t_f` for the ideal chain of `n` qubits with default options.
pub fn calibrate_tf(n: usize, target: f64) -> Result<CalibrationRecord> {
    calibrate_with(n, &CalibrationOptions { target, ..Default::default() })
}

/// Exponential search upward from 1 ns (doubling while far from the target,
/// then by `growth`), then bisection to `resolution` relative width. The returned `t_f` meets the target itself.
pub fn calibrate_with(n: usize, opts: &CalibrationOptions) -> Result<CalibrationRecord> {
    if n < 2 {
        return Err(Error::Precondition(format!("calibration needs n >= 2, got {n}")));
    }
    if !(0.0..1.0).contains(&opts.target) {
        return Err(Error::Precondition(format!("target must lie in [0, 1), got {}", opts.target)));
    }
    if !(opts.growth > 1.0 && opts.growth.is_finite()) {
        return Err(Error::Precondition(format!("growth factor must exceed 1, got {}", opts.growth)));
    }
    let params = ChainParams::uniform(n, opts.ideal_lambda, opts.ideal_h, opts.ideal_j)?;
    let passes = |p: &Probe| p.fidelity >= opts.target;

    let near = |p: &Probe| 1.0 - p.fidelity <= COARSE_MARGIN * (1.0 - opts.target);
    let capped = |t: f64| -> Result<f64> {
        if t > opts.tf_cap {
            Err(Error::TargetUnreachable { target: opts.target, cap: opts.tf_cap })
        } else {
            Ok(t)
        }
    };

    // doubling while far from the target, then the fine lattice from the
    // last far point
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut best = probe(&params, opts, hi)?;
    while !passes(&best) && !near(&best) {
        lo = hi;
        hi = capped(2.0 * hi)?;
        best = probe(&params, opts, hi)?;
    }
    if lo > 0.0 {
        hi = lo;
        loop {
            hi = capped(hi * opts.growth)?;
            best = probe(&params, opts, hi)?;
            if passes(&best) {
                break;
            }
            lo = hi;
        }
    } else {
        while !passes(&best) {
            lo = hi;
            hi = capped(hi * opts.growth)?;
            best = probe(&params, opts, hi)?;
        }
    }
    if lo > 0.0 {
        while (hi - lo) / hi > opts.resolution {
            let mid = 0.5 * (lo + hi);
            let p = probe(&params, opts, mid)?;
            if passes(&p) {
                hi = mid;
                best = p;
            } else {
                lo = mid;
            }
        }
    }
    // store the value exactly as it will be written to calibration.csv
    let mut t_f = round_sig12(hi);
    if t_f != hi {
        best = probe(&params, opts, t_f)?;
        while !passes(&best) {
            t_f = round_sig12(t_f * (1.0 + 1e-10));
            best = probe(&params, opts, t_f)?;
        }
    }
    log::info!("N={n}: t_f = {t_f} ns, P_S = {}", best.fidelity);
    let sched = Schedule::new(opts.epsilon0, t_f)?;
    let gap = scan_minimum_gap(&params, &sched, opts.grid_points)?;
    Ok(CalibrationRecord {
        n_qubits: n,
        t_f,
        achieved_fidelity: best.fidelity,
        target: opts.target,
        delta_min: gap.delta_min,
        steps: best.steps,
    })
}

/// One record per requested chain size, in the given order.
pub fn calibration_table(n_list: &[usize], opts: &CalibrationOptions) -> Result<Vec<CalibrationRecord>> {
    n_list.iter().map(|&n| calibrate_with(n, opts)).collect()
}

pub const CSV_HEADER: [&str; 4] = ["N", "t_f_ns", "fidelity", "delta_min"];

pub fn write_table<W: Write>(records: &[CalibrationRecord], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &CSV_HEADER)?;
    for r in records {
        w.row(&[
            r.n_qubits.to_string(),
            fmt_f64(r.t_f),
            fmt_f64(r.achieved_fidelity),
            fmt_f64(r.delta_min),
        ])?;
    }
    Ok(())
}

pub fn save_table(records: &[CalibrationRecord], path: &Path) -> std::io::Result<()> {
    crate::io::write_file(path, |f| write_table(records, f))
}

/// Rows of a `calibration.csv`: `(N, t_f, fidelity, delta_min)`.
pub fn load_table(path: &Path) -> std::io::Result<Vec<(usize, f64, f64, f64)>> {
    let t = read_csv(path)?;
    if t.header != CSV_HEADER {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "unexpected calibration header"));
    }
    let n = t.f64_column("N")?;
    let tf = t.f64_column("t_f_ns")?;
    let fid = t.f64_column("fidelity")?;
    let dm = t.f64_column("delta_min")?;
    Ok((0..n.len()).map(|i| (n[i] as usize, tf[i], fid[i], dm[i])).collect())
}

/// Rebuild a record from a stored `(N, t_f)` pair by re-running the
/// converged propagation (which also recovers the step count).
pub fn record_from_stored(n: usize, t_f: f64, delta_min: f64, opts: &CalibrationOptions) -> Result<CalibrationRecord> {
    let params = ChainParams::uniform(n, opts.ideal_lambda, opts.ideal_h, opts.ideal_j)?;
    let p = probe(&params, opts, t_f)?;
    Ok(CalibrationRecord {
        n_qubits: n,
        t_f,
        achieved_fidelity: p.fidelity,
        target: opts.target,
        delta_min,
        steps: p.steps,
    })
}
