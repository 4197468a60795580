//! Adiabaticity figures of merit C1–C4 evaluated on a gauge-aligned
//! [`SpectrumTrace`].
//!
//! With ħ = 1: C1–C3 are dimensionless and C4 is in ns. `Ḣ = H'(s) / t_f`
//! where `H'(s) = ε0 π sin(πs) (H_P − H_I)`.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::model::{derivative_factors, ChainParams, IsingOperator, Schedule};
use crate::spectrum::{spectral_norm, SpectrumTrace, DEGENERACY_TOL};

/// Level pairs entering C1–C3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairSet {
    /// `(0, n)` for every tracked excited level `n`.
    #[default]
    Ground,
    /// Every tracked pair `m < n`.
    All,
}

impl PairSet {
    pub fn pairs(self, levels: usize) -> Vec<(usize, usize)> {
        match self {
            PairSet::Ground => (1..levels).map(|n| (0, n)).collect(),
            PairSet::All => (0..levels)
                .flat_map(|m| ((m + 1)..levels).map(move |n| (m, n)))
                .collect(),
        }
    }
}

/// Where a maximum over grid and pairs was attained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Argmax {
    pub s: f64,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// δ-free kernel of the running-time bound, in ns.
    pub c4: f64,
    pub c1_at: Argmax,
    pub c3_at: Argmax,
    pub pairs: Vec<(usize, usize)>,
    pub grid_points: usize,
    /// Pair/grid-point combinations skipped because the levels were degenerate.
    pub skipped_degenerate: usize,
    /// Largest |δ_nm| seen while evaluating C3.
    pub max_geometric_potential: f64,
    /// ‖H′‖ and ‖H″‖ maximised over the grid.
    pub h_prime_norm: f64,
    pub h_second_norm: f64,
}

impl ConditionReport {
    pub fn values(&self) -> [f64; 4] {
        [self.c1, self.c2, self.c3, self.c4]
    }
}

/// Lower bound on `t_f` implied by C4 for a tolerated distance `delta`.
pub fn c4_time_bound(c4: f64, delta: f64) -> f64 {
    1e5 / (delta * delta) * c4
}

/// `⟨E_m|(H_P − H_I)|E_n⟩` for every tracked pair at every grid point.
struct DifferenceElements {
    rows: Vec<DMatrix<Complex64>>,
}

impl DifferenceElements {
    fn new(op: &IsingOperator, trace: &SpectrumTrace) -> Self {
        let dim = op.dim();
        let mut buf = vec![Complex64::new(0.0, 0.0); dim];
        let rows = trace
            .states
            .iter()
            .map(|v| {
                let k = v.ncols();
                let mut dv = DMatrix::<Complex64>::zeros(dim, k);
                for n in 0..k {
                    let col: Vec<Complex64> = v.column(n).iter().copied().collect();
                    op.apply_difference(&col, &mut buf);
                    dv.column_mut(n).copy_from_slice(&buf);
                }
                v.ad_mul(&dv)
            })
            .collect();
        Self { rows }
    }
}

fn check_levels(trace: &SpectrumTrace, m: usize, n: usize) -> Result<()> {
    let k = trace.levels();
    if m >= k || n >= k {
        return Err(Error::InvalidLevelCount { k: m.max(n) + 1, dim: k });
    }
    Ok(())
}

/// `Ḣ_mn = ⟨E_m|Ḣ|E_n⟩` at grid point `grid_index` of `trace` (rad/ns²).
pub fn hdot_matrix_element(
    params: &ChainParams,
    sched: &Schedule,
    trace: &SpectrumTrace,
    grid_index: usize,
    m: usize,
    n: usize,
) -> Result<Complex64> {
    check_levels(trace, m, n)?;
    if grid_index >= trace.len() {
        return Err(Error::Precondition(format!("grid index {grid_index} out of range")));
    }
    let op = IsingOperator::new(params)?;
    if op.dim() != trace.states[grid_index].nrows() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: trace.states[grid_index].nrows() });
    }
    let v = &trace.states[grid_index];
    let col: Vec<Complex64> = v.column(n).iter().copied().collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); op.dim()];
    op.apply_difference(&col, &mut buf);
    let element: Complex64 = v.column(m).iter().zip(&buf).map(|(a, b)| a.conj() * b).sum();
    let (d1, _) = derivative_factors(trace.s_grid[grid_index], sched.epsilon0);
    Ok(element * (d1 / sched.t_f))
}

/// Centered differences on a uniform grid, one-sided at the ends.
fn grid_derivative<T>(values: &[T], ds: f64) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] - values[0]) * (1.0 / ds)
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) * (1.0 / ds)
            } else {
                (values[i + 1] - values[i - 1]) * (0.5 / ds)
            }
        })
        .collect()
}

/// Per-level Berry connection `A_k = Re[i⟨E_k|∂_t E_k⟩]` along the trace,
/// from finite differences of the stored eigenvectors (in whatever gauge
/// the trace carries).
pub fn berry_connection(trace: &SpectrumTrace, t_f: f64, level: usize) -> Vec<f64> {
    let ds = trace.ds();
    let len = trace.len();
    let overlap = |i: usize, j: usize| -> Complex64 { trace.states[i].column(level).dotc(&trace.states[j].column(level)) };
    (0..len)
        .map(|i| {
            let d = if i == 0 {
                (overlap(0, 1) - overlap(0, 0)) / ds
            } else if i == len - 1 {
                (overlap(i, i) - overlap(i, i - 1)) / ds
            } else {
                (overlap(i, i + 1) - overlap(i, i - 1)) / (2.0 * ds)
            };
            // Re(i z) = −Im z
            -d.im / t_f
        })
        .collect()
}

/// Geometric potential `δ_nm(s) = A_n(s) − A_m(s)`.
pub fn geometric_potential(trace: &SpectrumTrace, t_f: f64, m: usize, n: usize) -> Result<Vec<f64>> {
    check_levels(trace, m, n)?;
    let an = berry_connection(trace, t_f, n);
    let am = berry_connection(trace, t_f, m);
    Ok(an.iter().zip(&am).map(|(a, b)| a - b).collect())
}

/// Rephase each level so neighbouring overlaps are real and non-negative.
fn realigned_states(trace: &SpectrumTrace) -> Vec<DMatrix<Complex64>> {
    let mut out: Vec<DMatrix<Complex64>> = Vec::with_capacity(trace.len());
    for v in &trace.states {
        let mut cur = v.clone();
        if let Some(prev) = out.last() {
            for j in 0..cur.ncols() {
                let o = prev.column(j).dotc(&cur.column(j));
                if o.norm() > 0.0 {
                    let phase = o.conj() / o.norm();
                    for x in cur.column_mut(j).iter_mut() {
                        *x *= phase;
                    }
                }
            }
        }
        out.push(cur);
    }
    out
}

struct Context<'a> {
    trace: &'a SpectrumTrace,
    sched: &'a Schedule,
    elements: DifferenceElements,
    degenerate: f64,
}

impl<'a> Context<'a> {
    fn new(params: &ChainParams, sched: &'a Schedule, trace: &'a SpectrumTrace) -> Result<Self> {
        let op = IsingOperator::new(params)?;
        if trace.len() < 3 {
            return Err(Error::Precondition("trace needs at least three grid points".into()));
        }
        if trace.states[0].nrows() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: trace.states[0].nrows() });
        }
        Ok(Self {
            elements: DifferenceElements::new(&op, trace),
            trace,
            sched,
            degenerate: DEGENERACY_TOL * sched.epsilon0,
        })
    }

    fn hdot(&self, i: usize, m: usize, n: usize) -> Complex64 {
        let (d1, _) = derivative_factors(self.trace.s_grid[i], self.sched.epsilon0);
        self.elements.rows[i][(m, n)] * (d1 / self.sched.t_f)
    }

    /// `E_n − E_m` at grid point `i`.
    fn spacing(&self, i: usize, m: usize, n: usize) -> f64 {
        self.trace.energies[i][n] - self.trace.energies[i][m]
    }
}

fn validate_pairs(trace: &SpectrumTrace, pairs: &[(usize, usize)]) -> Result<()> {
    for &(m, n) in pairs {
        check_levels(trace, m, n)?;
        if m == n {
            return Err(Error::Precondition(format!("pair ({m}, {n}) is diagonal")));
        }
    }
    Ok(())
}

/// `C1 = max_{s, (m,n)} |Ḣ_mn| / Δ_mn²`.
pub fn condition_c1(params: &ChainParams, sched: &Schedule, trace: &SpectrumTrace, pairs: &[(usize, usize)]) -> Result<f64> {
    validate_pairs(trace, pairs)?;
    let ctx = Context::new(params, sched, trace)?;
    Ok(c1_impl(&ctx, pairs).0)
}

fn c1_impl(ctx: &Context<'_>, pairs: &[(usize, usize)]) -> (f64, Argmax, usize) {
    let mut best = 0.0;
    let mut at = Argmax::default();
    let mut skipped = 0;
    for i in 0..ctx.trace.len() {
        for &(m, n) in pairs {
            let gap = ctx.spacing(i, m, n);
            if gap.abs() < ctx.degenerate {
                skipped += 1;
                continue;
            }
            let v = ctx.hdot(i, m, n).norm() / (gap * gap);
            if v > best {
                best = v;
                at = Argmax { s: ctx.trace.s_grid[i], m, n };
            }
        }
    }
    (best, at, skipped)
}

/// `C2 = max_{(m,n)} ∫ |d/dt (Ḣ_mn / Δ_mn²)| dt` on the trace grid
/// (centered differences, trapezoid rule).
pub fn condition_c2(params: &ChainParams, sched: &Schedule, trace: &SpectrumTrace, pairs: &[(usize, usize)]) -> Result<f64> {
    validate_pairs(trace, pairs)?;
    let ctx = Context::new(params, sched, trace)?;
    c2_impl(params, &ctx, pairs)
}

fn c2_impl(params: &ChainParams, ctx: &Context<'_>, pairs: &[(usize, usize)]) -> Result<f64> {
    // C2 differentiates matrix elements, so it needs a continuous gauge
    // even if the trace's eigenvectors were re-signed pointwise.
    let aligned = SpectrumTrace { states: realigned_states(ctx.trace), ..ctx.trace.clone() };
    let op = IsingOperator::new(params)?;
    let elements = DifferenceElements::new(&op, &aligned);
    let ds = ctx.trace.ds();
    let mut best = 0.0_f64;
    for &(m, n) in pairs {
        let f: Vec<Complex64> = (0..ctx.trace.len())
            .map(|i| {
                let gap = ctx.spacing(i, m, n);
                if gap.abs() < ctx.degenerate {
                    return Complex64::new(0.0, 0.0);
                }
                let (d1, _) = derivative_factors(ctx.trace.s_grid[i], ctx.sched.epsilon0);
                elements.rows[i][(m, n)] * (d1 / ctx.sched.t_f) / (gap * gap)
            })
            .collect();
        // d/dt = (1/t_f) d/ds and dt = t_f ds cancel in the integral
        let df = grid_derivative(&f, ds);
        let integral: f64 = df.windows(2).map(|w| 0.5 * (w[0].norm() + w[1].norm()) * ds).sum();
        best = best.max(integral);
    }
    Ok(best)
}

/// `C3 = max_{s, (m,n)} |(Ḣ_mn / Δ_mn) / (Δ_mn + δ_nm)|` with
/// `Δ_mn = E_m − E_n`.
pub fn condition_c3(params: &ChainParams, sched: &Schedule, trace: &SpectrumTrace, pairs: &[(usize, usize)]) -> Result<f64> {
    validate_pairs(trace, pairs)?;
    let ctx = Context::new(params, sched, trace)?;
    Ok(c3_impl(&ctx, pairs)?.0)
}

fn c3_impl(ctx: &Context<'_>, pairs: &[(usize, usize)]) -> Result<(f64, Argmax, f64)> {
    let levels = ctx.trace.levels();
    let connections: Vec<Vec<f64>> = (0..levels).map(|k| berry_connection(ctx.trace, ctx.sched.t_f, k)).collect();
    let mut best = 0.0;
    let mut at = Argmax::default();
    let mut max_delta = 0.0_f64;
    for i in 0..ctx.trace.len() {
        for &(m, n) in pairs {
            let delta_nm = connections[n][i] - connections[m][i];
            max_delta = max_delta.max(delta_nm.abs());
            let d_mn = -ctx.spacing(i, m, n);
            if d_mn.abs() < ctx.degenerate {
                continue;
            }
            let denom = d_mn + delta_nm;
            if denom.abs() < 1e-10 {
                return Err(Error::SingularPoint { s: ctx.trace.s_grid[i], m, n });
            }
            let v = (ctx.hdot(i, m, n) / d_mn).norm() / denom.abs();
            if v > best {
                best = v;
                at = Argmax { s: ctx.trace.s_grid[i], m, n };
            }
        }
    }
    Ok((best, at, max_delta))
}

/// `max(‖H′‖³ / Δ_min⁴, ‖H′‖ ‖H″‖ / Δ_min³)` with the norms maximised over
/// the trace grid. Also returns `(‖H′‖, ‖H″‖)`.
pub fn condition_c4(params: &ChainParams, sched: &Schedule, trace: &SpectrumTrace) -> Result<(f64, f64, f64)> {
    if !(trace.delta_min > 0.0) {
        return Err(Error::DegenerateGap { s: trace.s_star, gap: trace.delta_min });
    }
    let op = IsingOperator::new(params)?;
    let diff_norm = spectral_norm(&op.dense_difference());
    let (mut n1, mut n2) = (0.0_f64, 0.0_f64);
    for &s in &trace.s_grid {
        let (d1, d2) = derivative_factors(s, sched.epsilon0);
        n1 = n1.max(d1.abs() * diff_norm);
        n2 = n2.max(d2.abs() * diff_norm);
    }
    let g = trace.delta_min;
    let c4 = (n1.powi(3) / g.powi(4)).max(n1 * n2 / g.powi(3));
    Ok((c4, n1, n2))
}

/// All four figures of merit for one instance.
pub fn evaluate(params: &ChainParams, sched: &Schedule, trace: &SpectrumTrace, pair_set: PairSet) -> Result<ConditionReport> {
    let pairs = pair_set.pairs(trace.levels());
    validate_pairs(trace, &pairs)?;
    let ctx = Context::new(params, sched, trace)?;
    let (c1, c1_at, skipped) = c1_impl(&ctx, &pairs);
    let c2 = c2_impl(params, &ctx, &pairs)?;
    let (c3, c3_at, max_delta) = c3_impl(&ctx, &pairs)?;
    let (c4, n1, n2) = condition_c4(params, sched, trace)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} degenerate pair evaluations");
    }
    Ok(ConditionReport {
        c1,
        c2,
        c3,
        c4,
        c1_at,
        c3_at,
        pairs,
        grid_points: trace.len(),
        skipped_degenerate: skipped,
        max_geometric_potential: max_delta,
        h_prime_norm: n1,
        h_second_norm: n2,
    })
}

/// One point of the `P_S` against `C_i` scatter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterRow {
    /// Instance index, −1 for the ideal instance.
    pub index: i64,
    pub c: [f64; 4],
    pub p_s: f64,
}

pub const SCATTER_HEADER: [&str; 10] = ["index", "c1", "c2", "c3", "c4", "c1_rel", "c2_rel", "c3_rel", "c4_rel", "ps"];

/// Scatter table with the ideal row first, plus `c_i / c_i^ideal` columns.
pub fn scatter_export(ideal: &ScatterRow, rows: &[ScatterRow]) -> Vec<ScatterRow> {
    let mut out = Vec::with_capacity(rows.len() + 1);
    out.push(ScatterRow { index: -1, ..*ideal });
    out.extend_from_slice(rows);
    out
}

pub fn write_scatter<W: Write>(ideal: &ScatterRow, rows: &[ScatterRow], out: W) -> std::io::Result<()> {
    let mut w = CsvWriter::new(out, &SCATTER_HEADER)?;
    for r in scatter_export(ideal, rows) {
        let mut fields = vec![r.index.to_string()];
        fields.extend(r.c.iter().map(|&c| fmt_f64(c)));
        fields.extend(r.c.iter().zip(&ideal.c).map(|(&c, &ci)| fmt_f64(c / ci)));
        fields.push(fmt_f64(r.p_s));
        w.row(&fields)?;
    }
    Ok(())
}

pub fn save_scatter(ideal: &ScatterRow, rows: &[ScatterRow], path: &Path) -> std::io::Result<()> {
    crate::io::write_file(path, |f| write_scatter(ideal, rows, f))
}

/// Closed-form `‖H′‖` maximum, `ε0 π ‖H_P − H_I‖`, attained at `s = 1/2`.
pub fn analytic_h_prime_norm(params: &ChainParams, epsilon0: f64) -> Result<f64> {
    Ok(epsilon0 * PI * spectral_norm(&IsingOperator::new(params)?.dense_difference()))
}
