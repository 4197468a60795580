//! Unitary evolution under `H(s) = Ω(s) H_I + Γ(s) H_P` with the
//! midpoint exponential product formula, success probabilities and
//! instantaneous-eigenbasis populations.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvWriter};
use crate::model::{envelopes_unchecked, ChainParams, IsingOperator, Schedule};
use crate::spectrum::{eigh_lowest_real, uniform_grid, DEGENERACY_TOL};

/// First step count tried by [`auto_propagate`].
pub const AUTO_START_STEPS: usize = 256;
/// Step count at which [`auto_propagate`] gives up.
pub const AUTO_MAX_STEPS: usize = 1 << 20;
pub const DEFAULT_AUTO_TOL: f64 = 1e-8;
pub const MIN_STEPS: usize = 10;

/// Largest `|dt|·‖H − c‖` handled by one Taylor sub-step.
const TAYLOR_MAX_THETA: f64 = 3.0;
const TAYLOR_MAX_TERMS: usize = 80;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type State = DVector<Complex64>;

/// How each midpoint step `exp(−i H(s_mid) dt)` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepKernel {
    /// Matrix-free shifted Taylor series, converged to round-off.
    #[default]
    Taylor,
    /// Dense eigendecomposition of the midpoint Hamiltonian.
    Eigen,
}

/// Result of one propagation run.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub final_state: State,
    pub success_probability: f64,
    pub steps_used: usize,
    pub converged: bool,
    pub population_trace: Option<PopulationTrace>,
}

/// `|a_m(s)|²` sampled along the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrace {
    pub s: Vec<f64>,
    pub populations: Vec<Vec<f64>>,
}

impl PopulationTrace {
    /// `s,p0,...,p{k-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let k = self.populations.first().map_or(0, Vec::len);
        let mut header = vec!["s".to_string()];
        header.extend((0..k).map(|m| format!("p{m}")));
        let mut w = CsvWriter::new(out, &header)?;
        for (s, row) in self.s.iter().zip(&self.populations) {
            let mut fields = vec![fmt_f64(*s)];
            fields.extend(row.iter().map(|&p| fmt_f64(p)));
            w.row(&fields)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        crate::io::write_file(path, |f| self.write_csv(f))
    }
}

/// `|⟨target|state⟩|²`.
pub fn success_probability(state: &State, target: &State) -> Result<f64> {
    if state.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: target.len(), got: state.len() });
    }
    Ok(target.dotc(state).norm_sqr().min(1.0))
}

/// Ground state of the diagonal `H_P`, i.e. of `Γ(t_f) H_P` at the end of
/// the schedule.
pub fn final_ground_state(params: &ChainParams) -> Result<State> {
    let op = IsingOperator::new(params)?;
    let diag = op.problem_diagonal();
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    if diag.len() > 1 && diag[order[1]] - diag[order[0]] <= DEGENERACY_TOL {
        return Err(Error::DegenerateGap { s: 1.0, gap: diag[order[1]] - diag[order[0]] });
    }
    let mut v = State::zeros(diag.len());
    v[order[0]] = Complex64::new(1.0, 0.0);
    Ok(v)
}

/// Dense `exp(−i H dt)` from an eigendecomposition of `H`.
pub fn step_unitary(h: &DMatrix<f64>, dt: f64) -> Result<DMatrix<Complex64>> {
    let dim = h.nrows();
    let (values, vectors) = eigh_lowest_real(h, dim)?;
    let v = vectors.map(|x| Complex64::new(x, 0.0));
    let phases = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        values.iter().map(|&e| Complex64::from_polar(1.0, -e * dt)),
    ));
    Ok(&v * phases * v.adjoint())
}

/// A fixed protocol: chain, schedule, initial ground state and the state
/// success is measured against.
#[derive(Debug, Clone)]
pub struct Protocol {
    op: IsingOperator,
    sched: Schedule,
    initial: State,
    target: State,
}

impl Protocol {
    /// Success is measured against this chain's own final ground state.
    pub fn new(params: &ChainParams, sched: &Schedule) -> Result<Self> {
        Self::with_target(params, sched, final_ground_state(params)?)
    }

    pub fn with_target(params: &ChainParams, sched: &Schedule, target: State) -> Result<Self> {
        let op = IsingOperator::new(params)?;
        if target.len() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: target.len() });
        }
        let h0 = op.dense_at(0.0, sched.epsilon0)?;
        let (values, vectors) = eigh_lowest_real(&h0, 2.min(op.dim()))?;
        if values.len() > 1 && values[1] - values[0] <= DEGENERACY_TOL * sched.epsilon0 {
            return Err(Error::DegenerateGap { s: 0.0, gap: values[1] - values[0] });
        }
        let initial = vectors.column(0).map(|x| Complex64::new(x, 0.0));
        Ok(Self { op, sched: *sched, initial, target })
    }

    pub fn initial_state(&self) -> &State {
        &self.initial
    }

    pub fn target_state(&self) -> &State {
        &self.target
    }

    pub fn schedule(&self) -> &Schedule {
        &self.sched
    }

    pub fn operator(&self) -> &IsingOperator {
        &self.op
    }

    /// Apply `exp(−i H(s_mid) dt)` to `psi` in place. Negative `dt` applies
    /// the adjoint step.
    pub fn apply_step(&self, psi: &mut State, s_mid: f64, dt: f64, kernel: StepKernel) -> Result<()> {
        match kernel {
            StepKernel::Taylor => {
                let mut work = TaylorWork::new(self.op.dim());
                self.taylor_step(psi, s_mid, dt, &mut work);
                Ok(())
            }
            StepKernel::Eigen => {
                let h = self.op.dense_at(s_mid, self.sched.epsilon0)?;
                let u = step_unitary(&h, dt)?;
                *psi = u * &*psi;
                Ok(())
            }
        }
    }

    fn taylor_step(&self, psi: &mut State, s_mid: f64, dt: f64, work: &mut TaylorWork) {
        let (omega, gamma) = envelopes_unchecked(s_mid, self.sched.epsilon0);
        let (dmin, dmax) = self.op.diagonal_range();
        let shift = gamma * 0.5 * (dmin + dmax);
        let radius = gamma.abs() * 0.5 * (dmax - dmin) + omega.abs() * self.op.transverse_bound();
        let theta = dt.abs() * radius;
        let subs = ((theta / TAYLOR_MAX_THETA).ceil() as usize).max(1);
        let h = dt / subs as f64;
        let phase = Complex64::from_polar(1.0, -shift * h);
        let factor = Complex64::new(0.0, -h);
        let scale = psi.norm();
        for _ in 0..subs {
            work.term.copy_from(psi);
            for k in 1..=TAYLOR_MAX_TERMS {
                self.op.apply(omega, gamma, shift, work.term.as_slice(), work.next.as_mut_slice());
                let c = factor / k as f64;
                for x in work.next.iter_mut() {
                    *x *= c;
                }
                std::mem::swap(&mut work.term, &mut work.next);
                *psi += &work.term;
                if work.term.norm() <= 1e-17 * scale {
                    break;
                }
            }
            if shift != 0.0 {
                for x in psi.iter_mut() {
                    *x *= phase;
                }
            }
        }
    }

    /// Apply the full midpoint product `U_{M−1}···U_0` (or, with
    /// `reverse`, `U_0†···U_{M−1}†`) to `psi`, calling `observe` after every
    /// step with the index of the completed step.
    pub fn evolve_with<F>(&self, psi: &mut State, steps: usize, kernel: StepKernel, reverse: bool, mut observe: F) -> Result<()>
    where
        F: FnMut(usize, &State) -> Result<()>,
    {
        if steps == 0 {
            return Err(Error::Precondition("steps must be positive".into()));
        }
        if psi.len() != self.op.dim() {
            return Err(Error::DimensionMismatch { expected: self.op.dim(), got: psi.len() });
        }
        let ds = 1.0 / steps as f64;
        let dt = self.sched.t_f * ds;
        let mut work = TaylorWork::new(self.op.dim());
        for i in 0..steps {
            let k = if reverse { steps - 1 - i } else { i };
            let s_mid = (k as f64 + 0.5) * ds;
            let signed_dt = if reverse { -dt } else { dt };
            match kernel {
                StepKernel::Taylor => self.taylor_step(psi, s_mid, signed_dt, &mut work),
                StepKernel::Eigen => self.apply_step(psi, s_mid, signed_dt, kernel)?,
            }
            observe(k, psi)?;
        }
        Ok(())
    }

    /// Evolve the initial ground state with `steps` midpoint steps.
    pub fn run(&self, steps: usize, kernel: StepKernel) -> Result<EvolutionResult> {
        let mut psi = self.initial.clone();
        self.evolve_with(&mut psi, steps, kernel, false, |_, _| Ok(()))?;
        let p = success_probability(&psi, &self.target)?;
        Ok(EvolutionResult {
            final_state: psi,
            success_probability: p,
            steps_used: steps,
            converged: false,
            population_trace: None,
        })
    }

    /// Double the step count from [`AUTO_START_STEPS`] until two
    /// consecutive doublings change `P_S` by less than `tol`.
    pub fn auto(&self, tol: f64) -> Result<EvolutionResult> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
        }
        let mut steps = AUTO_START_STEPS;
        let mut prev = self.run(steps, StepKernel::Taylor)?;
        let mut streak = 0;
        while steps < AUTO_MAX_STEPS {
            steps *= 2;
            let next = self.run(steps, StepKernel::Taylor)?;
            if (next.success_probability - prev.success_probability).abs() < tol {
                streak += 1;
            } else {
                streak = 0;
            }
            prev = next;
            if streak >= 2 {
                prev.converged = true;
                return Ok(prev);
            }
        }
        Err(Error::NotConverged { max_steps: AUTO_MAX_STEPS, best: prev.success_probability })
    }

    /// Evolve while projecting onto the `k` lowest instantaneous eigenstates
    /// at `sample_points` uniform values of `s`. `steps` is rounded up to a
    /// multiple of `sample_points − 1`.
    pub fn run_with_populations(&self, steps: usize, sample_points: usize, k: usize) -> Result<EvolutionResult> {
        if sample_points < 2 {
            return Err(Error::Precondition("need at least two sample points".into()));
        }
        let dim = self.op.dim();
        if k == 0 || k > dim {
            return Err(Error::InvalidLevelCount { k, dim });
        }
        let intervals = sample_points - 1;
        let per = steps.div_ceil(intervals).max(1);
        let steps = per * intervals;
        let grid = uniform_grid(sample_points);
        let eps0 = self.sched.epsilon0;
        let project = |s: f64, psi: &State| -> Result<Vec<f64>> {
            let h = self.op.dense_at(s, eps0)?;
            let (_, vectors) = eigh_lowest_real(&h, k)?;
            Ok((0..k)
                .map(|m| {
                    let amp: Complex64 = vectors.column(m).iter().zip(psi.iter()).map(|(v, x)| x * *v).sum();
                    amp.norm_sqr()
                })
                .collect())
        };
        let mut populations = vec![project(0.0, &self.initial)?];
        let mut psi = self.initial.clone();
        self.evolve_with(&mut psi, steps, StepKernel::Taylor, false, |step, state| {
            if (step + 1) % per == 0 {
                let j = (step + 1) / per;
                populations.push(project(grid[j], state)?);
            }
            Ok(())
        })?;
        let p = success_probability(&psi, &self.target)?;
        Ok(EvolutionResult {
            final_state: psi,
            success_probability: p,
            steps_used: steps,
            converged: false,
            population_trace: Some(PopulationTrace { s: grid, populations }),
        })
    }
}

struct TaylorWork {
    term: State,
    next: State,
}

impl TaylorWork {
    fn new(dim: usize) -> Self {
        Self { term: State::from_element(dim, ZERO), next: State::from_element(dim, ZERO) }
    }
}

/// Midpoint-exponential evolution of the chain's own initial ground state,
/// scored against its own final ground state.
pub fn propagate(params: &ChainParams, sched: &Schedule, steps: usize) -> Result<EvolutionResult> {
    if steps < MIN_STEPS {
        return Err(Error::Precondition(format!("steps must be >= {MIN_STEPS}, got {steps}")));
    }
    Protocol::new(params, sched)?.run(steps, StepKernel::Taylor)
}

/// [`propagate`] with step doubling until `P_S` is stable to `tol`.
pub fn auto_propagate(params: &ChainParams, sched: &Schedule, tol: f64) -> Result<EvolutionResult> {
    Protocol::new(params, sched)?.auto(tol)
}

/// Population trace `|⟨E_m(s)|ψ(s)⟩|²` for the lowest `k` levels.
pub fn eigenbasis_populations(
    params: &ChainParams,
    sched: &Schedule,
    steps: usize,
    sample_points: usize,
    k: usize,
) -> Result<PopulationTrace> {
    let run = Protocol::new(params, sched)?.run_with_populations(steps, sample_points, k)?;
    Ok(run.population_trace.expect("populations requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn success_probability_cases() {
        let a = State::from_vec(vec![c(1.0), c(0.0)]);
        let b = State::from_vec(vec![c(0.0), c(1.0)]);
        assert_eq!(success_probability(&a, &a).unwrap(), 1.0);
        assert_eq!(success_probability(&b, &a).unwrap(), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sup = State::from_vec(vec![c(h), Complex64::new(0.0, h)]);
        assert_abs_diff_eq!(success_probability(&sup, &a).unwrap(), 0.5, epsilon = 1e-15);
        let long = State::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
        assert!(matches!(success_probability(&long, &a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn vanishing_duration_is_identity() {
        let p = ChainParams::ideal(2).unwrap();
        let sc = Schedule::with_default_epsilon(1e-12).unwrap();
        let proto = Protocol::new(&p, &sc).unwrap();
        let r = propagate(&p, &sc, 10).unwrap();
        assert!((&r.final_state - proto.initial_state()).norm() < 1e-10);
        let expected = success_probability(proto.initial_state(), proto.target_state()).unwrap();
        assert_abs_diff_eq!(r.success_probability, expected, epsilon = 1e-12);
    }

    #[test]
    fn preconditions() {
        let p = ChainParams::ideal(2).unwrap();
        let sc = Schedule::with_default_epsilon(5.0).unwrap();
        assert!(propagate(&p, &sc, 9).is_err());
        assert!(auto_propagate(&p, &sc, 0.0).is_err());
        assert!(Schedule::with_default_epsilon(0.0).is_err());
        let zero = ChainParams::uniform(2, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(Protocol::new(&zero, &sc), Err(Error::DegenerateGap { .. })));
    }

    #[test]
    fn taylor_and_eigen_kernels_agree() {
        let p = ChainParams::new(vec![0.9, 1.2, 1.0], vec![5.0, 4.5, 5.2], vec![2.5, 2.2]).unwrap();
        let sc = Schedule::with_default_epsilon(3.0).unwrap();
        let proto = Protocol::new(&p, &sc).unwrap();
        let a = proto.run(200, StepKernel::Taylor).unwrap();
        let b = proto.run(200, StepKernel::Eigen).unwrap();
        assert!((&a.final_state - &b.final_state).norm() < 1e-11);
    }

    #[test]
    fn taylor_step_is_unitary() {
        let p = ChainParams::ideal(3).unwrap();
        let sc = Schedule::with_default_epsilon(20.0).unwrap();
        let proto = Protocol::new(&p, &sc).unwrap();
        let dim = 8;
        let mut u = DMatrix::<Complex64>::zeros(dim, dim);
        for j in 0..dim {
            let mut e = State::zeros(dim);
            e[j] = c(1.0);
            proto.apply_step(&mut e, 0.37, 0.9, StepKernel::Taylor).unwrap();
            u.set_column(j, &e);
        }
        let defect = (u.adjoint() * &u - DMatrix::identity(dim, dim)).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(defect < 1e-11, "defect {defect:e}");
    }

    #[test]
    fn populations_start_in_ground_state_and_are_complete() {
        let p = ChainParams::ideal(2).unwrap();
        let sc = Schedule::with_default_epsilon(10.0).unwrap();
        let trace = eigenbasis_populations(&p, &sc, 400, 21, 4).unwrap();
        assert_eq!(trace.s.len(), 21);
        assert_abs_diff_eq!(trace.populations[0][0], 1.0, epsilon = 1e-12);
        for row in &trace.populations {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
        }
    }
}
