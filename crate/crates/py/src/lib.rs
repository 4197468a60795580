use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use aqc::calibration::{self, CalibrationOptions};
use aqc::conditions::{self, PairSet};
use aqc::ensemble::{self, DisorderSpec, EnsembleOptions, ParamKind};
use aqc::{model, propagation, spectrum, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_)
        | Error::InvalidSchedule(_)
        | Error::OutOfRange(_)
        | Error::InvalidDisorder(_)
        | Error::InvalidLevelCount { .. }
        | Error::DimensionOverflow { .. }
        | Error::Config(_)
        | Error::Precondition(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Site parameters of an open chain.
#[pyclass(name = "ChainParams", module = "ising_aqc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyChainParams {
    inner: model::ChainParams,
}

#[pymethods]
impl PyChainParams {
    #[new]
    fn new(lam: Vec<f64>, h: Vec<f64>, j: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: model::ChainParams::new(lam, h, j).map_err(to_py)? })
    }

    /// Ideal chain: λ = 1, h = 5, J = 2.5.
    #[staticmethod]
    fn ideal(n: usize) -> PyResult<Self> {
        Ok(Self { inner: model::ChainParams::ideal(n).map_err(to_py)? })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits()
    }

    #[getter]
    fn lam(&self) -> Vec<f64> {
        self.inner.lambda.clone()
    }

    #[getter]
    fn h(&self) -> Vec<f64> {
        self.inner.h.clone()
    }

    #[getter]
    fn j(&self) -> Vec<f64> {
        self.inner.j.clone()
    }

    /// Diagonal of the problem Hamiltonian in the computational basis.
    fn problem_diagonal(&self) -> Vec<f64> {
        model::problem_diagonal(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ChainParams(lam={:?}, h={:?}, j={:?})", self.inner.lambda, self.inner.h, self.inner.j)
    }
}

/// Cosine-ramp schedule with energy scale `epsilon0` (rad/ns) and duration `t_f` (ns).
#[pyclass(name = "Schedule", module = "ising_aqc", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySchedule {
    inner: model::Schedule,
}

#[pymethods]
impl PySchedule {
    #[new]
    #[pyo3(signature = (t_f, epsilon0 = model::DEFAULT_EPSILON0))]
    fn new(t_f: f64, epsilon0: f64) -> PyResult<Self> {
        Ok(Self { inner: model::Schedule::new(epsilon0, t_f).map_err(to_py)? })
    }

    #[getter]
    fn t_f(&self) -> f64 {
        self.inner.t_f
    }

    #[getter]
    fn epsilon0(&self) -> f64 {
        self.inner.epsilon0
    }

    /// `(Ω(s), Γ(s))` in rad/ns.
    fn envelopes(&self, s: f64) -> PyResult<(f64, f64)> {
        model::envelopes(s, &self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Schedule(t_f={}, epsilon0={})", self.inner.t_f, self.inner.epsilon0)
    }
}

/// Dense `H(s)` as a list of rows.
#[pyfunction]
fn hamiltonian(s: f64, params: &PyChainParams, sched: &PySchedule) -> PyResult<Vec<Vec<f64>>> {
    let h = model::hamiltonian_at(s, &params.inner, &sched.inner).map_err(to_py)?;
    Ok(h.row_iter().map(|r| r.iter().copied().collect()).collect())
}

/// `(delta_min, s_star)` from a values-only scan with golden-section refinement.
#[pyfunction]
#[pyo3(signature = (params, sched, grid_points = spectrum::DEFAULT_GRID_POINTS))]
fn minimum_gap(params: &PyChainParams, sched: &PySchedule, grid_points: usize) -> PyResult<(f64, f64)> {
    let g = spectrum::scan_minimum_gap(&params.inner, &sched.inner, grid_points).map_err(to_py)?;
    Ok((g.delta_min, g.s_star))
}

/// Gap trace as a dict with `s`, `energies`, `gap`, `delta_min`, `s_star`.
#[pyfunction]
#[pyo3(signature = (params, sched, grid_points = spectrum::DEFAULT_GRID_POINTS, levels = None))]
fn gap_trace<'py>(
    py: Python<'py>,
    params: &PyChainParams,
    sched: &PySchedule,
    grid_points: usize,
    levels: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let k = levels.unwrap_or_else(|| spectrum::default_levels(params.inner.n_qubits()));
    let mut trace = spectrum::gap_trace(&params.inner, &sched.inner, grid_points, k).map_err(to_py)?;
    trace.refine(&params.inner, &sched.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("s", &trace.s_grid)?;
    d.set_item("energies", &trace.energies)?;
    d.set_item("gap", &trace.gap)?;
    d.set_item("delta_min", trace.delta_min)?;
    d.set_item("s_star", trace.s_star)?;
    Ok(d)
}

/// Success probability after `steps` midpoint steps.
#[pyfunction]
fn propagate(params: &PyChainParams, sched: &PySchedule, steps: usize) -> PyResult<f64> {
    Ok(propagation::propagate(&params.inner, &sched.inner, steps).map_err(to_py)?.success_probability)
}

/// `(success_probability, steps_used)` with step doubling until converged.
#[pyfunction]
#[pyo3(signature = (params, sched, tol = propagation::DEFAULT_AUTO_TOL))]
fn auto_propagate(params: &PyChainParams, sched: &PySchedule, tol: f64) -> PyResult<(f64, usize)> {
    let r = propagation::auto_propagate(&params.inner, &sched.inner, tol).map_err(to_py)?;
    Ok((r.success_probability, r.steps_used))
}

/// Shortest `t_f` meeting `target`; returns a dict of the calibration record.
#[pyfunction]
#[pyo3(signature = (n, target = calibration::DEFAULT_TARGET))]
fn calibrate_tf<'py>(py: Python<'py>, n: usize, target: f64) -> PyResult<Bound<'py, PyDict>> {
    let r = py
        .detach(|| calibration::calibrate_with(n, &CalibrationOptions { target, ..Default::default() }))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("n_qubits", r.n_qubits)?;
    d.set_item("t_f", r.t_f)?;
    d.set_item("achieved_fidelity", r.achieved_fidelity)?;
    d.set_item("delta_min", r.delta_min)?;
    d.set_item("steps", r.steps)?;
    Ok(d)
}

fn parse_targets(targets: Vec<String>) -> PyResult<Vec<ParamKind>> {
    targets.iter().map(|t| t.parse().map_err(to_py)).collect()
}

/// Disordered instance `index` of the ensemble `(sigma_rel, targets, seed)`.
#[pyfunction]
fn sample_instance(ideal: &PyChainParams, sigma_rel: f64, targets: Vec<String>, seed: u64, index: u64) -> PyResult<PyChainParams> {
    let spec = DisorderSpec::new(sigma_rel, &parse_targets(targets)?, seed, 1).map_err(to_py)?;
    Ok(PyChainParams { inner: ensemble::sample_instance(&ideal.inner, &spec, index) })
}

/// Ensemble run at fixed `steps`; returns a summary dict plus per-instance lists.
#[pyfunction]
#[pyo3(signature = (ideal, sched, sigma_rel, targets, seed, size, steps, workers = 1))]
#[allow(clippy::too_many_arguments)]
fn run_ensemble<'py>(
    py: Python<'py>,
    ideal: &PyChainParams,
    sched: &PySchedule,
    sigma_rel: f64,
    targets: Vec<String>,
    seed: u64,
    size: usize,
    steps: usize,
    workers: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = DisorderSpec::new(sigma_rel, &parse_targets(targets)?, seed, size).map_err(to_py)?;
    let opts = EnsembleOptions { workers, ..EnsembleOptions::new(steps) };
    let (p, s) = (ideal.inner.clone(), sched.inner);
    let run = py.detach(|| ensemble::run_ensemble(&p, &spec, &s, false, &opts)).map_err(to_py)?;
    let d = PyDict::new(py);
    let sm = &run.summary;
    d.set_item("mean_ps", sm.mean_ps)?;
    d.set_item("std_ps", sm.std_ps)?;
    d.set_item("mean_dmin", sm.mean_dmin)?;
    d.set_item("std_dmin", sm.std_dmin)?;
    d.set_item("gs_match_fraction", sm.gs_match_fraction)?;
    d.set_item("failures", sm.failures)?;
    d.set_item("ps", run.records.iter().map(|r| r.p_s).collect::<Vec<_>>())?;
    d.set_item("dmin", run.records.iter().map(|r| r.delta_min).collect::<Vec<_>>())?;
    Ok(d)
}

/// `(c1, c2, c3, c4)` for one instance on a `grid_points` trace.
#[pyfunction]
#[pyo3(signature = (params, sched, grid_points = spectrum::DEFAULT_GRID_POINTS, all_pairs = false))]
fn adiabatic_conditions(params: &PyChainParams, sched: &PySchedule, grid_points: usize, all_pairs: bool) -> PyResult<(f64, f64, f64, f64)> {
    let k = spectrum::default_levels(params.inner.n_qubits());
    let mut trace = spectrum::gap_trace(&params.inner, &sched.inner, grid_points, k).map_err(to_py)?;
    trace.refine(&params.inner, &sched.inner).map_err(to_py)?;
    let pairs = if all_pairs { PairSet::All } else { PairSet::Ground };
    let r = conditions::evaluate(&params.inner, &sched.inner, &trace, pairs).map_err(to_py)?;
    Ok((r.c1, r.c2, r.c3, r.c4))
}

#[pymodule]
fn ising_aqc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DEFAULT_EPSILON0", model::DEFAULT_EPSILON0)?;
    m.add("DEFAULT_TARGET", calibration::DEFAULT_TARGET)?;
    m.add_class::<PyChainParams>()?;
    m.add_class::<PySchedule>()?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(minimum_gap, m)?)?;
    m.add_function(wrap_pyfunction!(gap_trace, m)?)?;
    m.add_function(wrap_pyfunction!(propagate, m)?)?;
    m.add_function(wrap_pyfunction!(auto_propagate, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_tf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_instance, m)?)?;
    m.add_function(wrap_pyfunction!(run_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(adiabatic_conditions, m)?)?;
    Ok(())
}
