//! Python bindings. Trajectories cross the boundary as lists of frames
//! (`list[list[float]]`, one inner list per time level).

use std::path::Path;

use phasefield_core::adjoint::{duality_check, solve_adjoint};
use phasefield_core::config::{parse_config_with_overrides, RunConfig};
use phasefield_core::control::{cost_eval, optimize as run_optimize, project_admissible, vi_residual};
use phasefield_core::diagnostics::{boundedness_check, norm_table as core_norm_table};
use phasefield_core::error::SolverError;
use phasefield_core::grid::Trajectory;
use phasefield_core::io::read_control_csv;
use phasefield_core::state::{solve_state, StateSolution};
use phasefield_core::tangent::{solve_tangent, taylor_remainder_test};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(phasefield, SolverFailure, PyException);

type Frames = Vec<Vec<f64>>;

fn solver_err(e: SolverError) -> PyErr {
    SolverFailure::new_err(e.to_string())
}

fn trajectory(frames: Frames, what: &str) -> PyResult<Trajectory> {
    let width = frames.first().map_or(0, Vec::len);
    if frames.iter().any(|f| f.len() != width) {
        return Err(PyValueError::new_err(format!(
            "{what}: frames must all have {width} values"
        )));
    }
    Ok(Trajectory::new(frames))
}

fn frames(t: &Trajectory) -> Frames {
    t.frames().to_vec()
}

/// Parsed run configuration.
#[pyclass(name = "Config", frozen)]
struct PyConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyConfig {
    /// Parses `section.key = value` text; `overrides` use the same syntax.
    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn parse(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        parse_config_with_overrides(text, &overrides)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn load(path: &str, overrides: Vec<String>) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        let mut cfg = Self::parse(&text, overrides)?;
        if let (Some(file), Some(dir)) = (&cfg.inner.control.file, Path::new(path).parent()) {
            cfg.inner.control.file = Some(dir.join(file));
        }
        Ok(cfg)
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.params().dt()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.mesh().node_count()
    }

    #[getter]
    fn boundary_count(&self) -> usize {
        self.inner.mesh().boundary_count()
    }

    /// Node coordinates as `(x, y)` pairs.
    fn coords(&self) -> Vec<(f64, f64)> {
        let mesh = self.inner.mesh();
        (0..mesh.node_count())
            .map(|i| {
                let [x, y] = mesh.coord(i);
                (x, y)
            })
            .collect()
    }

    /// The control from `control.*` keys, read from `control.file` if set.
    fn control(&self) -> PyResult<Frames> {
        match &self.inner.control.file {
            Some(path) => read_control_csv(Path::new(path), self.inner.mesh(), self.inner.steps)
                .map(|u| frames(&u))
                .map_err(|e| PyValueError::new_err(e.to_string())),
            None => Ok(frames(&self.inner.profile_control())),
        }
    }

    /// Projection onto the admissible set of `admissible.*`.
    fn project(&self, v: Frames) -> PyResult<Frames> {
        let v = trajectory(v, "v")?;
        let set = self.inner.admissible();
        project_admissible(&v, &set, self.inner.optimizer.max_sweeps)
            .map(|p| frames(&p))
            .map_err(solver_err)
    }
}

/// Forward solution of the state system.
#[pyclass(name = "State", frozen)]
struct PyState {
    inner: StateSolution,
}

#[pymethods]
impl PyState {
    #[getter]
    fn rho(&self) -> Frames {
        frames(&self.inner.rho)
    }

    #[getter]
    fn mu(&self) -> Frames {
        frames(&self.inner.mu)
    }

    #[getter]
    fn control(&self) -> Frames {
        frames(&self.inner.control)
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps()
    }

    #[getter]
    fn refinements(&self) -> usize {
        self.inner.refinements
    }

    /// Per-step `(newton_iters, newton_residual, energy_residual)`.
    fn step_reports(&self) -> Vec<(usize, f64, f64)> {
        self.inner
            .reports
            .iter()
            .map(|r| (r.newton_iters, r.newton_residual, r.energy_residual))
            .collect()
    }
}

fn control_or_default(config: &PyConfig, u: Option<Frames>) -> PyResult<Trajectory> {
    match u {
        Some(u) => trajectory(u, "u"),
        None => trajectory(config.control()?, "u"),
    }
}

/// Solves the state system for `u` (defaults to the configured control).
#[pyfunction]
#[pyo3(signature = (config, u = None))]
fn simulate(py: Python<'_>, config: &PyConfig, u: Option<Frames>) -> PyResult<PyState> {
    let u = control_or_default(config, u)?;
    let cfg = &config.inner;
    let (params, spec, init) = (cfg.params(), cfg.potential(), cfg.initial());
    py.detach(|| solve_state(&params, &spec, &init, &u))
        .map(|inner| PyState { inner })
        .map_err(solver_err)
}

/// Tangent `(xi, eta)` of the forward map at `state` in direction `h`.
#[pyfunction]
fn tangent(config: &PyConfig, state: &PyState, h: Frames) -> PyResult<(Frames, Frames)> {
    let h = trajectory(h, "h")?;
    let t = solve_tangent(&state.inner, &config.inner.potential(), &h).map_err(solver_err)?;
    Ok((frames(&t.xi), frames(&t.eta)))
}

/// Adjoint multipliers and reduced gradient as a dict with `p`, `q`, `gradient`.
#[pyfunction]
fn adjoint<'py>(py: Python<'py>, config: &PyConfig, state: &PyState) -> PyResult<Bound<'py, PyDict>> {
    let a = solve_adjoint(&state.inner, &config.inner.potential(), &config.inner.cost()).map_err(solver_err)?;
    let out = PyDict::new(py);
    out.set_item("p", frames(&a.p))?;
    out.set_item("q", frames(&a.q))?;
    out.set_item("gradient", frames(&a.gradient))?;
    Ok(out)
}

/// Cost terms of `state` as a dict with `terminal`, `control`, `tracking`, `total`.
#[pyfunction]
fn cost<'py>(py: Python<'py>, config: &PyConfig, state: &PyState) -> PyResult<Bound<'py, PyDict>> {
    let c = config.inner.cost();
    c.validate(&state.inner).map_err(solver_err)?;
    let b = cost_eval(&state.inner, &state.inner.control, &c);
    let out = PyDict::new(py);
    out.set_item("terminal", b.terminal)?;
    out.set_item("control", b.control)?;
    out.set_item("tracking", b.tracking)?;
    out.set_item("total", b.total)?;
    Ok(out)
}

/// `(lhs, rhs, residual)` of the tangent/adjoint duality identity in direction `h`.
#[pyfunction]
fn duality(config: &PyConfig, state: &PyState, h: Frames) -> PyResult<(f64, f64, f64)> {
    let h = trajectory(h, "h")?;
    let (spec, c) = (config.inner.potential(), config.inner.cost());
    let t = solve_tangent(&state.inner, &spec, &h).map_err(solver_err)?;
    let a = solve_adjoint(&state.inner, &spec, &c).map_err(solver_err)?;
    let r = duality_check(&state.inner, &t, &a, &c);
    Ok((r.lhs, r.rhs, r.residual))
}

/// Stationarity measure of `u` against the admissible box.
#[pyfunction]
fn stationarity(config: &PyConfig, state: &PyState) -> PyResult<f64> {
    let a = solve_adjoint(&state.inner, &config.inner.potential(), &config.inner.cost()).map_err(solver_err)?;
    Ok(vi_residual(
        &state.inner.control,
        &a.gradient,
        &config.inner.admissible(),
    ))
}

/// Rows `(epsilon, remainder, order)` of the Taylor remainder test.
#[pyfunction]
fn taylor_test(
    py: Python<'_>,
    config: &PyConfig,
    u: Frames,
    h: Frames,
    scales: Vec<f64>,
) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
    let (u, h) = (trajectory(u, "u")?, trajectory(h, "h")?);
    let cfg = &config.inner;
    let (params, spec, init) = (cfg.params(), cfg.potential(), cfg.initial());
    let rows = py
        .detach(|| taylor_remainder_test(&params, &spec, &init, &u, &h, &scales))
        .map_err(solver_err)?;
    Ok(rows.iter().map(|r| (r.epsilon, r.remainder, r.order)).collect())
}

/// Projected-gradient optimization; returns `(u, trace, converged)` where each
/// trace row is a dict. Line-search failure raises `SolverFailure`.
#[pyfunction]
#[pyo3(signature = (config, u0 = None))]
fn optimize<'py>(
    py: Python<'py>,
    config: &PyConfig,
    u0: Option<Frames>,
) -> PyResult<(Frames, Vec<Bound<'py, PyDict>>, bool)> {
    let u0 = u0.map(|u| trajectory(u, "u0")).transpose()?;
    let cfg = &config.inner;
    let (params, spec, init, c, set) = (
        cfg.params(),
        cfg.potential(),
        cfg.initial(),
        cfg.cost(),
        cfg.admissible(),
    );
    let (u, trace) = py
        .detach(|| run_optimize(&params, &spec, &init, &c, &set, &cfg.optimizer, u0.as_ref()))
        .map_err(|f| solver_err(f.error))?;
    let rows = trace
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("iteration", r.iteration)?;
            d.set_item("cost", r.cost.total)?;
            d.set_item("vi_residual", r.vi_residual)?;
            d.set_item("step", r.step)?;
            d.set_item("active_fraction", r.active_fraction)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((frames(&u), rows, trace.converged))
}

/// Discrete a priori norms as `(name, value)` pairs.
#[pyfunction]
fn norm_table(state: &PyState) -> Vec<(&'static str, f64)> {
    core_norm_table(&state.inner)
        .iter()
        .map(|e| (e.name, e.value))
        .collect()
}

/// `(sup_mu, min_rho, max_rho, bounded)` for a solved state.
#[pyfunction]
fn bounds(config: &PyConfig, state: &PyState) -> (f64, f64, f64, bool) {
    let r = boundedness_check(&state.inner, &config.inner.initial(), &state.inner.control);
    (r.sup_mu, r.min_rho, r.max_rho, r.bounded)
}

#[pymodule]
fn phasefield(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverFailure", m.py().get_type::<SolverFailure>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(tangent, m)?)?;
    m.add_function(wrap_pyfunction!(adjoint, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(duality, m)?)?;
    m.add_function(wrap_pyfunction!(stationarity, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_test, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(norm_table, m)?)?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    Ok(())
}
