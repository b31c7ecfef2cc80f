//! Python bindings: graphon specs, kernel matrices, the p-Laplacian, both
//! time schemes, the p-limit projection and the rate tools. Grid functions
//! cross the boundary as lists of floats.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use plap::graphon::{self, DEFAULT_QUAD_POINTS, DEFAULT_SAMPLES_PER_AXIS};
use plap::harness::{self, Discretization};
use plap::integrate::{self, StepSchedule, DEFAULT_INNER_TOL};
use plap::operator;
use plap::plimit::{self, ConstraintSet};
use plap::{Error, GridFunction, PExponent};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Stability { .. } | Error::Convergence { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid(values: Vec<f64>) -> PyResult<GridFunction> {
    GridFunction::new(values).map_err(to_py)
}

fn exponent(p: f64) -> PyResult<PExponent> {
    PExponent::new(p).map_err(to_py)
}

/// Analytic kernel on the unit square, chosen from the catalog by `kind`.
#[pyclass(name = "GraphonSpec", frozen)]
struct PyGraphonSpec(plap::GraphonSpec);

#[pymethods]
impl PyGraphonSpec {
    #[new]
    #[pyo3(signature = (kind, params = None))]
    fn new(kind: &str, params: Option<Vec<f64>>) -> PyResult<Self> {
        plap::GraphonSpec::new(kind, &params.unwrap_or_default())
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &str {
        self.0.kind()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.0.params().to_vec()
    }

    fn is_indicator(&self) -> bool {
        self.0.is_indicator()
    }

    /// `K(x, y)` for `x, y` in `[0, 1]`.
    fn eval(&self, x: f64, y: f64) -> PyResult<f64> {
        self.0.eval(x, y).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("GraphonSpec({:?}, {:?})", self.0.kind(), self.0.params())
    }
}

/// Symmetric nonnegative `n x n` weight matrix.
#[pyclass(name = "KernelMatrix", frozen)]
struct PyKernelMatrix(plap::KernelMatrix);

#[pymethods]
impl PyKernelMatrix {
    /// From nested row lists.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(PyValueError::new_err("rows must form a square matrix"));
        }
        plap::KernelMatrix::new(n, rows.into_iter().flatten().collect())
            .map(Self)
            .map_err(to_py)
    }

    /// Discretize a graphon: `"average"` (cell averages), `"collocation"`
    /// (point samples) or `"simple"` (0/1 graph of cells meeting the support).
    #[staticmethod]
    #[pyo3(signature = (spec, n, method = "average", quad_points = DEFAULT_QUAD_POINTS, samples_per_axis = DEFAULT_SAMPLES_PER_AXIS))]
    fn from_graphon(
        spec: &PyGraphonSpec,
        n: usize,
        method: &str,
        quad_points: usize,
        samples_per_axis: usize,
    ) -> PyResult<Self> {
        let k = match method {
            "average" => graphon::quotient_average(&spec.0, n, quad_points),
            "collocation" => graphon::collocation_sample(&spec.0, n),
            "simple" => graphon::simple_graph(&spec.0, n, samples_per_axis).map(|m| m.to_kernel()),
            other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
        };
        k.map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.0.n() || j >= self.0.n() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.0.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        (0..self.0.n()).map(|i| self.0.row(i).to_vec()).collect()
    }

    fn __repr__(&self) -> String {
        format!("KernelMatrix(n={})", self.0.n())
    }
}

/// Knot times and states of a time-discrete run.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(plap::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn states(&self) -> Vec<Vec<f64>> {
        self.0.states.iter().map(|s| s.values().to_vec()).collect()
    }

    #[getter]
    fn scheme(&self) -> &'static str {
        match self.0.scheme {
            plap::Scheme::Forward => "forward",
            plap::Scheme::Backward => "backward",
        }
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p.get()
    }

    #[getter]
    fn truncated(&self) -> bool {
        self.0.truncated
    }

    /// Inner iterations per implicit step; empty for the explicit scheme.
    #[getter]
    fn inner_iterations(&self) -> Vec<usize> {
        self.0.solver_stats.iter().map(|s| s.iterations).collect()
    }

    fn final_state(&self) -> Vec<f64> {
        self.0.final_state().values().to_vec()
    }

    /// Piecewise-linear interpolant at `t`.
    fn linear(&self, t: f64) -> PyResult<Vec<f64>> {
        integrate::interpolate_linear(&self.0, t)
            .map(GridFunction::into_values)
            .map_err(to_py)
    }

    /// Piecewise-constant interpolant at `t` in `]0, T]`.
    fn constant(&self, t: f64) -> PyResult<Vec<f64>> {
        integrate::interpolate_constant(&self.0, t)
            .map(GridFunction::into_values)
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.times.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(scheme={:?}, p={}, n={}, steps={})",
            self.scheme(),
            self.0.p.get(),
            self.0.n(),
            self.0.steps()
        )
    }
}

/// `(Delta_p u)_i = -(1/n) sum_j k_ij phi(u_j - u_i)`.
#[pyfunction]
fn apply_plaplacian(k: &PyKernelMatrix, u: Vec<f64>, p: f64) -> PyResult<Vec<f64>> {
    operator::apply_plaplacian(&k.0, &grid(u)?, exponent(p)?)
        .map(GridFunction::into_values)
        .map_err(to_py)
}

#[pyfunction]
fn energy(k: &PyKernelMatrix, u: Vec<f64>, p: f64) -> PyResult<f64> {
    operator::energy(&k.0, &grid(u)?, exponent(p)?).map_err(to_py)
}

/// `L^q(0,1)` norm of a grid function (`q = float("inf")` for the max norm).
#[pyfunction]
fn grid_norm(u: Vec<f64>, q: f64) -> PyResult<f64> {
    operator::grid_norm(&grid(u)?, q).map_err(to_py)
}

/// Explicit scheme, with a fixed `tau` or diminishing steps from
/// `alpha_eps` and `alpha_nu`.
#[pyfunction]
#[pyo3(signature = (k, g, p, horizon, tau = None, alpha_eps = None, alpha_nu = None, max_steps = None))]
#[allow(clippy::too_many_arguments)]
fn forward_euler(
    k: &PyKernelMatrix,
    g: Vec<f64>,
    p: f64,
    horizon: f64,
    tau: Option<f64>,
    alpha_eps: Option<f64>,
    alpha_nu: Option<f64>,
    max_steps: Option<usize>,
) -> PyResult<PyTrajectory> {
    let max_steps = max_steps.unwrap_or(usize::MAX);
    let sched = match (tau, alpha_eps, alpha_nu) {
        (Some(tau), None, None) => StepSchedule {
            max_steps,
            ..StepSchedule::fixed(tau, horizon)
        },
        (None, Some(eps), Some(nu)) => StepSchedule::adaptive(eps, nu, horizon, max_steps),
        _ => {
            return Err(PyValueError::new_err(
                "give either tau or both alpha_eps and alpha_nu",
            ))
        }
    };
    integrate::forward_euler(&k.0, &grid(g)?, exponent(p)?, &sched)
        .map(PyTrajectory)
        .map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (k, g, p, tau, horizon, inner_tol = DEFAULT_INNER_TOL))]
fn backward_euler(
    k: &PyKernelMatrix,
    g: Vec<f64>,
    p: f64,
    tau: f64,
    horizon: f64,
    inner_tol: f64,
) -> PyResult<PyTrajectory> {
    integrate::backward_euler(&k.0, &grid(g)?, exponent(p)?, tau, horizon, inner_tol)
        .map(PyTrajectory)
        .map_err(to_py)
}

/// Nearest point with `|v_j - v_i| <= 1` on every edge of the kernel's support.
#[pyfunction]
#[pyo3(signature = (k, v, tol = 1e-12))]
fn project_sinf(k: &PyKernelMatrix, v: Vec<f64>, tol: f64) -> PyResult<Vec<f64>> {
    let cs = ConstraintSet::from_kernel(&k.0, 0.0).map_err(to_py)?;
    plimit::project_sinf(&cs, &grid(v)?, tol)
        .map(GridFunction::into_values)
        .map_err(to_py)
}

/// Implicit runs at each `p` against the limiting trajectory; rows of
/// `(p, tau_used, sup_deviation)` dicts.
#[pyfunction]
#[pyo3(signature = (k, g, p_list, horizon, tau = 1e-3))]
fn p_sweep<'py>(
    py: Python<'py>,
    k: &PyKernelMatrix,
    g: Vec<f64>,
    p_list: Vec<f64>,
    horizon: f64,
    tau: f64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = plimit::p_sweep(&k.0, &grid(g)?, &p_list, horizon, tau).map_err(to_py)?;
    rows.iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("p", r.p)?;
            d.set_item("tau_used", r.tau_used)?;
            d.set_item("sup_deviation", r.sup_deviation)?;
            Ok(d)
        })
        .collect()
}

/// Box-counting dimension of an indicator kernel's support boundary:
/// `(rho, [(n, boundary_cells), ...])`.
#[pyfunction]
#[pyo3(signature = (spec, levels, samples_per_axis = DEFAULT_SAMPLES_PER_AXIS))]
fn boundary_dimension(
    spec: &PyGraphonSpec,
    levels: Vec<usize>,
    samples_per_axis: usize,
) -> PyResult<(f64, Vec<(usize, usize)>)> {
    let est = graphon::boundary_dimension(&spec.0, &levels, samples_per_axis).map_err(to_py)?;
    Ok((est.rho, est.counts))
}

/// Least-squares `(slope, intercept, r_squared)` of `log err` on `log x`.
#[pyfunction]
fn fit_rate(xs: Vec<f64>, errs: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let r = harness::fit_rate(&xs, &errs).map_err(to_py)?;
    Ok((r.slope, r.intercept, r.r_squared))
}

/// Consistency sweep over `ns` against an implicit oracle at `n_ref`;
/// returns `(slope, r_squared, errors)`.
#[pyfunction]
#[pyo3(signature = (spec, ns, n_ref, tau_ref, horizon, p = 2.0, q = 2.0, initial = "smooth", method = "average"))]
#[allow(clippy::too_many_arguments)]
fn sweep_n(
    spec: &PyGraphonSpec,
    ns: Vec<usize>,
    n_ref: usize,
    tau_ref: f64,
    horizon: f64,
    p: f64,
    q: f64,
    initial: &str,
    method: &str,
) -> PyResult<(f64, f64, Vec<f64>)> {
    let g = match initial {
        "smooth" => harness::InitialDatum::Smooth,
        "step" => harness::InitialDatum::Step,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown initial datum `{other}`"
            )))
        }
    };
    let disc = match method {
        "average" => Discretization::Average,
        "collocation" => Discretization::Collocation,
        "simple" => Discretization::Simple,
        other => return Err(PyValueError::new_err(format!("unknown method `{other}`"))),
    };
    let oracle = harness::OracleConfig::new(n_ref, tau_ref);
    let r = harness::sweep_n(&spec.0, disc, &g, exponent(p)?, q, &ns, &oracle, horizon)
        .map_err(to_py)?;
    Ok((r.slope, r.r_squared, r.errs))
}

/// Runs the invariant suite; `(all_passed, table)`.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn verify(seed: u64) -> PyResult<(bool, String)> {
    let report = harness::invariant_suite(seed).map_err(to_py)?;
    Ok((report.all_pass(), report.to_table()))
}

/// Runs a TOML experiment config; `(passed, [artifact paths])`.
#[pyfunction]
fn run(config_path: PathBuf) -> PyResult<(bool, Vec<PathBuf>)> {
    let out = plap::run::run(&config_path).map_err(to_py)?;
    Ok((out.passed(), out.artifacts))
}

/// Kernel catalog as text.
#[pyfunction]
fn kernels() -> String {
    plap::run::list_kernels()
}

#[pymodule]
pub fn plap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraphonSpec>()?;
    m.add_class::<PyKernelMatrix>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(apply_plaplacian, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(grid_norm, m)?)?;
    m.add_function(wrap_pyfunction!(forward_euler, m)?)?;
    m.add_function(wrap_pyfunction!(backward_euler, m)?)?;
    m.add_function(wrap_pyfunction!(project_sinf, m)?)?;
    m.add_function(wrap_pyfunction!(p_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_n, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(kernels, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
