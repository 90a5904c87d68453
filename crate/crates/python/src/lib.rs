//! Python bindings. Structured results come back as plain dicts and lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use subexp_lasso::complexity::{self, SparseRegime, WidthEstimate};
use subexp_lasso::distributions::{sample_inputs as core_sample_inputs, DistributionKind, DistributionSpec};
use subexp_lasso::geometry;
use subexp_lasso::harness::config;
use subexp_lasso::harness::experiment;
use subexp_lasso::models::{self, Dataset, Link};
use subexp_lasso::solver::{self, SolverConfig};

fn err(e: subexp_lasso::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, name: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(name.to_owned()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {name:?}")))
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<Dataset> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    if x.iter().any(|r| r.len() != p) {
        return Err(PyValueError::new_err("ragged design matrix"));
    }
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    Dataset::new(DMatrix::from_row_slice(n, p, &flat), DVector::from_vec(y)).map_err(err)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Convex hypothesis set.
#[pyclass(module = "subexp_lasso_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct HypothesisSet {
    inner: geometry::HypothesisSet,
}

#[pymethods]
impl HypothesisSet {
    #[staticmethod]
    fn l1_ball(radius: f64, dim: usize) -> PyResult<Self> {
        Self::checked(geometry::HypothesisSet::l1_ball(radius, dim))
    }

    #[staticmethod]
    fn l2_ball(radius: f64, center: Vec<f64>) -> PyResult<Self> {
        Self::checked(geometry::HypothesisSet::l2_ball(radius, center))
    }

    #[staticmethod]
    fn hypercube(halfwidth: f64, dim: usize) -> PyResult<Self> {
        Self::checked(geometry::HypothesisSet::hypercube(halfwidth, dim))
    }

    #[staticmethod]
    fn polytope(vertices: Vec<Vec<f64>>) -> PyResult<Self> {
        Self::checked(geometry::HypothesisSet::polytope(vertices))
    }

    #[staticmethod]
    fn lifted_psd_fro(radius: f64, side: usize) -> PyResult<Self> {
        Self::checked(geometry::HypothesisSet::lifted_psd_fro(radius, side))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn project(&self, v: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.project(&v).map_err(err)
    }

    #[pyo3(signature = (v, tol = geometry::MEMBERSHIP_TOL))]
    fn contains(&self, v: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&v, tol).map_err(err)
    }

    fn support_function(&self, z: Vec<f64>) -> PyResult<f64> {
        self.inner.support_function(&z).map_err(err)
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!("HypothesisSet({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

impl HypothesisSet {
    fn checked(inner: geometry::HypothesisSet) -> PyResult<Self> {
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }
}

/// Experiment configuration parsed from TOML.
#[pyclass(module = "subexp_lasso_py", frozen)]
struct ExperimentConfig {
    inner: config::ExperimentConfig,
    resolved: config::Resolved,
}

#[pymethods]
impl ExperimentConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Self::build(config::ExperimentConfig::from_toml_str(text).map_err(err)?)
    }

    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        Self::build(config::ExperimentConfig::from_path(&path).map_err(err)?)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn config_hash(&self) -> String {
        self.inner.config_hash()
    }

    #[getter]
    fn beta_nat(&self) -> Vec<f64> {
        self.resolved.beta_nat.clone()
    }

    #[getter]
    fn set(&self) -> HypothesisSet {
        HypothesisSet { inner: self.resolved.set.clone() }
    }

    /// Draws `(X, y)` from the configured model.
    fn sample(&self, n: usize, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
        let d = models::generate_dataset(&self.resolved.model, &self.resolved.spec, n, seed).map_err(err)?;
        Ok((rows(&d.inputs), d.outputs.iter().copied().collect()))
    }

    /// Runs the error curve; returns the records, aggregates and decay fit.
    fn run(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let cfg = self.inner.clone();
        let res = py.detach(move || experiment::run_error_curve(&cfg)).map_err(err)?;
        to_py(py, &res)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }
}

impl ExperimentConfig {
    fn build(inner: config::ExperimentConfig) -> PyResult<Self> {
        let resolved = inner.resolve().map_err(err)?;
        Ok(Self { inner, resolved })
    }
}

/// `n × dim` isotropic draws of the named law, as a list of rows.
#[pyfunction]
fn sample_inputs(kind: &str, dim: usize, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let kind: DistributionKind = parse("distribution", kind)?;
    let spec = DistributionSpec::isotropic(kind, dim);
    Ok(rows(&core_sample_inputs(&spec, n, seed).map_err(err)?))
}

/// Constrained least squares over `set`; returns the solve result as a dict.
#[pyfunction]
#[pyo3(signature = (x, y, set, max_iters = 20_000, tol = 1e-10, record_trace = false))]
fn solve_lasso(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    set: &HypothesisSet,
    max_iters: usize,
    tol: f64,
    record_trace: bool,
) -> PyResult<Py<PyAny>> {
    let data = dataset(x, y)?;
    let cfg = SolverConfig { max_iters, tol, record_trace, ..SolverConfig::default() };
    let set = set.inner.clone();
    let res = py.detach(move || solver::solve_lasso(&data, &set, &cfg)).map_err(err)?;
    to_py(py, &res)
}

#[pyfunction]
fn empirical_risk(x: Vec<Vec<f64>>, y: Vec<f64>, beta: Vec<f64>) -> PyResult<f64> {
    solver::empirical_risk(&dataset(x, y)?, &beta).map_err(err)
}

/// `(Q, M)` with `Q + M` the excess empirical risk of `beta` over `beta_nat`.
#[pyfunction]
fn excess_decomposition(x: Vec<Vec<f64>>, y: Vec<f64>, beta: Vec<f64>, beta_nat: Vec<f64>) -> PyResult<(f64, f64)> {
    solver::excess_decomposition(&dataset(x, y)?, &beta, &beta_nat).map_err(err)
}

#[pyfunction]
fn sign_invariant_error(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    solver::sign_invariant_error(&a, &b).map_err(err)
}

fn width_tuple(w: WidthEstimate) -> (f64, f64) {
    (w.mean, w.std_error)
}

/// `(mean, std_error)` of the Gaussian width.
#[pyfunction]
fn gaussian_width(set: &HypothesisSet, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
    complexity::gaussian_width(&set.inner, trials, seed).map(width_tuple).map_err(err)
}

#[pyfunction]
fn exponential_width(set: &HypothesisSet, trials: usize, seed: u64) -> PyResult<(f64, f64)> {
    complexity::exponential_width(&set.inner, trials, seed).map(width_tuple).map_err(err)
}

/// `(value, in_regime)` for one of "(2,0)", "(2,inf)", "(0,2)-m", "(0,2)-q".
#[pyfunction]
fn sparse_cone_bound(k: usize, p: usize, n: usize, regime: &str) -> PyResult<(f64, bool)> {
    let regime: SparseRegime = regime.parse().map_err(err)?;
    let b = complexity::sparse_cone_bound(k, p, n, regime).map_err(err)?;
    Ok((b.value, b.in_regime))
}

#[pyfunction]
fn dudley_sparse_bound(k: usize, p: usize, alpha: u8) -> PyResult<f64> {
    complexity::dudley_sparse_bound(k, p, alpha).map_err(err)
}

/// `(mean, std_error)` of the lifted target scale for the named link.
#[pyfunction]
fn lifted_target_scale(link: &str, mc_budget: usize, seed: u64) -> PyResult<(f64, f64)> {
    let link: Link = parse("link", link)?;
    let e = models::lifted_target_scale(link, mc_budget, seed).map_err(err)?;
    Ok((e.value, e.std_error))
}

/// `(slope, std_error)` of log y against log x.
#[pyfunction]
fn fit_log_log(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    let fit = experiment::fit_log_log(&xs, &ys).map_err(err)?;
    Ok((fit.slope, fit.std_error))
}

#[pymodule]
fn subexp_lasso_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<HypothesisSet>()?;
    m.add_class::<ExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(sample_inputs, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_risk, m)?)?;
    m.add_function(wrap_pyfunction!(excess_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(sign_invariant_error, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_width, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_width, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_cone_bound, m)?)?;
    m.add_function(wrap_pyfunction!(dudley_sparse_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lifted_target_scale, m)?)?;
    m.add_function(wrap_pyfunction!(fit_log_log, m)?)?;
    Ok(())
}
