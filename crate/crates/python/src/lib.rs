//! Python bindings. Reports come back as plain dicts, built from the same
//! JSON the command line prints.

use bernoulli_phase::classify;
use bernoulli_phase::measure;
use bernoulli_phase::simulate::{self, PercolationOptions, DEFAULT_EPSILON};
use bernoulli_phase::{DiscreteMeasure as CoreMeasure, Error, FreeWord, MeasurePair as CorePair, TreeSpec as CoreTree};
use pyo3::exceptions::{PyLookupError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::NoBlockLength(_) => PyLookupError::new_err(e.to_string()),
        Error::AtomBudgetExceeded { .. } | Error::DepthBudget { .. } | Error::Overflow(_) | Error::ThreadPool(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = bernoulli_phase::json::to_json_string(value);
    py.import("json")?.call_method1("loads", (text,))
}

/// Finite probability vector with strictly positive weights summing to 1.
#[pyclass(name = "DiscreteMeasure", frozen)]
struct PyMeasure(CoreMeasure);

#[pymethods]
impl PyMeasure {
    #[new]
    fn new(weights: Vec<f64>) -> PyResult<Self> {
        CoreMeasure::new(weights).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn uniform(n: usize) -> PyResult<Self> {
        CoreMeasure::uniform(n).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("DiscreteMeasure({:?})", self.0.weights())
    }
}

/// Edge marginals `(μ₀, μ₁)`.
#[pyclass(name = "MeasurePair", frozen)]
struct PyPair(CorePair);

#[pymethods]
impl PyPair {
    #[new]
    fn new(mu0: Vec<f64>, mu1: Vec<f64>) -> PyResult<Self> {
        CorePair::from_weights(mu0, mu1).map(Self).map_err(to_py_err)
    }

    #[getter]
    fn mu0(&self) -> PyMeasure {
        PyMeasure(self.0.mu0().clone())
    }

    #[getter]
    fn mu1(&self) -> PyMeasure {
        PyMeasure(self.0.mu1().clone())
    }

    #[getter]
    fn log_ratios(&self) -> Vec<f64> {
        self.0.log_ratios().to_vec()
    }

    fn affinity(&self) -> f64 {
        self.0.affinity()
    }

    fn hellinger_sq(&self) -> f64 {
        self.0.hellinger_sq()
    }

    fn mixed(&self, nu: &PyMeasure, t: f64) -> PyResult<Self> {
        self.0.mixed(&nu.0, t).map(Self).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!("MeasurePair({:?}, {:?})", self.0.mu0().weights(), self.0.mu1().weights())
    }
}

/// `regular:q` or `cayley:d`.
#[pyclass(name = "TreeSpec", frozen)]
struct PyTree(CoreTree);

#[pymethods]
impl PyTree {
    #[new]
    fn new(spec: &str) -> PyResult<Self> {
        spec.parse().map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn regular(q: u32) -> PyResult<Self> {
        CoreTree::regular(q).map(Self).map_err(to_py_err)
    }

    #[staticmethod]
    fn cayley(d: u32) -> PyResult<Self> {
        CoreTree::cayley(d).map(Self).map_err(to_py_err)
    }

    fn degree(&self) -> u32 {
        self.0.degree()
    }

    fn branching(&self) -> u32 {
        self.0.branching()
    }

    fn sphere_size(&self, n: usize) -> PyResult<u64> {
        self.0.sphere_size(n).map_err(to_py_err)
    }

    fn poincare_exponent(&self) -> f64 {
        self.0.poincare_exponent()
    }

    fn distance(&self, v: &str, w: &str) -> PyResult<usize> {
        let v = self.0.parse_vertex(v).map_err(to_py_err)?;
        let w = self.0.parse_vertex(w).map_err(to_py_err)?;
        Ok(self.0.distance(&v, &w))
    }

    fn __repr__(&self) -> String {
        format!("TreeSpec('{}')", self.0)
    }
}

#[pyfunction]
fn hellinger_sq(mu: &PyMeasure, nu: &PyMeasure) -> PyResult<f64> {
    measure::hellinger_sq(&mu.0, &nu.0).map_err(to_py_err)
}

#[pyfunction]
fn affinity(mu: &PyMeasure, nu: &PyMeasure) -> PyResult<f64> {
    measure::affinity(&mu.0, &nu.0).map_err(to_py_err)
}

#[pyfunction]
fn mix(nu: &PyMeasure, mu: &PyMeasure, t: f64) -> PyResult<PyMeasure> {
    measure::mix(&nu.0, &mu.0, t).map(PyMeasure).map_err(to_py_err)
}

/// `(t_star, value)` minimizing the moment generating function of `Z`.
#[pyfunction]
fn chernoff_min(pair: &PyPair) -> PyResult<(f64, f64)> {
    let m = measure::chernoff_min(&pair.0).map_err(to_py_err)?;
    Ok((m.t_star, m.value))
}

#[pyfunction]
#[pyo3(signature = (pair, generators=None))]
fn essential_range_group<'py>(
    py: Python<'py>,
    pair: &PyPair,
    generators: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &measure::essential_range_group(&pair.0, generators.as_deref()))
}

#[pyfunction]
#[pyo3(signature = (delta, pair, regular_full_orbit=false))]
fn classify_tree_action<'py>(
    py: Python<'py>,
    delta: f64,
    pair: &PyPair,
    regular_full_orbit: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let c = classify::classify_tree_action(delta, &pair.0, regular_full_orbit).map_err(to_py_err)?;
    to_dict(py, &c)
}

#[pyfunction]
#[pyo3(signature = (pair, generators=None))]
fn krieger_type<'py>(py: Python<'py>, pair: &PyPair, generators: Option<Vec<f64>>) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &classify::krieger_type(&pair.0, generators.as_deref()))
}

#[pyfunction]
fn spectral_radius_free<'py>(py: Python<'py>, d: u32, pair: &PyPair) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &classify::spectral_radius_free(d, &pair.0).map_err(to_py_err)?)
}

#[pyfunction]
#[pyo3(signature = (delta, nu, pair, grid_points=1001, bisect_tol=1e-12))]
fn phase_scan<'py>(
    py: Python<'py>,
    delta: f64,
    nu: &PyMeasure,
    pair: &PyPair,
    grid_points: usize,
    bisect_tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let scan = classify::phase_scan(delta, &nu.0, &pair.0, grid_points, bisect_tol).map_err(to_py_err)?;
    to_dict(py, &scan)
}

/// Raises `LookupError` when no block length exists.
#[pyfunction]
#[pyo3(signature = (pair, delta, m_max=64))]
fn find_block_length(pair: &PyPair, delta: f64, m_max: usize) -> PyResult<usize> {
    simulate::find_block_length(&pair.0, delta, m_max).map_err(to_py_err)
}

#[pyfunction]
#[pyo3(signature = (tree, pair, m=1, mc_trials=None, mc_depth=14, seed=0, workers=0))]
#[allow(clippy::too_many_arguments)]
fn percolation_report<'py>(
    py: Python<'py>,
    tree: &PyTree,
    pair: &PyPair,
    m: usize,
    mc_trials: Option<usize>,
    mc_depth: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let options = PercolationOptions {
        mc_trials,
        mc_depth,
        seed,
        workers,
    };
    let report = py
        .detach(|| simulate::percolation_report(&tree.0, &pair.0, m, options))
        .map_err(to_py_err)?;
    to_dict(py, &report)
}

#[pyfunction]
#[pyo3(signature = (tree, pair, depth, trials=200, seed=0, epsilon=DEFAULT_EPSILON, workers=0))]
#[allow(clippy::too_many_arguments)]
fn recurrence_diagnostic<'py>(
    py: Python<'py>,
    tree: &PyTree,
    pair: &PyPair,
    depth: usize,
    trials: usize,
    seed: u64,
    epsilon: f64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let d = py
        .detach(|| simulate::recurrence_diagnostic(&tree.0, &pair.0, depth, trials, seed, epsilon, workers))
        .map_err(to_py_err)?;
    to_dict(py, &d)
}

#[pyfunction]
#[pyo3(signature = (tree, pair, depth, trials=10_000, seed=0, workers=0))]
fn martingale_stats<'py>(
    py: Python<'py>,
    tree: &PyTree,
    pair: &PyPair,
    depth: usize,
    trials: usize,
    seed: u64,
    workers: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let s = py
        .detach(|| simulate::martingale_stats(&tree.0, &pair.0, depth, trials, seed, workers))
        .map_err(to_py_err)?;
    to_dict(py, &s)
}

/// `(mean, std_err)` of `√(dgμ/dμ)` for the free-group word `word`.
#[pyfunction]
#[pyo3(signature = (tree, pair, word, trials=10_000, seed=0, workers=0))]
fn rn_sqrt_mean(
    py: Python<'_>,
    tree: &PyTree,
    pair: &PyPair,
    word: &str,
    trials: usize,
    seed: u64,
    workers: usize,
) -> PyResult<(f64, f64)> {
    let d = match tree.0 {
        CoreTree::Cayley { d } => d,
        other => return Err(PyValueError::new_err(format!("word needs a cayley tree, got {other}"))),
    };
    let g = FreeWord::parse(d, word).map_err(to_py_err)?;
    let est = py
        .detach(|| simulate::rn_sqrt_mean(&tree.0, &pair.0, &g, trials, seed, workers))
        .map_err(to_py_err)?;
    Ok((est.mean, est.std_err))
}

#[pyfunction]
#[pyo3(signature = (nu, mu, t, samples=100_000, seed=0))]
fn coupling_pushforward_test<'py>(
    py: Python<'py>,
    nu: &PyMeasure,
    mu: &PyMeasure,
    t: f64,
    samples: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = py
        .detach(|| simulate::coupling_pushforward_test(&nu.0, &mu.0, t, samples, seed))
        .map_err(to_py_err)?;
    to_dict(py, &r)
}

#[pyfunction]
fn ks_family(t: f64, n: i64) -> f64 {
    simulate::ks_family(t, n)
}

#[pymodule]
#[pyo3(name = "bernoulli_phase")]
pub fn bernoulli_phase_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMeasure>()?;
    m.add_class::<PyPair>()?;
    m.add_class::<PyTree>()?;
    m.add_function(wrap_pyfunction!(hellinger_sq, m)?)?;
    m.add_function(wrap_pyfunction!(affinity, m)?)?;
    m.add_function(wrap_pyfunction!(mix, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_min, m)?)?;
    m.add_function(wrap_pyfunction!(essential_range_group, m)?)?;
    m.add_function(wrap_pyfunction!(classify_tree_action, m)?)?;
    m.add_function(wrap_pyfunction!(krieger_type, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_radius_free, m)?)?;
    m.add_function(wrap_pyfunction!(phase_scan, m)?)?;
    m.add_function(wrap_pyfunction!(find_block_length, m)?)?;
    m.add_function(wrap_pyfunction!(percolation_report, m)?)?;
    m.add_function(wrap_pyfunction!(recurrence_diagnostic, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_stats, m)?)?;
    m.add_function(wrap_pyfunction!(rn_sqrt_mean, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_pushforward_test, m)?)?;
    m.add_function(wrap_pyfunction!(ks_family, m)?)?;
    Ok(())
}
