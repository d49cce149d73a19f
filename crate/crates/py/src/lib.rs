//! Python bindings.
//!
//! Matrices are passed as lists of rows and vectors as lists of floats.
//! Column indices are zero-based here, as in the Rust API; the JSON produced
//! by `to_json` uses the one-based wire format.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sharpomp_core::instances::{gamma_upper_l2, gamma_upper_linf};
use sharpomp_core::omp::{prior_art_ric_bound, sharp_ric_bound};
use sharpomp_core as core;

create_exception!(sharpomp, SharpOmpError, PyValueError);

fn err(e: core::Error) -> PyErr {
    SharpOmpError::new_err(e.to_string())
}

fn json_err(e: serde_json::Error) -> PyErr {
    SharpOmpError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<core::DenseMatrix> {
    core::DenseMatrix::from_rows(&rows).map_err(err)
}

#[pyclass(name = "Instance", module = "sharpomp", frozen)]
struct PyInstance {
    inner: core::Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: serde_json::from_str(text).map_err(json_err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        self.inner.a.to_rows()
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.values().to_vec()
    }

    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.to_vec()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn noise_model(&self) -> &'static str {
        match self.inner.noise_model {
            core::NoiseModel::L2Bounded => "l2",
            core::NoiseModel::LInfBounded => "linf",
        }
    }

    #[getter]
    fn support(&self) -> Vec<usize> {
        self.inner.support().to_vec()
    }

    fn measurement(&self) -> PyResult<Vec<f64>> {
        self.inner.measurement().map_err(err)
    }

    fn noise_level(&self) -> PyResult<f64> {
        self.inner.noise_level().map_err(err)
    }

    fn first_correlations(&self) -> PyResult<Vec<f64>> {
        self.inner.first_correlations().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance({}x{}, K={}, noise={})",
            self.inner.a.rows(),
            self.inner.a.cols(),
            self.inner.x.sparsity(),
            self.noise_model()
        )
    }
}

#[pyclass(name = "RicReport", module = "sharpomp", frozen, get_all)]
struct PyRicReport {
    order: usize,
    delta: f64,
    witness_subset: Vec<usize>,
    witness_eigenvalue: f64,
}

impl From<core::RicReport> for PyRicReport {
    fn from(r: core::RicReport) -> Self {
        Self { order: r.order, delta: r.delta, witness_subset: r.witness_subset, witness_eigenvalue: r.witness_eigenvalue }
    }
}

#[pymethods]
impl PyRicReport {
    fn __repr__(&self) -> String {
        format!("RicReport(order={}, delta={}, witness_subset={:?})", self.order, self.delta, self.witness_subset)
    }
}

#[pyclass(name = "OmpTrace", module = "sharpomp", frozen)]
struct PyOmpTrace {
    inner: core::OmpTrace,
}

#[pymethods]
impl PyOmpTrace {
    #[getter]
    fn final_support(&self) -> Vec<usize> {
        self.inner.final_support.clone()
    }

    #[getter]
    fn final_estimate(&self) -> Vec<f64> {
        self.inner.final_estimate.values().to_vec()
    }

    #[getter]
    fn stop_reason(&self) -> &'static str {
        match self.inner.stop_reason {
            core::StopReason::RuleMet => "RuleMet",
            core::StopReason::MaxIterations => "MaxIterations",
            core::StopReason::RankDeficient => "RankDeficient",
        }
    }

    #[getter]
    fn iteration_count(&self) -> usize {
        self.inner.iteration_count()
    }

    /// Column chosen at each iteration, in order.
    #[getter]
    fn selected(&self) -> Vec<usize> {
        self.inner.iterations.iter().map(|r| r.selected_index).collect()
    }

    /// `||r||_2` after each iteration, starting with the initial residual.
    #[getter]
    fn residual_norms(&self) -> Vec<f64> {
        std::iter::once(self.inner.initial_residual_l2)
            .chain(self.inner.iterations.iter().map(|r| r.residual_l2))
            .collect()
    }

    /// `A^T r` entering each iteration.
    #[getter]
    fn correlations(&self) -> Vec<Vec<f64>> {
        self.inner.iterations.iter().map(|r| r.correlations.clone()).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(json_err)
    }

    fn __repr__(&self) -> String {
        format!("OmpTrace(final_support={:?}, stop_reason={})", self.inner.final_support, self.stop_reason())
    }
}

/// Exact restricted isometry constant of order `order`.
#[pyfunction]
#[pyo3(signature = (a, order, budget=None, threads=None))]
fn exact_ric(a: Vec<Vec<f64>>, order: usize, budget: Option<u64>, threads: Option<usize>) -> PyResult<PyRicReport> {
    let mut options = core::RicOptions { threads, ..core::RicOptions::default() };
    if let Some(b) = budget {
        options.budget = b;
    }
    Ok(core::exact_ric_with(&matrix(a)?, order, &options).map_err(err)?.into())
}

/// Runs OMP with a rule spec such as `"fixed:2"`, `"l2:0.5"`, `"corr-linf:3.1"` or `"naive-linf:1"`.
#[pyfunction]
#[pyo3(signature = (y, a, rule, max_iterations=None, tie_seed=None))]
fn run_omp(
    y: Vec<f64>,
    a: Vec<Vec<f64>>,
    rule: &str,
    max_iterations: Option<usize>,
    tie_seed: Option<u64>,
) -> PyResult<PyOmpTrace> {
    let rule: core::StoppingRule = rule.parse().map_err(err)?;
    let options = core::OmpOptions {
        max_iterations,
        tie_break: tie_seed.map_or(core::TieBreak::SmallestIndex, core::TieBreak::SeededRandom),
    };
    let inner = core::run_omp_with(&y, &matrix(a)?, rule, &options).map_err(err)?;
    Ok(PyOmpTrace { inner })
}

#[pyfunction]
#[pyo3(signature = (k, delta, epsilon, gamma=None, gamma_fraction=0.9))]
fn build_counterexample_l2(k: usize, delta: f64, epsilon: f64, gamma: Option<f64>, gamma_fraction: f64) -> PyResult<PyInstance> {
    let gamma = gamma.unwrap_or(gamma_fraction * gamma_upper_l2(k, delta, epsilon));
    let inner = core::build_counterexample_l2(k, delta, epsilon, gamma).map_err(err)?;
    Ok(PyInstance { inner })
}

#[pyfunction]
#[pyo3(signature = (k, delta, epsilon, gamma=None, gamma_fraction=0.9))]
fn build_counterexample_linf(k: usize, delta: f64, epsilon: f64, gamma: Option<f64>, gamma_fraction: f64) -> PyResult<PyInstance> {
    let gamma = gamma.unwrap_or(gamma_fraction * gamma_upper_linf(k, delta, epsilon));
    let inner = core::build_counterexample_linf(k, delta, epsilon, gamma).map_err(err)?;
    Ok(PyInstance { inner })
}

#[pyfunction]
#[pyo3(signature = (delta, a=1.5))]
fn build_example1(delta: f64, a: f64) -> PyResult<PyInstance> {
    Ok(PyInstance { inner: core::build_example1(delta, a).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (delta, a=0.9))]
fn build_example2(delta: f64, a: f64) -> PyResult<PyInstance> {
    Ok(PyInstance { inner: core::build_example2(delta, a).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (delta, a=0.9))]
fn build_example3(delta: f64, a: f64) -> PyResult<PyInstance> {
    Ok(PyInstance { inner: core::build_example3(delta, a).map_err(err)? })
}

#[pyfunction]
fn min_magnitude_threshold_l2(k: usize, delta: f64, epsilon: f64) -> PyResult<f64> {
    core::min_magnitude_threshold_l2(k, delta, epsilon).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (k, delta2, delta_k1, epsilon, unit_norm_columns=false))]
fn linf_stopping_threshold(k: usize, delta2: f64, delta_k1: f64, epsilon: f64, unit_norm_columns: bool) -> PyResult<f64> {
    core::linf_stopping_threshold(k, delta2, delta_k1, epsilon, unit_norm_columns).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (k, delta2, delta_k1, epsilon, unit_norm_columns=false))]
fn min_magnitude_threshold_linf(k: usize, delta2: f64, delta_k1: f64, epsilon: f64, unit_norm_columns: bool) -> PyResult<f64> {
    core::min_magnitude_threshold_linf(k, delta2, delta_k1, epsilon, unit_norm_columns).map_err(err)
}

/// `(ric_bound, min_magnitude)` of the earlier sufficient condition.
#[pyfunction]
fn prior_art_thresholds(k: usize, delta: f64, epsilon: f64) -> PyResult<(f64, f64)> {
    let t = core::prior_art_thresholds(k, delta, epsilon).map_err(err)?;
    Ok((t.ric_bound, t.min_magnitude))
}

#[pyfunction(name = "sharp_ric_bound")]
fn py_sharp_ric_bound(k: usize) -> f64 {
    sharp_ric_bound(k)
}

#[pyfunction(name = "prior_art_ric_bound")]
fn py_prior_art_ric_bound(k: usize) -> f64 {
    prior_art_ric_bound(k)
}

/// `(lhs_gap, rhs_bound, delta)` for the correlation gap between the
/// support and its complement, with `s` a proper subset of the support.
#[pyfunction]
fn lemma1_gap(a: Vec<Vec<f64>>, x: Vec<f64>, s: Vec<usize>) -> PyResult<(f64, f64, f64)> {
    let x = core::SparseSignal::new(x).map_err(err)?;
    let g = core::lemma1_gap(&matrix(a)?, &x, &s).map_err(err)?;
    Ok((g.lhs_gap, g.rhs_bound, g.delta))
}

#[pymodule]
fn sharpomp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SharpOmpError", m.py().get_type::<SharpOmpError>())?;
    m.add_class::<PyInstance>()?;
    m.add_class::<PyRicReport>()?;
    m.add_class::<PyOmpTrace>()?;
    m.add_function(wrap_pyfunction!(exact_ric, m)?)?;
    m.add_function(wrap_pyfunction!(run_omp, m)?)?;
    m.add_function(wrap_pyfunction!(build_counterexample_l2, m)?)?;
    m.add_function(wrap_pyfunction!(build_counterexample_linf, m)?)?;
    m.add_function(wrap_pyfunction!(build_example1, m)?)?;
    m.add_function(wrap_pyfunction!(build_example2, m)?)?;
    m.add_function(wrap_pyfunction!(build_example3, m)?)?;
    m.add_function(wrap_pyfunction!(min_magnitude_threshold_l2, m)?)?;
    m.add_function(wrap_pyfunction!(linf_stopping_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(min_magnitude_threshold_linf, m)?)?;
    m.add_function(wrap_pyfunction!(prior_art_thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(py_sharp_ric_bound, m)?)?;
    m.add_function(wrap_pyfunction!(py_prior_art_ric_bound, m)?)?;
    m.add_function(wrap_pyfunction!(lemma1_gap, m)?)?;
    Ok(())
}
