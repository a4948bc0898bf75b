//! Python bindings: closed forms, the AoI density, and simulation estimates.

use aoi_core::estimators::{default_s_grid, ReplicationSummary};
use aoi_core::simulator::{self, SimConfig, DEFAULT_ARRIVALS, DEFAULT_WARMUP_FRACTION};
use aoi_core::{analytics, validation, AoiError, SimEstimates};
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: AoiError) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        AoiError::IndexOutOfRange { .. } => PyIndexError::new_err(msg),
        AoiError::Io(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

fn json_to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(frozen, skip_from_py_object, name = "ModelParams", module = "aoi_corr")]
struct PyModelParams(aoi_core::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(lambdas: Vec<f64>, mu: f64) -> PyResult<Self> {
        aoi_core::ModelParams::new(lambdas, mu).map(Self).map_err(to_py)
    }

    #[getter]
    fn lambdas(&self) -> Vec<f64> {
        self.0.lambdas().to_vec()
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu()
    }

    #[getter]
    fn total_rate(&self) -> f64 {
        self.0.total_rate()
    }

    #[getter]
    fn sources(&self) -> usize {
        self.0.sources()
    }

    fn valid_packet_probability(&self) -> f64 {
        self.0.valid_packet_probability()
    }

    /// Rate of valid updates from source `k` (1-based).
    fn effective_update_rate(&self, k: usize) -> PyResult<f64> {
        self.0.effective_update_rate(k).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(lambdas={:?}, mu={})", self.0.lambdas(), self.0.mu())
    }
}

#[pyclass(frozen, name = "AoiDistribution", module = "aoi_corr")]
struct PyAoiDistribution(analytics::AoiDistribution);

#[pymethods]
impl PyAoiDistribution {
    fn pdf(&self, t: f64) -> PyResult<f64> {
        self.0.pdf(t).map_err(to_py)
    }

    fn cdf(&self, t: f64) -> PyResult<f64> {
        self.0.cdf(t).map_err(to_py)
    }

    fn lst(&self, s: f64) -> PyResult<f64> {
        self.0.lst(s).map_err(to_py)
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn variance(&self) -> f64 {
        self.0.variance()
    }

    /// Decay rates (r1 ≤ r2) of the two exponential modes.
    #[getter]
    fn rates(&self) -> (f64, f64) {
        (self.0.r1, self.0.r2)
    }
}

#[pyfunction]
fn mean_aoi(params: &PyModelParams, k: usize) -> PyResult<f64> {
    analytics::mean_aoi(&params.0, k).map_err(to_py)
}

#[pyfunction]
fn var_aoi(params: &PyModelParams, k: usize) -> PyResult<f64> {
    analytics::var_aoi(&params.0, k).map_err(to_py)
}

#[pyfunction]
fn aoi_lst(params: &PyModelParams, k: usize, s: f64) -> PyResult<f64> {
    analytics::aoi_lst(&params.0, k, s).map_err(to_py)
}

#[pyfunction]
fn aoi_distribution(params: &PyModelParams, k: usize) -> PyResult<PyAoiDistribution> {
    analytics::aoi_distribution(&params.0, k).map(PyAoiDistribution).map_err(to_py)
}

/// Correlation report for two sources as a dict (rho, cov, means, variances, cross moment).
#[pyfunction]
fn correlation_coefficient<'py>(py: Python<'py>, params: &PyModelParams) -> PyResult<Bound<'py, PyAny>> {
    let report = analytics::correlation_coefficient(&params.0).map_err(to_py)?;
    json_to_py(py, &report)
}

/// Closed-form ρ for rates (λ₁, λ₂, μ).
#[pyfunction]
fn rho(lambda1: f64, lambda2: f64, mu: f64) -> PyResult<f64> {
    let p = aoi_core::ModelParams::two_source(lambda1, lambda2, mu).map_err(to_py)?;
    analytics::correlation_closed_form(&p).map_err(to_py)
}

fn summaries(py: Python<'_>, params: &PyModelParams, seed: u64, arrivals: u64, reps: usize, warmup: f64) -> PyResult<Vec<ReplicationSummary>> {
    let p = params.0.clone();
    py.detach(move || {
        let grids = default_s_grid(&p);
        let cfg = SimConfig::new(p, seed).with_arrivals(arrivals).with_warmup_fraction(warmup);
        simulator::run_replications(&cfg, reps, |path| ReplicationSummary::from_path(path, &grids))?
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(to_py)
}

/// Runs `reps` replications and returns the aggregated estimates as a dict.
#[pyfunction]
#[pyo3(signature = (params, seed, arrivals = DEFAULT_ARRIVALS, reps = 30, warmup_fraction = DEFAULT_WARMUP_FRACTION))]
fn simulate<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    seed: u64,
    arrivals: u64,
    reps: usize,
    warmup_fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let reps = summaries(py, params, seed, arrivals, reps, warmup_fraction)?;
    let est = SimEstimates::aggregate(&reps).map_err(to_py)?;
    json_to_py(py, &est)
}

/// Analytic-vs-simulated rows as a list of dicts with keys quantity, analytic, simulated, se, z.
#[pyfunction]
#[pyo3(signature = (params, seed, arrivals = DEFAULT_ARRIVALS, reps = 30, warmup_fraction = DEFAULT_WARMUP_FRACTION))]
fn validate<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    seed: u64,
    arrivals: u64,
    reps: usize,
    warmup_fraction: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let reps = summaries(py, params, seed, arrivals, reps, warmup_fraction)?;
    let rows = validation::compare(&params.0, &reps).map_err(to_py)?;
    json_to_py(py, &rows)
}

#[pymodule]
fn aoi_corr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyAoiDistribution>()?;
    m.add_function(wrap_pyfunction!(mean_aoi, m)?)?;
    m.add_function(wrap_pyfunction!(var_aoi, m)?)?;
    m.add_function(wrap_pyfunction!(aoi_lst, m)?)?;
    m.add_function(wrap_pyfunction!(aoi_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(rho, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
