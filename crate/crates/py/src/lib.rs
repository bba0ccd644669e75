//! Python bindings. Structured results are returned as plain dicts and lists.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use fxts_overtake::config::parse_config;
use fxts_overtake::experiments::bounds_report;
use fxts_overtake::fxts::{self, K2Variant, OracleOptions, DEFAULT_MARGIN};
use fxts_overtake::qp::{self, QpProblem, QpStatus};
use fxts_overtake::scenario;
use fxts_overtake::vehicle::{self, ControlInput, Integrator, VehicleState};
use fxts_overtake::Error;

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {e}", e.kind());
    match e {
        Error::Timeout { .. } | Error::Io(_) => PyRuntimeError::new_err(msg),
        _ => PyValueError::new_err(msg),
    }
}

/// Converts any serializable value through the `json` module.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_variant(name: &str) -> PyResult<K2Variant> {
    match name {
        "lemma" => Ok(K2Variant::LemmaK2),
        "theorem" => Ok(K2Variant::TheoremK2),
        other => Err(PyValueError::new_err(format!(
            "variant must be 'lemma' or 'theorem', got {other:?}"
        ))),
    }
}

/// Coefficients of `dV/dt <= -c1 V^(1+1/mu) - c2 V^(1-1/mu) + c3`.
#[pyclass(name = "FxtsParams", frozen)]
struct PyFxtsParams {
    inner: fxts::FxtsParams,
}

#[pymethods]
impl PyFxtsParams {
    #[new]
    #[pyo3(signature = (c1, c2, c3, mu, k = DEFAULT_MARGIN))]
    fn new(c1: f64, c2: f64, c3: f64, mu: f64, k: f64) -> PyResult<Self> {
        let inner = fxts::FxtsParams::with_margin(c1, c2, c3, mu, k).map_err(to_py)?;
        Ok(PyFxtsParams { inner })
    }

    fn regime(&self) -> PyResult<String> {
        let r = fxts::classify_regime(&self.inner).map_err(to_py)?;
        Ok(format!("{r:?}"))
    }

    fn domain_bound(&self) -> PyResult<f64> {
        fxts::domain_bound(&self.inner).map_err(to_py)
    }

    /// Returns `(value, valid)`.
    #[pyo3(signature = (variant = "lemma"))]
    fn settling_time_bound(&self, variant: &str) -> PyResult<(f64, bool)> {
        let tb = fxts::settling_time_bound(&self.inner, parse_variant(variant)?).map_err(to_py)?;
        Ok((tb.value, tb.valid))
    }

    #[pyo3(signature = (v0, dt = 1e-4, horizon = 1e3))]
    fn numeric_settling_time(&self, v0: f64, dt: f64, horizon: f64) -> PyResult<f64> {
        let opts = OracleOptions {
            dt,
            horizon,
            ..OracleOptions::default()
        };
        fxts::numeric_settling_time(&self.inner, v0, &opts).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "FxtsParams(c1={}, c2={}, c3={}, mu={}, k={})",
            p.c1, p.c2, p.c3, p.mu, p.k
        )
    }
}

/// Bound, domain level and oracle time in one dict.
#[pyfunction]
#[pyo3(signature = (c1, c2, c3, mu, k = DEFAULT_MARGIN, variant = "lemma", v0 = 1e3))]
fn bounds<'py>(
    py: Python<'py>,
    c1: f64,
    c2: f64,
    c3: f64,
    mu: f64,
    k: f64,
    variant: &str,
    v0: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = fxts::FxtsParams::with_margin(c1, c2, c3, mu, k).map_err(to_py)?;
    let opts = OracleOptions {
        horizon: 1e4,
        ..OracleOptions::default()
    };
    let r = bounds_report(&p, parse_variant(variant)?, v0, &opts).map_err(to_py)?;
    to_object(py, &r)
}

fn matrix(rows: &[Vec<f64>], cols: usize, name: &str) -> PyResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!(
            "every row of {name} must have {cols} entries"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Solves `min 1/2 z'Pz + q'z  s.t.  Az <= b`.
#[pyfunction]
#[pyo3(signature = (p, q, a = Vec::new(), b = Vec::new()))]
fn solve_qp<'py>(
    py: Python<'py>,
    p: Vec<Vec<f64>>,
    q: Vec<f64>,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let n = q.len();
    let prob = QpProblem::new(
        matrix(&p, n, "P")?,
        DVector::from_vec(q),
        matrix(&a, n, "A")?,
        DVector::from_vec(b),
    )
    .map_err(to_py)?;
    let sol = qp::solve_qp(&prob).map_err(to_py)?;
    let status = match sol.status {
        QpStatus::Optimal => "optimal",
        QpStatus::Infeasible => "infeasible",
        QpStatus::Degenerate => "degenerate",
    };
    let out = serde_json::json!({
        "z": sol.z.as_slice(),
        "lambda": sol.lambda.as_slice(),
        "status": status,
        "objective": sol.objective,
        "iterations": sol.iterations,
    });
    to_object(py, &out)
}

/// One integration step of the kinematic bicycle model.
#[pyfunction]
#[pyo3(signature = (state, u, dt = 1e-3, phi = [0.0; 4], integrator = "euler"))]
fn vehicle_step(state: [f64; 4], u: [f64; 2], dt: f64, phi: [f64; 4], integrator: &str) -> PyResult<[f64; 4]> {
    let integrator = match integrator {
        "euler" => Integrator::Euler,
        "rk4" => Integrator::Rk4,
        other => {
            return Err(PyValueError::new_err(format!(
                "integrator must be 'euler' or 'rk4', got {other:?}"
            )))
        }
    };
    let q = VehicleState::from_array(state);
    let u = ControlInput {
        omega: u[0],
        a: u[1],
    };
    Ok(vehicle::step_with(integrator, &q, u, &phi, dt).to_array())
}

/// Full default configuration as a JSON string.
#[pyfunction]
fn default_config() -> String {
    fxts_overtake::config::write_config(&scenario::ScenarioConfig::default())
}

/// Runs one episode and returns its summary. `config` is a JSON document;
/// omitted fields take their defaults.
#[pyfunction]
#[pyo3(signature = (config = "{}", seed = None))]
fn run_episode<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = parse_config(config).map_err(to_py)?;
    if let Some(s) = seed {
        cfg.reseed(s);
    }
    let log = py.detach(|| scenario::run_episode(&cfg)).map_err(to_py)?;
    to_object(py, &log.summary)
}

#[pymodule]
fn fxts_overtake_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFxtsParams>()?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(vehicle_step, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
