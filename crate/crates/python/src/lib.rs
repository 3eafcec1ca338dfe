//! Python bindings for the `memqkd` key-rate simulator.
//!
//! Exposes the protocol configuration, single-point and curve evaluation,
//! region labeling, the cavity model and the Monte Carlo node simulation.
//! Every library error is raised as `ValueError`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use memqkd::config;
use memqkd::device_model;
use memqkd::montecarlo::{self, AnalyticReference};
use memqkd::protocols::{self, NodeModel, Protocol};

fn py_err(e: memqkd::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_protocol(name: &str) -> PyResult<Protocol> {
    name.parse::<Protocol>().map_err(py_err)
}

/// Device, link and protocol parameters.
#[pyclass(name = "ProtocolConfig", from_py_object)]
#[derive(Clone, Default)]
pub struct PyProtocolConfig {
    inner: memqkd::ProtocolConfig,
}

#[pymethods]
impl PyProtocolConfig {
    /// Default parameters.
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Builds a configuration from `key = value` lines.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let parsed = config::parse_config(text).map_err(py_err)?;
        Ok(PyProtocolConfig {
            inner: parsed.protocol,
        })
    }

    /// Configuration in the file format accepted by `from_text`.
    fn render(&self) -> String {
        config::render_protocol(&self.inner)
    }

    /// Short hash identifying the parameter set.
    fn digest(&self) -> String {
        config::digest(&self.inner)
    }

    #[getter]
    fn t2(&self) -> f64 {
        self.inner.device.t2
    }

    #[setter]
    fn set_t2(&mut self, value: f64) {
        self.inner.device.t2 = value;
    }

    #[getter]
    fn tau_pi(&self) -> f64 {
        self.inner.device.tau_pi
    }

    #[setter]
    fn set_tau_pi(&mut self, value: f64) {
        self.inner.device.tau_pi = value;
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.link.alpha
    }

    #[setter]
    fn set_alpha(&mut self, value: f64) {
        self.inner.link.alpha = value;
    }

    #[getter]
    fn pipelining(&self) -> bool {
        self.inner.pipelining
    }

    #[setter]
    fn set_pipelining(&mut self, value: bool) {
        self.inner.pipelining = value;
    }

    #[getter]
    fn memory_cutoff(&self) -> Option<f64> {
        self.inner.memory_cutoff
    }

    #[setter]
    fn set_memory_cutoff(&mut self, value: Option<f64>) {
        self.inner.memory_cutoff = value;
    }

    #[getter]
    fn source_rate(&self) -> Option<f64> {
        self.inner.source_rate
    }

    #[setter]
    fn set_source_rate(&mut self, value: Option<f64>) {
        self.inner.source_rate = value;
    }

    /// Memory repetition rate in Hz.
    fn repetition_rate(&self) -> PyResult<f64> {
        self.inner.device.repetition_rate().map_err(py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("ProtocolConfig(digest={})", config::digest(&self.inner))
    }
}

/// One evaluated distance.
#[pyclass(name = "RatePoint", get_all, from_py_object)]
#[derive(Clone)]
pub struct PyRatePoint {
    distance_km: f64,
    skr: f64,
    yield_per_round: f64,
    qber_x: f64,
    qber_z: f64,
    cycle_time: f64,
    region: Option<String>,
}

impl From<&memqkd::RatePoint> for PyRatePoint {
    fn from(p: &memqkd::RatePoint) -> Self {
        PyRatePoint {
            distance_km: p.distance_km,
            skr: p.skr,
            yield_per_round: p.yield_per_round,
            qber_x: p.qber_x,
            qber_z: p.qber_z,
            cycle_time: p.cycle_time,
            region: p.region.map(|r| r.label().to_string()),
        }
    }
}

#[pymethods]
impl PyRatePoint {
    fn __repr__(&self) -> String {
        format!(
            "RatePoint(distance_km={}, skr={:e}, qber_x={:e}, qber_z={:e})",
            self.distance_km, self.skr, self.qber_x, self.qber_z
        )
    }
}

fn config_or_default(config: Option<PyProtocolConfig>) -> memqkd::ProtocolConfig {
    config.map(|c| c.inner).unwrap_or_default()
}

/// Key rate of `protocol` ("bb84", "mdi" or "ma_mdi") at one total distance.
#[pyfunction]
#[pyo3(signature = (protocol, distance_km, config=None))]
fn evaluate(protocol: &str, distance_km: f64, config: Option<PyProtocolConfig>) -> PyResult<PyRatePoint> {
    let p = parse_protocol(protocol)?;
    let point = protocols::evaluate(p, &config_or_default(config), distance_km).map_err(py_err)?;
    Ok(PyRatePoint::from(&point))
}

/// Key-rate curve over strictly increasing distances. Memory-assisted curves
/// with at least ten points carry region labels.
#[pyfunction]
#[pyo3(signature = (protocol, distances_km, config=None))]
fn rate_curve(protocol: &str, distances_km: Vec<f64>, config: Option<PyProtocolConfig>) -> PyResult<Vec<PyRatePoint>> {
    let p = parse_protocol(protocol)?;
    let cfg = config_or_default(config);
    let mut curve = protocols::rate_curve(p, &cfg, &distances_km).map_err(py_err)?;
    if p == Protocol::MaMdi && curve.points.len() >= 10 {
        protocols::label_regions(&mut curve, cfg.link.alpha).map_err(py_err)?;
    }
    Ok(curve.points.iter().map(PyRatePoint::from).collect())
}

/// Region boundaries `(I→II, II→III)` in km of the memory-assisted curve.
#[pyfunction]
#[pyo3(signature = (distances_km, config=None))]
fn region_boundaries(distances_km: Vec<f64>, config: Option<PyProtocolConfig>) -> PyResult<(Option<f64>, Option<f64>)> {
    let cfg = config_or_default(config);
    let curve = protocols::rate_curve(Protocol::MaMdi, &cfg, &distances_km).map_err(py_err)?;
    let report = protocols::classify_regions(&curve, cfg.link.alpha).map_err(py_err)?;
    Ok((report.boundary_i_ii, report.boundary_ii_iii))
}

/// Reflection, transmission and scattering probabilities at cooperativity `c`.
#[pyfunction]
fn cavity_response(c: f64) -> PyResult<(f64, f64, f64)> {
    let r = device_model::cavity_response(c).map_err(py_err)?;
    Ok((r.reflect, r.transmit, r.scatter))
}

/// Cooperativity from quality factor, mode volume in `(λ/n)³`, branching ratio
/// and dipole overlap.
#[pyfunction]
#[pyo3(signature = (quality_factor, mode_volume, branching_ratio, dipole_overlap=1.0))]
fn cooperativity(quality_factor: f64, mode_volume: f64, branching_ratio: f64, dipole_overlap: f64) -> PyResult<f64> {
    if mode_volume.is_nan() || mode_volume <= 0.0 {
        return Err(PyValueError::new_err("mode volume must be > 0"));
    }
    let f_se = device_model::enhancement_from_upsilon(quality_factor / mode_volume, branching_ratio, dipole_overlap);
    device_model::cooperativity(f_se).map_err(py_err)
}

/// Repetition rate `1/(2τπ + 2τp)` in Hz.
#[pyfunction]
fn repetition_rate(tau_pi: f64, tau_p: f64) -> PyResult<f64> {
    memqkd::channel::repetition_rate(tau_pi, tau_p).map_err(py_err)
}

/// Simulates the memory node at `distance_km` for every seed and compares the
/// merged counters with the analytic model. Returns a dict with the status,
/// the rendered report and the main counters.
#[pyfunction]
#[pyo3(signature = (distance_km, rounds, seeds, config=None))]
fn simulate_node<'py>(
    py: Python<'py>,
    distance_km: f64,
    rounds: u64,
    seeds: Vec<u64>,
    config: Option<PyProtocolConfig>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config_or_default(config);
    let model = NodeModel::from_config(&cfg, distance_km).map_err(py_err)?;
    let stats = py
        .detach(|| montecarlo::simulate_seeds(&model, rounds, &seeds))
        .map_err(py_err)?;
    let reference = AnalyticReference::from_model(&model).map_err(py_err)?;
    let report = montecarlo::compare_to_analytic(&stats, &reference).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("status", report.status.label())?;
    out.set_item("report", format!("{}{}", stats.render(), report.render()))?;
    out.set_item("cycles", stats.cycles)?;
    out.set_item("key_successes", stats.key_successes)?;
    out.set_item("x_sifted", stats.x_sifted)?;
    out.set_item("x_errors", stats.x_errors)?;
    out.set_item("z_sifted", stats.z_sifted)?;
    out.set_item("z_errors", stats.z_errors)?;
    out.set_item("expected_yield_per_round", reference.prediction.yield_per_round)?;
    Ok(out)
}

#[pymodule]
fn pymemqkd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProtocolConfig>()?;
    m.add_class::<PyRatePoint>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(rate_curve, m)?)?;
    m.add_function(wrap_pyfunction!(region_boundaries, m)?)?;
    m.add_function(wrap_pyfunction!(cavity_response, m)?)?;
    m.add_function(wrap_pyfunction!(cooperativity, m)?)?;
    m.add_function(wrap_pyfunction!(repetition_rate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_node, m)?)?;
    Ok(())
}
