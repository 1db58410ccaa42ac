//! Python bindings. Structured results come back as plain dicts.

use std::f64::consts::TAU;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;
use sideband_core::estimation::fit_lorentzian;
use sideband_core::experiment::{self, SweepRecord};
use sideband_core::io;
use sideband_core::physics;
use sideband_core::spectra::SpectrumTrace;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Thermal occupancy of a mode at `frequency_hz` in a bath at `temperature_k`.
#[pyfunction]
fn bose_occupancy(frequency_hz: f64, temperature_k: f64) -> f64 {
    physics::bose_occupancy(TAU * frequency_hz, temperature_k)
}

/// Bath temperature giving occupancy `n` at `frequency_hz`.
#[pyfunction]
fn bath_temperature(frequency_hz: f64, n: f64) -> f64 {
    physics::bath_temperature(TAU * frequency_hz, n)
}

/// A spectrum on a uniform frequency grid.
#[pyclass(name = "Trace", module = "sideband", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTrace {
    inner: SpectrumTrace,
}

#[pymethods]
impl PyTrace {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let inner = io::read_trace(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        io::write_trace(&path, &self.inner).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies()
    }

    #[getter]
    fn psd(&self) -> Vec<f64> {
        self.inner.psd.clone()
    }

    #[getter]
    fn units(&self) -> &'static str {
        self.inner.meta.units.as_str()
    }

    #[getter]
    fn detuning_hz(&self) -> f64 {
        self.inner.meta.detuning_hz
    }

    fn integral(&self) -> f64 {
        self.inner.integral()
    }

    /// Lorentzian-plus-offset fit; `window` is an optional `(lo_hz, hi_hz)`.
    #[pyo3(signature = (window=None))]
    fn fit<'py>(&self, py: Python<'py>, window: Option<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
        let fit = fit_lorentzian(&self.inner, window).map_err(value_err)?;
        to_dict(py, &fit)
    }

    fn __len__(&self) -> usize {
        self.inner.psd.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Trace({} points, {:.6e}..{:.6e} Hz, {})",
            self.inner.psd.len(),
            self.inner.grid.start,
            self.inner.grid.stop,
            self.inner.meta.units.as_str()
        )
    }
}

/// Occupancy from the traces at both read-out detunings.
#[pyfunction]
#[pyo3(signature = (plus, minus, power_mismatch_rel95=0.02))]
fn estimate<'py>(
    py: Python<'py>,
    plus: &PyTrace,
    minus: &PyTrace,
    power_mismatch_rel95: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let analysis = experiment::analyze_traces(&plus.inner, &minus.inner, power_mismatch_rel95);
    if let Err(e) = analysis.fit_plus {
        return Err(value_err(format!("plus: {e}")));
    }
    if let Err(e) = analysis.fit_minus {
        return Err(value_err(format!("minus: {e}")));
    }
    match analysis.estimate {
        Some(Ok(e)) => to_dict(py, &e),
        Some(Err(e)) => Err(value_err(e)),
        None => unreachable!("both fits succeeded"),
    }
}

/// A validated simulation scenario.
#[pyclass(name = "Scenario", module = "sideband", skip_from_py_object)]
struct PyScenario {
    inner: experiment::Scenario,
}

#[pymethods]
impl PyScenario {
    /// The bundled default scenario.
    #[new]
    fn new() -> Self {
        Self {
            inner: experiment::Scenario::default_device(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let inner = experiment::Scenario::from_toml_str(text).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = experiment::Scenario::load(&path).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sweep(&self) -> Vec<f64> {
        self.inner.sweep.clone()
    }

    #[setter]
    fn set_sweep(&mut self, values: Vec<f64>) -> PyResult<()> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(value_err("sweep values must be finite and >= 0"));
        }
        self.inner.sweep = values;
        Ok(())
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.noise.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.noise.seed = seed;
    }

    #[getter]
    fn noise_enabled(&self) -> bool {
        self.inner.noise.enabled
    }

    #[setter]
    fn set_noise_enabled(&mut self, enabled: bool) {
        self.inner.noise.enabled = enabled;
    }

    #[getter]
    fn n_averages(&self) -> u32 {
        self.inner.noise.n_averages
    }

    #[setter]
    fn set_n_averages(&mut self, n: u32) -> PyResult<()> {
        if n == 0 {
            return Err(value_err("n_averages must be at least 1"));
        }
        self.inner.noise.n_averages = n;
        Ok(())
    }

    /// Model values at cooling photon number `n_c`.
    fn point_truth<'py>(&self, py: Python<'py>, n_c: f64) -> PyResult<Bound<'py, PyAny>> {
        let t = experiment::point_truth(&self.inner, n_c).map_err(value_err)?;
        to_dict(py, &t)
    }

    /// The `(plus, minus)` analyzer traces for sweep point `index`.
    fn simulate(&self, index: usize, n_c: f64) -> PyResult<(PyTrace, PyTrace)> {
        let sim = experiment::simulate_point(&self.inner, index, n_c).map_err(value_err)?;
        Ok((PyTrace { inner: sim.plus }, PyTrace { inner: sim.minus }))
    }

    fn run_point<'py>(
        &self,
        py: Python<'py>,
        index: usize,
        n_c: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let r = py
            .detach(|| experiment::run_point(&self.inner, index, n_c))
            .map_err(value_err)?;
        to_dict(py, &r)
    }

    /// Runs the sweep; returns one record dict per point.
    fn run_sweep<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let result = py
            .detach(|| experiment::run_sweep(&self.inner))
            .map_err(value_err)?;
        result.records.iter().map(|r| to_dict(py, r)).collect()
    }

    /// Runs the sweep and writes `records.csv` plus the report tables into `out_dir`.
    fn write_sweep(&self, py: Python<'_>, out_dir: PathBuf) -> PyResult<usize> {
        let result = py
            .detach(|| experiment::run_sweep(&self.inner))
            .map_err(value_err)?;
        let records: &[SweepRecord] = &result.records;
        io::write_csv(&out_dir.join("records.csv"), records)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        experiment::report(records)
            .write(&out_dir)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(records.len())
    }
}

#[pymodule]
fn sideband(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bose_occupancy, m)?)?;
    m.add_function(wrap_pyfunction!(bath_temperature, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyScenario>()?;
    Ok(())
}
