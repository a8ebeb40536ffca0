//! Python bindings: parameters, scenarios, simulation runs and the
//! experiment harness. Structured results come back as plain dicts.

use std::path::PathBuf;

use duolift_core::config::{self, LoadedConfig};
use duolift_core::experiments::design::{compare_designs as core_compare_designs, DesignCatalog};
use duolift_core::experiments::fall::{self as fall, FallGoal, FallTestSpec};
use duolift_core::experiments::{capability, course, stats};
use duolift_core::identify::{self, FrictionSample};
use duolift_core::model::{self, ActuatorState, DynamicsInputs};
use duolift_core::sim::{self, to_csv_string, TelemetryRecord};
use duolift_core::ActuatorParams;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

create_exception!(duolift, DuoliftError, PyException);

fn err(e: duolift_core::Error) -> PyErr {
    DuoliftError::new_err(e.to_string())
}

/// Serialize through JSON into native Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DuoliftError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Actuator parameter set.
#[pyclass(name = "Params", module = "duolift", from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: ActuatorParams,
}

#[pymethods]
impl PyParams {
    /// Bundled prototype values.
    #[staticmethod]
    fn prototype() -> Self {
        PyParams { inner: ActuatorParams::prototype() }
    }

    /// Parse a parameter file body (TOML).
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyParams { inner: config::parse_params(text).map_err(err)? })
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    #[getter]
    fn r1(&self) -> f64 {
        self.inner.r1
    }

    #[getter]
    fn r2(&self) -> f64 {
        self.inner.r2
    }

    #[getter]
    fn drum_radius(&self) -> f64 {
        self.inner.drum_radius
    }

    /// Static force limits per mode (kgf) and the back-drive force.
    fn capabilities<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &capability::capabilities(&self.inner))
    }

    /// Capabilities checked against the design targets.
    fn capability_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &capability::capability_check(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Params(r1={}, r2={}, drum_radius={})", self.inner.r1, self.inner.r2, self.inner.drum_radius)
    }
}

/// Fully merged scenario, ready to run.
#[pyclass(name = "Scenario", module = "duolift", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    loaded: LoadedConfig,
}

#[pymethods]
impl PyScenario {
    /// Layer defaults, an optional parameter file, an optional scenario file
    /// and `KEY=VALUE` overrides.
    #[staticmethod]
    #[pyo3(signature = (path=None, overrides=Vec::new(), params=None))]
    fn load(path: Option<PathBuf>, overrides: Vec<String>, params: Option<PathBuf>) -> PyResult<Self> {
        let loaded = config::load_layers(params.as_deref(), path.as_deref(), &overrides).map_err(err)?;
        Ok(PyScenario { loaded })
    }

    /// Build from scenario text instead of a file.
    #[staticmethod]
    #[pyo3(signature = (text, overrides=Vec::new()))]
    fn from_toml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        let loaded =
            config::load_scenario_text(Some((std::path::Path::new("<string>"), text)), &overrides).map_err(err)?;
        Ok(PyScenario { loaded })
    }

    /// The bundled full trial: transfer, assistance, fall, recovery.
    #[staticmethod]
    #[pyo3(signature = (overrides=Vec::new()))]
    fn full_trial(overrides: Vec<String>) -> PyResult<Self> {
        Ok(PyScenario { loaded: config::load_full_trial(&overrides).map_err(err)? })
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams { inner: self.loaded.scenario.params }
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.loaded.scenario.duration
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.loaded.scenario.seed
    }

    fn effective_toml(&self) -> String {
        self.loaded.effective_toml()
    }

    /// Simulate. The GIL is released while the run is in progress.
    fn run(&self, py: Python<'_>) -> PyResult<PySimResult> {
        let scenario = self.loaded.scenario.clone();
        let result = py.detach(move || sim::run(&scenario)).map_err(err)?;
        Ok(PySimResult { inner: result })
    }
}

/// Telemetry and summary of one run.
#[pyclass(name = "SimResult", module = "duolift", frozen)]
struct PySimResult {
    inner: sim::SimResult,
}

#[pymethods]
impl PySimResult {
    #[getter]
    fn completed(&self) -> bool {
        self.inner.completed()
    }

    fn __len__(&self) -> usize {
        self.inner.telemetry.len()
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.summary)
    }

    fn summary_json(&self) -> String {
        self.inner.summary_json()
    }

    /// Telemetry in the same CSV layout the CLI writes.
    fn telemetry_csv(&self) -> String {
        to_csv_string(&self.inner.telemetry)
    }

    /// Telemetry as a dict of column lists.
    fn columns<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let tel = &self.inner.telemetry;
        let d = PyDict::new(py);
        type Column = (&'static str, fn(&TelemetryRecord) -> f64);
        let num: [Column; 13] = [
            ("t", |r| r.t),
            ("x0", |r| r.x0),
            ("v0", |r| r.v0),
            ("w1", |r| r.w1),
            ("w2", |r| r.w2),
            ("tau1", |r| r.tau1),
            ("tau2", |r| r.tau2),
            ("tau_B", |r| r.tau_b),
            ("F_strap", |r| r.f_strap),
            ("F_desired", |r| r.f_desired),
            ("servo_angle", |r| r.servo_angle),
            ("patient_x", |r| r.patient_x),
            ("patient_v", |r| r.patient_v),
        ];
        for (name, get) in num {
            d.set_item(name, tel.iter().map(get).collect::<Vec<f64>>())?;
        }
        d.set_item("mode", tel.iter().map(|r| r.mode.as_str()).collect::<Vec<&str>>())?;
        Ok(d)
    }

    /// `(t, from, to)` for every mode change.
    fn mode_log(&self) -> Vec<(f64, String, String)> {
        self.inner
            .summary
            .mode_log
            .iter()
            .map(|tr| (tr.t, tr.from.as_str().to_string(), tr.to.as_str().to_string()))
            .collect()
    }
}

fn params_or_default(params: Option<PyParams>) -> ActuatorParams {
    params.map(|p| p.inner).unwrap_or_else(ActuatorParams::prototype)
}

/// `(dv0/dt, dw1/dt)` of the free two-degree-of-freedom model.
#[pyfunction]
#[pyo3(signature = (x0, v0, w1, tau1, tau2, tau_b, f_m, m, params=None))]
#[allow(clippy::too_many_arguments)]
fn full_dynamics(
    x0: f64,
    v0: f64,
    w1: f64,
    tau1: f64,
    tau2: f64,
    tau_b: f64,
    f_m: f64,
    m: f64,
    params: Option<PyParams>,
) -> PyResult<(f64, f64)> {
    let p = params_or_default(params);
    let state = ActuatorState { x0, v0, w1, ..Default::default() };
    let inputs = DynamicsInputs { tau1, tau2, tau_b, f_m };
    model::full_dynamics(&state, &inputs, m, &p).map_err(err)
}

/// EM2 line friction torque at speed `w2` under unloading force `f_d`.
#[pyfunction]
#[pyo3(signature = (w2, f_d, params=None))]
fn friction_torque(w2: f64, f_d: f64, params: Option<PyParams>) -> f64 {
    model::friction_torque(w2, f_d, &params_or_default(params).friction)
}

fn fall_spec(mass: f64, a_d: Option<f64>, v_i: f64) -> FallTestSpec {
    let goal = match a_d {
        Some(a_d) => FallGoal::Deceleration { a_d },
        None => FallGoal::MaxForce { budget: None },
    };
    FallTestSpec { mass, goal, v_i }
}

/// Analytic stopping numbers. `a_d=None` means full braking force.
#[pyfunction]
#[pyo3(signature = (mass, a_d=None, v_i=fall::DEFAULT_DETECT_SPEED, params=None))]
fn fall_theoretical<'py>(
    py: Python<'py>,
    mass: f64,
    a_d: Option<f64>,
    v_i: f64,
    params: Option<PyParams>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &fall::fall_theoretical(&fall_spec(mass, a_d, v_i), &params_or_default(params)))
}

/// Simulated drop and arrest of one load.
#[pyfunction]
#[pyo3(signature = (mass, a_d=None, v_i=fall::DEFAULT_DETECT_SPEED, scenario=None))]
fn run_fall_test<'py>(
    py: Python<'py>,
    mass: f64,
    a_d: Option<f64>,
    v_i: f64,
    scenario: Option<PyScenario>,
) -> PyResult<Bound<'py, PyAny>> {
    let base = base_scenario(scenario)?;
    let spec = fall_spec(mass, a_d, v_i);
    let report = py.detach(move || fall::run_fall_test(&spec, &base)).map_err(err)?;
    to_py(py, &report)
}

fn base_scenario(scenario: Option<PyScenario>) -> PyResult<sim::Scenario> {
    match scenario {
        Some(s) => Ok(s.loaded.scenario),
        None => Ok(config::load_scenario(None, &[]).map_err(err)?.scenario),
    }
}

/// Every reference fall row, analytic and simulated.
#[pyfunction]
#[pyo3(signature = (scenario=None))]
fn run_fall_table<'py>(py: Python<'py>, scenario: Option<PyScenario>) -> PyResult<Bound<'py, PyAny>> {
    let base = base_scenario(scenario)?;
    let report = py.detach(move || fall::run_fall_table(&base, |_| true)).map_err(err)?;
    to_py(py, &report)
}

/// The five assistance controllers over the subject cohort.
#[pyfunction]
#[pyo3(signature = (f_desired=course::DEFAULT_F_D, seed=0, scenario=None))]
fn run_course_suite<'py>(
    py: Python<'py>,
    f_desired: f64,
    seed: u64,
    scenario: Option<PyScenario>,
) -> PyResult<Bound<'py, PyAny>> {
    let base = base_scenario(scenario)?;
    let report = py.detach(move || course::run_course_suite(&base, f_desired, seed)).map_err(err)?;
    to_py(py, &report)
}

/// Compare architectures from catalog text, or the bundled catalog.
#[pyfunction]
#[pyo3(signature = (catalog=None))]
fn compare_designs<'py>(py: Python<'py>, catalog: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cat = match catalog {
        Some(text) => DesignCatalog::parse(text).map_err(err)?,
        None => DesignCatalog::bundled(),
    };
    to_py(py, &core_compare_designs(&cat).map_err(err)?)
}

/// Least-squares fit of the friction law to `(w2, f_d, tau_f)` samples.
#[pyfunction]
#[pyo3(signature = (w2, f_d, tau_f, sharpness=10.0))]
fn identify_friction<'py>(
    py: Python<'py>,
    w2: Vec<f64>,
    f_d: Vec<f64>,
    tau_f: Vec<f64>,
    sharpness: f64,
) -> PyResult<Bound<'py, PyAny>> {
    if w2.len() != f_d.len() || w2.len() != tau_f.len() {
        return Err(DuoliftError::new_err("w2, f_d and tau_f must have the same length"));
    }
    let samples: Vec<FrictionSample> = w2
        .into_iter()
        .zip(f_d)
        .zip(tau_f)
        .map(|((w2, f_d), tau_f)| FrictionSample { w2, f_d, tau_f })
        .collect();
    to_py(py, &identify::identify_friction(&samples, sharpness).map_err(err)?)
}

/// Two-sided Mann-Whitney U test. Returns `(u, p, exact)`.
#[pyfunction]
fn mann_whitney_u(a: Vec<f64>, b: Vec<f64>) -> PyResult<(f64, f64, bool)> {
    let r = stats::mann_whitney_u(&a, &b).map_err(err)?;
    Ok((r.u, r.p_two_sided, r.exact))
}

/// Documented configuration keys as `(key, provenance, description)`.
#[pyfunction]
fn config_keys() -> Vec<(String, String, String)> {
    config::CONFIG_KEYS
        .iter()
        .map(|k| (k.key.to_string(), k.provenance.tag().to_string(), k.doc.to_string()))
        .collect()
}

#[pymodule]
fn duolift(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DuoliftError", m.py().get_type::<DuoliftError>())?;
    m.add("G", duolift_core::G)?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySimResult>()?;
    m.add_function(wrap_pyfunction!(full_dynamics, m)?)?;
    m.add_function(wrap_pyfunction!(friction_torque, m)?)?;
    m.add_function(wrap_pyfunction!(fall_theoretical, m)?)?;
    m.add_function(wrap_pyfunction!(run_fall_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_fall_table, m)?)?;
    m.add_function(wrap_pyfunction!(run_course_suite, m)?)?;
    m.add_function(wrap_pyfunction!(compare_designs, m)?)?;
    m.add_function(wrap_pyfunction!(identify_friction, m)?)?;
    m.add_function(wrap_pyfunction!(mann_whitney_u, m)?)?;
    m.add_function(wrap_pyfunction!(config_keys, m)?)?;
    Ok(())
}
