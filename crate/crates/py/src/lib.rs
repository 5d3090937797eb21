//! Python bindings for the `liftwing` crate.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use liftwing::harness::HarnessError;
use liftwing::{Condition, ExperimentConfig, FlatSample, TrajectoryDef, Vec3};

type Triple = [f64; 3];

fn vec(t: Triple) -> Vec3 {
    Vec3::from(t)
}

fn triple(v: &Vec3) -> Triple {
    [v.x, v.y, v.z]
}

fn harness_err(e: HarnessError) -> PyErr {
    match e {
        HarnessError::Config(msg) => PyValueError::new_err(msg),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// Mass and wing coefficients. `kappa` is in radians.
#[pyclass(name = "AeroParams", skip_from_py_object)]
#[derive(Clone)]
struct PyAeroParams {
    inner: liftwing::AeroParams,
}

#[pymethods]
impl PyAeroParams {
    #[new]
    #[pyo3(signature = (mass=None, kappa=None, rho=None, wing_area=None, cd0=None, cy0=None, cla=None))]
    fn new(
        mass: Option<f64>,
        kappa: Option<f64>,
        rho: Option<f64>,
        wing_area: Option<f64>,
        cd0: Option<f64>,
        cy0: Option<f64>,
        cla: Option<f64>,
    ) -> PyResult<Self> {
        let d = liftwing::AeroParams::default();
        let inner = liftwing::AeroParams {
            mass: mass.unwrap_or(d.mass),
            kappa: kappa.unwrap_or(d.kappa),
            rho: rho.unwrap_or(d.rho),
            wing_area: wing_area.unwrap_or(d.wing_area),
            cd0: cd0.unwrap_or(d.cd0),
            cy0: cy0.unwrap_or(d.cy0),
            cla: cla.unwrap_or(d.cla),
        };
        inner.validate().map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn cd0(&self) -> f64 {
        self.inner.cd0
    }

    #[getter]
    fn cla(&self) -> f64 {
        self.inner.cla
    }

    fn without_aero(&self) -> Self {
        Self { inner: self.inner.without_aero() }
    }

    /// Aerodynamic acceleration in the earth frame for a row-major attitude.
    fn aero_accel(&self, attitude: [[f64; 3]; 3], airspeed: Triple) -> Triple {
        let r = liftwing::Mat3::from_fn(|i, j| attitude[i][j]);
        triple(&liftwing::aero::aero_accel_earth(&self.inner, &r, &vec(airspeed)))
    }

    fn __repr__(&self) -> String {
        let a = &self.inner;
        format!(
            "AeroParams(mass={}, kappa={}, rho={}, wing_area={}, cd0={}, cy0={}, cla={})",
            a.mass, a.kappa, a.rho, a.wing_area, a.cd0, a.cy0, a.cla
        )
    }
}

#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: TrajectoryDef,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    #[pyo3(signature = (r=15.0, omega=0.06, speed_cap=10.0))]
    fn circle(r: f64, omega: f64, speed_cap: f64) -> Self {
        Self { inner: TrajectoryDef::circle(r, omega, speed_cap) }
    }

    #[staticmethod]
    #[pyo3(signature = (r=20.0, omega=0.33))]
    fn lemniscate(r: f64, omega: f64) -> Self {
        Self { inner: TrajectoryDef::lemniscate(r, omega) }
    }

    #[staticmethod]
    #[pyo3(signature = (p0=[0.0, 0.0, 0.0], yaw=0.0))]
    fn hover(p0: Triple, yaw: f64) -> Self {
        Self { inner: TrajectoryDef::hover(vec(p0), yaw) }
    }

    #[staticmethod]
    #[pyo3(signature = (speed, heading=0.0, p0=[0.0, 0.0, 0.0]))]
    fn line(speed: f64, heading: f64, p0: Triple) -> Self {
        Self { inner: TrajectoryDef::line(vec(p0), speed, heading) }
    }

    /// `(p, v, a, j)` at time `t`.
    fn sample(&self, t: f64) -> (Triple, Triple, Triple, Triple) {
        let s = self.inner.sample(t);
        (triple(&s.p), triple(&s.v), triple(&s.a), triple(&s.j))
    }

    fn derivative_check(&self, t: f64, h: f64) -> f64 {
        liftwing::trajectories::derivative_check(&self.inner, t, h)
    }

    /// Feedforward at time `t` (stateless transform).
    fn feedforward<'py>(&self, py: Python<'py>, params: PyRef<'_, PyAeroParams>, t: f64) -> PyResult<Bound<'py, PyDict>> {
        output_dict(py, &liftwing::flatness_transform(&params.inner, &self.inner.sample(t)))
    }
}

fn output_dict<'py>(py: Python<'py>, out: &liftwing::FlatnessOutput) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let rows: Vec<Triple> = (0..3).map(|i| [out.attitude[(i, 0)], out.attitude[(i, 1)], out.attitude[(i, 2)]]).collect();
    d.set_item("attitude", rows)?;
    d.set_item("thrust", out.thrust)?;
    d.set_item("alpha", out.alpha)?;
    d.set_item("body_rate", triple(&out.body_rate))?;
    d.set_item("x_w", triple(&out.x_w))?;
    d.set_item("a_xw", out.a_xw)?;
    d.set_item("a_zw", out.a_zw)?;
    d.set_item("singular", out.singular_case.code())?;
    Ok(d)
}

/// Attitude (row-major), thrust, angle of attack and body rate for one
/// flat-output sample.
#[pyfunction]
#[pyo3(signature = (params, v, a, j=[0.0, 0.0, 0.0], yaw=0.0))]
fn flatness_transform<'py>(
    py: Python<'py>,
    params: PyRef<'_, PyAeroParams>,
    v: Triple,
    a: Triple,
    j: Triple,
    yaw: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let sample = FlatSample { p: Vec3::zeros(), v: vec(v), a: vec(a), j: vec(j), yaw_fallback: yaw };
    output_dict(py, &liftwing::flatness_transform(&params.inner, &sample))
}

#[pyclass(name = "RunResult")]
struct PyRunResult {
    inner: liftwing::RunResult,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn rmse(&self) -> f64 {
        self.inner.rmse
    }

    #[getter]
    fn condition(&self) -> &'static str {
        self.inner.condition.name()
    }

    fn peak_error(&self) -> f64 {
        self.inner.peak_error()
    }

    fn __len__(&self) -> usize {
        self.inner.rows.len()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.t).collect()
    }

    fn positions(&self) -> Vec<Triple> {
        self.inner.rows.iter().map(|r| triple(&r.p)).collect()
    }

    fn reference_positions(&self) -> Vec<Triple> {
        self.inner.rows.iter().map(|r| triple(&r.p_ref)).collect()
    }
}

/// Closed-loop run from config text (the same TOML the CLI reads).
#[pyfunction]
#[pyo3(signature = (config="", condition=None))]
fn run_experiment(py: Python<'_>, config: &str, condition: Option<&str>) -> PyResult<PyRunResult> {
    let mut cfg = ExperimentConfig::from_toml_str(config).map_err(harness_err)?;
    if let Some(c) = condition {
        let c: Condition = c.parse().map_err(PyValueError::new_err)?;
        cfg = cfg.with_condition(c);
    }
    let result = py.detach(|| liftwing::run_experiment(&cfg)).map_err(harness_err)?;
    Ok(PyRunResult { inner: result })
}

/// Root-mean-square Euclidean distance between paired positions.
#[pyfunction]
fn rmse(reference: Vec<Triple>, actual: Vec<Triple>) -> PyResult<f64> {
    if reference.len() != actual.len() {
        return Err(PyValueError::new_err("series lengths differ"));
    }
    let pairs: Vec<(Vec3, Vec3)> = reference.into_iter().zip(actual).map(|(r, p)| (vec(r), vec(p))).collect();
    liftwing::harness::rmse(&pairs).map_err(harness_err)
}

#[pymodule]
fn liftwing_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAeroParams>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(flatness_transform, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(rmse, m)?)?;
    Ok(())
}
