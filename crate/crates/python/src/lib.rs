//! Python bindings for `optomech`. The module imports as `optomech`.

use nalgebra::Matrix4;
use optomech::dynamics::{self, build_diffusion, build_drift, Stability};
use optomech::lyapunov;
use optomech::measures::{self, CorrelationReport};
use optomech::params::{self, QubitSpec};
use optomech::sweep::{self, Axis, ConfigFile, Execution, OnsetPredicate, SweepMode, SweepRow};
use optomech::{CovarianceMatrix, Error};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        e if e.is_numerical() => PyArithmeticError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn rows_of(m: &Matrix4<f64>) -> Vec<Vec<f64>> {
    (0..4).map(|i| (0..4).map(|j| m[(i, j)]).collect()).collect()
}

fn matrix_from(rows: &[Vec<f64>]) -> PyResult<Matrix4<f64>> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("expected a 4x4 matrix"));
    }
    Ok(Matrix4::from_fn(|i, j| rows[i][j]))
}

/// Dimensionless working point, rates in units of the mechanical frequency.
#[pyclass(name = "ReducedParams", from_py_object)]
#[derive(Debug, Clone, Copy)]
pub struct PyReducedParams {
    pub inner: params::ReducedParams,
}

#[pymethods]
impl PyReducedParams {
    /// Unspecified fields take the reference-device values.
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = params::ReducedParams::reference();
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                let key: String = k.extract()?;
                inner.set(&key, v.extract()?).map_err(to_py)?;
            }
        }
        Ok(PyReducedParams { inner })
    }

    fn __getattr__(&self, name: &str) -> PyResult<f64> {
        self.inner
            .get(name)
            .ok_or_else(|| pyo3::exceptions::PyAttributeError::new_err(name.to_string()))
    }

    fn __setattr__(&mut self, name: &str, value: f64) -> PyResult<()> {
        self.inner.set(name, value).map_err(to_py)
    }

    /// Copy with some fields replaced.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut out = *self;
        if let Some(kwargs) = kwargs {
            for (k, v) in kwargs.iter() {
                out.inner.set(&k.extract::<String>()?, v.extract()?).map_err(to_py)?;
            }
        }
        Ok(out)
    }

    fn as_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for f in params::ReducedParams::FIELDS {
            d.set_item(f, self.inner.get(f))?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        let fields: Vec<String> = params::ReducedParams::FIELDS
            .iter()
            .map(|f| format!("{f}={}", self.inner.get(f).unwrap_or(f64::NAN)))
            .collect();
        format!("ReducedParams({})", fields.join(", "))
    }
}

#[pyfunction]
fn mean_thermal_occupation(temperature: f64, omega_m: f64) -> f64 {
    params::mean_thermal_occupation(temperature, omega_m)
}

/// Returns `(eta, mu_q / delta_q, perturbative)`; eta in the units of `delta_q`.
#[pyfunction]
fn qubit_induced_coupling(delta_q: f64, mu_q: f64) -> PyResult<(f64, f64, bool)> {
    let c = params::qubit_induced_coupling(&QubitSpec { delta_q, mu_q }).map_err(to_py)?;
    Ok((c.eta, c.ratio, c.perturbative))
}

#[pyfunction]
fn threshold_coupling(delta: f64, kappa: f64, eta: f64) -> PyResult<f64> {
    dynamics::threshold_coupling(delta, kappa, eta).map_err(to_py)
}

#[pyfunction]
fn drift_matrix(p: PyReducedParams) -> Vec<Vec<f64>> {
    rows_of(&build_drift(&p.inner).0)
}

#[pyfunction]
fn diffusion_matrix(p: PyReducedParams) -> Vec<Vec<f64>> {
    rows_of(&build_diffusion(&p.inner).0)
}

#[pyfunction]
fn stability<'py>(py: Python<'py>, p: PyReducedParams) -> PyResult<Bound<'py, PyDict>> {
    let v = dynamics::stability(&p.inner);
    let d = PyDict::new(py);
    d.set_item("stable", v.stable)?;
    d.set_item("marginal", v.stability == Stability::Marginal)?;
    d.set_item("max_re_eig", v.max_real_eigenvalue)?;
    d.set_item("rh_condition_1", v.rh_condition_1)?;
    d.set_item("rh_condition_2", v.rh_condition_2)?;
    d.set_item("method_agreement", v.method_agreement)?;
    Ok(d)
}

/// Stationary covariance matrix and the condition number of the solve.
#[pyfunction]
fn solve_lyapunov(p: PyReducedParams) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let s = lyapunov::solve_lyapunov(&build_drift(&p.inner), &build_diffusion(&p.inner))
        .map_err(to_py)?;
    Ok((rows_of(&s.covariance.0), s.condition))
}

fn report_dict<'py>(py: Python<'py>, r: &CorrelationReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let inv = r.invariants;
    d.set_item("invariants", (inv.i1, inv.i2, inv.i3, inv.i4))?;
    d.set_item("nu_plus", r.nu_plus)?;
    d.set_item("nu_minus", r.nu_minus)?;
    d.set_item("nu_tilde_minus", r.nu_tilde_minus)?;
    d.set_item("E_N", r.e_n)?;
    d.set_item("I_M", r.i_m)?;
    d.set_item("D_G", r.d_g)?;
    d.set_item("W", r.w)?;
    Ok(d)
}

/// Correlation measures of a 4x4 covariance matrix ordered (q, p, X, Y).
#[pyfunction]
fn correlations<'py>(py: Python<'py>, v: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let r = measures::report(&CovarianceMatrix(matrix_from(&v)?)).map_err(to_py)?;
    report_dict(py, &r)
}

/// Stability, covariance and measures at one point. Measures are `None`
/// when the point is not stable.
#[pyfunction]
fn run_point<'py>(py: Python<'py>, p: PyReducedParams) -> PyResult<Bound<'py, PyDict>> {
    let r = sweep::run_point(&p.inner).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("stable", r.verdict.stable)?;
    d.set_item("max_re_eig", r.verdict.max_real_eigenvalue)?;
    match (r.solution, r.report) {
        (Some(s), Some(rep)) => {
            d.set_item("covariance", rows_of(&s.covariance.0))?;
            d.set_item("condition", s.condition)?;
            d.set_item("measures", report_dict(py, &rep)?)?;
        }
        _ => {
            d.set_item("covariance", py.None())?;
            d.set_item("condition", py.None())?;
            d.set_item("measures", py.None())?;
        }
    }
    Ok(d)
}

type Row = (f64, f64, bool, Option<(f64, f64, f64, f64)>, bool);

fn row_tuple(r: &SweepRow) -> Row {
    (
        r.axis_value,
        r.eta,
        r.stable,
        r.measures.map(|m| (m.e_n, m.i_m, m.d_g, m.nu_tilde_minus)),
        r.condition_flag,
    )
}

fn execution(threads: Option<usize>) -> Execution {
    match threads {
        Some(1) => Execution::Serial,
        Some(n) => Execution::Parallel(n),
        None => Execution::Parallel(0),
    }
}

/// Sweeps one field of `p` for each eta. Rows are
/// `(axis, eta, stable, (E_N, I_M, D_G, nu_tilde_minus) | None, ill_conditioned)`.
#[pyfunction]
#[pyo3(signature = (p, axis, lo, hi, steps, eta_list, threads=None))]
#[allow(clippy::too_many_arguments)]
fn sweep_axis(
    py: Python<'_>,
    p: PyReducedParams,
    axis: &str,
    lo: f64,
    hi: f64,
    steps: usize,
    eta_list: Vec<f64>,
    threads: Option<usize>,
) -> PyResult<Vec<Row>> {
    let axis = Axis::new(axis, lo, hi, steps);
    let rows = py
        .detach(|| sweep::sweep_axis(&p.inner, &axis, &eta_list, execution(threads)))
        .map_err(to_py)?;
    Ok(rows.iter().map(row_tuple).collect())
}

/// Bisects `axis` for where entanglement (or stability) switches.
#[pyfunction]
#[pyo3(signature = (p, axis, lo, hi, predicate="entangled", tol=None))]
fn find_onset(
    p: PyReducedParams,
    axis: &str,
    lo: f64,
    hi: f64,
    predicate: &str,
    tol: Option<f64>,
) -> PyResult<f64> {
    let predicate = match predicate {
        "entangled" => OnsetPredicate::Entangled,
        "stable" => OnsetPredicate::Stable,
        other => return Err(PyValueError::new_err(format!("unknown predicate `{other}`"))),
    };
    let tol = tol.unwrap_or_else(|| sweep::default_tolerance(axis));
    sweep::find_onset(axis, lo, hi, &p.inner, predicate, tol).map_err(to_py)
}

/// Runs a sweep or stability-map config file and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (path, threads=None))]
fn run_config(py: Python<'_>, path: std::path::PathBuf, threads: Option<usize>) -> PyResult<String> {
    let cfg = ConfigFile::load(&path)
        .and_then(|f| f.resolve(None))
        .map_err(to_py)?;
    let exec = execution(threads);
    let bytes = py
        .detach(|| -> optomech::Result<Vec<u8>> {
            let mut buf = Vec::new();
            let io = |source| Error::Io {
                path: path.clone(),
                source,
            };
            match cfg.mode {
                SweepMode::StabilityMap => {
                    sweep::stability_map(&cfg, exec)?.write_csv(&mut buf).map_err(io)?
                }
                SweepMode::SweepDetuning => {
                    sweep::write_csv(&sweep::sweep_detuning(&cfg, exec)?, &mut buf).map_err(io)?
                }
                SweepMode::SweepCoupling => {
                    sweep::write_csv(&sweep::sweep_coupling(&cfg, exec)?, &mut buf).map_err(io)?
                }
                SweepMode::SweepThermal => {
                    sweep::write_csv(&sweep::sweep_thermal(&cfg, exec)?, &mut buf).map_err(io)?
                }
                m => {
                    return Err(Error::Config(format!("`{}` configs are not sweeps", m.name())))
                }
            }
            Ok(buf)
        })
        .map_err(to_py)?;
    Ok(String::from_utf8(bytes).expect("CSV is ASCII"))
}

#[pymodule]
#[pyo3(name = "optomech")]
pub fn optomech_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyReducedParams>()?;
    m.add_function(wrap_pyfunction!(mean_thermal_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(qubit_induced_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_coupling, m)?)?;
    m.add_function(wrap_pyfunction!(drift_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(stability, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lyapunov, m)?)?;
    m.add_function(wrap_pyfunction!(correlations, m)?)?;
    m.add_function(wrap_pyfunction!(run_point, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_axis, m)?)?;
    m.add_function(wrap_pyfunction!(find_onset, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add("CSV_HEADER", sweep::CSV_HEADER)?;
    Ok(())
}
