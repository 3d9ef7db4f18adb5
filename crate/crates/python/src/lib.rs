//! Python bindings for the Dirac spectral library.

use num_complex::Complex64 as C64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dirac_spectral::boundary::{self, BoundaryForm as CoreForm};
use dirac_spectral::potential::{self, Potential as CorePotential};
use dirac_spectral::solutions::{self, Method, SolveOptions};
use dirac_spectral::spectrum::{self, LocalizeOptions};
use dirac_spectral::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Precondition(_) | Error::Degenerate(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Matrix potential `Q = [[q1, q2], [q3, q4]]` given by expressions in `x`.
#[pyclass(name = "Potential", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyPotential {
    inner: CorePotential,
}

#[pymethods]
impl PyPotential {
    #[new]
    #[pyo3(signature = (q1, q2, q3, q4, p = 2.0))]
    fn new(q1: &str, q2: &str, q3: &str, q4: &str, p: f64) -> PyResult<Self> {
        let inner = CorePotential::from_expressions([q1, q2, q3, q4], p).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zero() -> Self {
        Self {
            inner: CorePotential::zero(),
        }
    }

    fn eval(&self, x: f64) -> [C64; 4] {
        self.inner.eval(x)
    }

    /// `E(x) = exp(1/2 int_0^x (q2 - q3))`.
    fn weight(&self, x: f64) -> C64 {
        self.inner.weight_e(x)
    }

    fn l1_norm(&self) -> PyResult<f64> {
        self.inner.l1_norm().map_err(py_err)
    }

    /// Trace-free gauge equivalent and the spectral shift.
    fn normalize_trace(&self) -> PyResult<(PyPotential, C64)> {
        let (q, c) = potential::normalize_trace(&self.inner).map_err(py_err)?;
        Ok((PyPotential { inner: q }, c))
    }
}

/// Boundary form `U(y) = A y(0) + B y(pi)` from its 2x4 matrix.
#[pyclass(name = "BoundaryForm", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyBoundaryForm {
    inner: CoreForm,
}

#[pymethods]
impl PyBoundaryForm {
    #[new]
    fn new(rows: [[C64; 4]; 2]) -> PyResult<Self> {
        Ok(Self {
            inner: CoreForm::new(rows).map_err(py_err)?,
        })
    }

    /// `dirichlet`, `dirichlet-neumann`, `periodic`, `antiperiodic` or `quasiperiodic(a)`.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreForm::preset(name).map_err(py_err)?,
        })
    }

    #[getter]
    fn matrix(&self) -> [[C64; 4]; 2] {
        self.inner.u
    }

    fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    /// Regularity kind name and the two witnesses.
    #[pyo3(signature = (e = C64::new(1.0, 0.0)))]
    fn classify(&self, e: C64) -> PyResult<(String, [C64; 2])> {
        let c = boundary::classify(&self.inner, e).map_err(py_err)?;
        Ok((format!("{:?}", c.kind), c.witnesses))
    }

    /// Unperturbed eigenvalues `(n, lambda, multiplicity)` for `lo <= n <= hi`.
    #[pyo3(signature = (lo, hi, e = C64::new(1.0, 0.0)))]
    fn spectrum0(&self, lo: i64, hi: i64, e: C64) -> PyResult<Vec<(i64, C64, usize)>> {
        let s = boundary::unperturbed_spectrum(&self.inner, e).map_err(py_err)?;
        Ok(s.anchors(lo, hi).into_iter().map(|a| (a.n, a.lambda, a.multiplicity)).collect())
    }
}

/// A localized eigenvalue.
#[pyclass(name = "SpectralPoint", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
pub struct PySpectralPoint {
    n: i64,
    lambda_: C64,
    anchor: C64,
    multiplicity: usize,
    zeros: Vec<C64>,
    det_abs: f64,
    anomaly: Option<String>,
}

#[pymethods]
impl PySpectralPoint {
    #[getter]
    fn value(&self) -> C64 {
        self.lambda_
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralPoint(n={}, value={}, multiplicity={})",
            self.n, self.lambda_, self.multiplicity
        )
    }
}

/// Characteristic determinant `Delta(lambda)`.
#[pyfunction]
fn char_det(q: &PyPotential, bf: &PyBoundaryForm, lam: C64) -> PyResult<C64> {
    spectrum::char_det(&q.inner, &bf.inner, lam).map_err(py_err)
}

/// Eigenvalues with indices `lo..=hi` localized near the unperturbed ones.
#[pyfunction]
#[pyo3(signature = (q, bf, lo, hi, epsilon = 0.4))]
fn localize(py: Python<'_>, q: &PyPotential, bf: &PyBoundaryForm, lo: i64, hi: i64, epsilon: f64) -> PyResult<Vec<PySpectralPoint>> {
    let opts = LocalizeOptions {
        epsilon,
        ..Default::default()
    };
    let pts = py
        .detach(|| spectrum::localize(&q.inner, &bf.inner, lo, hi, &opts))
        .map_err(py_err)?;
    Ok(pts
        .into_iter()
        .map(|p| PySpectralPoint {
            n: p.n,
            lambda_: p.lambda,
            anchor: p.anchor,
            multiplicity: p.multiplicity,
            zeros: p.zeros,
            det_abs: p.det_abs,
            anomaly: p.anomaly,
        })
        .collect())
}

/// Grid and values of `c(x, lambda)` and `s(x, lambda)`.
#[pyfunction]
#[pyo3(signature = (q, lam, method = "direct-ode", cells = 2048, alpha = 1.0))]
#[allow(clippy::type_complexity)]
fn fundamental_pair(
    q: &PyPotential,
    lam: C64,
    method: &str,
    cells: usize,
    alpha: f64,
) -> PyResult<(Vec<f64>, Vec<[C64; 2]>, Vec<[C64; 2]>)> {
    let m = match method {
        "direct-ode" => Method::DirectOde,
        "pruefer" => Method::Pruefer,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let opts = SolveOptions {
        cells,
        alpha,
        ..Default::default()
    };
    let fp = solutions::fundamental_pair(&q.inner, lam, m, &opts).map_err(py_err)?;
    Ok((fp.c.grid, fp.c.values, fp.s.values))
}

#[pymodule]
fn dirac_spectral_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPotential>()?;
    m.add_class::<PyBoundaryForm>()?;
    m.add_class::<PySpectralPoint>()?;
    m.add_function(wrap_pyfunction!(char_det, m)?)?;
    m.add_function(wrap_pyfunction!(localize, m)?)?;
    m.add_function(wrap_pyfunction!(fundamental_pair, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
