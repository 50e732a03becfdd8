//! Python bindings for the radial Liouville solver.
//!
//! Exposes the coefficient matrix, the radial solver with its profile type,
//! mass/Jacobian/Pohozaev diagnostics, and the mass-map inversion.

use liouville::coeff::CoefficientMatrix;
use liouville::masses;
use liouville::pohozaev;
use liouville::radial::{self, RadialProfile, SolveOptions};
use liouville::shooting::{self, InversionTarget, NewtonOptions};
use liouville::variational;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// The coupling matrix A: symmetric, non-negative, invertible, irreducible.
#[pyclass(name = "CoefficientMatrix", module = "liouville_py")]
#[derive(Clone)]
struct PyCoefficientMatrix {
    inner: CoefficientMatrix,
}

#[pymethods]
impl PyCoefficientMatrix {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self {
            inner: CoefficientMatrix::new(&rows).map_err(value_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner.entry(i, j)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.rows()
    }

    /// Λ_J(σ) = 4 Σ_{i∈J} σ_i − Σ_{i,j∈J} a_ij σ_i σ_j.
    fn lambda_j(&self, sigma: Vec<f64>, subset: Vec<usize>) -> f64 {
        self.inner.lambda_j(&sigma, &subset)
    }

    fn lambda_full(&self, sigma: Vec<f64>) -> f64 {
        self.inner.lambda_full(&sigma)
    }

    /// Hypersurface residuals: Λ_I and the minimum over proper subsets.
    fn pi_residual<'py>(&self, py: Python<'py>, sigma: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let res = self.inner.pi_residual(&sigma).map_err(value_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("lambda_I", res.lambda_i)?;
        d.set_item("min_proper_lambda", res.min_proper_lambda)?;
        d.set_item("worst_subset", res.worst_subset)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("CoefficientMatrix({:?})", self.inner.rows())
    }
}

/// Solver tolerances and stopping parameters.
#[pyclass(name = "SolveOptions", module = "liouville_py")]
#[derive(Clone)]
struct PySolveOptions {
    inner: SolveOptions,
}

#[pymethods]
impl PySolveOptions {
    #[new]
    #[pyo3(signature = (rel_tol=None, abs_tol=None, t_start=None, t_max=None, slope_margin=None, tail_tol=None))]
    fn new(
        rel_tol: Option<f64>,
        abs_tol: Option<f64>,
        t_start: Option<f64>,
        t_max: Option<f64>,
        slope_margin: Option<f64>,
        tail_tol: Option<f64>,
    ) -> Self {
        let mut o = SolveOptions::default();
        if let Some(x) = rel_tol {
            o.rel_tol = x;
        }
        if let Some(x) = abs_tol {
            o.abs_tol = x;
        }
        if let Some(x) = t_start {
            o.t_start = x;
        }
        if let Some(x) = t_max {
            o.t_max = x;
        }
        if let Some(x) = slope_margin {
            o.slope_margin = x;
        }
        if let Some(x) = tail_tol {
            o.tail_tol = x;
        }
        Self { inner: o }
    }

    #[getter]
    fn rel_tol(&self) -> f64 {
        self.inner.rel_tol
    }

    #[getter]
    fn abs_tol(&self) -> f64 {
        self.inner.abs_tol
    }

    fn __repr__(&self) -> String {
        format!("SolveOptions({:?})", self.inner)
    }
}

/// A solved radial profile with dense evaluation and diagnostics.
#[pyclass(name = "RadialProfile", module = "liouville_py")]
struct PyRadialProfile {
    inner: RadialProfile,
}

#[pymethods]
impl PyRadialProfile {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged()
    }

    #[getter]
    fn r_cut(&self) -> f64 {
        self.inner.r_cut()
    }

    #[getter]
    fn beta(&self) -> Vec<f64> {
        self.inner.beta().to_vec()
    }

    #[getter]
    fn grid_points(&self) -> usize {
        self.inner.grid().len()
    }

    /// (u_i(r), r u_i'(r)) for 0 < r <= r_cut.
    fn evaluate(&self, r: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
        self.inner.evaluate(r).map_err(value_err)
    }

    /// Masses, exponents, and tail diagnostics.
    fn masses<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let mv = masses::compute_masses(&self.inner).map_err(runtime_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("sigma", &mv.sigma)?;
        d.set_item("weighted_sigma", mv.weighted_sigma(self.inner.weights()))?;
        d.set_item("m", &mv.m)?;
        d.set_item("tail_fraction", mv.tail_fraction())?;
        Ok(d)
    }

    /// Λ residuals of the h-weighted masses.
    fn pi_residual<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let res = masses::check_pi(&self.inner).map_err(runtime_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("lambda_I", res.lambda_i)?;
        d.set_item("min_proper_lambda", res.min_proper_lambda)?;
        Ok(d)
    }

    /// Deviation of the init-(2,…,2) linearized solve from r u' + 2, and the
    /// orthogonality integrals.
    fn kernel_check<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let kc = variational::kernel_check(&self.inner).map_err(runtime_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("max_deviation", kc.max_deviation)?;
        d.set_item("orthogonality", kc.orthogonality)?;
        Ok(d)
    }

    /// Shooting Jacobian d(hσ)/dβ and its reduced determinant.
    fn jacobian<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let basis = variational::jacobian_sigma(&self.inner).map_err(runtime_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("dsigma", basis.dsigma())?;
        d.set_item("det_m_reduced", basis.det_m_reduced())?;
        Ok(d)
    }

    /// Nonlinear (and optionally linearized) Pohozaev residuals at `radii`.
    #[pyo3(signature = (radii, with_linear=true))]
    fn pohozaev_trace<'py>(
        &self,
        py: Python<'py>,
        radii: Vec<f64>,
        with_linear: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let lp = if with_linear {
            Some(
                variational::solve_linearized(&self.inner, &vec![2.0; self.inner.n()])
                    .map_err(runtime_err)?,
            )
        } else {
            None
        };
        let tr = pohozaev::trace(&self.inner, lp.as_ref(), &radii).map_err(value_err)?;
        let d = PyDict::new_bound(py);
        d.set_item("radii", tr.radii)?;
        d.set_item("nonlinear_residual", tr.nonlinear_residual)?;
        d.set_item("linear_residual", tr.linear_residual)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "RadialProfile(n={}, beta={:?}, r_cut={:.3e})",
            self.inner.n(),
            self.inner.beta(),
            self.inner.r_cut()
        )
    }
}

/// Solves the radial IVP u_i'' + u_i'/r + Σ_j a_ij h_j e^{u_j} = 0.
#[pyfunction]
#[pyo3(signature = (matrix, h, beta, options=None))]
fn solve_radial(
    matrix: &PyCoefficientMatrix,
    h: Vec<f64>,
    beta: Vec<f64>,
    options: Option<PySolveOptions>,
) -> PyResult<PyRadialProfile> {
    let opts = options.map(|o| o.inner).unwrap_or_default();
    let profile =
        radial::solve_radial(&matrix.inner, &h, &beta, &opts).map_err(runtime_err)?;
    Ok(PyRadialProfile { inner: profile })
}

/// Completes σ_1..σ_{n−1} to a point of the hypersurface via Λ_I = 0.
#[pyfunction]
fn complete_sigma(matrix: &PyCoefficientMatrix, sigma_head: Vec<f64>) -> PyResult<Vec<f64>> {
    shooting::complete_sigma(&matrix.inner, &sigma_head).map_err(value_err)
}

/// Inverts the mass map: recovers β_1..β_{n−1} for target h-weighted masses.
#[pyfunction]
#[pyo3(signature = (matrix, h, sigma_head, guess=None, options=None))]
fn invert_sigma<'py>(
    py: Python<'py>,
    matrix: &PyCoefficientMatrix,
    h: Vec<f64>,
    sigma_head: Vec<f64>,
    guess: Option<Vec<f64>>,
    options: Option<PySolveOptions>,
) -> PyResult<Bound<'py, PyDict>> {
    let n = matrix.inner.n();
    let target = InversionTarget {
        matrix: matrix.inner.clone(),
        h,
        sigma_head,
    };
    let guess = guess.unwrap_or_else(|| vec![0.0; n.saturating_sub(1)]);
    let opts = options.map(|o| o.inner).unwrap_or_default();
    let res = shooting::invert_sigma(&target, &guess, &opts, &NewtonOptions::default())
        .map_err(runtime_err)?;
    let d = PyDict::new_bound(py);
    d.set_item("beta", res.beta)?;
    d.set_item("iterations", res.iterations)?;
    d.set_item("residual_norm", res.residual_norm)?;
    d.set_item("sigma", res.sigma)?;
    d.set_item("profile", PyRadialProfile { inner: res.profile }.into_py(py))?;
    Ok(d)
}

#[pymodule]
fn liouville_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCoefficientMatrix>()?;
    m.add_class::<PySolveOptions>()?;
    m.add_class::<PyRadialProfile>()?;
    m.add_function(wrap_pyfunction!(solve_radial, m)?)?;
    m.add_function(wrap_pyfunction!(complete_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(invert_sigma, m)?)?;
    Ok(())
}
