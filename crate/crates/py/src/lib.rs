//! Python module `calderon`: algebras, product Dirac models, the invertible double
//! and boundary projectors. Matrices cross the boundary as nested lists of complex numbers.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use calderon_core::calderon::{
    calderon_projector, calderon_vs_aps_index, nonnegative_projection, orthogonalized_calderon,
    spectral_projection_contour, symbol_limit_check, BoundaryProjector,
};
use calderon_core::csalg::{AlgebraDescriptor, CStarAlgebra};
use calderon_core::dirac::{Discretization, DoubleSystem, ProductDiracModel};
use calderon_core::linalg::{CMat, C64};
use calderon_core::scenario::{run_scenario, ScenarioConfig};
use calderon_core::sobolev::GridSpec;

type Rows = Vec<Vec<C64>>;

fn err(e: calderon_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows) -> PyResult<CMat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix must be a non-empty rectangular list of lists"));
    }
    Ok(CMat::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &CMat) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[pyclass(name = "Algebra", frozen)]
struct PyAlgebra {
    inner: Arc<CStarAlgebra>,
}

#[pymethods]
impl PyAlgebra {
    /// Full matrix algebra `M_n`.
    #[staticmethod]
    fn matrix(n: usize) -> PyResult<Self> {
        Ok(Self { inner: CStarAlgebra::matrix(n).map_err(err)? })
    }

    /// Group algebra from a multiplication table `table[g][h] = gh`.
    #[staticmethod]
    fn group(table: Vec<Vec<usize>>) -> PyResult<Self> {
        Ok(Self { inner: CStarAlgebra::group(table).map_err(err)? })
    }

    /// Group algebra of a named group such as `"Z4"` or `"S3"`.
    #[staticmethod]
    fn preset(name: String) -> PyResult<Self> {
        let d = AlgebraDescriptor::Group { table: None, preset: Some(name) };
        Ok(Self { inner: CStarAlgebra::from_descriptor(&d).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name()
    }

    #[getter]
    fn rep_dim(&self) -> usize {
        self.inner.rep_dim()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Distance of a matrix from the algebra in its defining representation.
    fn residual(&self, m: Rows) -> PyResult<f64> {
        Ok(self.inner.residual(&to_matrix(&m)?))
    }

    fn __repr__(&self) -> String {
        format!("Algebra({})", self.inner.name())
    }
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ProductDiracModel,
}

#[pymethods]
impl PyModel {
    /// Segment model with boundary operator `sigma_x (x) coupling + sigma_z (x) potential`.
    #[staticmethod]
    #[pyo3(signature = (algebra, potential, coupling=None))]
    fn segment(algebra: &PyAlgebra, potential: Rows, coupling: Option<Rows>) -> PyResult<Self> {
        let v = to_matrix(&potential)?;
        let w = match coupling {
            Some(c) => to_matrix(&c)?,
            None => CMat::zeros(v.nrows(), v.ncols()),
        };
        Ok(Self { inner: ProductDiracModel::segment_from_potentials(&algebra.inner, &v, &w).map_err(err)? })
    }

    /// Cylinder model from Fourier coefficients `{m: V_m}` with `m >= 0` and a scalar holonomy phase.
    #[staticmethod]
    #[pyo3(signature = (algebra, rank, potential, phase=0.0))]
    fn cylinder(algebra: &PyAlgebra, rank: usize, potential: BTreeMap<i64, Rows>, phase: f64) -> PyResult<Self> {
        let terms = potential
            .iter()
            .map(|(m, v)| Ok((*m, to_matrix(v)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let n = rank * algebra.inner.rep_dim();
        let h = CMat::identity(n, n) * C64::from_polar(1.0, phase);
        Ok(Self { inner: ProductDiracModel::cylinder(&algebra.inner, rank, terms, Some(h)).map_err(err)? })
    }

    #[getter]
    fn fiber_dim(&self) -> usize {
        self.inner.fiber_dim()
    }

    #[getter]
    fn is_cylinder(&self) -> bool {
        self.inner.is_cylinder()
    }

    /// Boundary operator at a real frequency (constant-coefficient models).
    fn tangential_symbol(&self, eta: f64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.tangential_symbol(eta).map_err(err)?))
    }

    /// `(eta, defect)` pairs comparing the Calderon boundary block with the principal symbol.
    fn symbol_limit(&self, ladder: Vec<f64>) -> PyResult<Vec<(f64, f64)>> {
        let r = symbol_limit_check(&self.inner, &ladder).map_err(err)?;
        Ok(r.rows.iter().map(|row| (row.eta, row.defect)).collect())
    }
}

#[pyclass(name = "DoubleSystem", frozen)]
struct PyDoubleSystem {
    inner: DoubleSystem,
}

#[pymethods]
impl PyDoubleSystem {
    #[new]
    #[pyo3(signature = (model, n_u, n_y=1, dense=false))]
    fn new(model: &PyModel, n_u: usize, n_y: usize, dense: bool) -> PyResult<Self> {
        let grid = GridSpec::new(n_u, n_y).map_err(err)?;
        let disc = if dense { Discretization::Dense } else { Discretization::Analytic };
        Ok(Self { inner: DoubleSystem::build(&model.inner, grid, disc).map_err(err)? })
    }

    #[getter]
    fn sigma_min(&self) -> f64 {
        self.inner.certificate().sigma_min
    }

    #[getter]
    fn kernel_dims(&self) -> Vec<usize> {
        self.inner.certificate().kernel_dims.clone()
    }

    #[getter]
    fn modes(&self) -> Vec<i64> {
        self.inner.modes().to_vec()
    }

    fn calderon(&self) -> PyResult<PyProjector> {
        Ok(PyProjector { inner: calderon_projector(&self.inner).map_err(err)? })
    }

    /// Relative index of the APS projection and the orthogonalized Calderon projector.
    fn aps_index(&self) -> PyResult<i64> {
        Ok(calderon_vs_aps_index(&self.inner).map_err(err)?.index)
    }
}

#[pyclass(name = "Projector", frozen)]
struct PyProjector {
    inner: BoundaryProjector,
}

#[pymethods]
impl PyProjector {
    fn matrix(&self) -> Rows {
        to_rows(self.inner.matrix())
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn idempotency(&self) -> f64 {
        self.inner.diagnostics.idempotency
    }

    #[getter]
    fn self_adjointness(&self) -> f64 {
        self.inner.diagnostics.self_adjointness
    }

    #[getter]
    fn a_linearity(&self) -> f64 {
        self.inner.diagnostics.a_linearity
    }

    fn orthogonalized(&self) -> PyResult<PyProjector> {
        Ok(PyProjector { inner: orthogonalized_calderon(&self.inner).map_err(err)?.0 })
    }
}

/// Spectral projection onto the positive eigenvalues by contour integration.
#[pyfunction]
fn spectral_projection(b: Rows) -> PyResult<Rows> {
    Ok(to_rows(&spectral_projection_contour(&to_matrix(&b)?).map_err(err)?.projection))
}

/// Projection onto the eigenvalues `>= 0` of a Hermitian matrix.
#[pyfunction]
fn nonnegative_spectral_projection(b: Rows) -> PyResult<Rows> {
    Ok(to_rows(&nonnegative_projection(&to_matrix(&b)?)))
}

/// Runs a JSON scenario and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (config, out_dir=None))]
fn run(config: &str, out_dir: Option<std::path::PathBuf>) -> PyResult<String> {
    let cfg = ScenarioConfig::from_json(config).map_err(err)?;
    let report = run_scenario(&cfg, out_dir.as_deref()).map_err(err)?;
    serde_json::to_string(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn calderon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAlgebra>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyDoubleSystem>()?;
    m.add_class::<PyProjector>()?;
    m.add_function(wrap_pyfunction!(spectral_projection, m)?)?;
    m.add_function(wrap_pyfunction!(nonnegative_spectral_projection, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
