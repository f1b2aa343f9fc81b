//! Calderon projector of the first copy, its symbol, the spectral (APS)
//! projection of the boundary operator, orthogonalization and the relative index.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Schur;
use serde::Serialize;

use crate::csalg::CStarAlgebra;
use crate::dirac::{gauss_legendre, green_kernel, DoubleSystem, ProductDiracModel};
use crate::error::{Error, Result};
use crate::hilbmod::{
    a_linearity_residual, orthogonalize_idempotent_matrix, relative_index_matrix, ModuleOperator, Orthogonalized,
    RelativeIndex,
};
use crate::linalg::{cr, eye, hermitian_defect, inverse, op_norm, range_basis, zeros, CMat, C64, I};

pub const PINCH_TOL: f64 = 1e-6;
pub const CONTOUR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectorDiagnostics {
    pub idempotency: f64,
    pub self_adjointness: f64,
    pub a_linearity: f64,
}

/// A projector on the boundary data space `A^K`, `K = 2 M 2 r`.
#[derive(Debug, Clone)]
pub struct BoundaryProjector {
    algebra: Arc<CStarAlgebra>,
    matrix: CMat,
    modes: Vec<i64>,
    fiber_dim: usize,
    pub diagnostics: ProjectorDiagnostics,
}

impl BoundaryProjector {
    pub fn new(algebra: &Arc<CStarAlgebra>, matrix: CMat, modes: Vec<i64>, fiber_dim: usize) -> Self {
        let diagnostics = ProjectorDiagnostics {
            idempotency: op_norm(&(&matrix * &matrix - &matrix)),
            self_adjointness: hermitian_defect(&matrix),
            a_linearity: a_linearity_residual(algebra, &matrix),
        };
        Self { algebra: Arc::clone(algebra), matrix, modes, fiber_dim, diagnostics }
    }

    pub fn algebra(&self) -> &Arc<CStarAlgebra> {
        &self.algebra
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_module_operator(&self) -> Result<ModuleOperator> {
        ModuleOperator::new(&self.algebra, self.algebra.project_blocks(&self.matrix))
    }

    /// The `2F x 2F` restriction to mode number `k` (position in the mode list).
    pub fn mode_block(&self, k: usize) -> CMat {
        let f = self.fiber_dim;
        let half = self.matrix.nrows() / 2;
        let idx: Vec<usize> = (0..f).map(|i| k * f + i).chain((0..f).map(|i| half + k * f + i)).collect();
        CMat::from_fn(2 * f, 2 * f, |i, j| self.matrix[(idx[i], idx[j])])
    }

    /// Largest entry coupling different modes.
    pub fn mode_coupling(&self) -> f64 {
        let f = self.fiber_dim;
        let half = self.matrix.nrows() / 2;
        let mode = |i: usize| (i % half) / f;
        let mut worst: f64 = 0.0;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                if mode(i) != mode(j) {
                    worst = worst.max(self.matrix[(i, j)].norm());
                }
            }
        }
        worst
    }
}

/// `C_+ = trace o K`, the Calderon projector of the first copy.
pub fn calderon_projector(sys: &DoubleSystem) -> Result<BoundaryProjector> {
    let c = sys.calderon_matrix()?;
    Ok(BoundaryProjector::new(sys.model().algebra(), c, sys.modes().to_vec(), sys.model().fiber_dim()))
}

/// Orthonormal bases for the Cauchy data of solutions on the first copy and of
/// solutions of the adjoint equation on the second copy, at one frequency.
#[derive(Debug, Clone)]
pub struct CauchySpaces {
    pub first: CMat,
    pub second: CMat,
}

/// Cauchy data from the matrix exponential of the boundary operator:
/// `{(a, e^{-B} a)}` and `{(c, -e^{B} c)}`.
pub fn cauchy_space_oracle(model: &ProductDiracModel, eta: f64) -> Result<CauchySpaces> {
    let b = model.tangential_symbol(eta)?;
    let f = b.nrows();
    let stack = |lower: CMat| {
        let mut m = zeros(2 * f, f);
        m.rows_mut(0, f).copy_from(&eye(f));
        m.rows_mut(f, f).copy_from(&lower);
        range_basis(&m, 1e-12)
    };
    Ok(CauchySpaces { first: stack((-&b).exp()), second: stack(-b.exp()) })
}

/// Projection onto the graph of `T = e^{-B}` along `{(c, -T^{-1} c)}`.
pub fn graph_projection_oracle(model: &ProductDiracModel, eta: f64) -> Result<CMat> {
    let b = model.tangential_symbol(eta)?;
    let f = b.nrows();
    let t = (-&b).exp();
    let m = inverse(&(eye(f) + &t * &t)).ok_or_else(|| Error::Numerical("1 + T^2 is singular".into()))?;
    let mut c = zeros(2 * f, 2 * f);
    c.view_mut((0, 0), (f, f)).copy_from(&m);
    c.view_mut((0, f), (f, f)).copy_from(&(&m * &t));
    c.view_mut((f, 0), (f, f)).copy_from(&(&t * &m));
    c.view_mut((f, f), (f, f)).copy_from(&(&t * &m * &t));
    Ok(c)
}

/// Boundary block of the Calderon projector at the first component and real frequency.
pub fn calderon_boundary_block(model: &ProductDiracModel, eta: f64) -> Result<CMat> {
    let b = model.tangential_symbol(eta)?;
    Ok(crate::linalg::hermitian_function(&b, |l| green_kernel(0.0, l)))
}

#[derive(Debug, Clone)]
pub struct ContourProjection {
    pub projection: CMat,
    pub evaluations: usize,
    pub error_estimate: f64,
}

fn eigenvalues(b: &CMat) -> Vec<C64> {
    if b.nrows() == 1 {
        return vec![b[(0, 0)]];
    }
    Schur::new(b.clone()).eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
}

/// Riesz projection `(1 / 2 pi i) \oint (tau - i b)^{-1} d tau` over the boundary of
/// the upper half disk of radius `2 rho(b) + 1`: the spectral projection of `b`
/// onto eigenvalues with positive real part.
pub fn spectral_projection_contour(b: &CMat) -> Result<ContourProjection> {
    let n = b.nrows();
    let eig = eigenvalues(b);
    let min_abs = eig.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
    if min_abs < PINCH_TOL {
        return Err(Error::ContourPinched { min_abs });
    }
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r = 2.0 * rho + 1.0;
    let ib = b * I;
    let one = eye(n);
    let (gx, gw) = gauss_legendre(10);
    let mut evals = 0usize;
    let panel = |param: &dyn Fn(f64) -> (C64, C64), a: f64, bnd: f64, evals: &mut usize| -> Result<CMat> {
        let mut acc = zeros(n, n);
        let (mid, half) = (0.5 * (a + bnd), 0.5 * (bnd - a));
        for (x, w) in gx.iter().zip(&gw) {
            let (tau, dtau) = param(mid + half * x);
            let res = inverse(&(&one * tau - &ib)).ok_or_else(|| Error::Numerical("resolvent is singular".into()))?;
            acc += res * (dtau * cr(w * half));
            *evals += 1;
        }
        Ok(acc)
    };
    let line = |x: f64| (cr(x), cr(1.0));
    let arc = |t: f64| {
        let z = C64::from_polar(r, t);
        (z, I * z)
    };
    let mut total = zeros(n, n);
    let mut err = 0.0;
    let pieces: [(&dyn Fn(f64) -> (C64, C64), f64, f64, f64); 2] =
        [(&line, -r, r, 2.0 * r), (&arc, 0.0, PI, PI)];
    for (param, a0, b0, len) in pieces {
        let mut stack = vec![(a0, b0, panel(param, a0, b0, &mut evals)?, 0usize)];
        while let Some((a, b1, whole, depth)) = stack.pop() {
            let m = 0.5 * (a + b1);
            let left = panel(param, a, m, &mut evals)?;
            let right = panel(param, m, b1, &mut evals)?;
            let refined = &left + &right;
            let diff = op_norm(&(&refined - &whole));
            if diff <= CONTOUR_TOL * (b1 - a) / len || depth > 40 {
                if depth > 40 {
                    return Err(Error::QuadratureFailed { error: diff });
                }
                total += refined;
                err += diff;
            } else {
                stack.push((a, m, left, depth + 1));
                stack.push((m, b1, right, depth + 1));
            }
        }
    }
    let scale = C64::new(0.0, -1.0 / (2.0 * PI));
    Ok(ContourProjection { projection: total * scale, evaluations: evals, error_estimate: err / (2.0 * PI) })
}

/// Principal symbol of the Calderon projector at frequency `eta`: the positive
/// spectral projection of the leading boundary symbol, tensored with the identity of `A^r`.
pub fn principal_symbol(model: &ProductDiracModel, eta: f64) -> Result<CMat> {
    Ok(spectral_projection_contour(&model.principal_symbol_matrix(eta))?.projection)
}

/// Spectral projection onto eigenvalues `>= 0`, zero modes included.
pub fn nonnegative_projection(b: &CMat) -> CMat {
    let tol = 1e-12 * (1.0 + op_norm(b));
    crate::linalg::hermitian_function(b, |l| if l >= -tol { 1.0 } else { 0.0 })
}

/// APS projection `Pi_+` of the boundary operator at one frequency.
pub fn aps_projection_mode(model: &ProductDiracModel, eta: f64) -> Result<CMat> {
    Ok(nonnegative_projection(&model.tangential_symbol(eta)?))
}

/// APS projection on both boundary components: the boundary operator is `B` at
/// `u = 0` and `-B` at `u = 1` (inward normals), kernel on the positive side.
pub fn aps_projection(sys: &DoubleSystem) -> BoundaryProjector {
    let total = sys.section_dim();
    let mut p = zeros(2 * total, 2 * total);
    let f = sys.model().fiber_dim();
    for blk in sys.blocks() {
        let start = blk.offset * f;
        let len = blk.dim();
        p.view_mut((start, start), (len, len)).copy_from(&nonnegative_projection(&blk.b));
        p.view_mut((total + start, total + start), (len, len)).copy_from(&nonnegative_projection(&(-&blk.b)));
    }
    BoundaryProjector::new(sys.model().algebra(), p, sys.modes().to_vec(), f)
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolLimitRow {
    pub eta: f64,
    pub defect: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolLimitReport {
    pub rows: Vec<SymbolLimitRow>,
    /// Least-squares `K` in `defect ~ K / eta`.
    pub fitted_k: f64,
    /// Relative residual of that fit.
    pub fit_residual: f64,
    /// `max defect * eta`; every row satisfies `defect <= bound_k / eta`.
    pub bound_k: f64,
    pub monotone: bool,
}

/// Values below this are treated as converged to roundoff when checking monotonicity.
pub const SYMBOL_FLOOR: f64 = 1e-13;

/// Compares the first-component boundary block of the Calderon projector with the
/// principal symbol along a frequency ladder.
pub fn symbol_limit_check(model: &ProductDiracModel, ladder: &[f64]) -> Result<SymbolLimitReport> {
    if ladder.len() < 2 || ladder.iter().any(|&e| e <= 0.0) {
        return Err(Error::Config("frequency ladder needs at least two positive values".into()));
    }
    let mut rows = Vec::with_capacity(ladder.len());
    for &eta in ladder {
        let c = calderon_boundary_block(model, eta)?;
        let q = principal_symbol(model, eta)?;
        let defect = op_norm(&(c - q));
        rows.push(SymbolLimitRow { eta, defect, scaled: defect * eta });
    }
    let sxx: f64 = rows.iter().map(|r| 1.0 / (r.eta * r.eta)).sum();
    let sxy: f64 = rows.iter().map(|r| r.defect / r.eta).sum();
    let fitted_k = sxy / sxx;
    let num: f64 = rows.iter().map(|r| (r.defect - fitted_k / r.eta).powi(2)).sum();
    let den: f64 = rows.iter().map(|r| r.defect.powi(2)).sum();
    let bound_k = rows.iter().map(|r| r.scaled).fold(0.0, f64::max);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].defect <= w[0].defect || w[1].defect.max(w[0].defect) < SYMBOL_FLOOR);
    Ok(SymbolLimitReport {
        rows,
        fitted_k,
        fit_residual: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        bound_k,
        monotone,
    })
}

/// Orthogonal projection with the same range as the Calderon projector.
pub fn orthogonalized_calderon(c: &BoundaryProjector) -> Result<(BoundaryProjector, Orthogonalized)> {
    let o = orthogonalize_idempotent_matrix(&c.matrix)?;
    let p = BoundaryProjector::new(&c.algebra, o.projection.clone(), c.modes.clone(), c.fiber_dim);
    Ok((p, o))
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexReport {
    /// Complex dimension count in the defining representation.
    pub index: i64,
    /// `index` divided by the representation dimension, the value of the normalized trace.
    pub trace_index: f64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub rank_aps: usize,
    pub rank_calderon: usize,
    /// Largest `|n|` of the truncated mode set.
    pub truncation: i64,
    pub modes: usize,
}

/// Relative index of the APS projection and the orthogonalized Calderon projector
/// on the common truncated mode set.
pub fn calderon_vs_aps_index(sys: &DoubleSystem) -> Result<IndexReport> {
    let c = calderon_projector(sys)?;
    let (cperp, _) = orthogonalized_calderon(&c)?;
    let aps = aps_projection(sys);
    let RelativeIndex { index, kernel_dim, cokernel_dim, rank_p, rank_q } =
        relative_index_matrix(aps.matrix(), cperp.matrix())?;
    Ok(IndexReport {
        index,
        trace_index: index as f64 / sys.model().algebra().rep_dim() as f64,
        kernel_dim,
        cokernel_dim,
        rank_aps: rank_p,
        rank_calderon: rank_q,
        truncation: sys.modes().iter().map(|m| m.abs()).max().unwrap_or(0),
        modes: sys.modes().len(),
    })
}

/// Eigenvalues of the boundary operator on every kept mode (diagnostics).
pub fn boundary_spectrum(sys: &DoubleSystem) -> Vec<f64> {
    let mut out: Vec<f64> = sys.blocks().iter().flat_map(|b| b.eigenvalues.iter().copied()).collect();
    out.sort_by(f64::total_cmp);
    out
}
