//! Finitely generated Hilbert modules `A^k` over a [`CStarAlgebra`] and
//! adjointable operators between them.
//!
//! A vector of `A^k` is a `(k n) x n` matrix whose `n x n` blocks lie in `A`,
//! with inner product `<x, y> = x^* y` and right action by matrix product.
//! An operator `A^k -> A^m` is a `(m n) x (k n)` matrix with blocks in `A`.

use std::sync::Arc;

use crate::csalg::{CStarAlgebra, Element};
use crate::error::{Error, Result};
use crate::linalg::{
    cr, eye, fro, hermitian_defect, hermitian_eigen, inverse, op_norm, range_basis, singular_values,
    zeros, CMat,
};

/// Relative singular value threshold used for numerical rank decisions.
pub const RANK_REL_TOL: f64 = 1e-9;
pub const DEFAULT_GAP_TOL: f64 = 1e-10;
pub const IDEMPOTENT_TOL: f64 = 1e-8;

fn membership_tol(m: &CMat) -> f64 {
    1e-9 * (1.0 + fro(m))
}

#[derive(Debug, Clone)]
pub struct ModuleVector {
    algebra: Arc<CStarAlgebra>,
    data: CMat,
}

impl ModuleVector {
    pub fn new(algebra: &Arc<CStarAlgebra>, data: CMat) -> Result<Self> {
        let n = algebra.rep_dim();
        if data.ncols() != n || !data.nrows().is_multiple_of(n) || data.nrows() == 0 {
            return Err(Error::Shape(format!(
                "module vector must be (k*{n}) x {n}, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        let r = algebra.block_residual(&data);
        if r > membership_tol(&data) {
            return Err(Error::NotInAlgebra { residual: r });
        }
        Ok(Self { algebra: Arc::clone(algebra), data })
    }

    pub fn from_elements(elements: &[Element]) -> Result<Self> {
        let first = elements.first().ok_or_else(|| Error::Shape("empty module vector".into()))?;
        let algebra = Arc::clone(first.algebra());
        let n = algebra.rep_dim();
        let mut data = zeros(elements.len() * n, n);
        for (i, e) in elements.iter().enumerate() {
            if **e.algebra() != *algebra {
                return Err(Error::AlgebraMismatch("entries from different algebras".into()));
            }
            data.view_mut((i * n, 0), (n, n)).copy_from(e.matrix());
        }
        Ok(Self { algebra, data })
    }

    /// The `i`-th standard basis vector of `A^k`.
    pub fn basis(algebra: &Arc<CStarAlgebra>, rank: usize, i: usize) -> Self {
        let n = algebra.rep_dim();
        let mut data = zeros(rank * n, n);
        data.view_mut((i * n, 0), (n, n)).copy_from(&eye(n));
        Self { algebra: Arc::clone(algebra), data }
    }

    pub fn random<R: rand::Rng + ?Sized>(algebra: &Arc<CStarAlgebra>, rank: usize, rng: &mut R) -> Self {
        Self { algebra: Arc::clone(algebra), data: algebra.random_blocks(rng, rank, 1) }
    }

    pub fn algebra(&self) -> &Arc<CStarAlgebra> {
        &self.algebra
    }

    pub fn rank(&self) -> usize {
        self.data.nrows() / self.algebra.rep_dim()
    }

    pub fn data(&self) -> &CMat {
        &self.data
    }

    pub fn entry(&self, i: usize) -> Element {
        let n = self.algebra.rep_dim();
        self.algebra
            .element(self.data.view((i * n, 0), (n, n)).into_owned())
            .expect("blocks lie in the algebra")
    }

    fn check(&self, other: &Self) -> Result<()> {
        if *self.algebra != *other.algebra {
            return Err(Error::AlgebraMismatch(format!(
                "{} vs {}",
                self.algebra.name(),
                other.algebra.name()
            )));
        }
        if self.data.nrows() != other.data.nrows() {
            return Err(Error::Shape(format!("rank {} vs {}", self.rank(), other.rank())));
        }
        Ok(())
    }

    /// The algebra-valued inner product, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Element> {
        self.check(other)?;
        self.algebra.element(self.data.adjoint() * &other.data)
    }

    pub fn norm(&self) -> f64 {
        op_norm(&(self.data.adjoint() * &self.data)).sqrt()
    }

    pub fn right_mul(&self, a: &Element) -> Result<Self> {
        if **a.algebra() != *self.algebra {
            return Err(Error::AlgebraMismatch("right action by a foreign element".into()));
        }
        Ok(Self { algebra: Arc::clone(&self.algebra), data: &self.data * a.matrix() })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self { algebra: Arc::clone(&self.algebra), data: &self.data + &other.data })
    }

    pub fn scale(&self, z: crate::linalg::C64) -> Self {
        Self { algebra: Arc::clone(&self.algebra), data: &self.data * z }
    }
}

#[derive(Debug, Clone)]
pub struct ModuleOperator {
    algebra: Arc<CStarAlgebra>,
    rows: usize,
    cols: usize,
    matrix: CMat,
}

impl ModuleOperator {
    /// Operator `A^cols -> A^rows` from its block matrix.
    pub fn new(algebra: &Arc<CStarAlgebra>, matrix: CMat) -> Result<Self> {
        let n = algebra.rep_dim();
        if !matrix.nrows().is_multiple_of(n) || !matrix.ncols().is_multiple_of(n) || matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Shape(format!(
                "operator matrix {}x{} is not blocked by {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let r = algebra.block_residual(&matrix);
        if r > membership_tol(&matrix) {
            return Err(Error::NotInAlgebra { residual: r });
        }
        Ok(Self { algebra: Arc::clone(algebra), rows: matrix.nrows() / n, cols: matrix.ncols() / n, matrix })
    }

    pub fn from_blocks(algebra: &Arc<CStarAlgebra>, blocks: &[Vec<Element>]) -> Result<Self> {
        let n = algebra.rep_dim();
        let rows = blocks.len();
        let cols = blocks.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || blocks.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged or empty block matrix".into()));
        }
        let mut m = zeros(rows * n, cols * n);
        for (i, row) in blocks.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if **e.algebra() != **algebra {
                    return Err(Error::AlgebraMismatch("block from a different algebra".into()));
                }
                m.view_mut((i * n, j * n), (n, n)).copy_from(e.matrix());
            }
        }
        Ok(Self { algebra: Arc::clone(algebra), rows, cols, matrix: m })
    }

    pub fn identity(algebra: &Arc<CStarAlgebra>, rank: usize) -> Self {
        let n = algebra.rep_dim();
        Self { algebra: Arc::clone(algebra), rows: rank, cols: rank, matrix: eye(rank * n) }
    }

    pub fn random<R: rand::Rng + ?Sized>(
        algebra: &Arc<CStarAlgebra>,
        rows: usize,
        cols: usize,
        rng: &mut R,
    ) -> Self {
        Self { algebra: Arc::clone(algebra), rows, cols, matrix: algebra.random_blocks(rng, rows, cols) }
    }

    /// The rank-one operator `z -> x <y, z>`.
    pub fn rank_one(x: &ModuleVector, y: &ModuleVector) -> Result<Self> {
        if *x.algebra != *y.algebra {
            return Err(Error::AlgebraMismatch("rank-one operator from different algebras".into()));
        }
        Ok(Self {
            algebra: Arc::clone(&x.algebra),
            rows: x.rank(),
            cols: y.rank(),
            matrix: &x.data * y.data.adjoint(),
        })
    }

    pub fn algebra(&self) -> &Arc<CStarAlgebra> {
        &self.algebra
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> Element {
        let n = self.algebra.rep_dim();
        self.algebra
            .element(self.matrix.view((i * n, j * n), (n, n)).into_owned())
            .expect("blocks lie in the algebra")
    }

    pub fn apply(&self, x: &ModuleVector) -> Result<ModuleVector> {
        if *x.algebra != *self.algebra || x.rank() != self.cols {
            return Err(Error::Shape(format!("operator on A^{} applied to A^{}", self.cols, x.rank())));
        }
        Ok(ModuleVector { algebra: Arc::clone(&self.algebra), data: &self.matrix * &x.data })
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if *other.algebra != *self.algebra || other.rows != self.cols {
            return Err(Error::Shape("incompatible composition".into()));
        }
        Ok(Self { algebra: Arc::clone(&self.algebra), rows: self.rows, cols: other.cols, matrix: &self.matrix * &other.matrix })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if *other.algebra != *self.algebra || other.rows != self.rows || other.cols != self.cols {
            return Err(Error::Shape("incompatible sum".into()));
        }
        Ok(Self { matrix: &self.matrix + &other.matrix, ..self.clone() })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.try_add(&other.scale(cr(-1.0)))
    }

    pub fn scale(&self, z: crate::linalg::C64) -> Self {
        Self { matrix: &self.matrix * z, ..self.clone() }
    }

    pub fn adjoint(&self) -> Self {
        Self { algebra: Arc::clone(&self.algebra), rows: self.cols, cols: self.rows, matrix: self.matrix.adjoint() }
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    /// `|| <T x, y> - <x, T^* y> ||` for the given vectors.
    pub fn adjoint_residual(&self, x: &ModuleVector, y: &ModuleVector) -> Result<f64> {
        let lhs = self.apply(x)?.inner(y)?;
        let rhs = x.inner(&self.adjoint().apply(y)?)?;
        Ok((&lhs - &rhs).norm())
    }

    /// Deviation from commuting with the right action of the algebra.
    pub fn a_linearity_residual(&self) -> f64 {
        a_linearity_residual(&self.algebra, &self.matrix)
    }

    pub fn idempotency_defect(&self) -> f64 {
        op_norm(&(&self.matrix * &self.matrix - &self.matrix))
    }

    pub fn self_adjointness_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }
}

/// For group algebras, the largest commutator with the right regular
/// representation on each block; for matrix algebras every block matrix commutes
/// with the right action, so only the block membership residual is returned.
pub fn a_linearity_residual(algebra: &CStarAlgebra, m: &CMat) -> f64 {
    if !algebra.is_group_algebra() {
        return if m.nrows().is_multiple_of(algebra.rep_dim()) && m.ncols().is_multiple_of(algebra.rep_dim()) { 0.0 } else { f64::INFINITY };
    }
    let (rb, cb) = (m.nrows() / algebra.rep_dim(), m.ncols() / algebra.rep_dim());
    let mut worst: f64 = 0.0;
    for r in algebra.right_regular() {
        let rr = eye(rb).kronecker(r);
        let rc = eye(cb).kronecker(r);
        worst = worst.max(op_norm(&(m * &rc - &rr * m)));
    }
    worst
}

/// Certificate that an operator has closed range.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeGap {
    /// Smallest nonzero eigenvalue of `T^* T`, zero for the zero operator.
    pub gap: f64,
    /// Same quantity computed from `T T^*`.
    pub gap_adjoint: f64,
    /// Complex rank in the defining representation.
    pub rank: usize,
}

pub fn closed_range_gap_matrix(t: &CMat, tol: f64) -> Result<RangeGap> {
    let s = singular_values(t);
    let sa = singular_values(&t.adjoint());
    let top = s.first().copied().unwrap_or(0.0);
    let nonzero = |v: &[f64]| v.iter().copied().filter(|&x| x > RANK_REL_TOL * top && top > 0.0).collect::<Vec<_>>();
    let (nz, nza) = (nonzero(&s), nonzero(&sa));
    if nz.is_empty() {
        return Ok(RangeGap { gap: 0.0, gap_adjoint: 0.0, rank: 0 });
    }
    let gap = nz.last().unwrap().powi(2);
    let gap_adjoint = nza.last().copied().unwrap_or(0.0).powi(2);
    if nz.len() != nza.len() || (gap - gap_adjoint).abs() > 1e-10 * (1.0 + top * top) {
        return Err(Error::Numerical(format!(
            "T*T and TT* disagree on the spectral gap ({gap:.3e} vs {gap_adjoint:.3e})"
        )));
    }
    if gap < tol {
        return Err(Error::NotClosedRange { gap, tol });
    }
    Ok(RangeGap { gap, gap_adjoint, rank: nz.len() })
}

/// Certifies closed range: the smallest nonzero eigenvalue of `T^* T` must be at least `tol`.
pub fn closed_range_gap(t: &ModuleOperator, tol: f64) -> Result<RangeGap> {
    closed_range_gap_matrix(&t.matrix, tol)
}

/// Splitting `A^k = ker T (+) ran T^*` with generators and residuals.
#[derive(Debug, Clone)]
pub struct MishchenkoDecomposition {
    pub kernel_projection: CMat,
    pub range_projection: CMat,
    /// `P e_i` for the standard basis; a Parseval frame of `ker T`.
    pub kernel_generators: Vec<ModuleVector>,
    /// Parseval frame of `ran T^*`.
    pub range_generators: Vec<ModuleVector>,
    pub kernel_dim: usize,
    pub range_dim: usize,
    pub gap: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub invariance: f64,
    pub frame_residual: f64,
}

impl MishchenkoDecomposition {
    /// Module rank of the kernel measured by the normalized trace.
    pub fn kernel_trace_rank(&self, algebra: &CStarAlgebra) -> f64 {
        self.kernel_dim as f64 / algebra.rep_dim() as f64
    }
}

pub fn mishchenko_decompose(t: &ModuleOperator) -> Result<MishchenkoDecomposition> {
    mishchenko_decompose_with(t, DEFAULT_GAP_TOL)
}

pub fn mishchenko_decompose_with(t: &ModuleOperator, gap_tol: f64) -> Result<MishchenkoDecomposition> {
    let cert = closed_range_gap(t, gap_tol)?;
    let m = &t.matrix;
    let dim = m.ncols();
    let (vals, u) = hermitian_eigen(&(m.adjoint() * m));
    let kernel_dim = dim - cert.rank;
    let _ = vals;
    let uk = u.columns(0, kernel_dim).into_owned();
    let p_ker = &uk * uk.adjoint();
    let q = range_basis(&m.adjoint(), RANK_REL_TOL);
    let p_ran = &q * q.adjoint();
    let algebra = &t.algebra;
    let gens = |p: &CMat| -> Vec<ModuleVector> {
        (0..t.cols)
            .map(|i| {
                let e = ModuleVector::basis(algebra, t.cols, i);
                ModuleVector { algebra: Arc::clone(algebra), data: p * &e.data }
            })
            .collect()
    };
    let kernel_generators = gens(&p_ker);
    let range_generators = gens(&p_ran);
    let mut frame = zeros(dim, dim);
    for g in kernel_generators.iter().chain(&range_generators) {
        frame += &g.data * g.data.adjoint();
    }
    let frame_residual = op_norm(&(frame - (&p_ker + &p_ran)));
    let invariance = a_linearity_residual(algebra, &p_ker).max(a_linearity_residual(algebra, &p_ran));
    Ok(MishchenkoDecomposition {
        orthogonality: op_norm(&(&p_ker * &p_ran)),
        completeness: op_norm(&(&p_ker + &p_ran - eye(dim))),
        kernel_dim,
        range_dim: q.ncols(),
        gap: cert.gap,
        invariance,
        frame_residual,
        kernel_projection: p_ker,
        range_projection: p_ran,
        kernel_generators,
        range_generators,
    })
}

/// Result of replacing an idempotent by the orthogonal projection onto its range.
#[derive(Debug, Clone)]
pub struct Orthogonalized {
    pub projection: CMat,
    /// Smallest eigenvalue of `C C^* + (1 - C^*)(1 - C)`.
    pub min_eigenvalue: f64,
}

pub fn orthogonalize_idempotent_matrix(c: &CMat) -> Result<Orthogonalized> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::Shape("idempotent must be square".into()));
    }
    let defect = op_norm(&(c * c - c));
    if defect >= IDEMPOTENT_TOL {
        return Err(Error::NotIdempotent { defect });
    }
    let one = eye(n);
    let cs = c.adjoint();
    let f = c * &cs + (&one - &cs) * (&one - c);
    let (vals, _) = hermitian_eigen(&f);
    let min_eigenvalue = vals.first().copied().unwrap_or(1.0);
    let finv = inverse(&f).ok_or_else(|| Error::Numerical("orthogonalizing operator is singular".into()))?;
    Ok(Orthogonalized { projection: c * cs * finv, min_eigenvalue })
}

pub fn orthogonalize_idempotent(c: &ModuleOperator) -> Result<(ModuleOperator, Orthogonalized)> {
    let o = orthogonalize_idempotent_matrix(&c.matrix)?;
    let p = ModuleOperator { matrix: c.algebra.project_blocks(&o.projection), ..c.clone() };
    Ok((p, o))
}

/// Index of `Q P : ran P -> ran Q` for two orthogonal projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelativeIndex {
    pub index: i64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub rank_p: usize,
    pub rank_q: usize,
}

fn check_projection(p: &CMat, name: &str) -> Result<()> {
    let idem = op_norm(&(p * p - p));
    let sa = hermitian_defect(p);
    if idem > IDEMPOTENT_TOL || sa > IDEMPOTENT_TOL {
        return Err(Error::NotProjection(format!(
            "{name}: idempotency defect {idem:.3e}, self-adjointness defect {sa:.3e}"
        )));
    }
    Ok(())
}

pub fn relative_index_matrix(p: &CMat, q: &CMat) -> Result<RelativeIndex> {
    if p.shape() != q.shape() || p.nrows() != p.ncols() {
        return Err(Error::Shape("projections must be square and of equal size".into()));
    }
    check_projection(p, "P")?;
    check_projection(q, "Q")?;
    let bp = range_basis(p, 0.5);
    let bq = range_basis(q, 0.5);
    let m = bq.adjoint() * &bp;
    let r = singular_values(&m).iter().filter(|&&s| s > RANK_REL_TOL).count();
    let kernel_dim = bp.ncols() - r;
    let cokernel_dim = bq.ncols() - r;
    Ok(RelativeIndex {
        index: kernel_dim as i64 - cokernel_dim as i64,
        kernel_dim,
        cokernel_dim,
        rank_p: bp.ncols(),
        rank_q: bq.ncols(),
    })
}

pub fn relative_index(p: &ModuleOperator, q: &ModuleOperator) -> Result<RelativeIndex> {
    if *p.algebra != *q.algebra {
        return Err(Error::AlgebraMismatch("projections over different algebras".into()));
    }
    relative_index_matrix(&p.matrix, &q.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, from_real};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inner_product_axioms_for_s3() {
        let a = CStarAlgebra::symmetric(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = ModuleVector::random(&a, 2, &mut rng);
        let y = ModuleVector::random(&a, 2, &mut rng);
        let b = a.random_element(&mut rng);
        let lhs = x.inner(&y.right_mul(&b).unwrap()).unwrap();
        let rhs = &x.inner(&y).unwrap() * &b;
        assert!(lhs.approx_eq(&rhs, 1e-12));
        let sym = y.inner(&x).unwrap().star();
        assert!(sym.approx_eq(&x.inner(&y).unwrap(), 1e-12));
        assert!(x.inner(&x).unwrap().is_positive(1e-10));
    }

    #[test]
    fn rank_one_operator_acts_by_inner_product() {
        let a = CStarAlgebra::matrix(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = ModuleVector::random(&a, 3, &mut rng);
        let y = ModuleVector::random(&a, 2, &mut rng);
        let z = ModuleVector::random(&a, 2, &mut rng);
        let theta = ModuleOperator::rank_one(&x, &y).unwrap();
        let lhs = theta.apply(&z).unwrap();
        let rhs = x.right_mul(&y.inner(&z).unwrap()).unwrap();
        assert!(fro(&(lhs.data() - rhs.data())) < 1e-12);
    }

    #[test]
    fn ill_conditioned_diagonal_is_not_closed() {
        let a = CStarAlgebra::complex();
        let t = ModuleOperator::new(&a, from_real(2, 2, &[1.0, 0.0, 0.0, 1e-3])).unwrap();
        match closed_range_gap(&t, 1e-2) {
            Err(Error::NotClosedRange { gap, .. }) => assert!((gap - 1e-6).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn projection_onto_first_factor() {
        let a = CStarAlgebra::complex();
        let t = ModuleOperator::new(&a, from_real(1, 2, &[1.0, 0.0])).unwrap();
        let d = mishchenko_decompose(&t).unwrap();
        assert_eq!((d.kernel_dim, d.range_dim), (1, 1));
        assert!(fro(&(d.kernel_projection - from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]))) < 1e-12);
        assert!(d.completeness < 1e-12 && d.orthogonality < 1e-12 && d.frame_residual < 1e-12);
    }

    #[test]
    fn oblique_idempotent_becomes_orthogonal() {
        let c0 = from_real(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let o = orthogonalize_idempotent_matrix(&c0).unwrap();
        assert!(fro(&(o.projection - from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]))) < 1e-12);
        let bad = from_real(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        assert!(matches!(orthogonalize_idempotent_matrix(&bad), Err(Error::NotIdempotent { .. })));
    }

    #[test]
    fn relative_index_of_nested_projections() {
        let p = from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let q = from_real(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = relative_index_matrix(&p, &q).unwrap();
        assert_eq!((r.index, r.kernel_dim, r.cokernel_dim), (1, 1, 0));
        assert_eq!(relative_index_matrix(&q, &q).unwrap().index, 0);
        let mut bad = q.clone();
        bad[(0, 1)] = c(0.3, 0.0);
        assert!(relative_index_matrix(&bad, &q).is_err());
    }

    #[test]
    fn non_member_operator_is_rejected() {
        let a = CStarAlgebra::cyclic(2).unwrap();
        let m = from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(ModuleOperator::new(&a, m.clone()), Err(Error::NotInAlgebra { .. })));
        assert!(a_linearity_residual(&a, &m) > 0.1);
    }
}
