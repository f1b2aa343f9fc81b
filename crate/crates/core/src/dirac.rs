//! Product-type twisted Dirac operators `G (d/du + B)` on a segment or a cylinder
//! `[0, 1] x S^1`, the invertible double obtained by gluing two copies, and the
//! certificates attached to it.
//!
//! The second copy carries the formal adjoint `(-d/du + B) G^*`. Gluing uses
//! `s2(0) = G s1(0)` and `s2(1) = -G s1(1)`. With `rho = G^* s2` the pair
//! `(s1, rho)` is the same as one antiperiodic section of length 2,
//! `tau(w) = s1(w)` on `[0, 1]` and `tau(w) = -rho(2 - w)` on `[1, 2]`,
//! so the double is `G (d/dw + B)` on an antiperiodic circle.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Schur;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::csalg::CStarAlgebra;
use crate::error::{Error, Result};
use crate::hilbmod::RANK_REL_TOL;
use crate::linalg::{cr, eye, fro, hermitian_defect, hermitian_eigen, kron, op_norm, singular_values, zeros, CMat, C64, I};
use crate::sobolev::{Domain, Fiber, GridFunction, GridSpec, LEN_Y};

pub const COMMUTATOR_TOL: f64 = 1e-10;
pub const INJECTIVITY_TOL: f64 = 1e-10;

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), -I, I, cr(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    Analytic,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    One,
    Two,
}

#[derive(Debug, Clone)]
enum Base {
    Segment { b: CMat },
    Cylinder { potential: Vec<(i64, CMat)>, holonomy: CMat, shift: CMat },
}

/// `D = G (d/du + B)` with `G = i sigma_y (x) 1` on `C^2 (x) A^r`.
#[derive(Debug, Clone)]
pub struct ProductDiracModel {
    algebra: Arc<CStarAlgebra>,
    rank: usize,
    base: Base,
}

fn check_blocks(algebra: &CStarAlgebra, m: &CMat, what: &str) -> Result<()> {
    let r = algebra.block_residual(m);
    if r > 1e-9 * (1.0 + fro(m)) {
        return Err(Error::InvalidModel(format!("{what} is not a matrix over the algebra (residual {r:.2e})")));
    }
    Ok(())
}

/// Hermitian logarithm of a unitary divided by `2 pi`, eigenvalues in `(-1/2, 1/2]`.
fn unitary_log_over_2pi(h: &CMat) -> Result<CMat> {
    let n = h.nrows();
    if op_norm(&(h.adjoint() * h - eye(n))) > 1e-10 {
        return Err(Error::InvalidModel("holonomy is not unitary".into()));
    }
    let (q, t) = Schur::new(h.clone()).unpack();
    let mut d = zeros(n, n);
    for i in 0..n {
        let mut a = t[(i, i)].arg();
        if a <= -PI + 1e-9 {
            a = PI;
        }
        d[(i, i)] = cr(a / (2.0 * PI));
    }
    Ok(&q * d * q.adjoint())
}

impl ProductDiracModel {
    /// Segment model with a fixed self-adjoint `B` on `C^2 (x) A^r` anticommuting with `G`.
    pub fn segment(algebra: &Arc<CStarAlgebra>, rank: usize, b: CMat) -> Result<Self> {
        let f = 2 * rank * algebra.rep_dim();
        if rank == 0 || b.nrows() != f || b.ncols() != f {
            return Err(Error::InvalidModel(format!("B must be {f}x{f}")));
        }
        if hermitian_defect(&b) > 1e-12 * (1.0 + op_norm(&b)) {
            return Err(Error::InvalidModel("B is not self-adjoint".into()));
        }
        check_blocks(algebra, &b, "B")?;
        let model = Self { algebra: Arc::clone(algebra), rank, base: Base::Segment { b } };
        let g = model.gluing();
        let b = model.segment_operator().expect("segment");
        let ac = op_norm(&(&g * b + b * &g));
        if ac > COMMUTATOR_TOL * (1.0 + op_norm(b)) {
            return Err(Error::InvalidModel(format!("B does not anticommute with G (defect {ac:.2e})")));
        }
        Ok(model)
    }

    /// Segment model with `B = sigma_x (x) w + sigma_z (x) v` for self-adjoint `v, w` over `A^r`.
    pub fn segment_from_potentials(algebra: &Arc<CStarAlgebra>, v: &CMat, w: &CMat) -> Result<Self> {
        let rn = v.nrows();
        if !rn.is_multiple_of(algebra.rep_dim()) || w.shape() != v.shape() {
            return Err(Error::InvalidModel("potentials must be square over A^r".into()));
        }
        let b = kron(&pauli_x(), w) + kron(&pauli_z(), v);
        Self::segment(algebra, rn / algebra.rep_dim(), b)
    }

    /// Cylinder model with `B = sigma_x (x) (-i d/dy + log(h) / 2 pi) + sigma_z (x) V(y)`,
    /// `V(y) = sum_m V_m e^{i m y}`. Only `m >= 0` is given; `V_{-m} = V_m^*`.
    pub fn cylinder(
        algebra: &Arc<CStarAlgebra>,
        rank: usize,
        potential: Vec<(i64, CMat)>,
        holonomy: Option<CMat>,
    ) -> Result<Self> {
        let rn = rank * algebra.rep_dim();
        if rank == 0 {
            return Err(Error::InvalidModel("twist rank must be positive".into()));
        }
        let mut full: Vec<(i64, CMat)> = Vec::new();
        for (m, vm) in &potential {
            if vm.nrows() != rn || vm.ncols() != rn {
                return Err(Error::InvalidModel(format!("potential coefficient must be {rn}x{rn}")));
            }
            if *m < 0 {
                return Err(Error::InvalidModel("give potential coefficients for m >= 0 only".into()));
            }
            check_blocks(algebra, vm, "potential")?;
            if *m == 0 {
                if hermitian_defect(vm) > 1e-12 * (1.0 + op_norm(vm)) {
                    return Err(Error::InvalidModel("mean of the potential is not self-adjoint".into()));
                }
                full.push((0, crate::linalg::hermitian_part(vm)));
            } else {
                full.push((*m, vm.clone()));
                full.push((-m, vm.adjoint()));
            }
        }
        let holonomy = holonomy.unwrap_or_else(|| eye(rn));
        if holonomy.shape() != (rn, rn) {
            return Err(Error::InvalidModel(format!("holonomy must be {rn}x{rn}")));
        }
        check_blocks(algebra, &holonomy, "holonomy")?;
        for (_, vm) in &full {
            let c = op_norm(&(&holonomy * vm - vm * &holonomy));
            if c > COMMUTATOR_TOL {
                return Err(Error::InvalidModel(format!("holonomy does not commute with the potential ({c:.2e})")));
            }
        }
        let shift = algebra_project_hermitian(algebra, &unitary_log_over_2pi(&holonomy)?);
        Ok(Self { algebra: Arc::clone(algebra), rank, base: Base::Cylinder { potential: full, holonomy, shift } })
    }

    /// Cylinder with a constant potential and scalar holonomy `e^{i phase}`.
    pub fn cylinder_constant(algebra: &Arc<CStarAlgebra>, v: CMat, phase: f64) -> Result<Self> {
        let rn = v.nrows();
        let rank = rn / algebra.rep_dim();
        let h = eye(rn) * C64::from_polar(1.0, phase);
        Self::cylinder(algebra, rank, vec![(0, v)], Some(h))
    }

    pub fn algebra(&self) -> &Arc<CStarAlgebra> {
        &self.algebra
    }

    pub fn twist_rank(&self) -> usize {
        self.rank
    }

    pub fn is_cylinder(&self) -> bool {
        matches!(self.base, Base::Cylinder { .. })
    }

    /// Complex fiber dimension `2 r n`.
    pub fn fiber_dim(&self) -> usize {
        2 * self.rank * self.algebra.rep_dim()
    }

    pub fn fiber(&self) -> Fiber {
        Fiber::new(&self.algebra, self.rank, 2)
    }

    pub fn gluing(&self) -> CMat {
        kron(&(pauli_y() * I), &eye(self.rank * self.algebra.rep_dim()))
    }

    pub fn segment_operator(&self) -> Option<&CMat> {
        match &self.base {
            Base::Segment { b } => Some(b),
            Base::Cylinder { .. } => None,
        }
    }

    pub fn holonomy(&self) -> Option<&CMat> {
        match &self.base {
            Base::Cylinder { holonomy, .. } => Some(holonomy),
            Base::Segment { .. } => None,
        }
    }

    pub fn has_trivial_holonomy(&self) -> bool {
        match &self.base {
            Base::Cylinder { shift, .. } => fro(shift) < 1e-14,
            Base::Segment { .. } => true,
        }
    }

    /// `y`-independent potential (or segment).
    pub fn is_constant_coefficient(&self) -> bool {
        match &self.base {
            Base::Segment { .. } => true,
            Base::Cylinder { potential, .. } => potential.iter().all(|(m, v)| *m == 0 || fro(v) == 0.0),
        }
    }

    fn potential_coefficient(&self, m: i64) -> CMat {
        let rn = self.rank * self.algebra.rep_dim();
        match &self.base {
            Base::Cylinder { potential, .. } => potential
                .iter()
                .filter(|(k, _)| *k == m)
                .fold(zeros(rn, rn), |acc, (_, v)| acc + v),
            Base::Segment { .. } => zeros(rn, rn),
        }
    }

    /// Potential at a point of the circle.
    pub fn potential_at(&self, y: f64) -> CMat {
        let rn = self.rank * self.algebra.rep_dim();
        match &self.base {
            Base::Cylinder { potential, .. } => potential
                .iter()
                .fold(zeros(rn, rn), |acc, (m, v)| acc + v * C64::from_polar(1.0, *m as f64 * y)),
            Base::Segment { .. } => zeros(rn, rn),
        }
    }

    /// Boundary operator at real frequency `eta` for a constant-coefficient model.
    pub fn tangential_symbol(&self, eta: f64) -> Result<CMat> {
        match &self.base {
            Base::Segment { b } => Ok(b.clone()),
            Base::Cylinder { shift, .. } => {
                if !self.is_constant_coefficient() {
                    return Err(Error::Unsupported("frequency symbol needs a constant potential".into()));
                }
                let rn = self.rank * self.algebra.rep_dim();
                Ok(kron(&pauli_x(), &(eye(rn) * cr(eta) + shift)) + kron(&pauli_z(), &self.potential_coefficient(0)))
            }
        }
    }

    /// Leading part `sigma_x eta (x) 1` of the boundary symbol.
    pub fn principal_symbol_matrix(&self, eta: f64) -> CMat {
        kron(&(pauli_x() * cr(eta)), &eye(self.rank * self.algebra.rep_dim()))
    }

    /// Galerkin matrix of the boundary operator on the span of the given Fourier modes.
    pub fn mode_operator(&self, modes: &[i64]) -> CMat {
        match &self.base {
            Base::Segment { b } => b.clone(),
            Base::Cylinder { shift, .. } => {
                let rn = self.rank * self.algebra.rep_dim();
                let f = 2 * rn;
                let mut out = zeros(f * modes.len(), f * modes.len());
                for (a, &na) in modes.iter().enumerate() {
                    for (b, &nb) in modes.iter().enumerate() {
                        let mut blk = kron(&pauli_z(), &self.potential_coefficient(na - nb));
                        if a == b {
                            blk += kron(&pauli_x(), &(eye(rn) * cr(na as f64) + shift));
                        }
                        out.view_mut((a * f, b * f), (f, f)).copy_from(&blk);
                    }
                }
                out
            }
        }
    }

    /// Fourier modes kept on a grid: `|n| <= n_y / 3`, a single mode for the segment.
    pub fn modes(&self, grid: &GridSpec) -> Result<Vec<i64>> {
        grid.validate()?;
        match self.base {
            Base::Segment { .. } => {
                if grid.n_y != 1 {
                    return Err(Error::InvalidGrid("the segment model needs n_y = 1".into()));
                }
                Ok(vec![0])
            }
            Base::Cylinder { .. } => {
                if grid.n_y == 1 {
                    return Err(Error::InvalidGrid("the cylinder model needs n_y >= 8".into()));
                }
                let k = (grid.n_y / 3) as i64;
                Ok((-k..=k).collect())
            }
        }
    }

    /// Measure of the boundary hypersurface used in `L^2` pairings.
    pub fn boundary_measure(&self) -> f64 {
        if self.is_cylinder() {
            LEN_Y
        } else {
            1.0
        }
    }
}

fn algebra_project_hermitian(algebra: &CStarAlgebra, m: &CMat) -> CMat {
    crate::linalg::hermitian_part(&algebra.project_blocks(m))
}

/// Antiperiodic Green kernel of `d/dw + lambda` on a circle of length 2 at
/// separation `d` in `(0, 2]`.
pub fn green_kernel(d: f64, lambda: f64) -> f64 {
    if lambda >= 0.0 {
        (-d * lambda).exp() / (1.0 + (-2.0 * lambda).exp())
    } else {
        ((2.0 - d) * lambda).exp() / (1.0 + (2.0 * lambda).exp())
    }
}

/// Kernel including the sign for negative separations in `[-2, 0)`.
fn signed_kernel(d: f64, lambda: f64) -> f64 {
    if d > 0.0 {
        green_kernel(d, lambda)
    } else {
        -green_kernel(d + 2.0, lambda)
    }
}

/// Fourth-order finite-difference first derivative on `m + 1` uniform nodes.
pub fn derivative_matrix(m: usize, h: f64) -> nalgebra::DMatrix<f64> {
    assert!(m >= 4, "need at least four intervals");
    let mut d = nalgebra::DMatrix::<f64>::zeros(m + 1, m + 1);
    let edge0 = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let edge1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
    let mid = [1.0, -8.0, 0.0, 8.0, -1.0];
    for j in 0..5 {
        d[(0, j)] = edge0[j];
        d[(1, j)] = edge1[j];
        d[(m, m - j)] = -edge0[j];
        d[(m - 1, m - j)] = -edge1[j];
    }
    for i in 2..m - 1 {
        for j in 0..5 {
            d[(i, i + j - 2)] = mid[j];
        }
    }
    d / (12.0 * h)
}

/// Composite Simpson weights on `m + 1` nodes (`m` even).
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    assert!(m.is_multiple_of(2));
    (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * h / 3.0
        })
        .collect()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, z);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * z * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (z * q1 - q0) / (z * z - 1.0);
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
        x[i] = z;
    }
    (x, w)
}

/// Nodes and weights of a composite Gauss-Legendre rule on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let len = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * len;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * len * (xi + 1.0), 0.5 * len * wi));
        }
    }
    out
}

/// One group of Fourier modes coupled by the potential.
#[derive(Debug, Clone)]
pub struct ModeBlock {
    /// Positions of the block's modes in the mode list.
    pub offset: usize,
    pub modes: Vec<i64>,
    pub b: CMat,
    pub gluing: CMat,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    dense: Option<DenseBlock>,
}

#[derive(Debug, Clone)]
struct DenseBlock {
    intervals: usize,
    h: f64,
    deriv: nalgebra::DMatrix<f64>,
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    matrix: CMat,
}

/// Certificates of invertibility for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockCertificate {
    /// Kernel dimension of the transmission problem (analytic) or of the square
    /// discrete system (dense), from an SVD rank.
    pub kernel_dim: usize,
    /// Lower bound `sigma` in `|| D s || >= sigma || s ||`.
    pub sigma_min: f64,
    /// Smallest singular value of the zero-trace problem on the first copy.
    pub ghost_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityCertificate {
    pub sigma_min: f64,
    /// Constant `C` with `|| s || <= C || D s ||`.
    pub lower_bound_constant: f64,
    pub kernel_dims: Vec<usize>,
    pub ghost_sigma_min: f64,
    pub blocks: Vec<BlockCertificate>,
}

impl ModeBlock {
    pub fn dim(&self) -> usize {
        self.b.nrows()
    }

    /// `U diag(f(lambda)) U^*`.
    pub fn spectral(&self, f: impl Fn(f64) -> f64) -> CMat {
        let u = &self.eigenvectors;
        let d = CMat::from_diagonal(&crate::linalg::CVec::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&l| cr(f(l))),
        ));
        u * d * u.adjoint()
    }

    fn to_eigen(&self, v: &CMat) -> CMat {
        self.eigenvectors.adjoint() * v
    }

    fn from_eigen(&self, v: &CMat) -> CMat {
        &self.eigenvectors * v
    }

    fn scale_rows(&self, v: &CMat, f: impl Fn(f64) -> f64) -> CMat {
        let mut out = v.clone();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            let s = cr(f(l));
            out.row_mut(i).iter_mut().for_each(|z| *z *= s);
        }
        out
    }

    fn analytic_certificate(&self) -> BlockCertificate {
        let f = self.dim();
        let u = &self.eigenvectors;
        let diag = |g: &dyn Fn(f64) -> f64| {
            CMat::from_diagonal(&crate::linalg::CVec::from_iterator(f, self.eigenvalues.iter().map(|&l| cr(g(l)))))
        };
        let pos = |l: f64| l >= 0.0;
        let s1_at0 = diag(&|l| if pos(l) { 1.0 } else { l.exp() });
        let s1_at1 = diag(&|l| if pos(l) { (-l).exp() } else { 1.0 });
        let r_at0 = diag(&|l| if pos(l) { (-l).exp() } else { 1.0 });
        let r_at1 = diag(&|l| if pos(l) { 1.0 } else { l.exp() });
        let mut t = zeros(2 * f, 2 * f);
        t.view_mut((0, 0), (f, f)).copy_from(&(-(u * &s1_at0)));
        t.view_mut((0, f), (f, f)).copy_from(&(u * &r_at0));
        t.view_mut((f, 0), (f, f)).copy_from(&(u * &s1_at1));
        t.view_mut((f, f), (f, f)).copy_from(&(u * &r_at1));
        let s = singular_values(&t);
        let rank = s.iter().filter(|&&x| x > RANK_REL_TOL * s[0]).count();
        let mut stacked = zeros(2 * f, f);
        stacked.view_mut((0, 0), (f, f)).copy_from(&(u * &s1_at0));
        stacked.view_mut((f, 0), (f, f)).copy_from(&(u * &s1_at1));
        let lmin = self.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
        BlockCertificate {
            kernel_dim: 2 * f - rank,
            sigma_min: (PI * PI / 4.0 + lmin * lmin).sqrt(),
            ghost_sigma: crate::linalg::sigma_min(&stacked),
        }
    }
}

fn dense_operator(b: &CMat, g: &CMat, m: usize) -> (CMat, nalgebra::DMatrix<f64>, f64) {
    let f = b.nrows();
    let h = 1.0 / m as f64;
    let d = derivative_matrix(m, h);
    let gs = g.adjoint();
    let n = 2 * (m + 1) * f;
    let mut a = zeros(n, n);
    let xs = |j: usize| j * f;
    let ss = |j: usize| (m + 1) * f + j * f;
    let gb = g * b;
    let bgs = b * &gs;
    for i in 0..m {
        let r = i * f;
        for j in 0..=m {
            if d[(i, j)] != 0.0 {
                a.view_mut((r, xs(j)), (f, f)).copy_from(&(g * cr(d[(i, j)])));
            }
        }
        let mut blk = a.view((r, xs(i)), (f, f)).into_owned();
        blk += &gb;
        a.view_mut((r, xs(i)), (f, f)).copy_from(&blk);
    }
    for i in 1..=m {
        let r = (m + i - 1) * f;
        for j in 0..=m {
            if d[(i, j)] != 0.0 {
                a.view_mut((r, ss(j)), (f, f)).copy_from(&(&gs * cr(-d[(i, j)])));
            }
        }
        let mut blk = a.view((r, ss(i)), (f, f)).into_owned();
        blk += &bgs;
        a.view_mut((r, ss(i)), (f, f)).copy_from(&blk);
    }
    let r0 = 2 * m * f;
    let r1 = r0 + f;
    let ih = cr(1.0 / h);
    a.view_mut((r0, xs(0)), (f, f)).copy_from(&(g * ih));
    a.view_mut((r0, ss(0)), (f, f)).copy_from(&(-eye(f) * ih));
    a.view_mut((r1, xs(m)), (f, f)).copy_from(&(-g * ih));
    a.view_mut((r1, ss(m)), (f, f)).copy_from(&(-eye(f) * ih));
    (a, d, h)
}

/// Smallest singular value of the discrete double on sections that satisfy the
/// transmission conditions exactly, with the equations imposed at every node of
/// both copies. Unknowns are the first-copy values and `rho = G^* s2` at the
/// interior nodes; `rho(0) = s1(0)` and `rho(1) = -s1(1)`.
fn restricted_sigma_min(b: &CMat, deriv: &nalgebra::DMatrix<f64>, m: usize) -> f64 {
    let f = b.nrows();
    let cols = 2 * m * f;
    let rho = |i: usize| -> (usize, f64) {
        if i == 0 {
            (0, 1.0)
        } else if i == m {
            (m * f, -1.0)
        } else {
            ((m + i) * f, 1.0)
        }
    };
    let mut r = zeros(2 * (m + 1) * f, cols);
    for i in 0..=m {
        let row = i * f;
        for j in 0..=m {
            if deriv[(i, j)] != 0.0 {
                let mut blk = r.view((row, j * f), (f, f)).into_owned();
                blk += eye(f) * cr(deriv[(i, j)]);
                r.view_mut((row, j * f), (f, f)).copy_from(&blk);
            }
        }
        let mut blk = r.view((row, i * f), (f, f)).into_owned();
        blk += b;
        r.view_mut((row, i * f), (f, f)).copy_from(&blk);
        let row = (m + 1 + i) * f;
        for j in 0..=m {
            if deriv[(i, j)] != 0.0 {
                let (c, sg) = rho(j);
                let mut blk = r.view((row, c), (f, f)).into_owned();
                blk += eye(f) * cr(-sg * deriv[(i, j)]);
                r.view_mut((row, c), (f, f)).copy_from(&blk);
            }
        }
        let (c, sg) = rho(i);
        let mut blk = r.view((row, c), (f, f)).into_owned();
        blk += b * cr(sg);
        r.view_mut((row, c), (f, f)).copy_from(&blk);
    }
    crate::linalg::sigma_min(&r)
}

fn dense_certificate(blk: &ModeBlock, dense: &DenseBlock) -> BlockCertificate {
    let f = blk.dim();
    let m = dense.intervals;
    let sv = singular_values(&dense.matrix);
    let rank = sv.iter().filter(|&&x| x > RANK_REL_TOL * sv[0]).count();
    let sigma = restricted_sigma_min(&blk.b, &dense.deriv, m);
    let mut ghost = zeros((m + 3) * f, (m + 1) * f);
    for i in 0..=m {
        for j in 0..=m {
            if dense.deriv[(i, j)] != 0.0 {
                ghost.view_mut((i * f, j * f), (f, f)).copy_from(&(&blk.gluing * cr(dense.deriv[(i, j)])));
            }
        }
        let mut d = ghost.view((i * f, i * f), (f, f)).into_owned();
        d += &blk.gluing * &blk.b;
        ghost.view_mut((i * f, i * f), (f, f)).copy_from(&d);
    }
    let ih = cr(1.0 / dense.h);
    ghost.view_mut(((m + 1) * f, 0), (f, f)).copy_from(&(eye(f) * ih));
    ghost.view_mut(((m + 2) * f, m * f), (f, f)).copy_from(&(eye(f) * ih));
    BlockCertificate {
        kernel_dim: sv.len() - rank,
        sigma_min: sigma,
        ghost_sigma: crate::linalg::sigma_min(&ghost),
    }
}

/// Boundary data on the two boundary components: a `(2 M F) x n` matrix
/// with blocks `[component][mode][fiber]`, `M` modes and fiber dimension `F`.
pub type BoundaryData = CMat;

/// The invertible double of a product model on a grid.
#[derive(Debug, Clone)]
pub struct DoubleSystem {
    model: ProductDiracModel,
    grid: GridSpec,
    discretization: Discretization,
    modes: Vec<i64>,
    blocks: Vec<ModeBlock>,
    certificate: InjectivityCertificate,
}

/// Nodal values of a section on both copies: `[node] -> (M F) x n`.
#[derive(Debug, Clone)]
pub struct DoubleSection {
    pub nodes: Vec<f64>,
    pub side_one: Vec<CMat>,
    pub side_two: Vec<CMat>,
}

/// A source term given as a function of the side and the normal coordinate,
/// values `(M F) x n`.
pub type Source<'a> = dyn Fn(Side, f64) -> CMat + Sync + 'a;

impl DoubleSystem {
    pub fn build(model: &ProductDiracModel, grid: GridSpec, discretization: Discretization) -> Result<Self> {
        let modes = model.modes(&grid)?;
        let g = model.gluing();
        let groups: Vec<(usize, Vec<i64>)> = if model.is_constant_coefficient() {
            modes.iter().enumerate().map(|(i, &n)| (i, vec![n])).collect()
        } else {
            vec![(0, modes.clone())]
        };
        let m = grid.n_u / 2;
        let built: Vec<(ModeBlock, BlockCertificate)> = groups
            .into_par_iter()
            .map(|(offset, ms)| {
                let b = model.mode_operator(&ms);
                let gl = kron(&eye(ms.len()), &g);
                let (vals, vecs) = hermitian_eigen(&b);
                let mut blk =
                    ModeBlock { offset, modes: ms, b, gluing: gl, eigenvalues: vals, eigenvectors: vecs, dense: None };
                let cert = match discretization {
                    Discretization::Analytic => blk.analytic_certificate(),
                    Discretization::Dense => {
                        let (a, deriv, h) = dense_operator(&blk.b, &blk.gluing, m);
                        let dense = DenseBlock { intervals: m, h, deriv, lu: a.clone().lu(), matrix: a };
                        let c = dense_certificate(&blk, &dense);
                        blk.dense = Some(dense);
                        c
                    }
                };
                (blk, cert)
            })
            .collect();
        let (blocks, certs): (Vec<_>, Vec<_>) = built.into_iter().unzip();
        let sigma_min = certs.iter().map(|c| c.sigma_min).fold(f64::INFINITY, f64::min);
        let certificate = InjectivityCertificate {
            sigma_min,
            lower_bound_constant: 1.0 / sigma_min,
            kernel_dims: certs.iter().map(|c| c.kernel_dim).collect(),
            ghost_sigma_min: certs.iter().map(|c| c.ghost_sigma).fold(f64::INFINITY, f64::min),
            blocks: certs,
        };
        if sigma_min < INJECTIVITY_TOL || certificate.kernel_dims.iter().any(|&k| k > 0) {
            return Err(Error::NotInjective { sigma: sigma_min });
        }
        Ok(Self { model: model.clone(), grid, discretization, modes, blocks, certificate })
    }

    pub fn model(&self) -> &ProductDiracModel {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn discretization(&self) -> Discretization {
        self.discretization
    }

    pub fn modes(&self) -> &[i64] {
        &self.modes
    }

    pub fn blocks(&self) -> &[ModeBlock] {
        &self.blocks
    }

    pub fn certificate(&self) -> &InjectivityCertificate {
        &self.certificate
    }

    /// Complex dimension of the boundary data space, `2 M F`.
    pub fn boundary_dim(&self) -> usize {
        2 * self.modes.len() * self.model.fiber_dim()
    }

    /// Dimension of the sections along the boundary, `M F`.
    pub fn section_dim(&self) -> usize {
        self.modes.len() * self.model.fiber_dim()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let m = self.grid.n_u / 2;
        (0..=m).map(|i| i as f64 / m as f64).collect()
    }

    fn block_rows(&self, blk: &ModeBlock) -> std::ops::Range<usize> {
        let f = self.model.fiber_dim();
        blk.offset * f..(blk.offset + blk.modes.len()) * f
    }

    /// Solves the double for a source; the analytic path integrates the Green kernel
    /// on the circle, the dense path solves the discrete system.
    pub fn invert(&self, src: &Source) -> Result<DoubleSection> {
        let nodes = self.nodes();
        let n = self.model.algebra.rep_dim();
        let total = self.section_dim();
        let mut s1 = vec![zeros(total, n); nodes.len()];
        let mut s2 = vec![zeros(total, n); nodes.len()];
        let parts: Vec<(Vec<CMat>, Vec<CMat>)> = self
            .blocks
            .par_iter()
            .map(|blk| {
                let rows = self.block_rows(blk);
                let sub = |side: Side, u: f64| src(side, u).rows(rows.start, rows.len()).into_owned();
                match &blk.dense {
                    None => self.invert_block_analytic(blk, &sub, &nodes),
                    Some(d) => self.invert_block_dense(blk, d, &sub),
                }
            })
            .collect();
        for (blk, (a, b)) in self.blocks.iter().zip(parts) {
            let rows = self.block_rows(blk);
            for i in 0..nodes.len() {
                s1[i].rows_mut(rows.start, rows.len()).copy_from(&a[i]);
                s2[i].rows_mut(rows.start, rows.len()).copy_from(&b[i]);
            }
        }
        Ok(DoubleSection { nodes, side_one: s1, side_two: s2 })
    }

    /// Circle-frame values `tau(w)` and derivatives for a block source.
    fn circle_solution(
        &self,
        blk: &ModeBlock,
        src: &dyn Fn(Side, f64) -> CMat,
        points: &[f64],
    ) -> Vec<(CMat, CMat)> {
        let g = &blk.gluing;
        let circle_src = |w: f64| -> CMat {
            if w <= 1.0 {
                g.adjoint() * src(Side::One, w)
            } else {
                -src(Side::Two, 2.0 - w)
            }
        };
        points
            .iter()
            .map(|&w| {
                let mut cuts = vec![0.0, 1.0, 2.0, w];
                cuts.sort_by(f64::total_cmp);
                cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
                let mut acc: Option<CMat> = None;
                for pair in cuts.windows(2) {
                    for (s, wt) in composite_rule(pair[0], pair[1], 8, 16) {
                        let hat = blk.to_eigen(&circle_src(s));
                        let term = blk.scale_rows(&hat, |l| signed_kernel(w - s, l)) * cr(wt);
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a + term,
                        });
                    }
                }
                let hat = acc.expect("nonempty quadrature");
                let tau = blk.from_eigen(&hat);
                let dtau = circle_src(w.clamp(0.0, 2.0)) - blk.from_eigen(&blk.scale_rows(&hat, |l| l));
                (tau, dtau)
            })
            .collect()
    }

    fn invert_block_analytic(
        &self,
        blk: &ModeBlock,
        src: &dyn Fn(Side, f64) -> CMat,
        nodes: &[f64],
    ) -> (Vec<CMat>, Vec<CMat>) {
        let interior = |u: f64| u.clamp(1e-14, 1.0 - 1e-14);
        let one: Vec<f64> = nodes.iter().map(|&u| interior(u)).collect();
        let two: Vec<f64> = nodes.iter().map(|&u| 2.0 - interior(u)).collect();
        let a = self.circle_solution(blk, src, &one).into_iter().map(|(t, _)| t).collect();
        let b = self
            .circle_solution(blk, src, &two)
            .into_iter()
            .map(|(t, _)| -(&blk.gluing * t))
            .collect();
        (a, b)
    }

    fn invert_block_dense(
        &self,
        blk: &ModeBlock,
        d: &DenseBlock,
        src: &dyn Fn(Side, f64) -> CMat,
    ) -> (Vec<CMat>, Vec<CMat>) {
        let m = d.intervals;
        let f = blk.dim();
        let n = self.model.algebra.rep_dim();
        let mut rhs = zeros(2 * (m + 1) * f, n);
        for i in 0..m {
            rhs.rows_mut(i * f, f).copy_from(&src(Side::One, i as f64 * d.h));
        }
        for i in 1..=m {
            rhs.rows_mut((m + i - 1) * f, f).copy_from(&src(Side::Two, i as f64 * d.h));
        }
        self.split_dense(d, f, &d.lu.solve(&rhs).expect("nonsingular double"))
    }

    fn split_dense(&self, d: &DenseBlock, f: usize, x: &CMat) -> (Vec<CMat>, Vec<CMat>) {
        let m = d.intervals;
        let a = (0..=m).map(|i| x.rows(i * f, f).into_owned()).collect();
        let b = (0..=m).map(|i| x.rows((m + 1 + i) * f, f).into_owned()).collect();
        (a, b)
    }

    /// `max || D s - f ||` over nodes for the solution of [`invert`](Self::invert).
    /// The analytic path differentiates the Green representation; the dense path
    /// applies the discrete operator.
    pub fn inversion_residual(&self, src: &Source) -> Result<f64> {
        let nodes = self.nodes();
        let res: Vec<f64> = self
            .blocks
            .par_iter()
            .map(|blk| {
                let rows = self.block_rows(blk);
                let sub = |side: Side, u: f64| src(side, u).rows(rows.start, rows.len()).into_owned();
                match &blk.dense {
                    None => {
                        let pts: Vec<f64> = nodes
                            .iter()
                            .map(|&u| u.clamp(1e-9, 1.0 - 1e-9))
                            .flat_map(|u| [u, 2.0 - u])
                            .collect();
                        let sol = self.circle_solution(blk, &sub, &pts);
                        let mut worst: f64 = 0.0;
                        for (k, (tau, dtau)) in sol.iter().enumerate() {
                            let w = pts[k];
                            let lhs = dtau + &blk.b * tau;
                            let rhs = if w <= 1.0 { blk.gluing.adjoint() * sub(Side::One, w) } else { -sub(Side::Two, 2.0 - w) };
                            worst = worst.max(op_norm(&(lhs - rhs)));
                        }
                        worst
                    }
                    Some(d) => {
                        let (a, b) = self.invert_block_dense(blk, d, &sub);
                        let f = blk.dim();
                        let mut x = zeros(2 * (d.intervals + 1) * f, a[0].ncols());
                        for i in 0..=d.intervals {
                            x.rows_mut(i * f, f).copy_from(&a[i]);
                            x.rows_mut((d.intervals + 1 + i) * f, f).copy_from(&b[i]);
                        }
                        let y = &d.matrix * x;
                        let mut worst: f64 = 0.0;
                        for i in 0..d.intervals {
                            worst = worst.max(op_norm(&(y.rows(i * f, f) - sub(Side::One, i as f64 * d.h))));
                        }
                        for i in 1..=d.intervals {
                            let r = (d.intervals + i - 1) * f;
                            worst = worst.max(op_norm(&(y.rows(r, f) - sub(Side::Two, i as f64 * d.h))));
                        }
                        worst
                    }
                }
            })
            .collect();
        Ok(res.into_iter().fold(0.0, f64::max))
    }

    /// Traces of the Poisson solution `K g` for boundary data `g` (`2 M F` rows),
    /// together with its nodal values on the first copy.
    pub fn poisson(&self, g: &BoundaryData) -> Result<PoissonSolution> {
        let total = self.section_dim();
        if g.nrows() != 2 * total {
            return Err(Error::Shape(format!("boundary data must have {} rows", 2 * total)));
        }
        let n = g.ncols();
        let nodes = self.nodes();
        let mut values = vec![zeros(total, n); nodes.len()];
        let mut derivs = vec![zeros(total, n); nodes.len()];
        let mut trace = zeros(2 * total, n);
        let parts: Vec<(Vec<CMat>, Vec<CMat>, CMat, CMat)> = self
            .blocks
            .par_iter()
            .map(|blk| {
                let rows = self.block_rows(blk);
                let g0 = g.rows(rows.start, rows.len()).into_owned();
                let g1 = g.rows(total + rows.start, rows.len()).into_owned();
                self.poisson_block(blk, &g0, &g1, &nodes)
            })
            .collect();
        for (blk, (v, dv, t0, t1)) in self.blocks.iter().zip(parts) {
            let rows = self.block_rows(blk);
            for i in 0..nodes.len() {
                values[i].rows_mut(rows.start, rows.len()).copy_from(&v[i]);
                derivs[i].rows_mut(rows.start, rows.len()).copy_from(&dv[i]);
            }
            trace.rows_mut(rows.start, rows.len()).copy_from(&t0);
            trace.rows_mut(total + rows.start, rows.len()).copy_from(&t1);
        }
        Ok(PoissonSolution { nodes, values, derivatives: derivs, trace })
    }

    fn poisson_block(&self, blk: &ModeBlock, g0: &CMat, g1: &CMat, nodes: &[f64]) -> (Vec<CMat>, Vec<CMat>, CMat, CMat) {
        match &blk.dense {
            None => {
                let (h0, h1) = (blk.to_eigen(g0), blk.to_eigen(g1));
                let at = |u: f64| {
                    let d0 = u.max(1e-300);
                    blk.scale_rows(&h0, |l| green_kernel(d0, l)) + blk.scale_rows(&h1, |l| green_kernel(u + 1.0, l))
                };
                let vals: Vec<CMat> = nodes.iter().map(|&u| blk.from_eigen(&at(u))).collect();
                let ders: Vec<CMat> = nodes.iter().map(|&u| -blk.from_eigen(&blk.scale_rows(&at(u), |l| l))).collect();
                let t0 = vals[0].clone();
                let t1 = vals[nodes.len() - 1].clone();
                (vals, ders, t0, t1)
            }
            Some(d) => {
                let m = d.intervals;
                let f = blk.dim();
                let mut rhs = zeros(2 * (m + 1) * f, g0.ncols());
                rhs.rows_mut(2 * m * f, f).copy_from(&(&blk.gluing * g0 * cr(1.0 / d.h)));
                rhs.rows_mut(2 * m * f + f, f).copy_from(&(-(&blk.gluing * g1) * cr(1.0 / d.h)));
                let x = d.lu.solve(&rhs).expect("nonsingular double");
                let (vals, _) = self.split_dense(d, f, &x);
                let ders: Vec<CMat> = (0..=m)
                    .map(|i| {
                        let mut acc = zeros(f, g0.ncols());
                        for j in 0..=m {
                            if d.deriv[(i, j)] != 0.0 {
                                acc += &vals[j] * cr(d.deriv[(i, j)]);
                            }
                        }
                        acc
                    })
                    .collect();
                let t0 = vals[0].clone();
                let t1 = vals[m].clone();
                (vals, ders, t0, t1)
            }
        }
    }

    /// Applies `D^+ = G (d/du + B)` to the Poisson solution at the nodes, per block rows.
    pub fn interior_residual(&self, sol: &PoissonSolution) -> f64 {
        let m = sol.nodes.len() - 1;
        let last = if self.discretization == Discretization::Dense { m - 1 } else { m };
        let mut worst: f64 = 0.0;
        for blk in &self.blocks {
            let rows = self.block_rows(blk);
            for i in 0..=last {
                let v = sol.values[i].rows(rows.start, rows.len());
                let dv = sol.derivatives[i].rows(rows.start, rows.len());
                let r = &blk.gluing * (dv + &blk.b * v);
                worst = worst.max(op_norm(&r));
            }
        }
        worst
    }

    /// Full `2 M F x 2 M F` matrix of `g -> trace (K g)`.
    pub fn calderon_matrix(&self) -> Result<CMat> {
        let dim = self.boundary_dim();
        let total = self.section_dim();
        let mut out = zeros(dim, dim);
        let parts: Vec<(usize, usize, CMat)> = self
            .blocks
            .par_iter()
            .map(|blk| {
                let rows = self.block_rows(blk);
                let f = rows.len();
                let mut g = zeros(2 * f, 2 * f);
                g.fill_diagonal(cr(1.0));
                let g0 = g.rows(0, f).into_owned();
                let g1 = g.rows(f, f).into_owned();
                let (_, _, t0, t1) = self.poisson_block(blk, &g0, &g1, &[0.0, 1.0]);
                let mut c = zeros(2 * f, 2 * f);
                c.rows_mut(0, f).copy_from(&t0);
                c.rows_mut(f, f).copy_from(&t1);
                (rows.start, f, c)
            })
            .collect();
        for (start, f, c) in parts {
            for (bi, ri) in [(0, start), (1, total + start)] {
                for (bj, cj) in [(0, start), (1, total + start)] {
                    out.view_mut((ri, cj), (f, f)).copy_from(&c.view((bi * f, bj * f), (f, f)));
                }
            }
        }
        Ok(out)
    }

    /// Boundary operator and gluing matrix on the full mode space (block diagonal over blocks).
    pub fn full_operators(&self) -> (CMat, CMat) {
        let total = self.section_dim();
        let mut b = zeros(total, total);
        let mut g = zeros(total, total);
        for blk in &self.blocks {
            let r = self.block_rows(blk);
            b.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.b);
            g.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.gluing);
        }
        (b, g)
    }

    /// Discrete Green identity defect on the first copy for two sections given
    /// at the nodes with their derivatives (analytic path) or nodal values only
    /// (dense path, derivatives ignored).
    pub fn green_residual(&self, s1: &SectionSamples, s2: &SectionSamples) -> Result<f64> {
        let m = self.grid.n_u / 2;
        if s1.values.len() != m + 1 || s2.values.len() != m + 1 {
            return Err(Error::Shape("sections must be sampled on the half-domain nodes".into()));
        }
        let h = 1.0 / m as f64;
        let w = simpson_weights(m, h);
        let d = derivative_matrix(m, h);
        let deriv = |s: &SectionSamples, i: usize| -> CMat {
            match (&s.derivatives, self.discretization) {
                (Some(ds), Discretization::Analytic) => ds[i].clone(),
                _ => {
                    let mut acc = zeros(s.values[0].nrows(), s.values[0].ncols());
                    for j in 0..=m {
                        if d[(i, j)] != 0.0 {
                            acc += &s.values[j] * cr(d[(i, j)]);
                        }
                    }
                    acc
                }
            }
        };
        let (bfull, gfull) = self.full_operators();
        let gs = gfull.adjoint();
        let n = s1.values[0].ncols();
        let mut lhs = zeros(n, n);
        for i in 0..=m {
            let dp = &gfull * (deriv(s1, i) + &bfull * &s1.values[i]);
            let rho = &gs * &s2.values[i];
            let drho = &gs * deriv(s2, i);
            let dm = -drho + &bfull * rho;
            lhs += (dp.adjoint() * &s2.values[i] - s1.values[i].adjoint() * dm) * cr(w[i]);
        }
        let bterm = |i: usize| (&gfull * &s1.values[i]).adjoint() * &s2.values[i];
        let rhs = bterm(m) - bterm(0);
        Ok(op_norm(&(lhs - rhs)) * self.model.boundary_measure())
    }

    /// Green formula residual for sections given in closed form as `u -> (value, derivative)`,
    /// integrated with composite Gauss-Legendre quadrature.
    pub fn green_residual_exact(
        &self,
        s1: &(dyn Fn(f64) -> (CMat, CMat) + Sync),
        s2: &(dyn Fn(f64) -> (CMat, CMat) + Sync),
    ) -> f64 {
        let (bfull, gfull) = self.full_operators();
        let gs = gfull.adjoint();
        let (v0, _) = s1(0.0);
        let n = v0.ncols();
        let mut lhs = zeros(n, n);
        for (u, w) in composite_rule(0.0, 1.0, 16, 10) {
            let (a, da) = s1(u);
            let (b, db) = s2(u);
            let dp = &gfull * (da + &bfull * &a);
            let dm = -(&gs * db) + &bfull * (&gs * &b);
            lhs += (dp.adjoint() * &b - a.adjoint() * dm) * cr(w);
        }
        let bterm = |u: f64| (&gfull * s1(u).0).adjoint() * s2(u).0;
        let rhs = bterm(1.0) - bterm(0.0);
        op_norm(&(lhs - rhs)) * self.model.boundary_measure()
    }

    /// Exports nodal values of a mode-space section on the first copy as a half-domain grid function.
    pub fn to_grid_function(&self, values: &[CMat]) -> Result<GridFunction> {
        if !self.model.has_trivial_holonomy() {
            return Err(Error::Unsupported("grid export of twisted sections needs trivial holonomy".into()));
        }
        let grid = self.grid;
        let f = self.model.fiber_dim();
        let modes = self.modes.clone();
        GridFunction::from_fn(grid, self.model.fiber(), Domain::Half, |u, y| {
            let i = (u * (grid.n_u / 2) as f64).round() as usize;
            let mut acc = zeros(f, values[i].ncols());
            for (k, &mode) in modes.iter().enumerate() {
                acc += values[i].rows(k * f, f) * C64::from_polar(1.0, mode as f64 * y);
            }
            acc
        })
    }
}

/// Sections sampled on the half-domain nodes, values `(M F) x n`.
#[derive(Debug, Clone)]
pub struct SectionSamples {
    pub values: Vec<CMat>,
    pub derivatives: Option<Vec<CMat>>,
}

impl SectionSamples {
    pub fn from_fn(nodes: &[f64], f: impl Fn(f64) -> (CMat, CMat)) -> Self {
        let (values, ders): (Vec<_>, Vec<_>) = nodes.iter().map(|&u| f(u)).unzip();
        Self { values, derivatives: Some(ders) }
    }
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub nodes: Vec<f64>,
    pub values: Vec<CMat>,
    pub derivatives: Vec<CMat>,
    /// `(trace at u = 0, trace at u = 1)` stacked, `2 M F` rows.
    pub trace: CMat,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_segment(beta: f64) -> ProductDiracModel {
        let a = CStarAlgebra::complex();
        let b = pauli_x() * cr(beta);
        ProductDiracModel::segment(&a, 1, b).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn derivative_is_fourth_order_exact_on_quartics() {
        let m = 8;
        let h = 1.0 / m as f64;
        let d = derivative_matrix(m, h);
        let f = nalgebra::DVector::from_fn(m + 1, |i, _| (i as f64 * h).powi(4) - (i as f64 * h));
        let df = &d * f;
        for i in 0..=m {
            let u = i as f64 * h;
            assert!((df[i] - (4.0 * u.powi(3) - 1.0)).abs() < 1e-11);
        }
    }

    #[test]
    fn kernel_jump_is_one() {
        for l in [-3.0, -0.2, 0.0, 0.7, 40.0] {
            assert!((green_kernel(1e-300, l) + green_kernel(2.0, l) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn segment_must_anticommute() {
        let a = CStarAlgebra::complex();
        assert!(ProductDiracModel::segment(&a, 1, eye(2)).is_err());
        assert!(ProductDiracModel::segment(&a, 1, pauli_z()).is_ok());
    }

    #[test]
    fn holonomy_must_commute_with_potential() {
        let a = CStarAlgebra::complex();
        let v = CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
        let h = CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
        assert!(ProductDiracModel::cylinder(&a, 2, vec![(0, v)], Some(h)).is_err());
    }

    #[test]
    fn analytic_certificate_for_zero_operator() {
        let a = CStarAlgebra::complex();
        let model = ProductDiracModel::segment(&a, 1, zeros(2, 2)).unwrap();
        let sys = DoubleSystem::build(&model, GridSpec::new(16, 1).unwrap(), Discretization::Analytic).unwrap();
        let c = sys.certificate();
        assert!((c.sigma_min - PI / 2.0).abs() < 1e-14);
        assert_eq!(c.kernel_dims, vec![0]);
        assert!((c.ghost_sigma_min - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dense_and_analytic_traces_agree() {
        let model = scalar_segment(0.8);
        let grid = GridSpec::new(64, 1).unwrap();
        let an = DoubleSystem::build(&model, grid, Discretization::Analytic).unwrap();
        let de = DoubleSystem::build(&model, grid, Discretization::Dense).unwrap();
        let ca = an.calderon_matrix().unwrap();
        let cd = de.calderon_matrix().unwrap();
        assert!(op_norm(&(&ca - &cd)) < 1e-6);
        assert!(op_norm(&(&cd * &cd - &cd)) < 1e-12);
        let rel = de.certificate().sigma_min / an.certificate().sigma_min;
        assert!((rel - 1.0).abs() < 0.05);
    }
}
