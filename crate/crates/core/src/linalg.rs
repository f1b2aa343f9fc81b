//! Dense complex linear algebra helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn from_real(r: usize, c: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(r, c, data.iter().map(|&x| cr(x)))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn fro(m: &CMat) -> f64 {
    m.norm()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s = to_faer(m).singular_values().expect("singular value iteration converges");
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `(U, S)` with singular values descending.
fn left_singular(m: &CMat) -> (CMat, Vec<f64>) {
    let svd = to_faer(m).thin_svd().expect("singular value iteration converges");
    let u = svd.U();
    let s = svd.S().column_vector();
    let k = s.nrows();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].re.total_cmp(&s[a].re));
    let vals = order.iter().map(|&i| s[i].re).collect();
    let out = CMat::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]);
    (out, vals)
}

/// Operator 2-norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn sigma_min(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * cr(0.5)
}

pub fn hermitian_defect(m: &CMat) -> f64 {
    op_norm(&(m - m.adjoint()))
}

/// Eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = zeros(n, n);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// `f(m)` for Hermitian `m` through its spectral decomposition.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, u) = hermitian_eigen(m);
    let d = CMat::from_diagonal(&CVec::from_iterator(vals.len(), vals.iter().map(|&x| cr(f(x)))));
    &u * d * u.adjoint()
}

/// Number of singular values above `rel * sigma_max` (and above `abs_floor`).
pub fn numerical_rank(m: &CMat, rel: f64) -> usize {
    let s = singular_values(m);
    let Some(&top) = s.first() else { return 0 };
    if top <= f64::MIN_POSITIVE {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * top).count()
}

/// Orthonormal basis of the column space, `rel` relative rank threshold.
pub fn range_basis(m: &CMat, rel: f64) -> CMat {
    if m.nrows() == 0 || m.ncols() == 0 {
        return zeros(m.nrows(), 0);
    }
    let (u, sv) = left_singular(m);
    let top = sv.first().copied().unwrap_or(0.0);
    let cols: Vec<usize> = (0..sv.len()).filter(|&i| top > 0.0 && sv[i] > rel * top).collect();
    let mut q = zeros(m.nrows(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        q.set_column(j, &u.column(i));
    }
    q
}

/// Orthonormal basis of the orthogonal complement of the columns of an isometry `q`.
pub fn complement_basis(q: &CMat) -> CMat {
    let n = q.nrows();
    let p = eye(n) - q * q.adjoint();
    let (vals, u) = hermitian_eigen(&p);
    let cols: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    let mut out = zeros(n, cols.len());
    for (j, &i) in cols.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Orthonormal basis of the null space.
pub fn null_basis(m: &CMat, rel: f64) -> CMat {
    complement_basis(&range_basis(&m.adjoint(), rel))
}

/// Sine of the largest principal angle between two subspaces given by isometries.
/// Returns 1 when dimensions differ.
pub fn subspace_distance(qa: &CMat, qb: &CMat) -> f64 {
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let resid = qa - qb * (qb.adjoint() * qa);
    op_norm(&resid)
}

pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    hermitian_part(&random_matrix(rng, n, n))
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    
    random_matrix(rng, n, n).qr().q()
}

/// Least-squares slope of `ys` against `xs`.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
