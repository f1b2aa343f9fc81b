//! Finite-dimensional C*-algebras: full matrix algebras and complex group algebras
//! in their left regular representation.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cr, eye, fro, hermitian_defect, hermitian_eigen, op_norm, zeros, CMat, C64};

pub const MAX_MATRIX_DIM: usize = 8;
pub const MAX_GROUP_ORDER: usize = 24;
pub const DEFAULT_TOL: f64 = 1e-10;

/// Serializable description of an algebra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlgebraDescriptor {
    Matrix {
        n: usize,
    },
    Group {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<Vec<Vec<usize>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        preset: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Matrix,
    Group { table: Vec<Vec<usize>>, inverse: Vec<usize>, identity: usize },
}

/// A finite-dimensional C*-algebra acting faithfully on `C^rep_dim`.
#[derive(Debug)]
pub struct CStarAlgebra {
    kind: Kind,
    rep_dim: usize,
    left: Vec<CMat>,
    right: Vec<CMat>,
}

impl PartialEq for CStarAlgebra {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.rep_dim == other.rep_dim
    }
}

impl CStarAlgebra {
    /// The full matrix algebra `M_n(C)`.
    pub fn matrix(n: usize) -> Result<Arc<Self>> {
        if n == 0 || n > MAX_MATRIX_DIM {
            return Err(Error::InvalidAlgebra(format!(
                "matrix size {n} outside 1..={MAX_MATRIX_DIM}"
            )));
        }
        Ok(Arc::new(Self { kind: Kind::Matrix, rep_dim: n, left: Vec::new(), right: Vec::new() }))
    }

    /// The scalar algebra `C`.
    pub fn complex() -> Arc<Self> {
        Self::matrix(1).expect("valid size")
    }

    /// Group algebra from a multiplication table, `table[g][h] = gh`.
    pub fn group(table: Vec<Vec<usize>>) -> Result<Arc<Self>> {
        let n = table.len();
        if n == 0 || n > MAX_GROUP_ORDER {
            return Err(Error::InvalidAlgebra(format!("group order {n} outside 1..={MAX_GROUP_ORDER}")));
        }
        if table.iter().any(|row| row.len() != n || row.iter().any(|&x| x >= n)) {
            return Err(Error::InvalidAlgebra("table is not a square table over 0..n".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::InvalidAlgebra("no identity element".into()))?;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if table[table[a][b]][c] != table[a][table[b][c]] {
                        return Err(Error::InvalidAlgebra(format!(
                            "multiplication is not associative at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let mut inverse = vec![usize::MAX; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| table[g][h] == identity && table[h][g] == identity)
                .ok_or_else(|| Error::InvalidAlgebra(format!("element {g} has no inverse")))?;
        }
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for g in 0..n {
            let mut l = zeros(n, n);
            let mut r = zeros(n, n);
            for h in 0..n {
                l[(table[g][h], h)] = cr(1.0);
                r[(table[h][inverse[g]], h)] = cr(1.0);
            }
            left.push(l);
            right.push(r);
        }
        Ok(Arc::new(Self { kind: Kind::Group { table, inverse, identity }, rep_dim: n, left, right }))
    }

    /// Group algebra of the cyclic group of order `n`.
    pub fn cyclic(n: usize) -> Result<Arc<Self>> {
        Self::group((0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect())
    }

    /// Group algebra of the symmetric group on `k <= 4` letters.
    pub fn symmetric(k: usize) -> Result<Arc<Self>> {
        if k == 0 || k > 4 {
            return Err(Error::InvalidAlgebra(format!("symmetric group degree {k} outside 1..=4")));
        }
        let perms = permutations(k);
        let index = |p: &Vec<usize>| perms.iter().position(|q| q == p).expect("closed under composition");
        let table = perms
            .iter()
            .map(|s| perms.iter().map(|t| index(&(0..k).map(|i| s[t[i]]).collect())).collect())
            .collect();
        Self::group(table)
    }

    pub fn from_descriptor(d: &AlgebraDescriptor) -> Result<Arc<Self>> {
        match d {
            AlgebraDescriptor::Matrix { n } => Self::matrix(*n),
            AlgebraDescriptor::Group { table: Some(t), preset: None } => Self::group(t.clone()),
            AlgebraDescriptor::Group { table: None, preset: Some(p) } => {
                let (head, tail) = p.split_at(1.min(p.len()));
                let k: usize = tail
                    .parse()
                    .map_err(|_| Error::InvalidAlgebra(format!("unknown group preset {p:?}")))?;
                match head {
                    "Z" | "C" => Self::cyclic(k),
                    "S" => Self::symmetric(k),
                    _ => Err(Error::InvalidAlgebra(format!("unknown group preset {p:?}"))),
                }
            }
            AlgebraDescriptor::Group { .. } => {
                Err(Error::InvalidAlgebra("group needs exactly one of `table` or `preset`".into()))
            }
        }
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        match &self.kind {
            Kind::Matrix => AlgebraDescriptor::Matrix { n: self.rep_dim },
            Kind::Group { table, .. } => AlgebraDescriptor::Group { table: Some(table.clone()), preset: None },
        }
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Matrix => format!("M{}", self.rep_dim),
            Kind::Group { .. } => format!("C[G{}]", self.rep_dim),
        }
    }

    /// Size of the defining representation.
    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    /// Complex vector-space dimension of the algebra.
    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Matrix => self.rep_dim * self.rep_dim,
            Kind::Group { .. } => self.rep_dim,
        }
    }

    pub fn is_group_algebra(&self) -> bool {
        matches!(self.kind, Kind::Group { .. })
    }

    pub fn group_table(&self) -> Option<&[Vec<usize>]> {
        match &self.kind {
            Kind::Group { table, .. } => Some(table),
            Kind::Matrix => None,
        }
    }

    pub fn group_inverse(&self) -> Option<&[usize]> {
        match &self.kind {
            Kind::Group { inverse, .. } => Some(inverse),
            Kind::Matrix => None,
        }
    }

    pub fn group_identity(&self) -> Option<usize> {
        match &self.kind {
            Kind::Group { identity, .. } => Some(*identity),
            Kind::Matrix => None,
        }
    }

    /// Left regular representation matrices of the group elements.
    pub fn left_regular(&self) -> &[CMat] {
        &self.left
    }

    /// Right regular representation matrices; they span the commutant.
    pub fn right_regular(&self) -> &[CMat] {
        &self.right
    }

    /// Linear basis of the algebra inside `M_rep_dim(C)`.
    pub fn basis(&self) -> Vec<CMat> {
        match self.kind {
            Kind::Matrix => {
                let n = self.rep_dim;
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let mut e = zeros(n, n);
                        e[(i, j)] = cr(1.0);
                        out.push(e);
                    }
                }
                out
            }
            Kind::Group { .. } => self.left.clone(),
        }
    }

    /// Orthogonal projection of a `rep_dim x rep_dim` matrix onto the algebra.
    pub fn project(&self, m: &CMat) -> CMat {
        match self.kind {
            Kind::Matrix => m.clone(),
            Kind::Group { .. } => {
                let n = self.rep_dim as f64;
                let mut out = zeros(self.rep_dim, self.rep_dim);
                for l in &self.left {
                    let coef = (l.adjoint() * m).trace() / cr(n);
                    out += l * coef;
                }
                out
            }
        }
    }

    /// Coefficients of a group algebra element in the group basis.
    pub fn group_coefficients(&self, m: &CMat) -> Option<Vec<C64>> {
        match self.kind {
            Kind::Matrix => None,
            Kind::Group { .. } => {
                let n = self.rep_dim as f64;
                Some(self.left.iter().map(|l| (l.adjoint() * m).trace() / cr(n)).collect())
            }
        }
    }

    /// Distance from a matrix to the algebra (Frobenius).
    pub fn residual(&self, m: &CMat) -> f64 {
        if m.nrows() != self.rep_dim || m.ncols() != self.rep_dim {
            return f64::INFINITY;
        }
        fro(&(m - self.project(m)))
    }

    /// Largest distance of the `rep_dim` blocks of a block matrix from the algebra.
    pub fn block_residual(&self, m: &CMat) -> f64 {
        let n = self.rep_dim;
        if !m.nrows().is_multiple_of(n) || !m.ncols().is_multiple_of(n) {
            return f64::INFINITY;
        }
        if !self.is_group_algebra() {
            return 0.0;
        }
        let mut worst: f64 = 0.0;
        for bi in 0..m.nrows() / n {
            for bj in 0..m.ncols() / n {
                let block = m.view((bi * n, bj * n), (n, n)).into_owned();
                worst = worst.max(self.residual(&block));
            }
        }
        worst
    }

    /// Project each block of a block matrix onto the algebra.
    pub fn project_blocks(&self, m: &CMat) -> CMat {
        let n = self.rep_dim;
        if !self.is_group_algebra() {
            return m.clone();
        }
        let mut out = m.clone();
        for bi in 0..m.nrows() / n {
            for bj in 0..m.ncols() / n {
                let block = m.view((bi * n, bj * n), (n, n)).into_owned();
                out.view_mut((bi * n, bj * n), (n, n)).copy_from(&self.project(&block));
            }
        }
        out
    }

    pub fn element(self: &Arc<Self>, m: CMat) -> Result<Element> {
        let r = self.residual(&m);
        if !r.is_finite() {
            return Err(Error::Shape(format!(
                "expected {n}x{n} matrix, got {}x{}",
                m.nrows(),
                m.ncols(),
                n = self.rep_dim
            )));
        }
        if r > 1e-9 * (1.0 + fro(&m)) {
            return Err(Error::NotInAlgebra { residual: r });
        }
        Ok(Element { algebra: Arc::clone(self), m })
    }

    pub fn one(self: &Arc<Self>) -> Element {
        Element { algebra: Arc::clone(self), m: eye(self.rep_dim) }
    }

    pub fn zero(self: &Arc<Self>) -> Element {
        Element { algebra: Arc::clone(self), m: zeros(self.rep_dim, self.rep_dim) }
    }

    /// Group algebra element from coefficients.
    pub fn from_group_coefficients(self: &Arc<Self>, coef: &[C64]) -> Result<Element> {
        if !self.is_group_algebra() || coef.len() != self.rep_dim {
            return Err(Error::Shape("coefficient vector does not match group order".into()));
        }
        let mut m = zeros(self.rep_dim, self.rep_dim);
        for (l, &a) in self.left.iter().zip(coef) {
            m += l * a;
        }
        Ok(Element { algebra: Arc::clone(self), m })
    }

    pub fn random_element<R: rand::Rng + ?Sized>(self: &Arc<Self>, rng: &mut R) -> Element {
        let m = crate::linalg::random_matrix(rng, self.rep_dim, self.rep_dim);
        Element { algebra: Arc::clone(self), m: self.project(&m) }
    }

    /// Random matrix whose blocks lie in the algebra.
    pub fn random_blocks<R: rand::Rng + ?Sized>(&self, rng: &mut R, rows: usize, cols: usize) -> CMat {
        let n = self.rep_dim;
        self.project_blocks(&crate::linalg::random_matrix(rng, rows * n, cols * n))
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for i in 0..k {
            if !prefix.contains(&i) {
                prefix.push(i);
                rec(prefix, k, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), k, &mut out);
    out
}

/// An element of a [`CStarAlgebra`], stored in the defining representation.
#[derive(Debug, Clone)]
pub struct Element {
    algebra: Arc<CStarAlgebra>,
    m: CMat,
}

impl Element {
    pub fn algebra(&self) -> &Arc<CStarAlgebra> {
        &self.algebra
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    fn check_same(&self, other: &Element) -> Result<()> {
        if Arc::ptr_eq(&self.algebra, &other.algebra) || *self.algebra == *other.algebra {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch(format!("{} vs {}", self.algebra.name(), other.algebra.name())))
        }
    }

    fn wrap(&self, m: CMat) -> Element {
        Element { algebra: Arc::clone(&self.algebra), m }
    }

    pub fn try_add(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(self.wrap(&self.m + &other.m))
    }

    pub fn try_sub(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(self.wrap(&self.m - &other.m))
    }

    pub fn try_mul(&self, other: &Element) -> Result<Element> {
        self.check_same(other)?;
        Ok(self.wrap(&self.m * &other.m))
    }

    pub fn scale(&self, z: C64) -> Element {
        self.wrap(&self.m * z)
    }

    pub fn star(&self) -> Element {
        self.wrap(self.m.adjoint())
    }

    /// C*-norm, the operator norm in the faithful representation.
    pub fn norm(&self) -> f64 {
        op_norm(&self.m)
    }

    pub fn spectrum(&self) -> Vec<C64> {
        let n = self.m.nrows();
        if n == 1 {
            return vec![self.m[(0, 0)]];
        }
        Schur::new(self.m.clone())
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        hermitian_defect(&self.m) <= tol * (1.0 + self.norm())
    }

    /// Self-adjoint with spectrum in `[-tol, inf)`.
    pub fn is_positive(&self, tol: f64) -> bool {
        self.is_self_adjoint(tol) && hermitian_eigen(&self.m).0.first().is_none_or(|&l| l >= -tol)
    }

    pub fn approx_eq(&self, other: &Element, tol: f64) -> bool {
        self.check_same(other).is_ok() && op_norm(&(&self.m - &other.m)) <= tol
    }
}

impl Add for &Element {
    type Output = Element;
    fn add(self, rhs: &Element) -> Element {
        self.try_add(rhs).expect("elements of the same algebra")
    }
}

impl Sub for &Element {
    type Output = Element;
    fn sub(self, rhs: &Element) -> Element {
        self.try_sub(rhs).expect("elements of the same algebra")
    }
}

impl Mul for &Element {
    type Output = Element;
    fn mul(self, rhs: &Element) -> Element {
        self.try_mul(rhs).expect("elements of the same algebra")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn rejects_bad_tables() {
        assert!(CStarAlgebra::group(vec![vec![0, 1], vec![0, 1]]).is_err());
        assert!(CStarAlgebra::group(vec![vec![0, 2], vec![1, 0]]).is_err());
        assert!(CStarAlgebra::matrix(9).is_err());
        assert!(CStarAlgebra::symmetric(5).is_err());
    }

    #[test]
    fn s3_is_nonabelian_of_order_six() {
        let a = CStarAlgebra::symmetric(3).unwrap();
        assert_eq!(a.rep_dim(), 6);
        let t = a.group_table().unwrap();
        assert!((0..6).any(|g| (0..6).any(|h| t[g][h] != t[h][g])));
    }

    #[test]
    fn group_element_unitary_norm_and_spectrum() {
        let a = CStarAlgebra::cyclic(4).unwrap();
        let mut coef = vec![c(0.0, 0.0); 4];
        coef[1] = c(1.0, 0.0);
        let g = a.from_group_coefficients(&coef).unwrap();
        assert!((g.norm() - 1.0).abs() < 1e-12);
        let g4 = &(&g * &g) * &(&g * &g);
        assert!(g4.approx_eq(&a.one(), 1e-12));
        let mut spec = g.spectrum();
        spec.sort_by(|x, y| x.arg().total_cmp(&y.arg()));
        for z in spec {
            assert!((z.norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn right_regular_commutes_with_left() {
        let a = CStarAlgebra::symmetric(3).unwrap();
        for l in a.left_regular() {
            for r in a.right_regular() {
                assert!(fro(&(l * r - r * l)) < 1e-14);
            }
        }
    }

    #[test]
    fn element_membership_is_checked() {
        let a = CStarAlgebra::cyclic(3).unwrap();
        let mut m = zeros(3, 3);
        m[(0, 1)] = cr(1.0);
        assert!(matches!(a.element(m), Err(Error::NotInAlgebra { .. })));
    }

    #[test]
    fn star_star_is_identity_and_positive_check() {
        let a = CStarAlgebra::matrix(3).unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let x = a.random_element(&mut rng);
        assert!(x.star().star().approx_eq(&x, 0.0));
        assert!((&x.star() * &x).is_positive(DEFAULT_TOL));
    }
}
