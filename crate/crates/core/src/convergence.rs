//! Refinement studies for the dense discretization of the double.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calderon::{calderon_projector, graph_projection_oracle};
use crate::dirac::{DoubleSection, DoubleSystem, Discretization, ProductDiracModel, SectionSamples, Side};
use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_eigen, lsq_slope, op_norm, zeros, CMat, C64};
use crate::sobolev::GridSpec;

/// Quantities below this are at roundoff and excluded from order fits.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub n_u: usize,
    pub h: f64,
    pub calderon_error: f64,
    pub green_residual: f64,
    pub idempotency: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    /// Successive orders `log2(e_k / e_{k+1})` of the projector error.
    pub calderon_orders: Vec<f64>,
    pub green_orders: Vec<f64>,
    /// Least-squares orders over all levels; `None` when the errors sit at roundoff.
    pub calderon_fitted: Option<f64>,
    pub green_fitted: Option<f64>,
    pub monotone: bool,
    pub max_idempotency: f64,
    /// Relative spread of the stability constant across levels.
    pub sigma_spread: f64,
}

/// Smooth test sections `sum_k a_k cos(k pi u) + b_k sin(k pi u)` with seeded module coefficients.
pub struct SmoothSection {
    coef: Vec<(f64, CMat, CMat)>,
}

impl SmoothSection {
    pub fn random(sys: &DoubleSystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let algebra = sys.model().algebra();
        let dim = sys.section_dim() / algebra.rep_dim();
        let coef = (0..4)
            .map(|k| {
                let scale = 1.0 / (1.0 + k as f64).powi(2);
                let a = algebra.random_blocks(&mut rng, dim, 1) * C64::new(scale, 0.0);
                let b = algebra.random_blocks(&mut rng, dim, 1) * C64::new(scale, 0.0);
                (k as f64 * std::f64::consts::PI, a, b)
            })
            .collect();
        Self { coef }
    }

    pub fn eval(&self, u: f64) -> (CMat, CMat) {
        let (r, c) = self.coef[0].1.shape();
        let mut v = zeros(r, c);
        let mut d = zeros(r, c);
        for (w, a, b) in &self.coef {
            let (s, co) = (w * u).sin_cos();
            v += a * C64::new(co, 0.0) + b * C64::new(s, 0.0);
            d += a * C64::new(-w * s, 0.0) + b * C64::new(w * co, 0.0);
        }
        (v, d)
    }

    pub fn samples(&self, sys: &DoubleSystem) -> SectionSamples {
        SectionSamples::from_fn(&sys.nodes(), |u| self.eval(u))
    }
}

/// Sections `e^{-uB} a + e^{(u-1)B} b` built from the full boundary operator,
/// each eigencomponent rescaled to stay bounded by one on `[0, 1]`.
pub struct ExponentialSection {
    eigenvalues: Vec<f64>,
    vectors: CMat,
    a: CMat,
    b: CMat,
}

impl ExponentialSection {
    pub fn random(sys: &DoubleSystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let algebra = sys.model().algebra();
        let dim = sys.section_dim() / algebra.rep_dim();
        let (bfull, _) = sys.full_operators();
        let (eigenvalues, vectors) = hermitian_eigen(&bfull);
        let mut unit = || {
            let x = algebra.random_blocks(&mut rng, dim, 1);
            let n = op_norm(&x);
            vectors.adjoint() * x / cr(n)
        };
        let a = unit();
        let b = unit();
        Self { eigenvalues, vectors, a, b }
    }

    pub fn eval(&self, u: f64) -> (CMat, CMat) {
        let mut v = zeros(self.a.nrows(), self.a.ncols());
        let mut d = v.clone();
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            let (e1, e2) = ((-u * l + l.min(0.0)).exp(), ((u - 1.0) * l + l.min(0.0)).exp());
            let row = self.a.row(i) * cr(e1) + self.b.row(i) * cr(e2);
            let drow = self.a.row(i) * cr(-l * e1) + self.b.row(i) * cr(l * e2);
            v.set_row(i, &row);
            d.set_row(i, &drow);
        }
        (&self.vectors * v, &self.vectors * d)
    }
}

/// A smooth antiperiodic section of the double, `tau(w) = sum_k c_k e^{i pi (k + 1/2) w}`,
/// with the matching source term.
pub struct ManufacturedSolution {
    coef: Vec<(f64, CMat)>,
    b: CMat,
    g: CMat,
}

impl ManufacturedSolution {
    pub fn random(sys: &DoubleSystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let algebra = sys.model().algebra();
        let dim = sys.section_dim() / algebra.rep_dim();
        let coef = (-2i32..=1)
            .map(|k| {
                let w = std::f64::consts::PI * (k as f64 + 0.5);
                let scale = 1.0 / (1.0 + (k as f64).abs()).powi(2);
                (w, algebra.random_blocks(&mut rng, dim, 1) * C64::new(scale, 0.0))
            })
            .collect();
        let (b, g) = sys.full_operators();
        Self { coef, b, g }
    }

    fn circle(&self, w: f64) -> (CMat, CMat) {
        let (r, c) = self.coef[0].1.shape();
        let mut v = zeros(r, c);
        let mut d = zeros(r, c);
        for (k, a) in &self.coef {
            let e = C64::from_polar(1.0, k * w);
            v += a * e;
            d += a * (e * C64::new(0.0, *k));
        }
        (v, d)
    }

    /// `(D s)(u)` on either copy.
    pub fn source(&self, side: Side, u: f64) -> CMat {
        match side {
            Side::One => {
                let (v, d) = self.circle(u);
                &self.g * (d + &self.b * v)
            }
            Side::Two => {
                let (v, d) = self.circle(2.0 - u);
                -(d + &self.b * v)
            }
        }
    }

    pub fn exact(&self, side: Side, u: f64) -> CMat {
        match side {
            Side::One => self.circle(u).0,
            Side::Two => -(&self.g * self.circle(2.0 - u).0),
        }
    }

    /// Largest nodal deviation of a computed section from the exact one.
    pub fn error(&self, sol: &DoubleSection) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &u) in sol.nodes.iter().enumerate() {
            worst = worst.max(op_norm(&(&sol.side_one[i] - self.exact(Side::One, u))));
            worst = worst.max(op_norm(&(&sol.side_two[i] - self.exact(Side::Two, u))));
        }
        worst
    }
}

/// Reference Calderon matrix: per-mode graph projections for constant
/// coefficients, otherwise the analytic Galerkin solve on the same modes.
pub fn reference_calderon(model: &ProductDiracModel, grid: GridSpec) -> Result<CMat> {
    if model.is_constant_coefficient() {
        let modes = model.modes(&grid)?;
        let f = model.fiber_dim();
        let total = modes.len() * f;
        let mut out = zeros(2 * total, 2 * total);
        for (k, &n) in modes.iter().enumerate() {
            let c = graph_projection_oracle(model, n as f64)?;
            for bi in 0..2 {
                for bj in 0..2 {
                    out.view_mut((bi * total + k * f, bj * total + k * f), (f, f))
                        .copy_from(&c.view((bi * f, bj * f), (f, f)));
                }
            }
        }
        Ok(out)
    } else {
        let sys = DoubleSystem::build(model, grid, Discretization::Analytic)?;
        Ok(calderon_projector(&sys)?.matrix().clone())
    }
}

pub fn convergence_study(model: &ProductDiracModel, base: GridSpec, levels: usize, seed: u64) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::Config(format!("a convergence study needs at least 3 levels, got {levels}")));
    }
    let mut grid = base;
    let mut rows = Vec::with_capacity(levels);
    for _ in 0..levels {
        let sys = DoubleSystem::build(model, grid, Discretization::Dense)?;
        let reference = reference_calderon(model, *sys.grid())?;
        let c = calderon_projector(&sys)?;
        let s1 = SmoothSection::random(&sys, seed);
        let s2 = SmoothSection::random(&sys, seed.wrapping_add(1));
        let green = sys.green_residual(&s1.samples(&sys), &s2.samples(&sys))?;
        rows.push(ConvergenceLevel {
            n_u: grid.n_u,
            h: 2.0 / grid.n_u as f64,
            calderon_error: op_norm(&(c.matrix() - &reference)),
            green_residual: green,
            idempotency: c.diagnostics.idempotency,
            sigma_min: sys.certificate().sigma_min,
        });
        grid = GridSpec { n_u: 2 * grid.n_u, n_y: grid.n_y };
    }
    let orders = |f: &dyn Fn(&ConvergenceLevel) -> f64| -> Vec<f64> {
        rows.windows(2).map(|w| (f(&w[0]) / f(&w[1])).log2()).collect()
    };
    let fitted = |f: &dyn Fn(&ConvergenceLevel) -> f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| f(r) > ROUNDOFF_FLOOR).map(|r| (r.h.ln(), f(r).ln())).collect();
        if pts.len() < 2 {
            return None;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        Some(lsq_slope(&xs, &ys))
    };
    let decreasing = |f: &dyn Fn(&ConvergenceLevel) -> f64| {
        rows.windows(2).all(|w| f(&w[1]) < f(&w[0]) || f(&w[1]).max(f(&w[0])) < ROUNDOFF_FLOOR)
    };
    let ce = |r: &ConvergenceLevel| r.calderon_error;
    let gr = |r: &ConvergenceLevel| r.green_residual;
    let smax = rows.iter().map(|r| r.sigma_min).fold(0.0, f64::max);
    let smin = rows.iter().map(|r| r.sigma_min).fold(f64::INFINITY, f64::min);
    Ok(ConvergenceReport {
        calderon_orders: orders(&ce),
        green_orders: orders(&gr),
        calderon_fitted: fitted(&ce),
        green_fitted: fitted(&gr),
        monotone: decreasing(&ce) && decreasing(&gr),
        max_idempotency: rows.iter().map(|r| r.idempotency).fold(0.0, f64::max),
        sigma_spread: (smax - smin) / smax,
        levels: rows,
    })
}
