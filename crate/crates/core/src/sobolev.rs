//! Module-valued grid functions on the doubled torus and the half domain,
//! spectral Sobolev norms, odd extension and traces.
//!
//! The u-axis is a circle of length 2 whose nodes `u_j = j h`, `h = 2 / n_u`,
//! contain the half domain `[0, 1]` as the nodes `j = 0..=n_u/2`. The y-axis is a
//! circle of length `2 pi` with `n_y` nodes (`n_y = 1` gives a one-dimensional grid).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::csalg::CStarAlgebra;
use crate::error::{Error, Result};
use crate::linalg::{cr, zeros, CMat, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_u: usize,
    #[serde(default = "one")]
    pub n_y: usize,
}

fn one() -> usize {
    1
}

pub const LEN_U: f64 = 2.0;
pub const LEN_Y: f64 = 2.0 * PI;

impl GridSpec {
    pub fn new(n_u: usize, n_y: usize) -> Result<Self> {
        let g = Self { n_u, n_y };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_u < 8 || !self.n_u.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_u = {} must be a power of two >= 8", self.n_u)));
        }
        if self.n_y != 1 && (self.n_y < 8 || !self.n_y.is_power_of_two()) {
            return Err(Error::InvalidGrid(format!("n_y = {} must be 1 or a power of two >= 8", self.n_y)));
        }
        Ok(())
    }

    pub fn h_u(&self) -> f64 {
        LEN_U / self.n_u as f64
    }

    pub fn h_y(&self) -> f64 {
        LEN_Y / self.n_y as f64
    }

    /// Number of half-domain nodes, `n_u / 2 + 1`.
    pub fn half_len(&self) -> usize {
        self.n_u / 2 + 1
    }

    pub fn u(&self, j: usize) -> f64 {
        j as f64 * self.h_u()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h_y()
    }

    /// Same grid with both resolutions doubled (one-dimensional grids stay one-dimensional).
    pub fn refined(&self) -> Self {
        Self { n_u: 2 * self.n_u, n_y: if self.n_y == 1 { 1 } else { 2 * self.n_y } }
    }

    /// Index of an on-grid u-value.
    pub fn u_index(&self, t: f64) -> Result<usize> {
        let x = t / self.h_u();
        let j = x.round();
        if (x - j).abs() > 1e-9 || j < 0.0 || j as usize >= self.n_u {
            return Err(Error::OffGrid { t });
        }
        Ok(j as usize)
    }
}

/// Integer frequency of FFT bin `k` for `n` points.
pub fn frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Values of a grid function at a point: a `(spinor * rank * n) x n` matrix,
/// i.e. an element of `(C^spinor (x) A^rank)`.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub algebra: Arc<CStarAlgebra>,
    pub rank: usize,
    pub spinor: usize,
}

impl Fiber {
    pub fn new(algebra: &Arc<CStarAlgebra>, rank: usize, spinor: usize) -> Self {
        Self { algebra: Arc::clone(algebra), rank, spinor }
    }

    pub fn rows(&self) -> usize {
        self.spinor * self.rank * self.algebra.rep_dim()
    }

    pub fn cols(&self) -> usize {
        self.algebra.rep_dim()
    }

    pub fn components(&self) -> usize {
        self.rows() * self.cols()
    }

    fn same(&self, other: &Fiber) -> bool {
        self.rank == other.rank && self.spinor == other.spinor && *self.algebra == *other.algebra
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Torus,
    Half,
}

#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: GridSpec,
    fiber: Fiber,
    domain: Domain,
    data: Vec<C64>,
}

struct Fft2 {
    fu: Arc<dyn Fft<f64>>,
    fy: Arc<dyn Fft<f64>>,
    iu: Arc<dyn Fft<f64>>,
    iy: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(grid: &GridSpec) -> Self {
        let mut p = FftPlanner::new();
        Self {
            fu: p.plan_fft_forward(grid.n_u),
            fy: p.plan_fft_forward(grid.n_y),
            iu: p.plan_fft_inverse(grid.n_u),
            iy: p.plan_fft_inverse(grid.n_y),
        }
    }
}

/// Fourier coefficients `c[ku][ky]` of one component, `f = sum c e^{i xi x}`.
fn fft2(plan: &Fft2, grid: &GridSpec, values: &mut [C64], inverse: bool) {
    let (nu, ny) = (grid.n_u, grid.n_y);
    let (fu, fy) = if inverse { (&plan.iu, &plan.iy) } else { (&plan.fu, &plan.fy) };
    for row in values.chunks_mut(ny) {
        fy.process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); nu];
    for ky in 0..ny {
        for ku in 0..nu {
            col[ku] = values[ku * ny + ky];
        }
        fu.process(&mut col);
        for ku in 0..nu {
            values[ku * ny + ky] = col[ku];
        }
    }
    if !inverse {
        let s = 1.0 / (nu * ny) as f64;
        for v in values.iter_mut() {
            *v *= s;
        }
    }
}

impl GridFunction {
    pub fn zeros(grid: GridSpec, fiber: Fiber, domain: Domain) -> Self {
        let nu = match domain {
            Domain::Torus => grid.n_u,
            Domain::Half => grid.half_len(),
        };
        let len = nu * grid.n_y * fiber.components();
        Self { grid, fiber, domain, data: vec![C64::new(0.0, 0.0); len] }
    }

    /// Samples `f(u, y)` at the nodes of the chosen domain.
    pub fn from_fn(grid: GridSpec, fiber: Fiber, domain: Domain, f: impl Fn(f64, f64) -> CMat) -> Result<Self> {
        let mut out = Self::zeros(grid, fiber, domain);
        for iu in 0..out.nu() {
            for iy in 0..grid.n_y {
                out.set_point(iu, iy, &f(grid.u(iu), grid.y(iy)))?;
            }
        }
        Ok(out)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn fiber(&self) -> &Fiber {
        &self.fiber
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn nu(&self) -> usize {
        match self.domain {
            Domain::Torus => self.grid.n_u,
            Domain::Half => self.grid.half_len(),
        }
    }

    fn offset(&self, iu: usize, iy: usize) -> usize {
        (iu * self.grid.n_y + iy) * self.fiber.components()
    }

    pub fn point(&self, iu: usize, iy: usize) -> CMat {
        let o = self.offset(iu, iy);
        let n = self.fiber.components();
        CMat::from_column_slice(self.fiber.rows(), self.fiber.cols(), &self.data[o..o + n])
    }

    pub fn set_point(&mut self, iu: usize, iy: usize, v: &CMat) -> Result<()> {
        if v.nrows() != self.fiber.rows() || v.ncols() != self.fiber.cols() {
            return Err(Error::Shape(format!(
                "point value must be {}x{}, got {}x{}",
                self.fiber.rows(),
                self.fiber.cols(),
                v.nrows(),
                v.ncols()
            )));
        }
        let o = self.offset(iu, iy);
        self.data[o..o + v.len()].copy_from_slice(v.as_slice());
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.domain != other.domain || !self.fiber.same(&other.fiber) {
            return Err(Error::Shape("grid functions live on different grids or fibers".into()));
        }
        Ok(())
    }

    fn require(&self, d: Domain) -> Result<()> {
        if self.domain != d {
            return Err(Error::Shape(format!("operation needs a {d:?} grid function")));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn scale(&self, z: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|a| *a *= z);
        out
    }

    /// Per-component Fourier coefficients, layout `[ku][ky][comp]`.
    pub fn coefficients(&self) -> Result<Vec<C64>> {
        self.require(Domain::Torus)?;
        Ok(self.transform(false, &self.data))
    }

    fn transform(&self, inverse: bool, input: &[C64]) -> Vec<C64> {
        let plan = Fft2::new(&self.grid);
        let nc = self.fiber.components();
        let npts = self.grid.n_u * self.grid.n_y;
        let mut out = vec![C64::new(0.0, 0.0); input.len()];
        let mut buf = vec![C64::new(0.0, 0.0); npts];
        for comp in 0..nc {
            for p in 0..npts {
                buf[p] = input[p * nc + comp];
            }
            fft2(&plan, &self.grid, &mut buf, inverse);
            for p in 0..npts {
                out[p * nc + comp] = buf[p];
            }
        }
        out
    }

    fn xi2(&self, ku: usize, ky: usize) -> (f64, f64) {
        let xu = PI * frequency(ku, self.grid.n_u) as f64;
        let xy = frequency(ky, self.grid.n_y) as f64;
        (xu, xy)
    }

    /// Applies the Fourier multiplier `m(xi_u, xi_y)` to a torus function.
    pub fn apply_multiplier(&self, m: impl Fn(f64, f64) -> C64) -> Result<Self> {
        let mut coef = self.coefficients()?;
        let nc = self.fiber.components();
        for ku in 0..self.grid.n_u {
            for ky in 0..self.grid.n_y {
                let (xu, xy) = self.xi2(ku, ky);
                let w = m(xu, xy);
                let o = (ku * self.grid.n_y + ky) * nc;
                coef[o..o + nc].iter_mut().for_each(|c| *c *= w);
            }
        }
        Ok(Self { data: self.transform(true, &coef), ..self.clone() })
    }

    /// Spectral `H^s` norm with the Hilbert-Schmidt norm on the fiber.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        let coef = self.coefficients()?;
        let nc = self.fiber.components();
        let mut acc = 0.0;
        for ku in 0..self.grid.n_u {
            for ky in 0..self.grid.n_y {
                let (xu, xy) = self.xi2(ku, ky);
                let w = (1.0 + xu * xu + xy * xy).powf(s);
                let o = (ku * self.grid.n_y + ky) * nc;
                acc += w * coef[o..o + nc].iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
        Ok((LEN_U * LEN_Y * acc).sqrt())
    }

    /// Algebra-valued `H^s` inner product `sum w(xi) f(xi)^* g(xi)`, an `n x n` matrix.
    pub fn sobolev_inner(&self, other: &Self, s: f64) -> Result<CMat> {
        self.check_compatible(other)?;
        let (cf, cg) = (self.coefficients()?, other.coefficients()?);
        let (r, cn, nc) = (self.fiber.rows(), self.fiber.cols(), self.fiber.components());
        let mut acc = zeros(cn, cn);
        for ku in 0..self.grid.n_u {
            for ky in 0..self.grid.n_y {
                let (xu, xy) = self.xi2(ku, ky);
                let w = (1.0 + xu * xu + xy * xy).powf(s) * LEN_U * LEN_Y;
                let o = (ku * self.grid.n_y + ky) * nc;
                let a = CMat::from_column_slice(r, cn, &cf[o..o + nc]);
                let b = CMat::from_column_slice(r, cn, &cg[o..o + nc]);
                acc += a.adjoint() * b * cr(w);
            }
        }
        Ok(acc)
    }

    /// `-d/du + sqrt(1 + Delta_y)`.
    pub fn lambda_plus(&self) -> Result<Self> {
        self.apply_multiplier(|xu, xy| C64::new((1.0 + xy * xy).sqrt(), -xu))
    }

    /// `d/du + sqrt(1 + Delta_y)`.
    pub fn lambda_minus(&self) -> Result<Self> {
        self.apply_multiplier(|xu, xy| C64::new((1.0 + xy * xy).sqrt(), xu))
    }

    /// `(1 + Delta)^{-1}`, the Riesz map `H^{-1} -> H^1`.
    pub fn riesz_inverse(&self) -> Result<Self> {
        self.apply_multiplier(|xu, xy| cr(1.0 / (1.0 + xu * xu + xy * xy)))
    }

    /// `1 + Delta`.
    pub fn one_plus_laplacian(&self) -> Result<Self> {
        self.apply_multiplier(|xu, xy| cr(1.0 + xu * xu + xy * xy))
    }

    /// Odd extension from the half domain to the torus.
    pub fn extend_odd(&self) -> Result<Self> {
        self.require(Domain::Half)?;
        let mut out = Self::zeros(self.grid, self.fiber.clone(), Domain::Torus);
        let m = self.grid.n_u / 2;
        for j in 0..self.grid.n_u {
            for iy in 0..self.grid.n_y {
                let v = if j <= m { self.point(j, iy) } else { -self.point(self.grid.n_u - j, iy) };
                out.set_point(j, iy, &v)?;
            }
        }
        Ok(out)
    }

    /// Adjoint of [`extend_odd`](Self::extend_odd) for the discrete `L^2` pairings with
    /// uniform node weights on both domains.
    pub fn extend_adjoint(&self) -> Result<Self> {
        self.require(Domain::Torus)?;
        let mut out = Self::zeros(self.grid, self.fiber.clone(), Domain::Half);
        let m = self.grid.n_u / 2;
        for i in 0..=m {
            for iy in 0..self.grid.n_y {
                let v = if i == 0 || i == m {
                    self.point(i, iy)
                } else {
                    self.point(i, iy) - self.point(self.grid.n_u - i, iy)
                };
                out.set_point(i, iy, &v)?;
            }
        }
        Ok(out)
    }

    /// Restriction of a torus function to the half-domain nodes.
    pub fn restrict(&self) -> Result<Self> {
        self.require(Domain::Torus)?;
        let mut out = Self::zeros(self.grid, self.fiber.clone(), Domain::Half);
        let n = self.grid.half_len() * self.grid.n_y * self.fiber.components();
        out.data.copy_from_slice(&self.data[..n]);
        Ok(out)
    }

    /// Discrete `L^2` pairing `h_u h_y sum <f, g>_HS` with uniform weights.
    pub fn l2_pairing(&self, other: &Self) -> Result<C64> {
        self.check_compatible(other)?;
        let w = self.grid.h_u() * self.grid.h_y();
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum::<C64>() * w)
    }

    /// `H^1` norm on the half domain: trapezoid rule in u, spectral in y, with the
    /// u-derivative taken from the odd extension.
    pub fn half_h1_norm(&self) -> Result<f64> {
        self.require(Domain::Half)?;
        let ext = self.extend_odd()?;
        let du = ext.apply_multiplier(|xu, _| C64::new(0.0, xu))?.restrict()?;
        let dy = ext.apply_multiplier(|_, xy| C64::new(0.0, xy))?.restrict()?;
        let (h, m, ny, nc) = (self.grid.h_u(), self.grid.n_u / 2, self.grid.n_y, self.fiber.components());
        let mut acc = 0.0;
        for i in 0..=m {
            let w = if i == 0 || i == m { 0.5 * h } else { h } * self.grid.h_y();
            for iy in 0..ny {
                let o = (i * ny + iy) * nc;
                for k in o..o + nc {
                    acc += w * (self.data[k].norm_sqr() + du.data[k].norm_sqr() + dy.data[k].norm_sqr());
                }
            }
        }
        Ok(acc.sqrt())
    }

    /// Boundary values at the on-grid hypersurface `u = t`.
    pub fn trace(&self, t: f64) -> Result<BoundaryFunction> {
        let j = self.grid.u_index(t)?;
        if j >= self.nu() {
            return Err(Error::OffGrid { t });
        }
        let nc = self.fiber.components();
        let o = self.offset(j, 0);
        Ok(BoundaryFunction {
            n_y: self.grid.n_y,
            fiber: self.fiber.clone(),
            data: self.data[o..o + self.grid.n_y * nc].to_vec(),
        })
    }

    /// `|| trace at t ||_{s - 1/2} / || f ||_s` for `s > 1/2`.
    pub fn trace_ratio(&self, t: f64, s: f64) -> Result<f64> {
        if s <= 0.5 {
            return Err(Error::SobolevExponent { s, reason: "traces need s > 1/2".into() });
        }
        let num = self.trace(t)?.sobolev_norm(s - 0.5);
        let den = self.sobolev_norm(s)?;
        Ok(num / den)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn from_parts(grid: GridSpec, fiber: Fiber, domain: Domain, data: Vec<C64>) -> Result<Self> {
        let out = Self::zeros(grid, fiber, domain);
        if out.data.len() != data.len() {
            return Err(Error::Format(format!("expected {} samples, found {}", out.data.len(), data.len())));
        }
        Ok(Self { data, ..out })
    }
}

/// A function on the boundary circle, values in the same fiber as the bulk function.
#[derive(Debug, Clone)]
pub struct BoundaryFunction {
    n_y: usize,
    fiber: Fiber,
    data: Vec<C64>,
}

impl BoundaryFunction {
    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn point(&self, iy: usize) -> CMat {
        let nc = self.fiber.components();
        CMat::from_column_slice(self.fiber.rows(), self.fiber.cols(), &self.data[iy * nc..(iy + 1) * nc])
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let nc = self.fiber.components();
        let ny = self.n_y;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(ny);
        let mut acc = 0.0;
        let mut buf = vec![C64::new(0.0, 0.0); ny];
        for comp in 0..nc {
            for iy in 0..ny {
                buf[iy] = self.data[iy * nc + comp];
            }
            fft.process(&mut buf);
            for (k, v) in buf.iter().enumerate() {
                let xi = frequency(k, ny) as f64;
                acc += (1.0 + xi * xi).powf(s) * (v / ny as f64).norm_sqr();
            }
        }
        (LEN_Y * acc).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Sup of trace ratios over a test family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRatioStats {
    pub sup: f64,
    pub sup_random: f64,
    pub sup_extremal: f64,
}

/// Trace ratio at `u = 0` over random band-limited functions and, for each boundary
/// frequency, the function that saturates the Cauchy-Schwarz bound for the trace.
/// Bandwidth is a third of the grid in each direction.
pub fn trace_ratio_study(
    grid: GridSpec,
    fiber: &Fiber,
    s: f64,
    random_trials: usize,
    seed: u64,
) -> Result<TraceRatioStats> {
    use rand::{Rng, SeedableRng};
    if s <= 0.5 {
        return Err(Error::SobolevExponent { s, reason: "traces need s > 1/2".into() });
    }
    grid.validate()?;
    let ku_max = grid.n_u as i64 / 3;
    let ky_max = if grid.n_y == 1 { 0 } else { grid.n_y as i64 / 3 };
    let nc = fiber.components();
    let npts = grid.n_u * grid.n_y;
    let from_coef = |coef: &dyn Fn(i64, i64, usize) -> C64| -> Result<GridFunction> {
        let mut c = vec![C64::new(0.0, 0.0); npts * nc];
        for ku in 0..grid.n_u {
            for ky in 0..grid.n_y {
                let (fu, fy) = (frequency(ku, grid.n_u), frequency(ky, grid.n_y));
                if fu.abs() > ku_max || fy.abs() > ky_max {
                    continue;
                }
                for comp in 0..nc {
                    c[(ku * grid.n_y + ky) * nc + comp] = coef(fu, fy, comp);
                }
            }
        }
        let proto = GridFunction::zeros(grid, fiber.clone(), Domain::Torus);
        let data = proto.transform(true, &c);
        GridFunction::from_parts(grid, fiber.clone(), Domain::Torus, data)
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sup_random: f64 = 0.0;
    for _ in 0..random_trials {
        let table: Vec<C64> = (0..npts * nc)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let f = from_coef(&|fu, fy, comp| {
            let ku = fu.rem_euclid(grid.n_u as i64) as usize;
            let ky = fy.rem_euclid(grid.n_y as i64) as usize;
            let decay = (1.0 + (PI * fu as f64).powi(2) + (fy as f64).powi(2)).powf(-0.5 * s - 0.5);
            table[(ku * grid.n_y + ky) * nc + comp] * decay
        })?;
        sup_random = sup_random.max(f.trace_ratio(0.0, s)?);
    }
    let mut sup_extremal: f64 = 0.0;
    for eta in 0..=ky_max {
        let f = from_coef(&|fu, fy, comp| {
            if fy != eta || comp != 0 {
                return C64::new(0.0, 0.0);
            }
            cr((1.0 + (PI * fu as f64).powi(2) + (fy as f64).powi(2)).powf(-s))
        })?;
        sup_extremal = sup_extremal.max(f.trace_ratio(0.0, s)?);
    }
    Ok(TraceRatioStats { sup: sup_random.max(sup_extremal), sup_random, sup_extremal })
}
