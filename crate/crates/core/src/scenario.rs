//! JSON scenario files, the task runner behind the command line, and run reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calderon::{
    calderon_projector, calderon_vs_aps_index, cauchy_space_oracle, graph_projection_oracle, orthogonalized_calderon,
    spectral_projection_contour, symbol_limit_check, nonnegative_projection,
};
use crate::convergence::{convergence_study, ExponentialSection, ManufacturedSolution, SmoothSection};
use crate::csalg::{AlgebraDescriptor, CStarAlgebra};
use crate::dirac::{Discretization, DoubleSystem, ProductDiracModel};
use crate::error::{Error, Result};
use crate::hilbmod::{
    closed_range_gap, mishchenko_decompose, orthogonalize_idempotent_matrix, ModuleOperator, ModuleVector,
};
use crate::io::{grid_slice_csv, matrix_csv, table_csv, write_grid_function, write_matrix};
use crate::linalg::{c, cr, eye, op_norm, range_basis, subspace_distance, zeros, CMat};
use crate::sobolev::{trace_ratio_study, Domain, GridFunction, GridSpec};

pub const REPORT_VERSION: u32 = 1;

/// One entry of a matrix over the algebra: a real or complex multiple of the unit,
/// or an explicit matrix in the defining representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ElementSpec {
    Real(f64),
    Complex([f64; 2]),
    Matrix(Vec<Vec<[f64; 2]>>),
}

/// Matrix over the algebra, row-major.
pub type MatrixSpec = Vec<Vec<ElementSpec>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub mode: i64,
    pub value: MatrixSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HolonomySpec {
    Phase { phase: f64 },
    Matrix { matrix: MatrixSpec },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "base", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    /// `B = sigma_x (x) coupling + sigma_z (x) potential`.
    Segment {
        potential: MatrixSpec,
        #[serde(default)]
        coupling: Option<MatrixSpec>,
    },
    Cylinder {
        potential: Vec<FourierTerm>,
        #[serde(default)]
        holonomy: Option<HolonomySpec>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    ModuleCheck,
    SobolevCheck,
    Double,
    Calderon,
    Symbol,
    Index,
    Convergence,
    Export,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::ModuleCheck => "module-check",
            Task::SobolevCheck => "sobolev-check",
            Task::Double => "double",
            Task::Calderon => "calderon",
            Task::Symbol => "symbol",
            Task::Index => "index",
            Task::Convergence => "convergence",
            Task::Export => "export",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub module_identity: f64,
    pub decomposition: f64,
    pub idempotency: f64,
    pub a_linearity: f64,
    pub oracle: f64,
    pub principal_angle: f64,
    pub green_analytic: f64,
    pub inversion: f64,
    pub symbol: f64,
    pub orthogonality: f64,
    pub sigma_min: f64,
    pub min_order: f64,
    pub stability: f64,
    pub trace_stability: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            module_identity: 1e-12,
            decomposition: 1e-10,
            idempotency: 1e-9,
            a_linearity: 1e-10,
            oracle: 1e-9,
            principal_angle: 1e-8,
            green_analytic: 1e-12,
            inversion: 1e-9,
            symbol: 1e-10,
            orthogonality: 1e-10,
            sigma_min: 1e-10,
            min_order: 3.5,
            stability: 0.2,
            trace_stability: 0.1,
        }
    }
}

fn default_version() -> u32 {
    REPORT_VERSION
}

fn default_samples() -> usize {
    50
}

fn default_levels() -> usize {
    3
}

fn default_ladder() -> Vec<f64> {
    vec![4.0, 8.0, 16.0, 32.0, 64.0]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_version")]
    pub format_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub algebra: AlgebraDescriptor,
    #[serde(default = "one")]
    pub twist_rank: usize,
    pub model: ModelSpec,
    pub grid: GridSpec,
    #[serde(default = "analytic")]
    pub discretization: Discretization,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_ladder")]
    pub symbol_ladder: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn analytic() -> Discretization {
    Discretization::Analytic
}

fn element_matrix(algebra: &CStarAlgebra, e: &ElementSpec) -> Result<CMat> {
    let n = algebra.rep_dim();
    match e {
        ElementSpec::Real(x) => Ok(eye(n) * cr(*x)),
        ElementSpec::Complex([re, im]) => Ok(eye(n) * c(*re, *im)),
        ElementSpec::Matrix(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("algebra entries must be {n}x{n} matrices")));
            }
            Ok(CMat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
        }
    }
}

/// Assembles a matrix over the algebra from its JSON form.
pub fn matrix_from_spec(algebra: &CStarAlgebra, spec: &MatrixSpec) -> Result<CMat> {
    let n = algebra.rep_dim();
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if rows == 0 || spec.iter().any(|r| r.len() != cols) {
        return Err(Error::Config("matrix over the algebra is empty or ragged".into()));
    }
    let mut m = zeros(rows * n, cols * n);
    for (i, row) in spec.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m.view_mut((i * n, j * n), (n, n)).copy_from(&element_matrix(algebra, e)?);
        }
    }
    Ok(m)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != REPORT_VERSION {
            return Err(Error::Config(format!("unsupported format_version {}", self.format_version)));
        }
        self.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.tasks.is_empty() {
            return Err(Error::Config("no tasks requested".into()));
        }
        if self.tasks.contains(&Task::Convergence) && self.discretization != Discretization::Dense {
            return Err(Error::Config("convergence study requires the dense discretization".into()));
        }
        if self.levels < 3 {
            return Err(Error::Config(format!("levels must be at least 3, got {}", self.levels)));
        }
        self.build_model().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(())
    }

    pub fn algebra(&self) -> Result<Arc<CStarAlgebra>> {
        CStarAlgebra::from_descriptor(&self.algebra)
    }

    pub fn build_model(&self) -> Result<ProductDiracModel> {
        let algebra = self.algebra()?;
        let rn = self.twist_rank * algebra.rep_dim();
        let check = |m: &CMat, what: &str| -> Result<()> {
            if m.shape() != (rn, rn) {
                return Err(Error::Config(format!("{what} must be {0}x{0} over the algebra", self.twist_rank)));
            }
            Ok(())
        };
        match &self.model {
            ModelSpec::Segment { potential, coupling } => {
                let v = matrix_from_spec(&algebra, potential)?;
                check(&v, "potential")?;
                let w = match coupling {
                    Some(s) => matrix_from_spec(&algebra, s)?,
                    None => zeros(rn, rn),
                };
                check(&w, "coupling")?;
                ProductDiracModel::segment_from_potentials(&algebra, &v, &w)
            }
            ModelSpec::Cylinder { potential, holonomy } => {
                let mut terms = Vec::new();
                for t in potential {
                    let m = matrix_from_spec(&algebra, &t.value)?;
                    check(&m, "potential coefficient")?;
                    terms.push((t.mode, m));
                }
                let h = match holonomy {
                    None => None,
                    Some(HolonomySpec::Phase { phase }) => {
                        Some(eye(rn) * crate::linalg::C64::from_polar(1.0, *phase))
                    }
                    Some(HolonomySpec::Matrix { matrix }) => {
                        let m = matrix_from_spec(&algebra, matrix)?;
                        check(&m, "holonomy")?;
                        Some(m)
                    }
                };
                ProductDiracModel::cylinder(&algebra, self.twist_rank, terms, h)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<="` or `">="`.
    pub relation: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub task: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
}

impl TaskReport {
    fn new(task: Task) -> Self {
        Self::empty(task.name())
    }

    pub fn empty(task: &str) -> Self {
        Self {
            task: task.into(),
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            error: None,
            outputs: Vec::new(),
        }
    }

    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        let passed = value <= threshold;
        self.passed &= passed;
        self.checks.push(Check { name: name.into(), value, threshold, relation: "<=", passed });
    }

    fn at_least(&mut self, name: &str, value: f64, threshold: f64) {
        let passed = value >= threshold;
        self.passed &= passed;
        self.checks.push(Check { name: name.into(), value, threshold, relation: ">=", passed });
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    fn fail(&mut self, e: &Error) {
        self.passed = false;
        self.error = Some(e.to_string());
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub format_version: u32,
    pub name: Option<String>,
    pub seed: u64,
    pub algebra: AlgebraDescriptor,
    pub grid: GridSpec,
    pub discretization: Discretization,
    pub passed: bool,
    pub tasks: Vec<TaskReport>,
}

/// Runs every task of a scenario and writes outputs below `out_dir` when given.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let model = cfg.build_model()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let mut tasks = Vec::new();
    for &task in &cfg.tasks {
        let mut rep = TaskReport::new(task);
        if let Err(e) = run_task(task, cfg, &model, out_dir, &mut rep) {
            rep.fail(&e);
        }
        tasks.push(rep);
    }
    let report = RunReport {
        format_version: REPORT_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        algebra: cfg.algebra.clone(),
        grid: cfg.grid,
        discretization: cfg.discretization,
        passed: tasks.iter().all(|t| t.passed),
        tasks,
    };
    if let Some(dir) = out_dir {
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

fn run_task(task: Task, cfg: &ScenarioConfig, model: &ProductDiracModel, out: Option<&Path>, rep: &mut TaskReport) -> Result<()> {
    let tol = &cfg.tolerances;
    match task {
        Task::ModuleCheck => module_check(cfg, model.algebra(), rep),
        Task::SobolevCheck => sobolev_check(cfg, model, rep),
        Task::Double => {
            let sys = DoubleSystem::build(model, cfg.grid, cfg.discretization)?;
            let cert = sys.certificate();
            rep.at_least("sigma_min", cert.sigma_min, tol.sigma_min);
            rep.metric("lower_bound_constant", cert.lower_bound_constant);
            rep.at_most("max_kernel_dim", cert.kernel_dims.iter().copied().max().unwrap_or(0) as f64, 0.0);
            rep.at_least("ghost_sigma_min", cert.ghost_sigma_min, 1e-8);
            let sol = ManufacturedSolution::random(&sys, cfg.seed);
            let src = |side, u| sol.source(side, u);
            rep.at_most("inversion_residual", sys.inversion_residual(&src)?, tol.inversion);
            let err = sol.error(&sys.invert(&src)?);
            match cfg.discretization {
                Discretization::Analytic => rep.at_most("manufactured_error", err, tol.inversion),
                Discretization::Dense => rep.metric("manufactured_error", err),
            }
            Ok(())
        }
        Task::Calderon => calderon_task(cfg, model, rep),
        Task::Symbol => {
            if !model.is_cylinder() {
                return Err(Error::Unsupported("the symbol task needs a cylinder model".into()));
            }
            let r = symbol_limit_check(model, &cfg.symbol_ladder)?;
            rep.at_least("monotone", r.monotone as u8 as f64, 1.0);
            rep.metric("fitted_k", r.fitted_k);
            rep.metric("fit_residual", r.fit_residual);
            rep.metric("bound_k", r.bound_k);
            let mut worst: f64 = 0.0;
            for &eta in &cfg.symbol_ladder {
                let b = model.tangential_symbol(eta)?;
                let q = spectral_projection_contour(&b)?.projection;
                worst = worst.max(op_norm(&(q - nonnegative_projection(&b))));
            }
            rep.at_most("contour_vs_eigen", worst, tol.symbol);
            if let Some(dir) = out {
                let rows: Vec<Vec<f64>> = r.rows.iter().map(|x| vec![x.eta, x.defect, x.scaled]).collect();
                let p = dir.join("symbol_limit.csv");
                std::fs::write(&p, table_csv(&["eta", "defect", "defect_times_eta"], &rows))?;
                rep.outputs.push(p.display().to_string());
            }
            Ok(())
        }
        Task::Index => {
            let sys = DoubleSystem::build(model, cfg.grid, Discretization::Analytic)?;
            let r = calderon_vs_aps_index(&sys)?;
            rep.metric("index", r.index as f64);
            rep.metric("trace_index", r.trace_index);
            rep.metric("rank_aps", r.rank_aps as f64);
            rep.metric("rank_calderon", r.rank_calderon as f64);
            rep.metric("truncation", r.truncation as f64);
            let zeros: usize = sys
                .blocks()
                .iter()
                .map(|b| {
                    let t = 1e-12 * (1.0 + op_norm(&b.b));
                    b.eigenvalues.iter().filter(|l| l.abs() <= t).count()
                })
                .sum();
            rep.at_most("index_minus_zero_modes", (r.index - zeros as i64).abs() as f64, 0.0);
            Ok(())
        }
        Task::Convergence => {
            let r = convergence_study(model, cfg.grid, cfg.levels, cfg.seed)?;
            convergence_checks(&r, tol, rep);
            if let Some(dir) = out {
                let p = dir.join("convergence.csv");
                std::fs::write(&p, convergence_csv(&r))?;
                rep.outputs.push(p.display().to_string());
            }
            Ok(())
        }
        Task::Export => {
            let dir = out.ok_or_else(|| Error::Config("the export task needs an output directory".into()))?;
            let sys = DoubleSystem::build(model, cfg.grid, cfg.discretization)?;
            let c = calderon_projector(&sys)?;
            let p = dir.join("calderon.bin");
            write_matrix(&p, model.algebra(), c.matrix())?;
            rep.outputs.push(p.display().to_string());
            let p = dir.join("calderon.csv");
            std::fs::write(&p, matrix_csv(c.matrix()))?;
            rep.outputs.push(p.display().to_string());
            if model.has_trivial_holonomy() {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let g = model.algebra().random_blocks(&mut rng, sys.boundary_dim() / model.algebra().rep_dim(), 1);
                let sol = sys.poisson(&g)?;
                let gf = sys.to_grid_function(&sol.values)?;
                let p = dir.join("poisson.bin");
                write_grid_function(&p, &gf)?;
                rep.outputs.push(p.display().to_string());
                let p = dir.join("poisson_y0.csv");
                std::fs::write(&p, grid_slice_csv(&gf, 0)?)?;
                rep.outputs.push(p.display().to_string());
            }
            Ok(())
        }
    }
}

pub fn convergence_checks(r: &crate::convergence::ConvergenceReport, tol: &Tolerances, rep: &mut TaskReport) {
    rep.at_least("monotone", r.monotone as u8 as f64, 1.0);
    rep.at_least("calderon_order", r.calderon_fitted.unwrap_or(f64::NAN), tol.min_order);
    rep.at_least("green_order", r.green_fitted.unwrap_or(f64::NAN), tol.min_order);
    rep.at_most("idempotency", r.max_idempotency, tol.idempotency);
    rep.at_most("sigma_spread", r.sigma_spread, tol.stability);
}

pub fn convergence_csv(r: &crate::convergence::ConvergenceReport) -> String {
    let rows: Vec<Vec<f64>> = r
        .levels
        .iter()
        .map(|l| vec![l.n_u as f64, l.h, l.calderon_error, l.green_residual, l.idempotency, l.sigma_min])
        .collect();
    table_csv(&["n_u", "h", "calderon_error", "green_residual", "idempotency", "sigma_min"], &rows)
}

fn module_check(cfg: &ScenarioConfig, algebra: &Arc<CStarAlgebra>, rep: &mut TaskReport) -> Result<()> {
    let tol = &cfg.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut axioms, mut cstar, mut decomp, mut orth): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..cfg.samples {
        let x = ModuleVector::random(algebra, 2, &mut rng);
        let y = ModuleVector::random(algebra, 2, &mut rng);
        let a = algebra.random_element(&mut rng);
        let xy = x.inner(&y)?;
        let lin = (&x.inner(&y.right_mul(&a)?)? - &(&xy * &a)).norm();
        let sym = (&y.inner(&x)?.star() - &xy).norm();
        let xx = x.inner(&x)?;
        let pos = if xx.is_positive(1e-10) { 0.0 } else { 1.0 };
        let scale = 1.0 + x.norm() * y.norm() * (1.0 + a.norm());
        axioms = axioms.max((lin + sym) / scale + pos);
        cstar = cstar.max((a.star().try_mul(&a)?.norm() - a.norm().powi(2)).abs() / (1.0 + a.norm().powi(2)));
        let t = ModuleOperator::random(algebra, 2, 1, &mut rng).compose(&ModuleOperator::random(algebra, 1, 3, &mut rng))?;
        if closed_range_gap(&t, 1e-10).is_ok() {
            let d = mishchenko_decompose(&t)?;
            decomp = decomp.max(d.orthogonality).max(d.completeness).max(d.invariance);
        }
        let p = crate::linalg::hermitian_function(&algebra.random_blocks(&mut rng, 3, 3), |l| if l > 0.0 { 1.0 } else { 0.0 });
        let s = crate::linalg::hermitian_function(&algebra.random_blocks(&mut rng, 3, 3), |l| (0.5 * l).exp());
        let sinv = crate::linalg::inverse(&s).ok_or_else(|| Error::Numerical("singular conjugator".into()))?;
        let cmat = algebra.project_blocks(&(&s * &p * sinv));
        let o = orthogonalize_idempotent_matrix(&cmat)?;
        let q = &o.projection;
        let err = op_norm(&(q * q - q)) + crate::linalg::hermitian_defect(q)
            + subspace_distance(&range_basis(q, 1e-9), &range_basis(&cmat, 1e-9));
        orth = orth.max(err);
    }
    rep.at_most("inner_product_axioms", axioms, tol.module_identity * 10.0);
    rep.at_most("cstar_identity", cstar, tol.module_identity * 10.0);
    rep.at_most("decomposition", decomp, tol.decomposition);
    rep.at_most("orthogonalization", orth, 1e-9);
    Ok(())
}

fn sobolev_check(cfg: &ScenarioConfig, model: &ProductDiracModel, rep: &mut TaskReport) -> Result<()> {
    let grid = GridSpec::new(cfg.grid.n_u, cfg.grid.n_y.max(8))?;
    let fiber = model.fiber();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let alg = Arc::clone(model.algebra());
    let rows = fiber.rows() / alg.rep_dim();
    let coef: Vec<CMat> = (0..4).map(|_| alg.random_blocks(&mut rng, rows, 1)).collect();
    let f = GridFunction::from_fn(grid, fiber.clone(), Domain::Torus, |u, y| {
        let w = [(std::f64::consts::PI * u).cos(), (2.0 * y).sin(), (std::f64::consts::PI * u + y).sin(), 1.0];
        coef.iter().zip(w).fold(zeros(fiber.rows(), fiber.cols()), |acc, (cf, w)| acc + cf * cr(w))
    })?;
    let l2 = f.l2_pairing(&f)?.re.sqrt();
    rep.at_most("parseval", (f.sobolev_norm(0.0)? - l2).abs() / l2, 1e-12);
    let lam = f.lambda_minus()?.lambda_plus()?.max_abs_diff(&f.one_plus_laplacian()?)?;
    rep.at_most("lambda_product", lam, 1e-9);
    let h = f.restrict()?;
    let lhs = h.extend_odd()?.l2_pairing(&f)?;
    let rhs = h.l2_pairing(&f.extend_adjoint()?)?;
    rep.at_most("extension_adjoint", (lhs - rhs).norm() / (1.0 + lhs.norm()), 1e-12);
    for s in [0.75, 1.0] {
        let a = trace_ratio_study(grid, &fiber, s, 20, cfg.seed)?;
        let b = trace_ratio_study(grid.refined(), &fiber, s, 20, cfg.seed)?;
        rep.metric(&format!("trace_ratio_s{s}"), a.sup);
        rep.at_most(&format!("trace_ratio_drift_s{s}"), (b.sup - a.sup).abs() / a.sup, cfg.tolerances.trace_stability);
    }
    Ok(())
}

fn calderon_task(cfg: &ScenarioConfig, model: &ProductDiracModel, rep: &mut TaskReport) -> Result<()> {
    let tol = &cfg.tolerances;
    let sys = DoubleSystem::build(model, cfg.grid, cfg.discretization)?;
    let c = calderon_projector(&sys)?;
    rep.at_most("idempotency", c.diagnostics.idempotency, tol.idempotency);
    rep.at_most("a_linearity", c.diagnostics.a_linearity, tol.a_linearity);
    rep.metric("self_adjointness", c.diagnostics.self_adjointness);
    let analytic = cfg.discretization == Discretization::Analytic;
    if model.is_constant_coefficient() {
        let mut oracle_err: f64 = 0.0;
        let mut angle_first: f64 = 0.0;
        let mut angle_second: f64 = 0.0;
        let mut cross: f64 = 0.0;
        for (k, &n) in sys.modes().iter().enumerate() {
            let blk = c.mode_block(k);
            oracle_err = oracle_err.max(op_norm(&(&blk - graph_projection_oracle(model, n as f64)?)));
            let spaces = cauchy_space_oracle(model, n as f64)?;
            let range = range_basis(&blk, 1e-9);
            let kernel = crate::linalg::null_basis(&blk, 1e-9);
            angle_first = angle_first.max(subspace_distance(&range, &spaces.first));
            angle_second = angle_second.max(subspace_distance(&kernel, &spaces.second));
            cross = cross.max(op_norm(&(spaces.first.adjoint() * &spaces.second)));
        }
        rep.at_most("mode_coupling", c.mode_coupling(), 1e-12);
        if analytic {
            rep.at_most("graph_oracle", oracle_err, tol.oracle);
            rep.at_most("range_angle", angle_first, tol.principal_angle);
            rep.at_most("kernel_angle", angle_second, tol.principal_angle);
        } else {
            rep.metric("graph_oracle", oracle_err);
        }
        rep.at_most("cauchy_orthogonality", cross, tol.orthogonality);
    }
    if analytic {
        let s1 = ExponentialSection::random(&sys, cfg.seed);
        let s2 = ExponentialSection::random(&sys, cfg.seed.wrapping_add(1));
        let green = sys.green_residual_exact(&|u| s1.eval(u), &|u| s2.eval(u));
        rep.at_most("green_residual", green, tol.green_analytic);
    } else {
        let s1 = SmoothSection::random(&sys, cfg.seed);
        let s2 = SmoothSection::random(&sys, cfg.seed.wrapping_add(1));
        rep.metric("green_residual", sys.green_residual(&s1.samples(&sys), &s2.samples(&sys))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let g = model.algebra().random_blocks(&mut rng, sys.boundary_dim() / model.algebra().rep_dim(), 1);
    let sol = sys.poisson(&g)?;
    rep.at_most("poisson_interior_residual", sys.interior_residual(&sol) / (1.0 + op_norm(&g)), 1e-9);
    let (cp, o) = orthogonalized_calderon(&c)?;
    rep.at_most("orthogonal_idempotency", cp.diagnostics.idempotency, tol.orthogonality);
    rep.at_most("orthogonal_self_adjointness", cp.diagnostics.self_adjointness, tol.orthogonality);
    rep.at_most(
        "orthogonal_range",
        subspace_distance(&range_basis(cp.matrix(), 1e-9), &range_basis(c.matrix(), 1e-9)),
        1e-9,
    );
    rep.metric("orthogonalizer_min_eigenvalue", o.min_eigenvalue);
    Ok(())
}

/// Fixtures used by `selfcheck`: one small scenario per task family.
pub fn selfcheck_configs() -> Vec<ScenarioConfig> {
    let text = [
        r#"{"name":"segment-analytic","algebra":{"kind":"matrix","n":1},
            "model":{"base":"segment","potential":[[0.4]],"coupling":[[0.8]]},
            "grid":{"n_u":16},"tasks":["module-check","double","calderon"],"samples":10}"#,
        r#"{"name":"segment-dense","algebra":{"kind":"matrix","n":1},
            "model":{"base":"segment","potential":[[0.0]],"coupling":[[0.8]]},
            "grid":{"n_u":32},"discretization":"dense","tasks":["double","convergence"]}"#,
        r#"{"name":"cylinder-s3","algebra":{"kind":"group","preset":"S3"},
            "model":{"base":"cylinder","potential":[{"mode":0,"value":[[0.5]]}]},
            "grid":{"n_u":16,"n_y":8},"tasks":["double","calderon","index"],"samples":5}"#,
        r#"{"name":"cylinder-symbol","algebra":{"kind":"matrix","n":2},
            "model":{"base":"cylinder","potential":[{"mode":0,"value":[[0.5]]}],"holonomy":{"phase":1.0}},
            "grid":{"n_u":16,"n_y":8},"tasks":["symbol","sobolev-check"]}"#,
    ];
    text.iter().map(|t| ScenarioConfig::from_json(t).expect("built-in fixture")).collect()
}
