// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Configuration-driven runs of the eigenvalue laboratory: geometry, level
//! schedule of eigen solves, matched 1-D model and checks, written as JSON
//! reports and CSV tables.

pub mod config;
pub mod output;

use std::time::Instant;

use finsler_core::analysis::{
    dirichlet_gradient_bound_check, gradient_comparison_check, neumann_gradient_bound_check,
    poincare_bound_report, BoundKind,
};
use finsler_core::domain::{triangulate, InscribedBall, TriMesh};
use finsler_core::eigen::{
    refine_and_solve, richardson, BoundaryCondition, EigenProblem, EigenResult, StopReason,
};
use finsler_core::model1d::{match_model, ModelMatch};
use finsler_core::{diameter, inscribed_wulff_radius, CheckReport, Error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    CheckConfig, CheckName, CorpusConfig, Generator, PolygonConfig, RunConfig, SolverConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => Status::ConfigError.exit_code(),
            CliError::Io(_) => Status::NumericalError.exit_code(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    CheckFailure,
    ConfigError,
    NumericalError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CheckFailure => 1,
            Status::ConfigError => 2,
            Status::NumericalError => 3,
        }
    }

    /// Malformed inputs are configuration errors; everything else that goes
    /// wrong once computation has started is numerical.
    fn of_error(e: &Error) -> Self {
        match e {
            Error::Config(_) => Status::ConfigError,
            _ => Status::NumericalError,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub diameter: f64,
    pub inradius: f64,
    pub center: [f64; 2],
    pub center_unique: bool,
    pub inradius_duality_gap: f64,
    pub area: f64,
    pub vertices: Vec<[f64; 2]>,
}

impl Geometry {
    pub fn compute(config: &RunConfig, poly: &finsler_core::ConvexPolygon) -> Result<Self, Error> {
        let d = diameter(poly, &config.norm)?;
        let InscribedBall {
            radius,
            center,
            duality_gap,
            center_unique,
        } = inscribed_wulff_radius(poly, &config.norm)?;
        Ok(Geometry {
            diameter: d,
            inradius: radius,
            center,
            center_unique,
            inradius_duality_gap: duality_gap,
            area: poly.area(),
            vertices: poly.vertices().to_vec(),
        })
    }
}

/// One refinement level of the eigen solve, without nodal values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: usize,
    pub nodes: usize,
    pub lambda: f64,
    pub energy: f64,
    pub mass: f64,
    pub mean: Option<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub grad_norm: f64,
    pub zero_gradient_fraction: f64,
    pub restart_lambdas: Vec<f64>,
}

impl LevelSummary {
    fn new(r: &EigenResult) -> Self {
        LevelSummary {
            level: r.level,
            nodes: r.nodal_values.len(),
            lambda: r.lambda,
            energy: r.energy,
            mass: r.mass,
            mean: r.mean,
            converged: r.converged,
            stop_reason: r.stop_reason,
            iterations: r.iterations,
            grad_norm: r.grad_norm,
            zero_gradient_fraction: r.zero_gradient_fraction,
            restart_lambdas: r.restart_lambdas.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: String,
    pub config: RunConfig,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub geometry: Option<Geometry>,
    pub levels: Vec<LevelSummary>,
    /// Extrapolated eigenvalues from consecutive levels; documentation only.
    pub richardson: Vec<f64>,
    /// 1-D model matched to the finest Neumann eigenfunction.
    pub model: Option<ModelMatch>,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    fn new(config: &RunConfig) -> Self {
        RunReport {
            version: VERSION.to_string(),
            config: config.clone(),
            status: Status::Pass,
            error: None,
            geometry: None,
            levels: Vec::new(),
            richardson: Vec::new(),
            model: None,
            checks: Vec::new(),
        }
    }

    fn fail(&mut self, e: &Error, status: Status) {
        self.status = status;
        self.error = Some(e.to_string());
    }

    pub fn lambda(&self) -> Option<f64> {
        self.levels.last().map(|l| l.lambda)
    }

    /// `λ·d_F²/π²` or `λ·4i_F²/π²`, matching the boundary condition.
    pub fn ratio(&self) -> Option<f64> {
        let g = self.geometry.as_ref()?;
        let kind = BoundKind::for_bc(self.config.solver.bc);
        let geom = match kind {
            BoundKind::NeumannDiameter => g.diameter,
            BoundKind::DirichletInradius => g.inradius,
        };
        Some(kind.ratio(self.lambda()?, geom))
    }
}

/// A run's report together with the finest mesh and eigenfunction.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub mesh: Option<TriMesh>,
    pub eigen: Option<EigenResult>,
}

/// Validate, then geometry → eigen solves → matched model → checks. Errors
/// never escape: they end up in `report.status` and `report.error`.
pub fn run(config: &RunConfig) -> RunOutput {
    let mut out = RunOutput {
        report: RunReport::new(config),
        mesh: None,
        eigen: None,
    };
    let validated = match config.validate() {
        Ok(v) => v,
        Err(e) => {
            out.report.fail(&e, Status::ConfigError);
            return out;
        }
    };
    if let Err(e) = execute(config, &validated.polygon, &mut out) {
        let status = Status::of_error(&e);
        out.report.fail(&e, status);
    }
    out
}

fn execute(
    config: &RunConfig,
    poly: &finsler_core::ConvexPolygon,
    out: &mut RunOutput,
) -> Result<(), Error> {
    let report = &mut out.report;
    let geometry = Geometry::compute(config, poly)?;
    let levels = &config.solver.levels;
    let problem = EigenProblem {
        mesh: triangulate(poly, levels[0])?,
        spec: config.norm.clone(),
        bc: config.solver.bc,
        solver: config.solver.options(),
    };
    let results = refine_and_solve(&problem, levels)?;
    report.levels = results.iter().map(LevelSummary::new).collect();
    report.richardson = richardson(&results.iter().map(|r| r.lambda).collect::<Vec<_>>());
    let eig = results.last().expect("at least one level").clone();
    let mesh = triangulate(poly, *levels.last().expect("validated"))?;
    if config.solver.bc == BoundaryCondition::Neumann {
        let umax = eig
            .nodal_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        report.model = Some(match_model(
            2,
            eig.lambda,
            umax.clamp(f64::MIN_POSITIVE, 1.0),
        )?);
    }
    for c in &config.checks {
        report
            .checks
            .extend(run_check(c, config, &geometry, &mesh, &eig)?);
    }
    if report.checks.iter().any(|c| !c.pass) {
        report.status = Status::CheckFailure;
    }
    report.geometry = Some(geometry);
    out.mesh = Some(mesh);
    out.eigen = Some(eig);
    Ok(())
}

fn run_check(
    c: &CheckConfig,
    config: &RunConfig,
    geometry: &Geometry,
    mesh: &TriMesh,
    eig: &EigenResult,
) -> Result<Vec<CheckReport>, Error> {
    let spec = &config.norm;
    let lambda = eig.lambda;
    // thresholds are given relative to λ for the gradient bounds
    let rethreshold = |r: CheckReport, scale: f64| match c.threshold {
        Some(t) => with_threshold(r, t * scale),
        None => r,
    };
    Ok(match c.name {
        CheckName::PoincareBound => {
            let kind = BoundKind::for_bc(config.solver.bc);
            let geom = match kind {
                BoundKind::NeumannDiameter => geometry.diameter,
                BoundKind::DirichletInradius => geometry.inradius,
            };
            vec![rethreshold(poincare_bound_report(lambda, geom, kind)?, 1.0)]
        }
        CheckName::GradientComparison => vec![rethreshold(
            gradient_comparison_check(mesh, spec, eig)?.report,
            1.0,
        )],
        CheckName::NeumannGradientBound => vec![rethreshold(
            neumann_gradient_bound_check(mesh, spec, eig)?,
            lambda,
        )],
        CheckName::DirichletGradientBound => {
            let alphas = c.alphas.clone().unwrap_or_else(|| vec![0.01, 0.1, 1.0]);
            let mut v = Vec::with_capacity(alphas.len());
            for a in alphas {
                v.push(rethreshold(
                    dirichlet_gradient_bound_check(mesh, spec, eig, a)?,
                    lambda,
                ));
            }
            v
        }
    })
}

fn with_threshold(mut r: CheckReport, t: f64) -> CheckReport {
    r.threshold = t;
    r.pass = r.worst_violation <= t && !r.metadata.contains_key("failure");
    r
}

/// One row of the corpus summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub index: usize,
    pub id: String,
    pub norm: String,
    pub bc: String,
    pub level: Option<usize>,
    pub lambda: Option<f64>,
    pub d_f: Option<f64>,
    pub i_f: Option<f64>,
    pub ratio: Option<f64>,
    pub converged: Option<bool>,
    pub checks_pass: bool,
    pub status: Status,
}

impl SummaryRow {
    pub fn new(index: usize, report: &RunReport) -> Self {
        let last = report.levels.last();
        SummaryRow {
            index,
            id: report.config.label(index),
            norm: report.config.norm.label(),
            bc: report.config.solver.bc.as_str().to_string(),
            level: last.map(|l| l.level),
            lambda: last.map(|l| l.lambda),
            d_f: report.geometry.as_ref().map(|g| g.diameter),
            i_f: report.geometry.as_ref().map(|g| g.inradius),
            ratio: report.ratio(),
            converged: last.map(|l| l.converged),
            checks_pass: report.checks.iter().all(|c| c.pass),
            status: report.status,
        }
    }
}

pub struct CorpusOutput {
    pub reports: Vec<RunReport>,
    pub rows: Vec<SummaryRow>,
    /// Wall time per run in seconds, in config order.
    pub seconds: Vec<f64>,
}

impl CorpusOutput {
    /// Worst status over all rows.
    pub fn status(&self) -> Status {
        self.rows
            .iter()
            .map(|r| r.status)
            .max()
            .unwrap_or(Status::Pass)
    }
}

/// Run every config on a pool of `parallelism` threads. Results are ordered
/// by config index regardless of completion order.
pub fn corpus(configs: &[RunConfig], parallelism: usize) -> Result<CorpusOutput, CliError> {
    if configs.is_empty() {
        return Err(CliError::Usage(
            "corpus needs at least one run configuration".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {parallelism} worker threads: {e}")))?;
    let timed: Vec<(RunReport, f64)> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| {
                let t = Instant::now();
                let r = run(c).report;
                (r, t.elapsed().as_secs_f64())
            })
            .collect()
    });
    let (reports, seconds): (Vec<_>, Vec<_>) = timed.into_iter().unzip();
    let rows = reports
        .iter()
        .enumerate()
        .map(|(i, r)| SummaryRow::new(i, r))
        .collect();
    Ok(CorpusOutput {
        reports,
        rows,
        seconds,
    })
}
