//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use finsler_core::domain::MAX_LEVELS;
use finsler_core::eigen::{BoundaryCondition, SolverOptions};
use finsler_core::{ConvexPolygon, Error, NormSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Free-form label carried into reports and summary rows.
    #[serde(default)]
    pub id: Option<String>,
    pub norm: NormSpec,
    pub polygon: PolygonConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PolygonConfig {
    /// Counter-clockwise vertex list.
    Vertices(Vec<[f64; 2]>),
    Rectangle {
        width: f64,
        height: f64,
    },
    Regular {
        sides: usize,
        radius: f64,
    },
    /// Seeded random convex polygon.
    Random {
        seed: u64,
        max_vertices: usize,
    },
}

impl PolygonConfig {
    pub fn build(&self) -> Result<ConvexPolygon, Error> {
        match self {
            PolygonConfig::Vertices(v) => ConvexPolygon::new(v.clone()),
            PolygonConfig::Rectangle { width, height } => {
                if !(*width > 0.0 && *height > 0.0) {
                    return Err(Error::Config(format!(
                        "rectangle sides must be positive, got {width} × {height}"
                    )));
                }
                Ok(ConvexPolygon::rectangle(*width, *height))
            }
            PolygonConfig::Regular { sides, radius } => ConvexPolygon::regular(*sides, *radius),
            PolygonConfig::Random { seed, max_vertices } => {
                if *max_vertices < 3 {
                    return Err(Error::Config(format!(
                        "max_vertices must be at least 3, got {max_vertices}"
                    )));
                }
                Ok(ConvexPolygon::random(
                    &mut ChaCha8Rng::seed_from_u64(*seed),
                    *max_vertices,
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub bc: BoundaryCondition,
    pub levels: Vec<usize>,
    #[serde(default = "defaults::grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub eps_schedule: Vec<f64>,
}

mod defaults {
    use super::SolverOptions;

    pub fn grad_tol() -> f64 {
        SolverOptions::default().grad_tol
    }
    pub fn max_iters() -> usize {
        SolverOptions::default().max_iters
    }
    pub fn restarts() -> usize {
        SolverOptions::default().restarts
    }
    pub fn seed() -> u64 {
        SolverOptions::default().seed
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            restarts: self.restarts,
            seed: self.seed,
            eps_schedule: self.eps_schedule.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    /// Eigenvalue lower bound matching the boundary condition.
    PoincareBound,
    GradientComparison,
    NeumannGradientBound,
    DirichletGradientBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: CheckName,
    /// Overrides the default allowance. For the gradient bounds it is a
    /// fraction of `λ`; for the comparison a fraction of `max v'`.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// `α` values for the Dirichlet gradient bound; defaults to 0.01, 0.1, 1.
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_mesh: Option<PathBuf>,
    #[serde(default)]
    pub dump_eigenfunction: Option<PathBuf>,
}

/// A configuration that passed validation, with its polygon built.
#[derive(Debug, Clone)]
pub struct Validated {
    pub polygon: ConvexPolygon,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid run configuration: {e}")))
    }

    /// Check every field before any computation.
    pub fn validate(&self) -> Result<Validated, Error> {
        self.norm.validate()?;
        if self.norm_dim().is_some_and(|n| n != 2) {
            return Err(Error::Config("the norm must act on the plane".into()));
        }
        let polygon = self.polygon.build()?;
        self.solver.options().validate()?;
        let levels = &self.solver.levels;
        if levels.is_empty() {
            return Err(Error::Config("solver.levels is empty".into()));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "solver.levels must be strictly increasing, got {levels:?}"
            )));
        }
        if levels.iter().any(|&l| l > MAX_LEVELS) {
            return Err(Error::Config(format!(
                "solver.levels must lie in [0, {MAX_LEVELS}], got {levels:?}"
            )));
        }
        for c in &self.checks {
            let needs = match c.name {
                CheckName::GradientComparison | CheckName::NeumannGradientBound => {
                    Some(BoundaryCondition::Neumann)
                }
                CheckName::DirichletGradientBound => Some(BoundaryCondition::Dirichlet),
                CheckName::PoincareBound => None,
            };
            if needs.is_some_and(|bc| bc != self.solver.bc) {
                return Err(Error::Config(format!(
                    "check {:?} does not apply to {} problems",
                    c.name,
                    self.solver.bc.as_str()
                )));
            }
            if c.threshold.is_some_and(|t| !(t >= 0.0)) {
                return Err(Error::Config(format!(
                    "check {:?} has a negative threshold",
                    c.name
                )));
            }
            if let Some(a) = &c.alphas {
                if c.name != CheckName::DirichletGradientBound {
                    return Err(Error::Config(format!(
                        "alphas only apply to dirichlet_gradient_bound, not {:?}",
                        c.name
                    )));
                }
                if a.is_empty() || a.iter().any(|&x| !(x > 0.0)) {
                    return Err(Error::Config(format!(
                        "alphas must be a nonempty list of positive numbers, got {a:?}"
                    )));
                }
            }
        }
        Ok(Validated { polygon })
    }

    fn norm_dim(&self) -> Option<usize> {
        match &self.norm {
            NormSpec::Quadratic { a } => Some(a.len()),
            NormSpec::Regularized { base, .. } => match base.as_ref() {
                NormSpec::Quadratic { a } => Some(a.len()),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn label(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("run-{index:03}"))
    }
}

/// Batch description: explicit runs, a generated family, or both
/// (explicit runs first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    #[serde(default)]
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub generate: Option<Generator>,
}

/// `count` seeded random polygons, each solved with every norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub count: usize,
    pub seed: u64,
    pub max_vertices: usize,
    pub norms: Vec<NormSpec>,
    pub solver: SolverConfig,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
}

impl CorpusConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid corpus configuration: {e}")))
    }

    /// Runs in order: explicit ones, then polygon-major, norm-minor.
    pub fn expand(&self) -> Vec<RunConfig> {
        let mut out = self.runs.clone();
        if let Some(g) = &self.generate {
            for i in 0..g.count {
                let seed = g.seed.wrapping_add(i as u64);
                for (k, norm) in g.norms.iter().enumerate() {
                    out.push(RunConfig {
                        id: Some(format!("poly{i:02}-norm{k}")),
                        norm: norm.clone(),
                        polygon: PolygonConfig::Random {
                            seed,
                            max_vertices: g.max_vertices,
                        },
                        solver: g.solver.clone(),
                        checks: g.checks.clone(),
                        output: OutputConfig::default(),
                    });
                }
            }
        }
        out
    }
}
