//! Experiment configuration: one JSON document per run, written back fully resolved
//! beside the outputs.

use serde::{Deserialize, Serialize};

use crate::error::{MalabError, Result};
use crate::estimates::Subdomain;
use crate::grid::{GridSpec, MAX_DIM};
use crate::singular::ExampleConfig;
use crate::solver::{default_tol_residual, DEFAULT_MAX_ITER, DEFAULT_STENCIL_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    BuildExample,
    Analyze,
}

/// Cube `[lo, hi]^dim` with `n` points per axis, or the inscribed ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
    pub lo: f64,
    pub hi: f64,
    pub ball: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { dim: 2, n: 33, lo: -1.0, hi: 1.0, ball: false }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<GridSpec> {
        if self.ball {
            if self.lo != -self.hi {
                return Err(MalabError::InvalidGrid("ball grids need lo = -hi".into()));
            }
            GridSpec::ball(self.dim, self.n, self.hi)
        } else {
            GridSpec::cube(self.dim, self.n, self.lo, self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// `None` resolves to the dimension default.
    pub tol_residual: Option<f64>,
    pub max_iter: usize,
    pub stencil_radius: i64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_residual: None, max_iter: DEFAULT_MAX_ITER, stencil_radius: DEFAULT_STENCIL_RADIUS }
    }
}

/// Problems with closed-form solutions, plus the singular example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Problem {
    /// `f = 1`, `phi = |x|^2 / 2`.
    Quadratic,
    /// `u = sum exp(a x_i) / a^2`, `f = exp(a sum x_i)`.
    Exponential { a: f64 },
    /// The assembled example; grid and parameters come from `example`.
    SingularExample,
}

impl Default for Problem {
    fn default() -> Self {
        Problem::Quadratic
    }
}

impl Problem {
    /// Exact solution where known.
    pub fn exact(&self, x: &[f64]) -> Option<f64> {
        match self {
            Problem::Quadratic => Some(0.5 * x.iter().map(|t| t * t).sum::<f64>()),
            Problem::Exponential { a } => Some(x.iter().map(|t| (a * t).exp()).sum::<f64>() / (a * a)),
            Problem::SingularExample => None,
        }
    }

    pub fn rhs(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Exponential { a } => (a * x.iter().sum::<f64>()).exp(),
            _ => 1.0,
        }
    }
}

/// Section requested at the node nearest `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionRequest {
    pub x: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatesConfig {
    /// Integration region of the level and Orlicz integrals.
    pub region: Option<Subdomain>,
    /// The dyadic t-grid stops once the level set holds fewer nodes.
    pub min_level_nodes: usize,
    pub orlicz_exponents: Vec<f64>,
    pub sections: Vec<SectionRequest>,
    /// Extra sections at nodes drawn with the run seed, at height `random_section_h`.
    pub random_sections: usize,
    pub random_section_h: f64,
    /// Cantor depth and log exponents of the natural-cover sums.
    pub covering_depth: usize,
    pub covering_etas: Vec<f64>,
    /// Ball bounds: centres, radii and the Orlicz exponent `M`.
    pub ball_points: Vec<Vec<f64>>,
    pub ball_radii: Vec<f64>,
    pub ball_m: f64,
    /// Direction of the singular lines through the ball centres (collar exclusion).
    pub line_direction: Option<[f64; 3]>,
    pub probe_points: Vec<Vec<f64>>,
    pub probe_h: f64,
    pub slope_resolution: usize,
}

impl Default for EstimatesConfig {
    fn default() -> Self {
        EstimatesConfig {
            region: None,
            min_level_nodes: 50,
            orlicz_exponents: vec![0.0, 0.1, 1.0, 20.0],
            sections: Vec::new(),
            random_sections: 0,
            random_section_h: 0.05,
            covering_depth: 25,
            covering_etas: vec![0.0, 15.0],
            ball_points: Vec::new(),
            ball_radii: Vec::new(),
            ball_m: 20.0,
            line_direction: None,
            probe_points: Vec::new(),
            probe_h: 0.5,
            slope_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub problem: Problem,
    #[serde(default)]
    pub example: ExampleConfig,
    #[serde(default)]
    pub estimates: EstimatesConfig,
    /// MAGF1 file read by `analyze`.
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig {
            command,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            problem: Problem::default(),
            example: ExampleConfig::default(),
            estimates: EstimatesConfig::default(),
            solution: None,
            output_dir: default_output_dir(),
            seed: 0,
            threads: None,
        }
    }

    /// Parses and validates; parse errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills every defaulted option with its concrete value.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.solver.tol_residual.get_or_insert(default_tol_residual(c.grid.dim));
        if c.estimates.region.is_none() {
            c.estimates.region = Some(Subdomain::half_ball(c.grid.dim));
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MalabError::OutOfRange(m));
        let g = &self.grid;
        if g.dim == 0 || g.dim > MAX_DIM || g.n < 3 || !(g.hi > g.lo) {
            return bad(format!("grid dim {} n {} [{}, {}]", g.dim, g.n, g.lo, g.hi));
        }
        if let Some(t) = self.solver.tol_residual {
            if !(t > 0.0) {
                return bad(format!("tol_residual {t} must be positive"));
            }
        }
        if self.solver.max_iter == 0 || self.solver.stencil_radius < 1 {
            return bad("max_iter and stencil_radius must be positive".into());
        }
        if let Problem::Exponential { a } = self.problem {
            if !(a.is_finite() && a != 0.0) {
                return bad(format!("exponential rate {a} must be finite and nonzero"));
            }
        }
        let ex = &self.example;
        if ex.n < 5 || ex.cantor_depth == 0 || ex.spike_depth == 0 || !(ex.tol_residual > 0.0) || ex.max_iter == 0 {
            return bad("example parameters out of range".into());
        }
        let e = &self.estimates;
        if e.orlicz_exponents.iter().any(|p| !(*p >= 0.0)) || e.covering_etas.iter().any(|p| !(*p >= 0.0)) {
            return bad("estimate exponents must be nonnegative".into());
        }
        if e.ball_m < 1.0 || e.slope_resolution < 2 || !(e.probe_h > 0.0) || !(e.random_section_h > 0.0) {
            return bad("ball_m >= 1, slope_resolution >= 2 and positive heights required".into());
        }
        if e.covering_depth == 0 || e.covering_depth > crate::singular::cantor::MAX_DEPTH {
            return bad(format!("covering depth {}", e.covering_depth));
        }
        if e.ball_radii.iter().any(|r| !(*r > 0.0 && *r < 1.0)) || e.sections.iter().any(|s| !(s.h > 0.0)) {
            return bad("ball radii must lie in (0, 1) and section heights be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        Ok(())
    }
}
