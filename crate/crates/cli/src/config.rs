//! Run configuration: TOML parsing, validation and resolution into library
//! types.
//!
//! The resolved configuration is what every report echoes and what the
//! config hash covers. It leaves out the output directory and the thread
//! count so that repeated runs into different directories compare equal.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use ppwave::expr::parse;
use ppwave::geometry::{ChartBox, MetricSpec};
use ppwave::hypersurface::SurfaceSpec;
use ppwave::identities::GridSpec;
use ppwave::solver::{Boundary, InitialGuess, SolveConfig};

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    metric: RawMetric,
    surface: Option<RawSurface>,
    grid: RawGrid,
    solver: Option<RawSolver>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetric {
    #[serde(default = "one")]
    m: usize,
    #[serde(rename = "H")]
    h: Spanned<String>,
    #[serde(default)]
    periods: BTreeMap<String, f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSurface {
    graph: Option<Spanned<String>>,
    level_set: Option<Spanned<String>>,
    level: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    ranges: Vec<[f64; 2]>,
    nodes: Vec<usize>,
    h: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    boundary: Option<Spanned<String>>,
    boundary_data: Option<Spanned<String>>,
    initial: Option<Spanned<String>>,
    target: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricSection {
    pub m: usize,
    #[serde(rename = "H")]
    pub h: String,
    pub periods: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurfaceSection {
    pub kind: &'static str,
    pub expression: String,
    pub level: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSection {
    pub ranges: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
    /// Finite-difference step actually used by the command.
    pub h: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSection {
    pub boundary: &'static str,
    pub boundary_data: Option<String>,
    pub initial: String,
    pub target: f64,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub metric: MetricSection,
    pub surface: Option<SurfaceSection>,
    pub grid: GridSection,
    pub solver: Option<SolverSection>,
}

/// A loaded configuration: the echo plus the library objects built from it.
pub struct Run {
    pub resolved: ResolvedConfig,
    pub metric: MetricSpec,
    pub domain: ChartBox,
    surface: Option<SurfaceSpec>,
    solver: Option<SolveConfig>,
    pub out_dir: PathBuf,
}

/// Where the finite-difference step comes from when neither the config nor
/// `--h` sets it.
#[derive(Debug, Clone, Copy)]
pub enum DefaultStep {
    /// Fixed step for the curvature oracles.
    Fixed(f64),
    /// `1e-2` of the smallest chart extent (identity checks).
    Relative,
}

struct Source<'a> {
    text: &'a str,
}

impl Source<'_> {
    fn line(&self, offset: usize) -> usize {
        self.text[..offset.min(self.text.len())].matches('\n').count() + 1
    }

    fn error(&self, span: std::ops::Range<usize>, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(format!("line {}: {key}: {msg}", self.line(span.start)))
    }
}

impl Run {
    pub fn load(text: &str, h_override: Option<f64>, out_override: Option<PathBuf>, step: DefaultStep) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let src = Source { text };

        let m = raw.metric.m;
        if m == 0 {
            return Err(CliError::Config("[metric] m must be >= 1".into()));
        }
        let mut metric = MetricSpec::parse(m, raw.metric.h.get_ref())
            .map_err(|e| src.error(raw.metric.h.span(), "[metric] H", e))?;
        for (coord, &period) in &raw.metric.periods {
            metric = metric
                .with_period(coord, period)
                .map_err(|e| CliError::Config(format!("[metric] periods.{coord}: {e}")))?;
        }

        let grid = &raw.grid;
        if grid.ranges.len() != m + 1 || grid.nodes.len() != m + 1 {
            return Err(CliError::Config(format!(
                "[grid] ranges and nodes need one entry per chart coordinate (u, x...): expected {}, got {} and {}",
                m + 1,
                grid.ranges.len(),
                grid.nodes.len()
            )));
        }
        if let Some(&n) = grid.nodes.iter().find(|&&n| n < 5) {
            return Err(CliError::Config(format!("[grid] nodes must be >= 5, got {n}")));
        }
        if let Some(r) = grid.ranges.iter().find(|r| !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1])) {
            return Err(CliError::Config(format!("[grid] range {r:?} must be finite with lo < hi")));
        }
        let domain = ChartBox::new(
            grid.ranges.iter().map(|r| r[0]).collect(),
            grid.ranges.iter().map(|r| r[1]).collect(),
        );
        let h = match h_override.or(grid.h) {
            Some(h) => h,
            None => match step {
                DefaultStep::Fixed(h) => h,
                DefaultStep::Relative => GridSpec::default_step(&domain),
            },
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::Config(format!("grid step h must be > 0, got {h}")));
        }

        let (surface, surface_section) = match &raw.surface {
            None => (None, None),
            Some(s) => {
                let (spec, section) = match (&s.graph, &s.level_set) {
                    (Some(g), None) => {
                        if s.level.is_some() {
                            return Err(CliError::Config("[surface] level only applies to level_set".into()));
                        }
                        let spec = SurfaceSpec::parse_graph(metric.clone(), g.get_ref(), domain.clone())
                            .map_err(|e| src.error(g.span(), "[surface] graph", e))?;
                        (spec, SurfaceSection { kind: "graph", expression: g.get_ref().clone(), level: 0.0 })
                    }
                    (None, Some(f)) => {
                        let level = s.level.unwrap_or(0.0);
                        let spec = SurfaceSpec::parse_level_set(metric.clone(), f.get_ref(), level, domain.clone())
                            .map_err(|e| src.error(f.span(), "[surface] level_set", e))?;
                        (spec, SurfaceSection { kind: "level_set", expression: f.get_ref().clone(), level })
                    }
                    _ => return Err(CliError::Config("[surface] needs exactly one of graph or level_set".into())),
                };
                (Some(spec), Some(section))
            }
        };

        let (solver, solver_section) = match &raw.solver {
            None => (None, None),
            Some(s) => {
                let (cfg, section) = build_solver(&src, s, &metric, &domain, &grid.nodes)?;
                (Some(cfg), Some(section))
            }
        };

        let out_dir = out_override
            .or_else(|| raw.output.and_then(|o| o.dir))
            .unwrap_or_else(|| PathBuf::from("."));

        Ok(Run {
            resolved: ResolvedConfig {
                metric: MetricSection {
                    m,
                    h: raw.metric.h.into_inner(),
                    periods: raw.metric.periods,
                },
                surface: surface_section,
                grid: GridSection {
                    ranges: raw.grid.ranges,
                    nodes: raw.grid.nodes,
                    h,
                },
                solver: solver_section,
            },
            metric,
            domain,
            surface,
            solver,
            out_dir,
        })
    }

    pub fn surface(&self) -> Result<&SurfaceSpec, CliError> {
        self.surface
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [surface] section".into()))
    }

    pub fn solver(&self) -> Result<&SolveConfig, CliError> {
        self.solver
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a [solver] section".into()))
    }

    pub fn identity_grid(&self) -> GridSpec {
        GridSpec::new(self.domain.clone(), self.resolved.grid.nodes.clone(), self.resolved.grid.h)
    }
}

fn build_solver(
    src: &Source<'_>,
    s: &RawSolver,
    metric: &MetricSpec,
    domain: &ChartBox,
    nodes: &[usize],
) -> Result<(SolveConfig, SolverSection), CliError> {
    if metric.m() != 1 || nodes.len() != 2 {
        return Err(CliError::Config("[solver] supports m = 1 only".into()));
    }
    let chart: Vec<&str> = metric.names().iter().map(String::as_str).filter(|n| *n != "v").collect();
    let expr = |field: &Spanned<String>, key: &str| {
        parse(field.get_ref(), &chart).map_err(|e| src.error(field.span(), key, e))
    };

    let kind = match &s.boundary {
        None => "dirichlet",
        Some(b) => match b.get_ref().as_str() {
            "dirichlet" => "dirichlet",
            "periodic" => "periodic",
            other => {
                return Err(src.error(b.span(), "[solver] boundary", format!("expected \"dirichlet\" or \"periodic\", got \"{other}\"")))
            }
        },
    };
    let (boundary, boundary_text) = match kind {
        "dirichlet" => {
            let data = s
                .boundary_data
                .as_ref()
                .ok_or_else(|| CliError::Config("[solver] dirichlet boundary needs boundary_data".into()))?;
            (Boundary::Dirichlet(expr(data, "[solver] boundary_data")?), Some(data.get_ref().clone()))
        }
        _ => {
            if s.boundary_data.is_some() {
                return Err(CliError::Config("[solver] boundary_data only applies to dirichlet boundaries".into()));
            }
            (Boundary::Periodic, None)
        }
    };
    let initial_text = match (&s.initial, &boundary_text) {
        (Some(init), _) => {
            expr(init, "[solver] initial")?;
            init.get_ref().clone()
        }
        (None, Some(data)) => data.clone(),
        (None, None) => "0".to_string(),
    };
    let initial = parse(&initial_text, &chart).map_err(|e| CliError::Config(format!("[solver] initial: {e}")))?;

    let target = s.target.unwrap_or(0.0);
    let mut cfg = SolveConfig::new(metric.clone(), domain.clone(), [nodes[0], nodes[1]], boundary, InitialGuess::Expr(initial))
        .with_target(target);
    if let Some(tol) = s.tol {
        cfg.newton_tol = tol;
    }
    if let Some(max_iter) = s.max_iter {
        cfg.max_iter = max_iter;
    }
    cfg.layout().map_err(|e| CliError::Config(format!("[solver]: {e}")))?;
    if !(target.is_finite() && cfg.newton_tol > 0.0 && cfg.max_iter > 0) {
        return Err(CliError::Config("[solver] needs finite target, tol > 0 and max_iter > 0".into()));
    }

    let section = SolverSection {
        boundary: kind,
        boundary_data: boundary_text,
        initial: initial_text,
        target,
        tol: cfg.newton_tol,
        max_iter: cfg.max_iter,
    };
    Ok((cfg, section))
}
