use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("vector is not timelike: <V,V> = {norm_sq}")]
    NotTimelike { norm_sq: f64 },
    #[error("surface is not spacelike at chart point {point:?}: Q = {q}")]
    NotSpacelike { point: Vec<f64>, q: f64 },
    #[error("level set F = {level} has no solution in v at chart point {point:?}")]
    LevelSetSolve { point: Vec<f64>, level: f64 },
    #[error("chart point {point:?} is closer than {margin} to the non-periodic chart boundary")]
    BoundaryProximity { point: Vec<f64>, margin: f64 },
    #[error("operation needs a 2-dimensional hypersurface, got dimension {0}")]
    DimensionMismatch(usize),
    #[error("surface not maximal: max |mean curvature| = {max_abs}")]
    NotMaximal { max_abs: f64 },
    #[error("chart is not compact: coordinate `{0}` is not periodic")]
    ChartNotCompact(String),
    #[error("left spacelike cone at node ({i}, {j}): margin {margin}")]
    LeftSpacelikeCone { i: usize, j: usize, margin: f64 },
    #[error("solver did not converge ({status}): residual {residual}")]
    NotConverged { status: String, residual: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("continuation step {index} failed: {source}")]
    Continuation {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
