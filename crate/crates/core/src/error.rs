//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by geometry, kernels, profiles, solvers and the analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point {0:?} lies outside the closed domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("point {0:?} is outside the flow-coordinate region")]
    OutsideFlowRegion(Vec<f64>),
    #[error("level {delta} is not below the flow reach {reach}")]
    LevelTooDeep { delta: f64, reach: f64 },
    #[error("coincident points (separation {0:e})")]
    CoincidentPoints(f64),
    #[error("input is not integrable against the distance weight")]
    NonIntegrableInput,
    #[error("exponent q = {0} outside (1, 2)")]
    QOutOfRange(f64),
    #[error("exponent q = {q} not below {limit}")]
    ExponentOutOfRange { q: f64, limit: f64 },
    #[error("no convergence after {iterations} iterations (last update {update:e}): {context}")]
    NonConvergence { iterations: usize, update: f64, context: String },
    #[error("evaluation at the origin")]
    OriginEvaluation,
    #[error("monotonicity violated by {excess:e} at level index {index}")]
    MonotonicityViolation { index: usize, excess: f64 },
    #[error("boundary density is not bounded away from zero (min {0:e})")]
    DensityNotBoundedBelow(f64),
    #[error("point {0:?} falls outside the grid")]
    OutOfGrid(Vec<f64>),
    #[error("no grid nodes in the probed annulus")]
    EmptyAnnulus,
    #[error("dimension {0} is not supported here")]
    UnsupportedDimension(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("singular linear system at row {0}")]
    SingularMatrix(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
