use thiserror::Error;

/// Errors raised while building or analyzing a boundary-value problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid interval [{a}, {b}]: endpoints must be finite with a < b")]
    InvalidInterval { a: f64, b: f64 },

    #[error("grid needs at least {min} steps, got {n_steps}")]
    TooFewSteps { n_steps: usize, min: usize },

    #[error("derivative order {requested} is not available (maximum {available})")]
    UnsupportedDerivativeOrder { requested: usize, available: usize },

    #[error("point t = {t} lies outside [{a}, {b}]")]
    PointOutsideInterval { t: f64, a: f64, b: f64 },

    #[error("point t = {t} is not a grid node")]
    PointNotOnGrid { t: f64 },

    #[error("functions live on different grids")]
    GridMismatch,

    #[error("composite Simpson rule needs an even step count, got {0}")]
    OddStepCount(usize),

    #[error(
        "shape mismatch in {context}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}"
    )]
    ShapeMismatch {
        context: String,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error(
        "fundamental matrix is numerically singular at t = {t}: |det| = {det:e} <= floor {floor:e}"
    )]
    SingularFundamentalMatrix { t: f64, det: f64, floor: f64 },

    #[error("boundary term needs derivative order {required}, function stores up to {available}")]
    DerivativeStackTooShallow { required: usize, available: usize },

    #[error("fractional order {0} is unsupported (allowed: (0,1) and (1,2))")]
    UnsupportedFractionalOrder(f64),

    #[error("fractional point t = {t} is within {min_steps} grid steps of the right endpoint")]
    PointTooCloseToB { t: f64, min_steps: usize },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
