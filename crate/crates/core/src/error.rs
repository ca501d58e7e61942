use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry ({row}, {col}) is NaN")]
    NanEntry { row: usize, col: usize },

    #[error("row {0} has no finite entry")]
    InfiniteRow(usize),

    #[error("column {0} has no finite entry")]
    InfiniteColumn(usize),

    #[error("minimizer of row {row} lies on the window boundary (offset {offset}); widen the window")]
    WindowBoundary { row: usize, offset: i64 },

    #[error("work budget exceeded: {needed} > {budget}")]
    BudgetExceeded { needed: usize, budget: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("value function is not finite at index {0}")]
    NonFiniteValue(usize),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("estimates are not Cauchy: last difference {diff:e} exceeds {tol:e}")]
    NotCauchy { diff: f64, tol: f64 },

    #[error("fixed-point residual {residual:e} exceeds tolerance {tol:e}")]
    Residual { residual: f64, tol: f64 },

    #[error("power sequence diverges: |D_n| = {norm:e} at n = {n}")]
    Divergence { n: usize, norm: f64 },

    #[error("projected Aubry set is empty at tolerance {0:e}")]
    EmptyAubry(f64),

    #[error("extension data violates f(y) - f(x) <= h(x, y) on pair ({x}, {y}) by {excess:e}")]
    ExtensionData { x: usize, y: usize, excess: f64 },

    #[error("iteration is not monotone at index {index} (step {step}, jump {jump:e})")]
    NotMonotone { index: usize, step: usize, jump: f64 },

    #[error("simplex iteration cap {0} reached")]
    SimplexCap(usize),

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("weight hypothesis violated: {0}")]
    Weight(String),

    #[error("sandwich limits disagree by {0:e}")]
    SandwichMismatch(f64),

    #[error("space is not a circle grid")]
    NotCircle,

    #[error("empty Mather family")]
    EmptyFamily,

    #[error("generating function check failed: {0}")]
    Generating(String),

    #[error("calibration residual {residual:e} at chain step {step}")]
    Calibration { step: usize, residual: f64 },

    #[error("semiconcavity violated at grid index {index} by {excess:e}")]
    Semiconcavity { index: usize, excess: f64 },

    #[error("triangle map left the triangle at ({x}, {y})")]
    LeftTriangle { x: f64, y: f64 },

    #[error("invalid instance: {0}")]
    Instance(String),
}
