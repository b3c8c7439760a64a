use thiserror::Error;

pub use crate::graphs::GraphError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("field has {got} values, grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("step at t = {time} stopped after {iterations} iterations with residual {residual:e} > {tolerance:e}")]
    MaxIterations {
        time: f64,
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("non-finite value produced at t = {time}")]
    NonfiniteValue { time: f64 },
    #[error("time window or region out of bounds: {0}")]
    OutOfBounds(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("need n >= 1 and p >= 2, got n = {n}, p = {p}")]
    InvalidExponents { n: usize, p: f64 },
    #[error("p = n requires an alpha choice in (0, 1/2), got {0:?}")]
    AlphaChoice(Option<f64>),
    #[error("radius {r} outside (0, {r0}]")]
    RadiusOutOfRange { r: f64, r0: f64 },
    #[error("invalid modulus parameters: {0}")]
    InvalidParams(String),
    #[error("cylinder contains {nodes} nodes and {levels} time levels; need at least 2 of each")]
    EmptyCylinder { nodes: usize, levels: usize },
    #[error("cylinder leaves the computed domain: {0}")]
    OutsideDomain(String),
    #[error("fit needs at least 4 usable points, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate design matrix: all abscissae coincide")]
    DegenerateFit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstantsError {
    #[error("constant {name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("ladder leaves floating-point range before index {0}")]
    LadderExhausted(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("cutoff violates the boundary condition: {0}")]
    Cutoff(String),
    #[error("window exceeds the trajectory horizon: {0}")]
    Horizon(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Constants(#[from] ConstantsError),
}
