use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh width h = {h} is too coarse for rho = {rho} (need h <= rho/4)")]
    GridTooCoarse { h: f64, rho: f64 },

    #[error("pinching violated at node {node}: f = {value} outside [{lambda}, {upper}]")]
    PinchingViolated {
        node: usize,
        value: f64,
        lambda: f64,
        upper: f64,
    },

    #[error("Newton iteration failed after {iterations} steps (residual history {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("solution is not discretely convex: second difference {value} at node {node}")]
    NotConvex { node: usize, value: f64 },

    #[error("linear solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("coefficient matrix is not positive semidefinite at node {node} (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { node: usize, eigenvalue: f64 },

    #[error("discrete Green's function is negative ({value:e}) at node {node}")]
    NegativeGreen { node: usize, value: f64 },

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
