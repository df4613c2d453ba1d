use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while building or refining meshes.
#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("subdivision counts must be positive, got {0}x{1}")]
    InvalidSubdivisions(usize, usize),
    #[error("degenerate bounds: lower {lower:?} is not below upper {upper:?}")]
    InvalidBounds { lower: [f64; 2], upper: [f64; 2] },
    #[error("disk radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("cell {cell} has non-positive Jacobian determinant {det:e}")]
    InvertedCell { cell: usize, det: f64 },
    #[error("face between cells {0} and {1} is not conforming")]
    NonConforming(usize, usize),
    #[error("point ({0}, {1}) is not inside any cell")]
    PointNotFound(f64, f64),
}

/// Errors raised by the equation of state.
#[derive(Debug, Error, PartialEq)]
pub enum EosError {
    #[error("inadmissible state: density {rho:e}, specific internal energy {e:e}")]
    Inadmissible { rho: f64, e: f64 },
    #[error("invalid equation of state parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

/// Errors raised by the finite element layer.
#[derive(Debug, Error, PartialEq)]
pub enum DiscretizationError {
    #[error("non-positive lumped mass {mass:e} at dG node {node}")]
    NonPositiveMass { node: usize, mass: f64 },
    #[error("coupling graph violates {property} by {defect:e} at node {node}")]
    CouplingDefect {
        property: &'static str,
        node: usize,
        defect: f64,
    },
    #[error("field length {got} does not match layout size {expected}")]
    LayoutMismatch { expected: usize, got: usize },
}

/// Errors raised by the explicit hyperbolic update.
#[derive(Debug, Error, PartialEq)]
pub enum HyperbolicError {
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error("time step {tau:e} exceeds the admissible limit {limit:e} at node {node}")]
    CflViolation { node: usize, tau: f64, limit: f64 },
    #[error("update produced inadmissible state at node {node}: density {rho:e}, internal energy {e:e}")]
    LostAdmissibility { node: usize, rho: f64, e: f64 },
}

/// Errors raised by the iterative linear solver.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(
        "linear solver did not converge: {iterations} iterations, relative residual {residual:e} (target {target:e})"
    )]
    NotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("linear solver breakdown: {0}")]
    Breakdown(&'static str),
}

/// Errors raised while parsing or validating configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed configuration: {0}")]
    Syntax(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("no scenario selected; set `scenario` or pass a preset")]
    MissingScenario,
    #[error("value for `{key}` out of range: {reason}")]
    OutOfRange { key: &'static str, reason: String },
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Eos(#[from] EosError),
    #[error(transparent)]
    Discretization(#[from] DiscretizationError),
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
