use thiserror::Error;

/// Errors raised while building or checking cell meshes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("inclusion violates clearance: extent {extent:.6} exceeds limit {limit:.6}")]
    ClearanceViolation { extent: f64, limit: f64 },
    #[error("invalid inclusion shape: {0}")]
    InvalidShape(String),
    #[error("invalid cell resolution: {0}")]
    InvalidResolution(String),
    #[error("triangulation failed: {0}")]
    MeshFailure(String),
    #[error("tetrahedron {tet} has non-positive volume {volume:e}")]
    OrientationFailure { tet: usize, volume: f64 },
    #[error("periodic pairing failed: {0}")]
    Pairing(String),
}

/// Errors raised by the finite element layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("periodic pairing incomplete: {0}")]
    PairingIncomplete(String),
    #[error("non-positive viscosity {value:e} at quadrature point {index}")]
    NonpositiveViscosity { index: usize, value: f64 },
    #[error("saddle-point solver breakdown: {reason} (residual history {history:?})")]
    SolverBreakdown { reason: String, history: Vec<f64> },
    #[error("Picard iteration did not converge in {iterations} iterations (last increment {last:e})")]
    NoConvergence { iterations: usize, last: f64, history: Vec<f64> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Errors raised by rheological parameter validation and the channel oracle.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("invalid viscosity law parameters: {0}")]
    InvalidParameters(String),
    #[error("could not bracket shear rate for stress {stress:e}")]
    RootBracketFailure { stress: f64 },
}

/// Top-level error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
