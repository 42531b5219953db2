use thiserror::Error;

/// Errors raised by the numerical core.
///
/// The variants are grouped by how a caller is expected to react: input and
/// domain problems are caller mistakes, consistency and accuracy problems are
/// numerical failures that deserve a bug report or a finer discretization.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("spectral parameter outside the closed upper half-plane: Im λ = {0}")]
    Domain(f64),

    #[error("zero-energy branch requested from an oscillatory formula; use the λ = 0 path")]
    Branch,

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("numerical singularity: {0}")]
    Singular(String),

    #[error("outside the convergence regime: {0}")]
    Regime(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("grid error: {0}")]
    Grid(String),

    #[error("insufficient accuracy: {0}")]
    Accuracy(String),

    #[error("root κ = {kappa} is spurious: eigenfunction is not square integrable (growing tail {tail:.3e})")]
    NonNormalizable { kappa: f64, tail: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
