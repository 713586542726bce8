//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("subsystem indices out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate Fermi level: eigenvalues {below} and {above} straddle the filling cut")]
    DegenerateFermiLevel { below: f64, above: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical state error: {0}")]
    NumericalState(String),

    #[error("matrix is not Hermitian within tolerance (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("precision insufficient: values {v1:.17e} and {v2:.17e} not stable under +8 digits")]
    PrecisionEscalation { v1: f64, v2: f64 },

    #[error("no entropy maximum found before t_max (series attached, {} samples)", series.len())]
    NoTpp { series: Vec<f64> },

    #[error("no interior minimum in series")]
    NoInteriorMinimum,

    #[error("quadrature did not converge: last refinement changed result by {achieved:.3e} (tolerance {wanted:.3e})")]
    QuadratureNonConvergence { achieved: f64, wanted: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("ambiguous entanglement Hamiltonian: smallest singular values {0:.3e}, {1:.3e} nearly degenerate")]
    AmbiguousEh(f64, f64),

    #[error("system too large: {0}")]
    TooLarge(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
