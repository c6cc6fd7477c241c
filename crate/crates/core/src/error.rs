use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site {site} out of range for {n_sites} sites")]
    InvalidSite { site: usize, n_sites: usize },

    #[error("graph has {graph} logical qubits but basis has {basis}")]
    BasisMismatch { graph: usize, basis: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |H - H^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("{what} violated (residual {residual:e})")]
    Constraint { what: String, residual: f64 },

    #[error("imaginary square root in {0}; use the numeric solver")]
    ImaginaryRoot(String),

    #[error("integration step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("state left the computational subspace at index {index} (|u_ii| = {magnitude:e})")]
    LeftSubspace { index: usize, magnitude: f64 },

    #[error("pole at {0}")]
    Resonance(String),

    #[error("ambiguous dressed-state labeling for {state} (overlap {overlap:.3}); move deeper into the dispersive regime")]
    AmbiguousLabel { state: String, overlap: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
