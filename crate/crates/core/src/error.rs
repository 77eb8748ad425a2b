use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("kernel evaluated at its singular point {0}")]
    Singular(&'static str),

    #[error("circulant embedding has a negative eigenvalue ({min_eig:e})")]
    Embedding { min_eig: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("linear system is ill-conditioned (estimated condition {0:e})")]
    IllConditioned(f64),

    #[error("fixed-point iteration is not contracting (factor {0})")]
    NonContraction(f64),

    #[error("point {0} is too close to the positive real axis")]
    PoleProximity(String),

    #[error("wavelet level {level} is too fine for the sampling grid ({samples} samples per support)")]
    LevelTooFine { level: u32, samples: usize },

    #[error("wavelet support of ({level}, {shift}) falls outside the observation window")]
    SupportOutsideWindow { level: u32, shift: usize },

    #[error("nonpositive wavelet energy at level {0}")]
    NonPositiveEnergy(u32),

    #[error("optimizer failed to converge after {0} evaluations")]
    OptimizerNonConvergence(usize),

    #[error("degenerate regression abscissa")]
    DegenerateAbscissa,
}

pub type Result<T> = std::result::Result<T, Error>;
