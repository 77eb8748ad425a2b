//! Mixed fractional Brownian motion `X = σ B^H + √ε B` with `H ∈ (3/4, 1)`:
//! simulation, spectral information, Fredholm solvers, likelihood tools and
//! wavelet estimators.

pub mod error;
pub mod fredholm;
pub mod likelihood;
pub mod model;
pub mod quad;
pub mod spectral;
pub mod toeplitz;
pub mod wavelet;

pub use error::{Error, Result};
pub use model::{simulate_mixed_fbm, NoiseLevel, SamplePath, Theta};
pub use quad::QuadConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
