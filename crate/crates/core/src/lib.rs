//! Structural VARMA(p,q) models with independent non-Gaussian shocks:
//! simulation, identification up to signed permutations, conditional maximum
//! likelihood with analytic scores, and impulse-response analysis with
//! bootstrap confidence bands.

pub mod error;
pub mod estimate;
pub mod filter;
pub mod irf;
pub mod lagpoly;
pub mod likelihood;
pub mod model;
pub mod optim;
pub mod shockdist;

pub use error::{Result, SvarmaError};
pub use estimate::{EstimationResult, FitOptions};
pub use filter::SamplePath;
pub use lagpoly::MatrixPolynomial;
pub use model::{SvarmaSpec, ThetaVector};
pub use shockdist::ComponentDensity;
