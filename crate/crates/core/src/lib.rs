//! Monte Carlo toolkit for the massless Sinh-Gordon model on a cylinder of
//! circumference 2πR: free-field path sampling, chaos masses, Feynman-Kac
//! estimates, spectral fits, vertex correlations and an analytic reference.

pub mod correlations;
pub mod error;
pub mod gff;
pub mod gmc;
pub mod lz;
pub mod mcmc;
pub mod params;
pub mod propagator;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use params::{validate_params, ModelParams};
pub use stats::EstimatorResult;
