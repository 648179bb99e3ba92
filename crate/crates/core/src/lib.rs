//! Column stripe-noise removal for grayscale images.

pub mod baselines;
pub mod dadmm;
pub mod error;
pub mod imagecore;
pub mod metrics;
pub mod pmm;
pub mod prox;
pub mod scad;
pub mod synth;

pub use error::{DestripeError, Result};
pub use imagecore::ImageMatrix;
pub use pmm::{destripe, DestripeConfig, DestripeOutcome, Method, PmmStart};
pub use scad::ModelParams;
