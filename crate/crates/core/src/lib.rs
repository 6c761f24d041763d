//! Random-features regression with missing inputs: samplers, closed-form
//! risks and bounds, estimators, and Monte Carlo experiment drivers.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod linalg;
pub mod missingness;
pub mod montecarlo;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
pub use rng::SeededRng;
