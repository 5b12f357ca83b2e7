//! Deep clustering with a Gaussian-mixture VAE, a mutual-information
//! discriminator and a locality-preserving embedding loss.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the CLI uses.

pub mod cluster;
pub mod dataio;
pub mod diffcore;
mod error;
pub mod locality;
pub mod midisc;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod vade;

pub use error::{Error, Result};

pub type Model = model::LpvdnModel<f64>;
pub type Dataset = dataio::DatasetBundle<f64>;
pub type Store = diffcore::ParamStore<f64>;
pub type Outcome = pipeline::TrainOutcome<f64>;
