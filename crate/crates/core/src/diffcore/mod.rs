//! Reverse-mode automatic differentiation over dense matrices, the Adam
//! optimizer, and a finite-difference gradient checker.

mod adam;
mod error;
mod gradcheck;
mod nn;
mod param;
mod tape;

pub use adam::Adam;
pub use error::DiffError;
pub use gradcheck::{grad_check, GradCheckReport};
pub use nn::{Linear, Mlp};
pub use param::{Gradients, ParamId, ParamStore, Parameter};
pub use tape::{expanded_sq_dists, Tape, Var};
