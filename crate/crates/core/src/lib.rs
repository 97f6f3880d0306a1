//! Picard-type operator learning for semilinear heat equations on the torus.

pub mod data;
pub mod error;
pub mod nonlinearity;
pub mod picard;
pub mod risk;
pub mod rollout;
pub mod semigroup;
pub mod spectral;

pub use error::{PicardError, Result};
