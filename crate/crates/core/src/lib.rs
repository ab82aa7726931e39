//! Two-stage latent-variable analysis: PLS path modeling with reflective,
//! formative, and second-order constructs, followed by a neural-network
//! stage that ranks the significant predictors by sensitivity.

pub mod ann;
pub mod bootstrap;
pub mod dataset;
pub mod diagnostics;
pub mod effects;
pub mod error;
pub mod model_spec;
pub mod pipeline;
pub mod pls;
pub mod report;
pub mod stats;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};
