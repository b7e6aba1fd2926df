//! Gray-box equivalent dynamic model of a microgrid seen from its point of
//! common coupling: a third-order synchronous machine in parallel with a
//! static ZIP load and frequency-droop source.
//!
//! The crate simulates the model from PCC voltage and frequency traces,
//! identifies its parameters from measured active and reactive power under
//! machine feasibility constraints, and reports identification, validation
//! and cross-validation RMSEs.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod identification;
pub mod io;
pub mod model;
pub mod reference;
pub mod simulator;
pub mod synth;
pub mod validation;

pub use dataset::Dataset;
pub use error::{EdmError, Result};
pub use model::{ParamId, Theta};
