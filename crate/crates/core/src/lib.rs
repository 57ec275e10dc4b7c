//! Moist primitive-equation simulator in pressure coordinates with runtime
//! monitors for energy, maximum-principle and continuous-dependence bounds.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod diagnostic;
pub mod error;
pub mod grid;
pub mod io;
pub mod analysis;
pub mod microphysics;
pub mod operators;
pub mod stepper;

pub use config::{Config, PhysParams, ReferenceProfiles, RunConfig};
pub use error::{Error, Result};
pub use grid::{Grid, HorizontalVelocity, ModelState, ScalarField3};
