//! Particle-fluid simulation of the inhomogeneous incompressible
//! Navier–Stokes–Vlasov system on a periodic box, with diagnostics for the
//! exponential decay rates of the coupled energy.

pub mod config;
pub mod coupler;
pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod functionals;
pub mod grid;
pub mod initial;
pub mod io;
pub mod kinetic;
pub mod oracle;
pub mod rates;
pub mod report;
pub mod scenarios;
pub mod spectral;
pub mod theory;
pub mod verify;

pub use config::{validate_config, SimConfig};
pub use error::{ConfigError, Error, Result};
pub use grid::{grid_norm, FaceField, Grid, NormKind, ScalarField};
