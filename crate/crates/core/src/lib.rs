//! Numerical lab for a coupled Cahn–Hilliard / Cahn–Hilliard–Oono system
//! with a Flory–Huggins potential on Neumann boxes.

pub mod check;
pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod potentials;
pub mod runner;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod steady;

pub use error::{Error, Result};
pub use potentials::{Parameters, PotentialKind, PotentialSpec};
pub use solver::{SchemeConfig, State};
pub use spectral::{Grid, ScalarField, SpectralField};
