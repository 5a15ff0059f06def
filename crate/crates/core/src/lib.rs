//! Numerical laboratory for abstract damped wave semigroups on flat tori.

pub mod certify;
pub mod config;
pub mod damping;
pub mod error;
pub mod fit;
pub mod generator;
pub mod linalg;
pub mod plot;
pub mod presets;
pub mod quadrature;
pub mod runner;
pub mod scan;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
