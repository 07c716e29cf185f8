//! Numerical models of oriented circle fiberings.

pub mod cech;
pub mod circle_diffeo;
pub mod csf;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod moduli;
pub mod quat;
pub mod selftest;
mod spectral;

pub use error::{Error, Result};
