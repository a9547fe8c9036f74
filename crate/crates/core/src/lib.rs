//! Galerkin boundary-element conditioning laboratory for the 2D Helmholtz
//! layer-potential operators.
//!
//! The crate assembles dense Galerkin matrices of the single-layer,
//! double-layer and combined-field operators on a catalogue of curves, measures
//! their extreme singular values, evaluates closed-form conditioning bounds,
//! and computes bouncing-ball eigenmodes of the ellipse from Mathieu
//! functions.

pub mod bounds;
pub mod ellipse_modes;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod operators;
pub mod quadrature;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
