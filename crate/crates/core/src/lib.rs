//! Numerical potential theory for radial weights on R^n.
//!
//! The crate computes weighted measures of balls, variational p-capacities
//! of annuli and points (with closed forms cross-checked by a discrete
//! minimization oracle), Muckenhoupt A_p constants with witness regions,
//! and measure-decay exponents — and combines them into a decision
//! procedure for whether the weighted Euclidean bow-tie (the positive and
//! negative hyperquadrants glued at the origin) supports a p-Poincaré
//! inequality.

pub mod capacity;
pub mod decider;
pub mod error;
pub mod mag;
pub mod measure;
pub mod muckenhoupt;
pub mod quad;
pub mod recipes;
pub mod report;
pub mod weight;

pub use error::{Error, Result};
pub use weight::RadialWeight;
