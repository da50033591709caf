//! Numerical laboratory for rotopulsating orbits of the curved n-body problem.
//!
//! Bodies move on the unit sphere (`σ = +1`) or unit hyperboloid (`σ = -1`)
//! of `R^k`. A rotopulsating orbit keeps the bodies on a planar polygon that
//! rotates by `θ(t)` and scales by `ρ(t)` while the remaining coordinates
//! `Z(t)` are shared. The crate evaluates the existence criterion for such
//! polygons, integrates both the full equations of motion and the reduced
//! `(ρ, θ, Z)` system, and checks them against each other.

// Validation compares with `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod integrator;
pub mod model;

pub use error::{Error, Result, Singularity};
pub use geometry::{AmbientVector, CurvatureSign};
pub use model::{FullState, PolygonConfig, ReducedState};
