//! Numerical laboratory for the Dirac equation on the zero-gravity
//! Kerr–Newman spacetime.
//!
//! Natural units `ħ = c = 1` throughout. Spacetime points are given in
//! Boyer–Lindquist coordinates `(t, r, θ, φ)` with `r ∈ ℝ` running over both
//! sheets; `r > 0` is the sheet in which the ring carries charge `Q`.
// `!(x > 0.0)` rejects NaN on purpose; index loops mirror the tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bispinor;
pub mod bohm;
pub mod dirac_op;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod interaction;
pub mod ode;
pub mod quadrature;
pub mod root;
pub mod spectral;
pub mod verify;

pub use error::{Result, ZgknError};
pub use geometry::{Bl, ModelParams, Sheet, SpacetimePoint};
