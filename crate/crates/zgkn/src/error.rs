//! Error type shared by every module.

use thiserror::Error;

use crate::spectral::ShootingReport;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ZgknError {
    /// The ring `r = 0, θ = π/2` is not part of the manifold.
    #[error("point lies on the ring singularity")]
    RingPoint,

    #[error("field point coincides with the point source")]
    CoincidentPoints,

    #[error("energy {energy} is outside the gap (-{mass}, {mass})")]
    NoGap { energy: f64, mass: f64 },

    #[error("invalid quantum numbers: {0}")]
    InvalidQuantumNumbers(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("right-hand side evaluated on a coordinate pole")]
    PoleEvaluation,

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("step size underflow at t = {at} (h = {step})")]
    StiffnessFailure { at: f64, step: f64 },

    #[error("eigenvalue iteration did not converge: {0:?}")]
    NoConvergence(Box<ShootingReport>),

    #[error("quadrature ladder does not converge: {0}")]
    QuadratureDivergence(String),

    #[error("the spinor vanishes")]
    ZeroSpinor,

    #[error("density below floor at {at:?}")]
    ZeroDensity { at: [f64; 4] },

    #[error("grids do not match")]
    GridMismatch,

    #[error("grid is not symmetric under the sheet swap")]
    AsymmetricGrid,

    #[error("evaluation point {0} is outside the tabulated range")]
    OutOfGrid(f64),

    #[error("the Dreibein is degenerate")]
    DegenerateFrame,

    #[error("the anomalous case Q != I*pi*a does not separate")]
    NonSeparable,
}

pub type Result<T> = std::result::Result<T, ZgknError>;
