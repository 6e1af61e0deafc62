//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid ellipse: {0}")]
    InvalidEllipse(String),

    #[error("invalid deformation: {0}")]
    InvalidDeformation(String),

    #[error("curve is not embedded: 1 + n(t) = {value} at t = {t}")]
    NotEmbedded { t: f64, value: f64 },

    #[error("curve is not strictly convex: area form of (velocity, acceleration) = {value} at t = {t}")]
    NotConvex { t: f64, value: f64 },

    #[error("phase point ({t}, {t_next}) outside the twist domain (twist density {twist})")]
    DomainViolation { t: f64, t_next: f64, twist: f64 },

    #[error("root bracketing failed: {0}")]
    BracketingFailed(String),

    #[error("map step {index} failed: {source}")]
    StepFailed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("linear map must have positive determinant, got {det}")]
    NonPositiveDeterminant { det: f64 },

    #[error("affine map must have zero translation for curve images")]
    NonZeroTranslation,

    #[error("Newton solver stopped after {iterations} iterations with residual {residual}")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("ellipse fit did not converge within {0} iterations")]
    FitDiverged(usize),

    #[error("target center lies outside the domain (boundary winding {winding})")]
    CenterOutsideDomain { winding: f64 },

    #[error("domain is not star-shaped about the target center (near parameter {t})")]
    NotStarShaped { t: f64 },

    #[error("scaling fit needs at least 3 usable points, got {0}")]
    InsufficientScalingPoints(usize),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
