//! Numerical library for planar symplectic billiards in ellipses and
//! radially deformed ellipses.
//!
//! The crate provides:
//! - curves and norms ([`geometry`]),
//! - the symplectic billiard map as a twist map ([`dynamics`]),
//! - q-periodic orbit solvers built on the chained residual system with its
//!   closed-form tridiagonal Jacobian ([`orbits`]),
//! - quantitative verification harnesses for action deviation,
//!   equidistribution, Fourier suppression and the symmetric-difference
//!   metric ([`rigidity`]),
//! - elliptic-harmonic projection, ellipse fitting, radial re-expression and
//!   the closest-ellipse iteration ([`fitting`]).
//!
//! All types are immutable values after construction; every operation is
//! pure and reentrant, so independent computations can run concurrently.

pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod geometry;
pub mod orbits;
pub mod rigidity;

pub use error::{Error, Result};
pub use geometry::{
    area_form, function_norms, AffinePlaneMap, CurveJson, DeformationFn, DeformedCurve,
    EllipseSpec, MappedCurve, Mat2, Vec2, DENSE_GRID,
};

pub use dynamics::{PhasePoint, Trajectory};
pub use fitting::{FitResult, IterationTrace, Termination};
pub use orbits::{BaseSpectrum, ChainSystem, PeriodicOrbit};
pub use rigidity::{FourierSpectrum, ScalingReport};

/// Format a float with 17 significant digits, enough to round-trip f64 and
/// keep emitted CSV/JSON diffable across runs.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
