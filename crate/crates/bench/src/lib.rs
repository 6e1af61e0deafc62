//! Shared fixtures for the kernel benchmarks.

use billiard_core::geometry::{DeformationFn, DeformedCurve, EllipseSpec};

/// A mildly deformed circle used across benchmarks.
pub fn perturbed_circle(eps: f64) -> DeformedCurve {
    let base = EllipseSpec::unit_circle();
    let n = DeformationFn::new(
        base.period(),
        0.0,
        vec![0.0, 0.3 * eps, eps, 0.0, 0.5 * eps],
        vec![0.0, 0.0, 0.2 * eps],
    )
    .expect("coefficients are finite");
    DeformedCurve::new(base, n).expect("small deformations stay convex")
}
