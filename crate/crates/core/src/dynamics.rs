//! The symplectic billiard map as a twist map of the phase cylinder.
//!
//! Three consecutive points `γ(t), γ(t'), γ(t'')` are an orbit segment iff
//! the chord `γ(t'') - γ(t)` is positively parallel to the tangent `γ'(t')`.
//! The generating function is `H(t, t') = ω(γ(t), γ(t'))` with the origin at
//! the base ellipse center; its mixed partial `ω(γ'(t), γ'(t'))` is positive
//! on the phase domain, which is where the map is defined.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{area_form, DeformedCurve};

/// Reject phase points whose twist density is at or below this floor
/// (scaled by the normalized area): the map is undefined there.
const TWIST_FLOOR: f64 = 1e-14;

/// Bisection width target, scaled by the normalized area.
const BISECT_WIDTH: f64 = 1e-8;

/// Residual target for root polish, scaled by `A³` for chord residuals and
/// by the local tangent magnitudes for tangent residuals.
const ROOT_RESIDUAL: f64 = 1e-12;

const MAX_NEWTON_POLISH: usize = 10;

/// A point of the phase cylinder: a boundary parameter and its successor.
/// `t_next - t` must lie in `(0, period)`; values are kept unreduced so that
/// winding (the lift) is tracked across iterations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub t_next: f64,
}

impl PhasePoint {
    pub fn new(t: f64, t_next: f64) -> Self {
        Self { t, t_next }
    }
}

/// Generating function `H(t, t') = ω(γ(t) - c, γ(t') - c)` with `c` the base
/// ellipse center. For an undeformed ellipse this equals `A³ sin((t'-t)/A)`.
pub fn generating_function(curve: &DeformedCurve, t: f64, t_next: f64) -> f64 {
    area_form(curve.radius_vector(t), curve.radius_vector(t_next))
}

/// Mixed partial of the generating function, `ω(γ'(t), γ'(t'))`.
/// Positive exactly on the phase domain of the map.
pub fn twist_density(curve: &DeformedCurve, t: f64, t_next: f64) -> f64 {
    area_form(curve.velocity(t), curve.velocity(t_next))
}

/// Check the domain condition for a phase point and return its twist density.
pub fn check_domain(curve: &DeformedCurve, p: PhasePoint) -> Result<f64> {
    let period = curve.period();
    let gap = p.t_next - p.t;
    let twist = twist_density(curve, p.t, p.t_next);
    if !(gap > 0.0 && gap < period) || twist <= TWIST_FLOOR * curve.normalized_area() {
        return Err(Error::DomainViolation {
            t: p.t,
            t_next: p.t_next,
            twist,
        });
    }
    Ok(twist)
}

/// The unique `t* ≠ t` with `γ'(t)` and `γ'(t*)` parallel (and opposite in
/// direction). Found by a bracketed scan of the twist density followed by
/// bisection and Newton polish.
pub fn parallel_partner(curve: &DeformedCurve, t: f64) -> Result<f64> {
    let period = curve.period();
    let tangent = curve.velocity(t);
    let h = |s: f64| area_form(tangent, curve.velocity(s));

    // h > 0 just after t, h < 0 just before t + period; find the crossing.
    let coarse = 512;
    let mut lo = t + period / coarse as f64;
    if h(lo) <= 0.0 {
        return Err(Error::BracketingFailed(format!(
            "twist density non-positive immediately after t = {t}; curve not strictly convex"
        )));
    }
    let mut hi = t + period * (1.0 - 1.0 / coarse as f64);
    if h(hi) >= 0.0 {
        return Err(Error::BracketingFailed(format!(
            "no tangent-direction reversal located after t = {t}"
        )));
    }
    for i in 2..coarse {
        let s = t + period * i as f64 / coarse as f64;
        if h(s) <= 0.0 {
            hi = s;
            break;
        }
        lo = s;
    }

    let aa = curve.normalized_area();
    let mut root = bisect(&h, lo, hi, BISECT_WIDTH * aa);
    // Newton polish: h'(s) = ω(γ'(t), γ''(s)).
    let scale = tangent.norm() * curve.velocity(root).norm();
    for _ in 0..MAX_NEWTON_POLISH {
        let val = h(root);
        if val.abs() <= ROOT_RESIDUAL * scale {
            break;
        }
        let dv = area_form(tangent, curve.acceleration(root));
        if dv == 0.0 {
            break;
        }
        root = (root - val / dv).clamp(lo, hi);
    }
    let residual = h(root).abs();
    if residual > ROOT_RESIDUAL * scale.max(1e-300) {
        return Err(Error::BracketingFailed(format!(
            "parallel tangent residual {residual} above tolerance at t = {t}"
        )));
    }
    if tangent.dot(&curve.velocity(root)) >= 0.0 {
        return Err(Error::BracketingFailed(format!(
            "parallel tangent at t = {t} is not opposite in direction"
        )));
    }
    Ok(root)
}

/// One application of the symplectic billiard map: `(t, t') ↦ (t', t'')`
/// where `γ(t'') - γ(t)` is positively parallel to `γ'(t')`.
///
/// The root of `g(s) = ω(γ(s) - γ(t), γ'(t'))` is bracketed on the open arc
/// between `t'` and `t + period` (excluding a shrinking neighborhood of the
/// trivial root at `t + period`), then polished by bisection and Newton.
pub fn billiard_step(curve: &DeformedCurve, p: PhasePoint) -> Result<PhasePoint> {
    check_domain(curve, p)?;
    let period = curve.period();
    let aa = curve.normalized_area();
    let anchor = curve.point(p.t);
    let tangent = curve.velocity(p.t_next);
    let g = |s: f64| area_form(curve.point(s) - anchor, tangent);

    let lo0 = p.t_next;
    if g(lo0) <= 0.0 {
        return Err(Error::BracketingFailed(format!(
            "chord function non-positive at t' = {}; non-convex input",
            p.t_next
        )));
    }
    // Shrink the exclusion zone around the trivial root until the sign flips.
    let mut hi = f64::NAN;
    let mut delta = period * 1e-3;
    for _ in 0..60 {
        let s = p.t + period - delta;
        if s <= lo0 {
            delta *= 0.5;
            continue;
        }
        if g(s) < 0.0 {
            hi = s;
            break;
        }
        delta *= 0.5;
    }
    if !hi.is_finite() {
        return Err(Error::BracketingFailed(format!(
            "no sign change of the chord function on ({}, {}); step degenerate",
            lo0,
            p.t + period
        )));
    }
    // Walk the coarse grid from t' toward hi to tighten the bracket.
    let mut lo = lo0;
    let coarse = 256;
    for i in 1..coarse {
        let s = lo0 + (hi - lo0) * i as f64 / coarse as f64;
        if g(s) <= 0.0 {
            hi = s;
            break;
        }
        lo = s;
    }

    let mut root = bisect(&g, lo, hi, BISECT_WIDTH * aa);
    let tol = ROOT_RESIDUAL * aa.powi(3);
    for _ in 0..MAX_NEWTON_POLISH {
        let val = g(root);
        if val.abs() <= tol {
            break;
        }
        let dv = area_form(curve.velocity(root), tangent);
        if dv == 0.0 {
            break;
        }
        root = (root - val / dv).clamp(lo, hi);
    }
    if g(root).abs() > tol {
        return Err(Error::BracketingFailed(format!(
            "chord residual {} above tolerance {tol} after polish",
            g(root).abs()
        )));
    }
    // Positive parallelism resolves the two-root ambiguity of a line meeting
    // a convex curve.
    if (curve.point(root) - anchor).dot(&tangent) <= 0.0 {
        return Err(Error::BracketingFailed(
            "located chord is anti-parallel to the middle tangent".into(),
        ));
    }
    Ok(PhasePoint::new(p.t_next, root))
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    // invariant: f(lo) > 0 >= f(hi)
    for _ in 0..200 {
        if hi - lo <= width {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// An orbit segment of the billiard map with the lift (unreduced parameters)
/// kept for rotation numbers. Consecutive points chain: `points[i].t_next ==
/// points[i+1].t`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub points: Vec<PhasePoint>,
}

impl Trajectory {
    /// Number of map applications recorded.
    pub fn steps(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    /// `(lift_end - lift_start) / (steps · period)`.
    pub fn rotation_number(&self, period: f64) -> f64 {
        let n = self.steps();
        assert!(n >= 1, "rotation number needs at least 2 phase points");
        (self.points[n].t - self.points[0].t) / (n as f64 * period)
    }

    /// CSV export with columns `step, t, t_next, lift, twist_density`.
    /// `t` and `t_next` are reduced to `[0, period)`; `lift` is unreduced.
    pub fn write_csv<W: Write>(&self, curve: &DeformedCurve, out: &mut W) -> std::io::Result<()> {
        let period = curve.period();
        writeln!(out, "step,t,t_next,lift,twist_density")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i,
                crate::fmt_f64(p.t.rem_euclid(period)),
                crate::fmt_f64(p.t_next.rem_euclid(period)),
                crate::fmt_f64(p.t),
                crate::fmt_f64(twist_density(curve, p.t, p.t_next)),
            )?;
        }
        Ok(())
    }
}

/// Iterate the billiard map `n` times from `p0`, maintaining the lift.
/// A failing step reports its index.
pub fn iterate_map(curve: &DeformedCurve, p0: PhasePoint, n: usize) -> Result<Trajectory> {
    check_domain(curve, p0)?;
    let mut points = Vec::with_capacity(n + 1);
    points.push(p0);
    let mut p = p0;
    for index in 0..n {
        p = billiard_step(curve, p).map_err(|e| Error::StepFailed {
            index,
            source: Box::new(e),
        })?;
        points.push(p);
    }
    Ok(Trajectory { points })
}

/// Rotation number of a trajectory on the given curve.
pub fn rotation_number(curve: &DeformedCurve, traj: &Trajectory) -> f64 {
    traj.rotation_number(curve.period())
}
