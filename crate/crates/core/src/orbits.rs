//! q-periodic orbits of the symplectic billiard map.
//!
//! The orbit condition `ω(γ(t_{j+1}) - γ(t_{j-1}), γ'(t_j)) = 0` expands over
//! a radially deformed ellipse into a four-term expression in the normalized
//! area, the deformation and its derivative, and sines/cosines of the
//! parameter gaps. With the anchor `t_0` held fixed this is a chained system
//! in the interior points whose Jacobian is tridiagonal in closed form; the
//! full cyclic system is closed by damped least-squares descent (the orbit
//! family direction makes its Jacobian nearly singular on integrable curves).

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{generating_function, twist_density};
use crate::error::{Error, Result};
use crate::geometry::{area_form, DeformedCurve, Vec2};

/// Newton iteration cap for the anchored chain solve.
const MAX_ITERATIONS: usize = 50;
/// Iteration cap for the full cyclic least-squares solve; near-resonant
/// deformations leave the orbit family degenerate to second order, which
/// slows the first few steps.
const MAX_LM_ITERATIONS: usize = 100;
/// Residual target the solvers polish toward (scaled by `A²`).
const POLISH_TOL: f64 = 1e-13;
/// Acceptance threshold for the chain solve (scaled by `A²`).
const CHAIN_TOL: f64 = 1e-11;
/// Acceptance threshold for the full cyclic solve (scaled by `A²`).
const ORBIT_TOL: f64 = 1e-10;
/// Newton step cap as a fraction of the equidistributed gap `2πA/q`.
const STEP_CAP_FRACTION: f64 = 0.25;
/// Initial Levenberg damping for the cyclic solve.
const LM_LAMBDA0: f64 = 1e-10;

/// The chained orbit system: anchor `t0` fixed, interior points
/// `t_1 < … < t_{q-1}` unknown, endpoints `t_0 = t0` and `t_q = t0 + 2πA`
/// entering as constants.
#[derive(Clone, Debug)]
pub struct ChainSystem<'a> {
    pub curve: &'a DeformedCurve,
    pub q: usize,
    pub t0: f64,
    pub t: Vec<f64>,
}

impl<'a> ChainSystem<'a> {
    pub fn new(curve: &'a DeformedCurve, q: usize, t0: f64, t: Vec<f64>) -> Result<Self> {
        if q < 3 {
            return Err(Error::InvalidDeformation(format!("chain system needs q >= 3, got {q}")));
        }
        if t.len() != q - 1 {
            return Err(Error::InvalidDeformation(format!(
                "expected {} interior points, got {}",
                q - 1,
                t.len()
            )));
        }
        let sys = Self { curve, q, t0, t };
        if !sys.is_ordered(&sys.t) {
            return Err(Error::InvalidDeformation(
                "interior points must be strictly increasing inside (t0, t0 + period)".into(),
            ));
        }
        Ok(sys)
    }

    /// Equidistributed configuration `t_j = t0 + 2πA j / q`: the exact orbit
    /// on an undeformed ellipse and the Newton seed everywhere else.
    pub fn equidistributed(curve: &'a DeformedCurve, q: usize, t0: f64) -> Result<Self> {
        let period = curve.period();
        let t = (1..q).map(|j| t0 + period * j as f64 / q as f64).collect();
        Self::new(curve, q, t0, t)
    }

    fn is_ordered(&self, t: &[f64]) -> bool {
        let period = self.curve.period();
        let mut prev = self.t0;
        for &tj in t {
            if tj <= prev {
                return false;
            }
            prev = tj;
        }
        prev < self.t0 + period
    }

    /// Full parameter list `t_0, …, t_{q-1}` including the anchor.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.q);
        out.push(self.t0);
        out.extend_from_slice(&self.t);
        out
    }
}

/// Four-term residual of one chain equation (the negated orbit condition).
/// `gap_prev = t_j - t_{j-1}`, `gap_next = t_{j+1} - t_j`.
#[allow(clippy::too_many_arguments)]
fn residual_term(
    aa: f64,
    n_prev: f64,
    n_j: f64,
    n_next: f64,
    dn_j: f64,
    gap_prev: f64,
    gap_next: f64,
) -> f64 {
    let a2 = aa * aa;
    let a3 = a2 * aa;
    let (sp, cp) = (gap_next / aa).sin_cos();
    let (sm, cm) = (gap_prev / aa).sin_cos();
    a3 * (1.0 + n_next) * dn_j * sp + a3 * (1.0 + n_prev) * dn_j * sm
        - a2 * (1.0 + n_next) * (1.0 + n_j) * cp
        + a2 * (1.0 + n_j) * (1.0 + n_prev) * cm
}

/// Chain residual vector `F_1 … F_{q-1}`.
///
/// Equals the negated geometric orbit residual
/// `-ω(γ(t_{j+1}) - γ(t_{j-1}), γ'(t_j))` at every configuration.
pub fn chain_residual(sys: &ChainSystem) -> Vec<f64> {
    let aa = sys.curve.normalized_area();
    let n = sys.curve.deformation();
    let period = sys.curve.period();
    let q = sys.q;
    let mut out = Vec::with_capacity(q - 1);
    for j in 1..q {
        let t_prev = if j == 1 { sys.t0 } else { sys.t[j - 2] };
        let t_j = sys.t[j - 1];
        let t_next = if j == q - 1 { sys.t0 + period } else { sys.t[j] };
        out.push(residual_term(
            aa,
            n.value(t_prev),
            n.value(t_j),
            n.value(t_next),
            n.d1(t_j),
            t_j - t_prev,
            t_next - t_j,
        ));
    }
    out
}

/// Tridiagonal matrix stored by diagonals; row `i` is
/// `(sub[i], diag[i], sup[i])` with `sub[0] = sup[last] = 0`.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn size(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.size();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            out[(i, i)] = self.diag[i];
            if i > 0 {
                out[(i, i - 1)] = self.sub[i];
            }
            if i + 1 < m {
                out[(i, i + 1)] = self.sup[i];
            }
        }
        out
    }

    /// Thomas algorithm. Returns `None` on a vanishing pivot.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let m = self.size();
        assert_eq!(rhs.len(), m);
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut pivot = self.diag[0];
        if pivot.abs() < 1e-300 {
            return None;
        }
        c[0] = self.sup.first().copied().unwrap_or(0.0) / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..m {
            pivot = self.diag[i] - self.sub[i] * c[i - 1];
            if pivot.abs() < 1e-300 {
                return None;
            }
            if i + 1 < m {
                c[i] = self.sup[i] / pivot;
            }
            d[i] = (rhs[i] - self.sub[i] * d[i - 1]) / pivot;
        }
        for i in (0..m.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }
}

/// Partial derivatives of one chain equation with respect to the three
/// parameters and the substituted deformation values; composed into the
/// total derivative via the chain rule through `n(t_k)` and `n'(t_k)`.
struct RowDerivatives {
    d_t_prev: f64,
    d_t_j: f64,
    d_t_next: f64,
    d_n_prev: f64,
    d_n_j: f64,
    d_n_next: f64,
    d_dn_j: f64,
}

#[allow(clippy::too_many_arguments)]
fn row_derivatives(
    aa: f64,
    n_prev: f64,
    n_j: f64,
    n_next: f64,
    dn_j: f64,
    gap_prev: f64,
    gap_next: f64,
) -> RowDerivatives {
    let a2 = aa * aa;
    let a3 = a2 * aa;
    let (sp, cp) = (gap_next / aa).sin_cos();
    let (sm, cm) = (gap_prev / aa).sin_cos();
    RowDerivatives {
        d_t_prev: -a2 * (1.0 + n_prev) * dn_j * cm + aa * (1.0 + n_prev) * (1.0 + n_j) * sm,
        d_t_j: -a2 * (1.0 + n_next) * dn_j * cp + a2 * (1.0 + n_prev) * dn_j * cm
            - aa * (1.0 + n_next) * (1.0 + n_j) * sp
            - aa * (1.0 + n_j) * (1.0 + n_prev) * sm,
        d_t_next: a2 * (1.0 + n_next) * dn_j * cp + aa * (1.0 + n_j) * (1.0 + n_next) * sp,
        d_n_prev: a3 * dn_j * sm + a2 * (1.0 + n_j) * cm,
        d_n_j: -a2 * (1.0 + n_next) * cp + a2 * (1.0 + n_prev) * cm,
        d_n_next: a3 * dn_j * sp - a2 * (1.0 + n_j) * cp,
        d_dn_j: a3 * (1.0 + n_next) * sp + a3 * (1.0 + n_prev) * sm,
    }
}

/// Closed-form tridiagonal Jacobian of the chain residual with respect to
/// the interior points (total derivative: the deformation and its first
/// derivative are evaluated at the moving points). At the equidistributed
/// configuration on an undeformed ellipse this reduces to
/// `A sin(2π/q) · tridiag(1, -2, 1)`.
pub fn chain_jacobian(sys: &ChainSystem) -> Tridiagonal {
    let aa = sys.curve.normalized_area();
    let n = sys.curve.deformation();
    let period = sys.curve.period();
    let q = sys.q;
    let m = q - 1;
    let mut tri = Tridiagonal {
        sub: vec![0.0; m],
        diag: vec![0.0; m],
        sup: vec![0.0; m],
    };
    for j in 1..q {
        let t_prev = if j == 1 { sys.t0 } else { sys.t[j - 2] };
        let t_j = sys.t[j - 1];
        let t_next = if j == q - 1 { sys.t0 + period } else { sys.t[j] };
        let der = row_derivatives(
            aa,
            n.value(t_prev),
            n.value(t_j),
            n.value(t_next),
            n.d1(t_j),
            t_j - t_prev,
            t_next - t_j,
        );
        let i = j - 1;
        tri.diag[i] = der.d_t_j + der.d_n_j * n.d1(t_j) + der.d_dn_j * n.d2(t_j);
        if j > 1 {
            tri.sub[i] = der.d_t_prev + der.d_n_prev * n.d1(t_prev);
        }
        if j < q - 1 {
            tri.sup[i] = der.d_t_next + der.d_n_next * n.d1(t_next);
        }
    }
    tri
}

/// Result of the chained (anchored) orbit solve.
#[derive(Clone, Debug)]
pub struct ChainSolution {
    /// Interior points `t_1 … t_{q-1}`.
    pub t: Vec<f64>,
    /// Value of the unused closing equation `ω(γ(t_1) - γ(t_{q-1}), γ'(t_0))`.
    pub closing_residual: f64,
    pub max_residual: f64,
    pub iterations: usize,
}

impl ChainSolution {
    pub fn params(&self, t0: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.t.len() + 1);
        out.push(t0);
        out.extend_from_slice(&self.t);
        out
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton iteration from the equidistributed seed solving the chain system
/// with `t0` held fixed. Steps are capped at `0.25 · 2πA/q` and ordering of
/// the interior points is enforced by step rejection.
pub fn solve_chain(curve: &DeformedCurve, q: usize, t0: f64) -> Result<ChainSolution> {
    let mut sys = ChainSystem::equidistributed(curve, q, t0)?;
    let aa = curve.normalized_area();
    let period = curve.period();
    let scale = aa * aa;
    let cap = STEP_CAP_FRACTION * period / q as f64;

    let mut residual = chain_residual(&sys);
    let mut res_norm = max_abs(&residual);
    let mut iterations = 0;
    while res_norm > POLISH_TOL * scale && iterations < MAX_ITERATIONS {
        iterations += 1;
        let jac = chain_jacobian(&sys);
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let mut step = jac.solve(&rhs).ok_or(Error::NewtonDiverged {
            iterations,
            residual: res_norm,
        })?;
        let step_norm = max_abs(&step);
        if step_norm > cap {
            let shrink = cap / step_norm;
            for s in &mut step {
                *s *= shrink;
            }
        }
        // reject steps that break the ordering, halving until they fit
        let mut factor = 1.0;
        let mut accepted = false;
        let prev_t = sys.t.clone();
        for _ in 0..30 {
            let trial: Vec<f64> = prev_t
                .iter()
                .zip(step.iter())
                .map(|(t, s)| t + factor * s)
                .collect();
            if sys.is_ordered(&trial) {
                sys.t = trial;
                accepted = true;
                break;
            }
            factor *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations,
                residual: res_norm,
            });
        }
        residual = chain_residual(&sys);
        let new_norm = max_abs(&residual);
        if new_norm >= res_norm && res_norm <= CHAIN_TOL * scale {
            // already converged; keep the better configuration
            sys.t = prev_t;
            break;
        }
        res_norm = new_norm;
    }
    if res_norm > CHAIN_TOL * scale {
        return Err(Error::NewtonDiverged {
            iterations,
            residual: res_norm,
        });
    }
    let closing_residual = area_form(
        sys.curve.point(sys.t[0]) - sys.curve.point(sys.t[q - 2]),
        sys.curve.velocity(t0),
    );
    Ok(ChainSolution {
        t: sys.t,
        closing_residual,
        max_residual: res_norm,
        iterations,
    })
}

/// A q-periodic orbit: parameters winding once around the curve, its action,
/// and the residuals it was accepted with.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub q: usize,
    /// `t_0 < t_1 < … < t_{q-1}`, with `t_0` reduced to `[0, period)`.
    pub params: Vec<f64>,
    /// Cyclic sum of the generating function; twice the enclosed area.
    pub action: f64,
    pub max_residual: f64,
    /// Orbit equation at the anchor index.
    pub closing_residual: f64,
}

/// Geometric orbit residuals `ω(γ(t_{j+1}) - γ(t_{j-1}), γ'(t_j))`,
/// indices mod q.
pub fn orbit_residuals(curve: &DeformedCurve, params: &[f64]) -> Vec<f64> {
    let q = params.len();
    let period = curve.period();
    (0..q)
        .map(|j| {
            let prev = if j == 0 { params[q - 1] - period } else { params[j - 1] };
            let next = if j == q - 1 { params[0] + period } else { params[j + 1] };
            area_form(
                curve.point(next) - curve.point(prev),
                curve.velocity(params[j]),
            )
        })
        .collect()
}

fn cyclic_residual(curve: &DeformedCurve, params: &[f64]) -> Vec<f64> {
    let q = params.len();
    let aa = curve.normalized_area();
    let n = curve.deformation();
    let period = curve.period();
    (0..q)
        .map(|j| {
            let prev = if j == 0 { params[q - 1] - period } else { params[j - 1] };
            let next = if j == q - 1 { params[0] + period } else { params[j + 1] };
            residual_term(
                aa,
                n.value(prev),
                n.value(params[j]),
                n.value(next),
                n.d1(params[j]),
                params[j] - prev,
                next - params[j],
            )
        })
        .collect()
}

fn cyclic_jacobian(curve: &DeformedCurve, params: &[f64]) -> DMatrix<f64> {
    let q = params.len();
    let aa = curve.normalized_area();
    let n = curve.deformation();
    let period = curve.period();
    let mut jac = DMatrix::zeros(q, q);
    for j in 0..q {
        let prev = if j == 0 { params[q - 1] - period } else { params[j - 1] };
        let next = if j == q - 1 { params[0] + period } else { params[j + 1] };
        let der = row_derivatives(
            aa,
            n.value(prev),
            n.value(params[j]),
            n.value(next),
            n.d1(params[j]),
            params[j] - prev,
            next - params[j],
        );
        let jp = (j + q - 1) % q;
        let jn = (j + 1) % q;
        jac[(j, j)] = der.d_t_j + der.d_n_j * n.d1(params[j]) + der.d_dn_j * n.d2(params[j]);
        jac[(j, jp)] += der.d_t_prev + der.d_n_prev * n.d1(prev);
        jac[(j, jn)] += der.d_t_next + der.d_n_next * n.d1(next);
    }
    jac
}

fn is_cyclically_ordered(params: &[f64], period: f64) -> bool {
    params.windows(2).all(|w| w[1] > w[0]) && params[params.len() - 1] - params[0] < period
}

/// Solve the full cyclic system (all q orbit equations). On integrable
/// curves the q-periodic orbits form a one-parameter family, so the Jacobian
/// carries a near-zero mode; least-squares steps with Levenberg damping
/// accept any point on the family. When the damped descent stalls (the
/// closing obstruction of a non-resonant deformation can sit many orders
/// below the transverse dynamics), the solver falls back to a bracketed
/// 1-D root search of the closing residual over the anchor, on top of the
/// anchored chain solve.
pub fn find_periodic_orbit(curve: &DeformedCurve, q: usize, seed_t0: f64) -> Result<PeriodicOrbit> {
    if q < 3 {
        return Err(Error::InvalidDeformation(format!("periodic orbit needs q >= 3, got {q}")));
    }
    let params = match cyclic_least_squares(curve, q, seed_t0) {
        Ok(params) => params,
        Err(_) => anchor_root_search(curve, q, seed_t0)?,
    };
    finish_orbit(curve, params)
}

fn cyclic_least_squares(curve: &DeformedCurve, q: usize, seed_t0: f64) -> Result<Vec<f64>> {
    let period = curve.period();
    let aa = curve.normalized_area();
    let scale = aa * aa;
    let cap = STEP_CAP_FRACTION * period / q as f64;
    let mut params: Vec<f64> = (0..q)
        .map(|j| seed_t0 + period * j as f64 / q as f64)
        .collect();

    let sum_sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let mut residual = cyclic_residual(curve, &params);
    let mut res_norm = max_abs(&residual);
    let mut res_sq = sum_sq(&residual);
    let mut lambda = LM_LAMBDA0;
    let mut iterations = 0;
    'outer: while res_norm > POLISH_TOL * scale && iterations < MAX_LM_ITERATIONS {
        iterations += 1;
        let jac = cyclic_jacobian(curve, &params);
        let jt = jac.transpose();
        let gram = &jt * &jac;
        let rhs = -(&jt * DVector::from_column_slice(&residual));
        let mut accepted = false;
        for _ in 0..25 {
            let mut damped = gram.clone();
            for i in 0..q {
                damped[(i, i)] += lambda;
            }
            let Some(step) = damped.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut step: Vec<f64> = step.iter().copied().collect();
            let step_norm = max_abs(&step);
            if step_norm > cap {
                let shrink = cap / step_norm;
                for s in &mut step {
                    *s *= shrink;
                }
            }
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            if is_cyclically_ordered(&trial, period) {
                let trial_res = cyclic_residual(curve, &trial);
                let trial_sq = sum_sq(&trial_res);
                if trial_sq < res_sq {
                    params = trial;
                    res_norm = max_abs(&trial_res);
                    residual = trial_res;
                    res_sq = trial_sq;
                    // no decay floor: a second-order-degenerate family mode
                    // needs the damping far below its squared singular value
                    lambda = (lambda / 10.0).max(1e-30);
                    accepted = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            break 'outer;
        }
    }
    if res_norm > ORBIT_TOL * scale {
        return Err(Error::NewtonDiverged {
            iterations,
            residual: res_norm,
        });
    }
    Ok(params)
}

/// The closing residual of the anchored chain solution as a function of the
/// anchor is the derivative of the action along the chain family, so it is
/// periodic with zero mean: genuine orbits are its bracketed roots.
fn anchor_root_search(curve: &DeformedCurve, q: usize, seed_t0: f64) -> Result<Vec<f64>> {
    let period = curve.period();
    let aa = curve.normalized_area();
    let closing = |t0: f64| -> Result<f64> { Ok(solve_chain(curve, q, t0)?.closing_residual) };

    let scan = (8 * q).max(64);
    let mut lo = seed_t0;
    let mut v_lo = closing(lo)?;
    let mut bracket = None;
    let mut max_seen = v_lo.abs();
    for i in 1..=scan {
        let t = seed_t0 + period * i as f64 / scan as f64;
        let v = closing(t)?;
        max_seen = max_seen.max(v.abs());
        if v == 0.0 || v.signum() != v_lo.signum() {
            bracket = Some((lo, t, v_lo));
            break;
        }
        lo = t;
        v_lo = v;
    }
    let scale = aa * aa;
    let (mut a, mut b, va) = match bracket {
        Some(b) => b,
        None => {
            // no sign change: either every anchor closes (integrable within
            // solver resolution) or the search genuinely failed
            if max_seen <= ORBIT_TOL * scale {
                let sol = solve_chain(curve, q, seed_t0)?;
                return Ok(sol.params(seed_t0));
            }
            return Err(Error::NewtonDiverged {
                iterations: scan,
                residual: max_seen,
            });
        }
    };
    let positive_at_a = va > 0.0;
    for _ in 0..60 {
        if b - a <= 1e-13 * period {
            break;
        }
        let mid = 0.5 * (a + b);
        let vm = closing(mid)?;
        if vm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if (vm > 0.0) == positive_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    let root = 0.5 * (a + b);
    let sol = solve_chain(curve, q, root)?;
    Ok(sol.params(root))
}

fn finish_orbit(curve: &DeformedCurve, mut params: Vec<f64>) -> Result<PeriodicOrbit> {
    let q = params.len();
    let period = curve.period();
    let aa = curve.normalized_area();
    let residuals = orbit_residuals(curve, &params);
    let max_residual = max_abs(&residuals);
    if max_residual > ORBIT_TOL * aa * aa {
        return Err(Error::NewtonDiverged {
            iterations: 0,
            residual: max_residual,
        });
    }
    // reduce the anchor into [0, period)
    let shift = (params[0] / period).floor() * period;
    for t in &mut params {
        *t -= shift;
    }
    // every consecutive pair must satisfy the phase domain condition
    for j in 0..q {
        let next = if j == q - 1 { params[0] + period } else { params[j + 1] };
        let twist = twist_density(curve, params[j], next);
        if twist <= 0.0 {
            return Err(Error::DomainViolation {
                t: params[j],
                t_next: next,
                twist,
            });
        }
    }
    let action = orbit_action(curve, &params);
    let closing_residual = area_form(
        curve.point(params[1]) - curve.point(params[q - 1]),
        curve.velocity(params[0]),
    );
    Ok(PeriodicOrbit {
        q,
        params,
        action,
        max_residual,
        closing_residual,
    })
}

/// Action of a closed parameter polygon: the cyclic sum of the generating
/// function. Independent of the origin used for the area form and equal to
/// twice the shoelace area of the orbit polygon.
pub fn orbit_action(curve: &DeformedCurve, params: &[f64]) -> f64 {
    let q = params.len();
    let period = curve.period();
    let mut action = 0.0;
    for j in 0..q {
        let next = if j == q - 1 { params[0] + period } else { params[j + 1] };
        action += generating_function(curve, params[j], next);
    }
    action
}

/// Action computed with the area form taken about an arbitrary origin;
/// closed orbits make this origin-independent.
pub fn orbit_action_about(curve: &DeformedCurve, params: &[f64], origin: Vec2) -> f64 {
    let q = params.len();
    let mut action = 0.0;
    for j in 0..q {
        let p = curve.point(params[j]) - origin;
        let pn = curve.point(params[(j + 1) % q]) - origin;
        action += area_form(p, pn);
    }
    action
}

/// Eigenvalues of the base Jacobian `A sin(2π/q) · tridiag(1, -2, 1)` of
/// size `q-1`, with the inverse-norm comparison against the `A⁻¹ q³` form.
#[derive(Clone, Debug)]
pub struct BaseSpectrum {
    pub q: usize,
    pub normalized_area: f64,
    /// Sorted by absolute value, smallest first.
    pub eigenvalues: Vec<f64>,
    pub smallest_abs: f64,
    /// `1 / smallest_abs`, the operator norm of the inverse.
    pub inverse_norm: f64,
    /// `inverse_norm · A / q³`; bounded above and below by constants over q.
    pub inverse_bound_ratio: f64,
    /// Analytic smallest magnitude `A sin(2π/q)(2 - 2cos(π/q))` of the
    /// (q-1)-dimensional Toeplitz matrix, as a cross-check.
    pub toeplitz_smallest: f64,
}

/// Numerically computed spectrum of the base Jacobian at the equidistributed
/// configuration of an undeformed ellipse with normalized area `a_norm`.
pub fn base_spectrum(q: usize, a_norm: f64) -> BaseSpectrum {
    assert!(q >= 3 && a_norm > 0.0);
    let m = q - 1;
    let factor = a_norm * (std::f64::consts::TAU / q as f64).sin();
    let mut mat = DMatrix::zeros(m, m);
    for i in 0..m {
        mat[(i, i)] = -2.0 * factor;
        if i > 0 {
            mat[(i, i - 1)] = factor;
        }
        if i + 1 < m {
            mat[(i, i + 1)] = factor;
        }
    }
    let mut eigenvalues: Vec<f64> = mat
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let smallest_abs = eigenvalues[0].abs();
    let inverse_norm = 1.0 / smallest_abs;
    let q3 = (q as f64).powi(3);
    let toeplitz_smallest =
        a_norm * (std::f64::consts::TAU / q as f64).sin() * (2.0 - 2.0 * (std::f64::consts::PI / q as f64).cos());
    BaseSpectrum {
        q,
        normalized_area: a_norm,
        eigenvalues,
        smallest_abs,
        inverse_norm,
        inverse_bound_ratio: inverse_norm * a_norm / q3,
        toeplitz_smallest,
    }
}

/// CSV export of an orbit: columns `q, j, t_j, residual_j`.
pub fn write_orbit_csv<W: Write>(
    out: &mut W,
    curve: &DeformedCurve,
    orbit: &PeriodicOrbit,
) -> std::io::Result<()> {
    writeln!(out, "q,j,t_j,residual_j")?;
    let residuals = orbit_residuals(curve, &orbit.params);
    for (j, (t, r)) in orbit.params.iter().zip(residuals.iter()).enumerate() {
        writeln!(out, "{},{},{},{}", orbit.q, j, crate::fmt_f64(*t), crate::fmt_f64(*r))?;
    }
    Ok(())
}
