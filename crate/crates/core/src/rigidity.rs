//! Quantitative harnesses behind the rigidity mechanism: action deviation of
//! q-periodic orbits, equidistribution, the sine-sum cancellation, Fourier
//! suppression on nearby integrable families, smooth decay of Fourier
//! integrals, integrability witnesses, the symmetric-difference metric, and
//! log-log scaling fits.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fitting;
use crate::geometry::{DeformationFn, DeformedCurve, EllipseSpec, DENSE_GRID};
use crate::orbits::{self, PeriodicOrbit};

/// Complex Fourier coefficients `a_k = (1/2πA) ∫ n(t) e^{-ikt/A} dt` for
/// `|k| <= k_max`, with conjugate symmetry for real input.
#[derive(Clone, Debug)]
pub struct FourierSpectrum {
    pub period: f64,
    k_max: usize,
    /// Index `i` holds `a_{i - k_max}`.
    coeffs: Vec<Complex64>,
}

impl FourierSpectrum {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn at(&self, k: i64) -> Complex64 {
        let idx = k + self.k_max as i64;
        if idx < 0 || idx >= self.coeffs.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[idx as usize]
        }
    }

    /// `sqrt(Σ |a_k|²)`; equals the L² norm for band-limited input.
    pub fn parseval_l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|a_k|` over `k_lo <= |k| <= k_hi`.
    pub fn max_abs_in_band(&self, k_lo: usize, k_hi: usize) -> f64 {
        let mut m = 0.0f64;
        for k in k_lo..=k_hi {
            m = m.max(self.at(k as i64).norm());
            m = m.max(self.at(-(k as i64)).norm());
        }
        m
    }
}

/// Exact spectrum of a stored Fourier series: `a_0 = c0`,
/// `a_k = (cos_k - i sin_k)/2`, `a_{-k} = conj(a_k)`.
pub fn fourier_coefficients(n: &DeformationFn, k_max: usize) -> FourierSpectrum {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k_max + 1];
    coeffs[k_max] = Complex64::new(n.mean(), 0.0);
    for k in 1..=k_max {
        let a = Complex64::new(n.cos_coeff(k) / 2.0, -n.sin_coeff(k) / 2.0);
        coeffs[k_max + k] = a;
        coeffs[k_max - k] = a.conj();
    }
    FourierSpectrum {
        period: n.period(),
        k_max,
        coeffs,
    }
}

/// Spectrum of an arbitrary periodic function by uniform trapezoid
/// quadrature (spectrally accurate); `nodes` should be at least `8 · k_max`.
pub fn fourier_coefficients_quadrature(
    f: impl Fn(f64) -> f64,
    period: f64,
    k_max: usize,
    nodes: usize,
) -> FourierSpectrum {
    let nodes = nodes.max(8 * k_max).max(64);
    let samples: Vec<f64> = (0..nodes)
        .map(|j| f(period * j as f64 / nodes as f64))
        .collect();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * k_max + 1];
    for k in -(k_max as i64)..=(k_max as i64) {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &v) in samples.iter().enumerate() {
            let ang = -TAU * (k * j as i64) as f64 / nodes as f64;
            acc += v * Complex64::new(ang.cos(), ang.sin());
        }
        coeffs[(k + k_max as i64) as usize] = acc / nodes as f64;
    }
    FourierSpectrum {
        period,
        k_max,
        coeffs,
    }
}

/// `∫_0^{2πA} n(t) e^{iqt/A} dt`, exact from the stored coefficients.
pub fn harmonic_integral(n: &DeformationFn, q: i64) -> Complex64 {
    let k_max = n.k_max().max(q.unsigned_abs() as usize);
    let spectrum = fourier_coefficients(n, k_max);
    spectrum.at(-q) * n.period()
}

/// Deviation of the q-orbit action from its elliptic closed form plus the
/// first-order deformation term:
/// `|A_q - A³ q sin(2π/q) - 2A³ sin(2π/q) Σ_j n(t_0 + 2πAj/q)|`
/// for the domain `base + eps · shape`, anchored at the orbit point of
/// smallest parameter. Quadratic in `eps` by the sine-sum cancellation.
pub fn action_deviation(
    base: &EllipseSpec,
    shape: &DeformationFn,
    eps: f64,
    q: usize,
) -> Result<f64> {
    let curve = DeformedCurve::new(*base, shape.scaled(eps))?;
    let orbit = orbits::find_periodic_orbit(&curve, q, 0.0)?;
    let aa = base.normalized_area();
    let period = base.period();
    let t0 = orbit.params[0];
    let n = curve.deformation();
    let sum: f64 = (0..q)
        .map(|j| n.value(t0 + period * j as f64 / q as f64))
        .sum();
    let s = (TAU / q as f64).sin();
    let a3 = aa.powi(3);
    Ok((orbit.action - a3 * q as f64 * s - 2.0 * a3 * s * sum).abs())
}

/// `|Σ_j sin((t_{j+1}-t_j)/A) - q sin(2π/q)|` over a periodic orbit;
/// quadratic in the deformation size because the first-order jump
/// corrections telescope to zero around the orbit.
pub fn sine_sum_deviation(curve: &DeformedCurve, orbit: &PeriodicOrbit) -> f64 {
    let aa = curve.normalized_area();
    let period = curve.period();
    let q = orbit.q;
    let mut sum = 0.0;
    for j in 0..q {
        let next = if j == q - 1 {
            orbit.params[0] + period
        } else {
            orbit.params[j + 1]
        };
        sum += ((next - orbit.params[j]) / aa).sin();
    }
    (sum - q as f64 * (TAU / q as f64).sin()).abs()
}

/// Max deviation of the anchored chain solution from the equidistributed
/// configuration; linear in `eps`.
pub fn equidistribution_deviation(
    base: &EllipseSpec,
    shape: &DeformationFn,
    eps: f64,
    q: usize,
    t0: f64,
) -> Result<f64> {
    let curve = DeformedCurve::new(*base, shape.scaled(eps))?;
    let sol = orbits::solve_chain(&curve, q, t0)?;
    let period = base.period();
    Ok(sol
        .t
        .iter()
        .enumerate()
        .map(|(j, t)| (t - (t0 + period * (j + 1) as f64 / q as f64)).abs())
        .fold(0.0f64, f64::max))
}

/// Ratios `|∫ n e^{iqt/A} dt| · |q| / (A² ‖n‖_{C¹})` over a harmonic range.
/// Integration by parts bounds every ratio by `2π`.
#[derive(Clone, Debug, Serialize)]
pub struct SmoothDecayReport {
    pub c1_norm: f64,
    pub entries: Vec<(i64, f64)>,
    pub c_max: f64,
}

pub fn smooth_decay_check(n: &DeformationFn, q_lo: i64, q_hi: i64) -> SmoothDecayReport {
    let aa = n.period() / TAU;
    let c1 = n.c1_norm();
    let mut entries = Vec::new();
    let mut c_max = 0.0f64;
    for q in q_lo..=q_hi {
        if q == 0 {
            continue;
        }
        let ratio = harmonic_integral(n, q).norm() * q.abs() as f64 / (aa * aa * c1);
        c_max = c_max.max(ratio);
        entries.push((q, ratio));
    }
    SmoothDecayReport {
        c1_norm: c1,
        entries,
        c_max,
    }
}

/// Per-delta measurements of a nearby-ellipse family re-expressed over a
/// base ellipse: the deformation norm scales linearly in the family
/// parameter while its non-elliptic harmonics are quadratically suppressed.
#[derive(Clone, Debug, Serialize)]
pub struct SuppressionReport {
    /// Rows `(delta, c1_norm, max |a_k| over the high band)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub norm_fit: ScalingReport,
    pub high_k_fit: ScalingReport,
}

pub fn fourier_suppression_study(
    base: &EllipseSpec,
    family: impl Fn(f64) -> EllipseSpec,
    deltas: &[f64],
    k_lo: usize,
    k_hi: usize,
) -> Result<SuppressionReport> {
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let member = DeformedCurve::ellipse(family(delta));
        let n = fitting::reexpress(&member, base)?;
        let spectrum = fourier_coefficients(&n, k_hi.max(n.k_max()));
        rows.push((delta, n.c1_norm(), spectrum.max_abs_in_band(k_lo, k_hi)));
    }
    let norms: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let high: Vec<f64> = rows.iter().map(|r| r.2).collect();
    Ok(SuppressionReport {
        norm_fit: scaling_study("c1_norm", deltas, &norms)?,
        high_k_fit: scaling_study("high_harmonics", deltas, &high)?,
        rows,
    })
}

/// Closing residuals of the anchored chain solve over a uniform grid of
/// anchors: the witness that an invariant curve of q-periodic orbits closes.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub q: usize,
    pub grid_size: usize,
    pub tol: f64,
    pub max_closing_residual: f64,
    pub failures: usize,
    pub actions: Vec<f64>,
    pub action_spread: f64,
    pub pass: bool,
}

pub fn integrability_witness(
    curve: &DeformedCurve,
    q: usize,
    grid_size: usize,
    tol: f64,
) -> WitnessReport {
    let period = curve.period();
    let mut max_res = 0.0f64;
    let mut failures = 0usize;
    let mut actions = Vec::with_capacity(grid_size);
    for i in 0..grid_size {
        let t0 = period * i as f64 / grid_size as f64;
        match orbits::solve_chain(curve, q, t0) {
            Ok(sol) => {
                max_res = max_res.max(sol.closing_residual.abs());
                actions.push(orbits::orbit_action(curve, &sol.params(t0)));
            }
            Err(_) => failures += 1,
        }
    }
    let action_spread = if actions.is_empty() {
        f64::INFINITY
    } else {
        let lo = actions.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = actions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    WitnessReport {
        q,
        grid_size,
        tol,
        max_closing_residual: max_res,
        failures,
        actions,
        action_spread,
        pass: failures == 0 && max_res <= tol,
    }
}

/// Area of the symmetric difference between an ellipse and its radial
/// deformation: `A² ∫ |n(t)| (1 + n(t)/2) dt` while `1 + λn` stays positive,
/// by uniform trapezoid quadrature.
pub fn symmetric_difference(base: &EllipseSpec, n: &DeformationFn) -> Result<f64> {
    let period = base.period();
    if (n.period() - period).abs() > 1e-9 * period {
        return Err(Error::InvalidDeformation(
            "deformation period must equal the base ellipse period".into(),
        ));
    }
    let aa = base.normalized_area();
    let m = DENSE_GRID;
    let mut sum = 0.0;
    for i in 0..m {
        let t = period * i as f64 / m as f64;
        let v = n.value(t);
        if 1.0 + v <= 0.0 {
            return Err(Error::NotEmbedded { t, value: 1.0 + v });
        }
        sum += v.abs() * (1.0 + v / 2.0);
    }
    Ok(aa * aa * sum * period / m as f64)
}

/// Least-squares line fit on `(log eps, log value)`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub name: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    /// Fitted log-log slope.
    pub slope: f64,
    /// Intercept in natural log.
    pub intercept: f64,
    /// RMS residual of the log fit.
    pub fit_residual: f64,
    /// Points dropped because the measured value fell below 1e-14.
    pub excluded: usize,
}

/// Fit a power law to measured values over a strictly decreasing epsilon
/// grid. Values at or below `1e-14` are excluded (with a count) since they
/// sit at the noise floor; fewer than 3 usable points is an error.
pub fn scaling_study(name: &str, epsilons: &[f64], values: &[f64]) -> Result<ScalingReport> {
    assert_eq!(epsilons.len(), values.len());
    if !epsilons.windows(2).all(|w| w[1] < w[0]) {
        return Err(Error::InvalidDeformation(
            "epsilon grid must be strictly decreasing".into(),
        ));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    for (&e, &v) in epsilons.iter().zip(values.iter()) {
        if v <= 1e-14 {
            excluded += 1;
            continue;
        }
        xs.push(e.ln());
        ys.push(v.ln());
    }
    let m = xs.len();
    if m < 3 {
        return Err(Error::InsufficientScalingPoints(m));
    }
    let mf = m as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let denom = mf * sxx - sx * sx;
    let slope = (mf * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / mf;
    let ss: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(ScalingReport {
        name: name.to_string(),
        epsilons: epsilons.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        fit_residual: (ss / mf).sqrt(),
        excluded,
    })
}

/// Run a measurement over an epsilon grid and fit the power law.
pub fn scaling_study_fn(
    name: &str,
    epsilons: &[f64],
    mut quantity: impl FnMut(f64) -> Result<f64>,
) -> Result<ScalingReport> {
    let mut values = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        values.push(quantity(e)?);
    }
    scaling_study(name, epsilons, &values)
}
