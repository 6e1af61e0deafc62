//! Ellipses in affine arc-length parametrization, radial deformations stored
//! as truncated Fourier series, the planar area form, and linear images of
//! curves.
//!
//! All dynamics in this crate runs on [`DeformedCurve`]: a boundary
//! `γ(t) = c + (1 + n(t)) · R_tilt (a cos(t/A), b sin(t/A))` over a base
//! ellipse with normalized area `A = (ab)^(1/3)` and parameter period `2πA`.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// 2D vector used everywhere in the crate.
pub type Vec2 = Vector2<f64>;
/// 2x2 real matrix.
pub type Mat2 = Matrix2<f64>;

/// Default number of uniform samples per period for max-norms and for the
/// embeddedness/convexity checks. Band-limited inputs with `k_max <= 64` are
/// resolved with large margin.
pub const DENSE_GRID: usize = 4096;

/// Standard area form on the plane: `ω(u, v) = u_x v_y - u_y v_x`.
#[inline]
pub fn area_form(u: Vec2, v: Vec2) -> f64 {
    u.x * v.y - u.y * v.x
}

fn rotation(angle: f64) -> Mat2 {
    let (s, c) = angle.sin_cos();
    Mat2::new(c, -s, s, c)
}

// ---------------------------------------------------------------------------
// EllipseSpec
// ---------------------------------------------------------------------------

/// A planar ellipse: center, semi-axes `a, b > 0` and tilt (radians).
///
/// Its affine arc-length parametrization is
/// `e(t) = center + R_tilt (a cos(t/A), b sin(t/A))` with `A = (ab)^(1/3)`
/// and period `2πA`; for ellipses this coincides with the trigonometric
/// parametrization up to the scale `A`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EllipseSpec {
    #[serde(default = "Vec2::zeros")]
    pub center: Vec2,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub tilt: f64,
}

impl EllipseSpec {
    pub fn new(center: Vec2, a: f64, b: f64, tilt: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::InvalidEllipse(format!(
                "semi-axes must be finite and positive, got a = {a}, b = {b}"
            )));
        }
        if !(center.x.is_finite() && center.y.is_finite() && tilt.is_finite()) {
            return Err(Error::InvalidEllipse("center and tilt must be finite".into()));
        }
        Ok(Self { center, a, b, tilt })
    }

    /// Axis-aligned ellipse centered at the origin.
    pub fn axis_aligned(a: f64, b: f64) -> Result<Self> {
        Self::new(Vec2::zeros(), a, b, 0.0)
    }

    pub fn unit_circle() -> Self {
        Self {
            center: Vec2::zeros(),
            a: 1.0,
            b: 1.0,
            tilt: 0.0,
        }
    }

    /// Normalized area `A = (ab)^(1/3)`; equals `(area/π)^(1/3)`.
    /// For the unit circle `A = 1`.
    pub fn normalized_area(&self) -> f64 {
        (self.a * self.b).cbrt()
    }

    /// Period of the affine arc-length parametrization, `2πA`.
    pub fn period(&self) -> f64 {
        TAU * self.normalized_area()
    }

    fn rot(&self) -> Mat2 {
        rotation(self.tilt)
    }

    /// Phase angle `t/A` reduced to `[0, 2π)`.
    fn phase(&self, t: f64) -> f64 {
        (t / self.normalized_area()).rem_euclid(TAU)
    }

    /// Radius vector `e(t) - center`.
    pub fn radius_vector(&self, t: f64) -> Vec2 {
        let (s, c) = self.phase(t).sin_cos();
        self.rot() * Vec2::new(self.a * c, self.b * s)
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.center + self.radius_vector(t)
    }

    pub fn velocity(&self, t: f64) -> Vec2 {
        let aa = self.normalized_area();
        let (s, c) = self.phase(t).sin_cos();
        self.rot() * Vec2::new(-self.a * s / aa, self.b * c / aa)
    }

    pub fn acceleration(&self, t: f64) -> Vec2 {
        let aa = self.normalized_area();
        -self.radius_vector(t) / (aa * aa)
    }

    /// Quadratic form matrix `Q` with boundary `{x : (x-c)ᵀ Q (x-c) = 1}`.
    pub fn shape_matrix(&self) -> Mat2 {
        let r = self.rot();
        r * Mat2::new(1.0 / (self.a * self.a), 0.0, 0.0, 1.0 / (self.b * self.b)) * r.transpose()
    }

    /// Level-set value of `p` about this ellipse: the factor by which the
    /// ellipse must be scaled about its center for the boundary to pass
    /// through `p`. Equals 1 exactly on the boundary; affine invariant.
    pub fn radial_level(&self, p: Vec2) -> f64 {
        let u = self.rot().transpose() * (p - self.center);
        ((u.x / self.a).powi(2) + (u.y / self.b).powi(2)).sqrt()
    }
}

// ---------------------------------------------------------------------------
// DeformationFn
// ---------------------------------------------------------------------------

/// A smooth periodic function stored as a truncated real Fourier series
///
/// `n(t) = c0 + Σ_{k=1..k_max} cos_k · cos(kt/A) + sin_k · sin(kt/A)`
///
/// with period `2πA`. Derivatives are exact (term-wise differentiation).
#[derive(Clone, Debug)]
pub struct DeformationFn {
    period: f64,
    c0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl DeformationFn {
    pub fn new(period: f64, c0: f64, mut cos: Vec<f64>, mut sin: Vec<f64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidDeformation(format!(
                "period must be finite and positive, got {period}"
            )));
        }
        if !c0.is_finite() || cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidDeformation("coefficients must be finite".into()));
        }
        let len = cos.len().max(sin.len());
        cos.resize(len, 0.0);
        sin.resize(len, 0.0);
        Ok(Self { period, c0, cos, sin })
    }

    pub fn zero(period: f64) -> Self {
        Self {
            period,
            c0: 0.0,
            cos: Vec::new(),
            sin: Vec::new(),
        }
    }

    pub fn constant(period: f64, c0: f64) -> Result<Self> {
        Self::new(period, c0, Vec::new(), Vec::new())
    }

    /// Single harmonic `cos_amp · cos(kt/A) + sin_amp · sin(kt/A)`, `k >= 1`.
    pub fn harmonic(period: f64, k: usize, cos_amp: f64, sin_amp: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidDeformation("harmonic index must be >= 1".into()));
        }
        let mut cos = vec![0.0; k];
        let mut sin = vec![0.0; k];
        cos[k - 1] = cos_amp;
        sin[k - 1] = sin_amp;
        Self::new(period, 0.0, cos, sin)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn mean(&self) -> f64 {
        self.c0
    }

    /// Highest stored harmonic index.
    pub fn k_max(&self) -> usize {
        self.cos.len()
    }

    /// Cosine coefficient of harmonic `k >= 1`.
    pub fn cos_coeff(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.cos.len() {
            self.cos[k - 1]
        } else {
            0.0
        }
    }

    /// Sine coefficient of harmonic `k >= 1`.
    pub fn sin_coeff(&self, k: usize) -> f64 {
        if k >= 1 && k <= self.sin.len() {
            self.sin[k - 1]
        } else {
            0.0
        }
    }

    /// Evaluate the `order`-th derivative at `t` (order 0 is the value).
    /// Exact term-wise differentiation of the series.
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let omega = TAU / self.period;
        let phi = (t * omega).rem_euclid(TAU);
        let mut acc = if order == 0 { self.c0 } else { 0.0 };
        for (i, (&a, &b)) in self.cos.iter().zip(self.sin.iter()).enumerate() {
            let k = (i + 1) as f64;
            // d/dt [a cos(kωt) + b sin(kωt)] = kω [b cos(kωt) - a sin(kωt)]
            let (mut ca, mut sb) = (a, b);
            for _ in 0..order {
                let (na, nb) = (k * omega * sb, -k * omega * ca);
                ca = na;
                sb = nb;
            }
            let (s, c) = (k * phi).sin_cos();
            acc += ca * c + sb * s;
        }
        acc
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t, 0)
    }

    pub fn d1(&self, t: f64) -> f64 {
        self.eval(t, 1)
    }

    pub fn d2(&self, t: f64) -> f64 {
        self.eval(t, 2)
    }

    /// `C^k` norm `Σ_{j<=k} max |f^(j)|`, maxima over `grid` uniform samples.
    pub fn ck_norm_on_grid(&self, k: usize, grid: usize) -> f64 {
        let mut total = 0.0;
        for order in 0..=k {
            let mut m = 0.0f64;
            for i in 0..grid {
                let t = self.period * i as f64 / grid as f64;
                m = m.max(self.eval(t, order).abs());
            }
            total += m;
        }
        total
    }

    pub fn ck_norm(&self, k: usize) -> f64 {
        self.ck_norm_on_grid(k, DENSE_GRID)
    }

    pub fn c1_norm(&self) -> f64 {
        self.ck_norm(1)
    }

    /// `L²` norm `sqrt((1/L) ∫ |f|²)` from the coefficient Parseval sum.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self
            .cos
            .iter()
            .zip(self.sin.iter())
            .map(|(a, b)| 0.5 * (a * a + b * b))
            .sum();
        (self.c0 * self.c0 + sum).sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            period: self.period,
            c0: self.c0 * factor,
            cos: self.cos.iter().map(|c| c * factor).collect(),
            sin: self.sin.iter().map(|c| c * factor).collect(),
        }
    }

    fn zip_coeffs(&self, other: &Self, sign: f64) -> Result<Self> {
        if (self.period - other.period).abs() > 1e-9 * self.period {
            return Err(Error::InvalidDeformation(format!(
                "period mismatch: {} vs {}",
                self.period, other.period
            )));
        }
        let len = self.cos.len().max(other.cos.len());
        let mut cos = vec![0.0; len];
        let mut sin = vec![0.0; len];
        for k in 1..=len {
            cos[k - 1] = self.cos_coeff(k) + sign * other.cos_coeff(k);
            sin[k - 1] = self.sin_coeff(k) + sign * other.sin_coeff(k);
        }
        Self::new(self.period, self.c0 + sign * other.c0, cos, sin)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_coeffs(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_coeffs(other, -1.0)
    }

    /// Same function over a rescaled parameter: `m(t') = n((t' - offset)/scale)`
    /// with new period `scale · period`. Values are carried over unchanged;
    /// only the parametrization changes.
    pub fn reparametrized(&self, scale: f64, offset: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidDeformation(format!(
                "parameter scale must be positive, got {scale}"
            )));
        }
        let new_period = self.period * scale;
        let omega = TAU / new_period;
        let len = self.cos.len();
        let mut cos = vec![0.0; len];
        let mut sin = vec![0.0; len];
        for k in 1..=len {
            // cos(k(t'-φ0)ω) = cos(ktω')cos(kφ0ω') + sin(ktω')sin(kφ0ω')
            let (s, c) = (k as f64 * omega * offset).sin_cos();
            cos[k - 1] = self.cos_coeff(k) * c - self.sin_coeff(k) * s;
            sin[k - 1] = self.cos_coeff(k) * s + self.sin_coeff(k) * c;
        }
        Self::new(new_period, self.c0, cos, sin)
    }
}

/// `(C^k, L²)` norm pair of a deformation function.
pub fn function_norms(f: &DeformationFn, k: usize) -> (f64, f64) {
    (f.ck_norm(k), f.l2_norm())
}

// ---------------------------------------------------------------------------
// DeformedCurve
// ---------------------------------------------------------------------------

/// Boundary `γ(t) = c + (1 + n(t)) (e(t) - c)` of a radially deformed ellipse.
///
/// Construction validates that the curve stays embedded (`1 + n > 0`) and
/// strictly convex (`ω(γ', γ'') > 0`) on a dense grid.
#[derive(Clone, Debug)]
pub struct DeformedCurve {
    base: EllipseSpec,
    deformation: DeformationFn,
}

impl DeformedCurve {
    pub fn new(base: EllipseSpec, deformation: DeformationFn) -> Result<Self> {
        let period = base.period();
        if (deformation.period() - period).abs() > 1e-9 * period {
            return Err(Error::InvalidDeformation(format!(
                "deformation period {} must equal the base period {}",
                deformation.period(),
                period
            )));
        }
        let curve = Self { base, deformation };
        curve.validate_on_grid(DENSE_GRID)?;
        Ok(curve)
    }

    /// An undeformed ellipse as a curve (always valid).
    pub fn ellipse(base: EllipseSpec) -> Self {
        let period = base.period();
        Self {
            base,
            deformation: DeformationFn::zero(period),
        }
    }

    pub fn base(&self) -> &EllipseSpec {
        &self.base
    }

    pub fn deformation(&self) -> &DeformationFn {
        &self.deformation
    }

    pub fn period(&self) -> f64 {
        self.base.period()
    }

    pub fn normalized_area(&self) -> f64 {
        self.base.normalized_area()
    }

    /// Embeddedness and strict convexity on a uniform grid of `grid` samples.
    pub fn validate_on_grid(&self, grid: usize) -> Result<()> {
        let period = self.base.period();
        for i in 0..grid {
            let t = period * i as f64 / grid as f64;
            let r = 1.0 + self.deformation.value(t);
            if r <= 0.0 {
                return Err(Error::NotEmbedded { t, value: r });
            }
            let w = area_form(self.velocity(t), self.acceleration(t));
            if w <= 0.0 {
                return Err(Error::NotConvex { t, value: w });
            }
        }
        Ok(())
    }

    /// Radius vector `γ(t) - center` of the base ellipse.
    pub fn radius_vector(&self, t: f64) -> Vec2 {
        (1.0 + self.deformation.value(t)) * self.base.radius_vector(t)
    }

    pub fn point(&self, t: f64) -> Vec2 {
        self.base.center + self.radius_vector(t)
    }

    /// `γ'(t)`, exact by the product rule on the Fourier series.
    pub fn velocity(&self, t: f64) -> Vec2 {
        let rho = self.base.radius_vector(t);
        let rho_d = self.base.velocity(t);
        self.deformation.d1(t) * rho + (1.0 + self.deformation.value(t)) * rho_d
    }

    /// `γ''(t)`, exact by the product rule on the Fourier series.
    pub fn acceleration(&self, t: f64) -> Vec2 {
        let aa = self.base.normalized_area();
        let rho = self.base.radius_vector(t);
        let rho_d = self.base.velocity(t);
        let rho_dd = -rho / (aa * aa);
        self.deformation.d2(t) * rho
            + 2.0 * self.deformation.d1(t) * rho_d
            + (1.0 + self.deformation.value(t)) * rho_dd
    }

    /// Evaluate `γ`, `γ'` or `γ''` at `t`.
    pub fn eval(&self, t: f64, order: usize) -> Vec2 {
        match order {
            0 => self.point(t),
            1 => self.velocity(t),
            _ => self.acceleration(t),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = CurveJson {
            ellipse: self.base,
            deformation: DeformationJson {
                c0: self.deformation.mean(),
                cos: self.deformation.cos.clone(),
                sin: self.deformation.sin.clone(),
            },
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CurveJson = serde_json::from_str(text)?;
        doc.into_curve()
    }
}

/// JSON document schema for curves:
/// `{"ellipse": {"center":[x,y], "a":, "b":, "tilt":}, "deformation": {"c0":, "cos":[...], "sin":[...]}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveJson {
    pub ellipse: EllipseSpec,
    #[serde(default)]
    pub deformation: DeformationJson,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct DeformationJson {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl CurveJson {
    pub fn into_curve(self) -> Result<DeformedCurve> {
        let base = EllipseSpec::new(self.ellipse.center, self.ellipse.a, self.ellipse.b, self.ellipse.tilt)?;
        let deformation =
            DeformationFn::new(base.period(), self.deformation.c0, self.deformation.cos, self.deformation.sin)?;
        DeformedCurve::new(base, deformation)
    }
}

// ---------------------------------------------------------------------------
// AffinePlaneMap
// ---------------------------------------------------------------------------

/// Affine map `x ↦ L x + v` of the plane.
#[derive(Clone, Copy, Debug)]
pub struct AffinePlaneMap {
    pub linear: Mat2,
    pub translation: Vec2,
}

impl AffinePlaneMap {
    pub fn new(linear: Mat2, translation: Vec2) -> Self {
        Self { linear, translation }
    }

    pub fn identity() -> Self {
        Self {
            linear: Mat2::identity(),
            translation: Vec2::zeros(),
        }
    }

    pub fn linear(linear: Mat2) -> Self {
        Self {
            linear,
            translation: Vec2::zeros(),
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        self.linear * p + self.translation
    }

    /// Map norm: operator norm of the linear part plus Euclidean norm of the
    /// translation.
    pub fn norm(&self) -> f64 {
        operator_norm(&self.linear) + self.translation.norm()
    }

    /// Image of a curve under an orientation-preserving linear map
    /// (translation must be zero). The affine arc-length parameter rescales
    /// by `(det L)^(1/3)` and the deformation is carried over with rescaled
    /// period and unchanged values.
    pub fn apply_to_curve(&self, curve: &DeformedCurve) -> Result<MappedCurve> {
        let det = self.linear.determinant();
        if det <= 0.0 {
            return Err(Error::NonPositiveDeterminant { det });
        }
        if self.translation.norm() > 1e-12 * (1.0 + operator_norm(&self.linear)) {
            return Err(Error::NonZeroTranslation);
        }
        let image = ellipse_linear_image(&self.linear, curve.base())?;
        let scale = det.cbrt();

        // Phase offset: L e(0) = e'(scale·0 + offset) fixes the image
        // parametrization origin.
        let p0 = self.linear * curve.base().point(0.0);
        let u = image.rot().transpose() * (p0 - image.center);
        let phase = (u.y / image.b).atan2(u.x / image.a);
        let offset = image.normalized_area() * phase;

        let deformation = curve.deformation().reparametrized(scale, offset)?;
        let curve = DeformedCurve::new(image, deformation)?;
        Ok(MappedCurve {
            curve,
            param_scale: scale,
            param_offset: offset,
        })
    }
}

/// Image of a curve under a linear map together with the induced affine
/// reparametrization `t ↦ param_scale · t + param_offset`.
#[derive(Clone, Debug)]
pub struct MappedCurve {
    pub curve: DeformedCurve,
    pub param_scale: f64,
    pub param_offset: f64,
}

impl MappedCurve {
    /// Parameter on the image curve corresponding to `t` on the source.
    pub fn map_param(&self, t: f64) -> f64 {
        self.param_scale * t + self.param_offset
    }
}

/// Operator norm (largest singular value) of a 2x2 matrix.
pub fn operator_norm(m: &Mat2) -> f64 {
    let g = m.transpose() * m;
    let tr = g[(0, 0)] + g[(1, 1)];
    let det = g.determinant().max(0.0);
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    (tr / 2.0 + disc).max(0.0).sqrt()
}

/// Image ellipse of `e` under the linear map `l`. Axes are sorted major
/// first and the tilt is normalized to `[0, π)`.
pub fn ellipse_linear_image(l: &Mat2, e: &EllipseSpec) -> Result<EllipseSpec> {
    ellipse_affine_image(l, Vec2::zeros(), e)
}

/// Image ellipse of `e` under `x ↦ l x + v`.
pub fn ellipse_affine_image(l: &Mat2, v: Vec2, e: &EllipseSpec) -> Result<EllipseSpec> {
    let inv = l
        .try_inverse()
        .ok_or(Error::NonPositiveDeterminant { det: l.determinant() })?;
    let q = inv.transpose() * e.shape_matrix() * inv;
    let (axes, tilt) = quadratic_form_axes(&q);
    EllipseSpec::new(l * e.center + v, axes.0, axes.1, tilt)
}

/// Semi-axes (major first) and tilt of the ellipse `{x : xᵀ Q x = 1}`.
fn quadratic_form_axes(q: &Mat2) -> ((f64, f64), f64) {
    let m11 = q[(0, 0)];
    let m22 = q[(1, 1)];
    let m12 = 0.5 * (q[(0, 1)] + q[(1, 0)]);
    let tr = m11 + m22;
    let disc = ((m11 - m22).powi(2) / 4.0 + m12 * m12).max(0.0).sqrt();
    let lam_min = tr / 2.0 - disc;
    let lam_max = tr / 2.0 + disc;
    // Major axis direction: eigenvector of the smaller eigenvalue.
    let v = if disc < 1e-300 {
        Vec2::new(1.0, 0.0)
    } else if (m11 - lam_min).abs() > (m22 - lam_min).abs() {
        Vec2::new(m12, lam_min - m11)
    } else {
        Vec2::new(lam_min - m22, m12)
    };
    let v = if v.norm() < 1e-300 { Vec2::new(1.0, 0.0) } else { v.normalize() };
    let tilt = v.y.atan2(v.x).rem_euclid(PI);
    ((1.0 / lam_min.sqrt(), 1.0 / lam_max.sqrt()), tilt)
}
