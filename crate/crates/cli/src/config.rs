//! Study configuration: JSON file plus `--set key=value` overrides on top of
//! built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use billiard_core::geometry::{CurveJson, DeformationJson, EllipseSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Recorded into `config_used.json` for reproducibility.
    pub command: Option<String>,
    /// The curve under study (base ellipse plus deformation).
    pub curve: CurveJson,
    /// q values for scaling studies.
    pub qs: Vec<usize>,
    /// q values for the integrability witness.
    pub witness_qs: Vec<usize>,
    /// Anchor grid size for witness sweeps.
    pub t0_grid: usize,
    /// Fixed anchor for the equidistribution study. Generic by default: at
    /// symmetric anchors a deformation harmonic divisible by q locks the
    /// equidistributed configuration exactly and the deviation vanishes.
    pub anchor_t0: f64,
    /// Amplitude grid for scaling studies (strictly decreasing).
    pub epsilons: Vec<f64>,
    /// Upper harmonic index for spectral bands.
    pub k_max: usize,
    /// Deformation shapes scaled by epsilon in the scaling studies.
    pub shapes: Vec<DeformationJson>,
    pub tolerances: Tolerances,
    pub phase_portrait: PhasePortraitConfig,
    pub orbit: OrbitConfig,
    pub fit: FitConfig,
    /// Worker threads (0 = library default); the CLI flag takes precedence.
    pub workers: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Witness closing-residual tolerance as a multiple of A².
    pub witness_scale: f64,
    pub action_slope: [f64; 2],
    pub equidistribution_slope: [f64; 2],
    pub suppression_norm_slope: [f64; 2],
    pub suppression_high_slope: [f64; 2],
    /// Absolute tolerance on the closed-form symmetric-difference check.
    pub symmdiff_formula: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            witness_scale: 1e-9,
            action_slope: [1.8, 2.2],
            equidistribution_slope: [0.85, 1.15],
            suppression_norm_slope: [0.85, 1.15],
            suppression_high_slope: [1.8, 2.2],
            symmdiff_formula: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PhasePortraitConfig {
    pub initial_points: usize,
    pub steps: usize,
}

impl Default for PhasePortraitConfig {
    fn default() -> Self {
        Self {
            initial_points: 20,
            steps: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    pub q: usize,
    pub t0: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self { q: 5, t0: 0.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// When set, the domain is this ellipse re-expressed over the configured
    /// base instead of the configured deformation.
    pub domain_ellipse: Option<EllipseSpec>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 25,
            tol: 1e-10,
            domain_ellipse: None,
        }
    }
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            command: None,
            curve: CurveJson {
                ellipse: EllipseSpec::unit_circle(),
                deformation: DeformationJson::default(),
            },
            qs: vec![3, 4, 5, 7],
            witness_qs: (3..=10).collect(),
            t0_grid: 64,
            anchor_t0: 0.37,
            epsilons: vec![1e-2, 3e-3, 1e-3, 3e-4],
            k_max: 8,
            shapes: vec![
                DeformationJson {
                    c0: 0.0,
                    cos: vec![0.0, 0.0, 1.0],
                    sin: vec![],
                },
                DeformationJson {
                    c0: 0.0,
                    cos: vec![0.0, 0.0, 1.0],
                    sin: vec![0.0, 0.0, 0.0, 0.0, 0.5],
                },
            ],
            tolerances: Tolerances::default(),
            phase_portrait: PhasePortraitConfig::default(),
            orbit: OrbitConfig::default(),
            fit: FitConfig::default(),
            workers: 0,
        }
    }
}

/// Defaults, overlaid by the config file (deep merge), overlaid by `--set`
/// overrides.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<StudyConfig> {
    let mut value = serde_json::to_value(StudyConfig::default())?;
    if let Some(p) = path {
        let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
        let file: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
        merge(&mut value, file);
    }
    for spec in sets {
        apply_set(&mut value, spec)?;
    }
    let cfg: StudyConfig = serde_json::from_value(value)?;
    cfg.validate()?;
    Ok(cfg)
}

impl StudyConfig {
    fn validate(&self) -> Result<()> {
        if self.qs.is_empty() || self.witness_qs.is_empty() || self.epsilons.is_empty() {
            bail!("qs, witness_qs and epsilons must be non-empty");
        }
        if self.shapes.is_empty() {
            bail!("at least one deformation shape is required");
        }
        if self.t0_grid == 0 {
            bail!("t0_grid must be positive");
        }
        let t = &self.tolerances;
        let positive = [t.witness_scale, t.symmdiff_formula, self.fit.tol];
        if positive.iter().any(|v| v.is_nan() || *v <= 0.0) {
            bail!("tolerances must be positive");
        }
        if let Some(q) = self.qs.iter().chain(self.witness_qs.iter()).find(|&&q| q < 3) {
            bail!("q values must be at least 3, got {q}");
        }
        Ok(())
    }
}

fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                merge(d.entry(k).or_insert(Value::Null), v);
            }
        }
        (d, s) => *d = s,
    }
}

/// `--set dotted.path=VALUE` with the value parsed as JSON (bare words fall
/// back to strings).
fn apply_set(root: &mut Value, spec: &str) -> Result<()> {
    let Some((path, raw)) = spec.split_once('=') else {
        bail!("--set expects KEY=VALUE, got {spec:?}");
    };
    let val = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    for seg in path.split('.') {
        let obj = cur
            .as_object_mut()
            .with_context(|| format!("--set path {path:?}: {seg:?} is not an object field"))?;
        cur = obj.entry(seg.to_string()).or_insert(Value::Null);
    }
    *cur = val;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = load(None, &[]).unwrap();
        assert_eq!(cfg.qs, vec![3, 4, 5, 7]);
        assert_eq!(cfg.t0_grid, 64);
        assert_eq!(cfg.shapes.len(), 2);
    }

    #[test]
    fn set_overrides_nested_and_arrays() {
        let sets = vec![
            "orbit.q=7".to_string(),
            "curve.deformation.cos=[0,0,0,0,0,0,0.01]".to_string(),
            "qs=[3]".to_string(),
        ];
        let cfg = load(None, &sets).unwrap();
        assert_eq!(cfg.orbit.q, 7);
        assert_eq!(cfg.qs, vec![3]);
        assert_eq!(cfg.curve.deformation.cos.len(), 7);
    }

    #[test]
    fn bad_set_is_rejected() {
        assert!(load(None, &["nonsense".to_string()]).is_err());
    }
}
