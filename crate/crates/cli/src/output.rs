//! Deterministic CSV/JSON emission: 17 significant digits, no timestamps,
//! fixed row order, so identical configs produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use billiard_core::fmt_f64;

pub fn write_text(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(dir, name, &text)
}

/// Rows of `epsilon, quantity, value` with summary rows carrying fitted
/// slopes (empty epsilon column).
pub struct ScalingCsv {
    lines: Vec<String>,
}

impl ScalingCsv {
    pub fn new() -> Self {
        Self {
            lines: vec!["epsilon,quantity,value".to_string()],
        }
    }

    pub fn row(&mut self, epsilon: f64, quantity: &str, value: f64) {
        self.lines
            .push(format!("{},{},{}", fmt_f64(epsilon), quantity, fmt_f64(value)));
    }

    pub fn summary(&mut self, quantity: &str, value: f64) {
        self.lines.push(format!(",{},{}", quantity, fmt_f64(value)));
    }

    pub fn finish(self) -> String {
        let mut text = self.lines.join("\n");
        text.push('\n');
        text
    }
}
