use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::scenario::{Kind, Scenario};

/// A measured quantity and the base tolerance it must stay below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub role: String,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, role: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), role: role.into(), value, tolerance }
    }

    /// NaN and infinite values always fail.
    pub fn passes(&self, scale: f64) -> bool {
        self.value.is_finite() && self.value < self.tolerance * scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    pub kind: Kind,
    pub checks: Vec<Check>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: String,
    pub kind: Kind,
    pub seed: u64,
    pub status: String,
    pub tolerance_scale: f64,
    /// Base tolerance of every check, before scaling.
    pub tolerances: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub config: Scenario,
    pub config_source: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const CHECKS: &str = "checks.json";
pub const REPORT: &str = "report.txt";

/// Collects files written into a run directory.
pub struct Artifacts {
    dir: PathBuf,
    names: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, names: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        if !self.names.iter().any(|n| n == name) {
            self.names.push(name.to_string());
        }
        Ok(())
    }

    /// Writes through a callback that fills a buffer.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> mockfield::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn names(&self) -> Vec<String> {
        let mut n = self.names.clone();
        n.sort();
        n
    }
}

pub fn render(kind: Kind, checks: &[Check], scale: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "mockfield {} report", kind.as_str());
    let _ = writeln!(s, "tolerance scale: {scale}");
    let _ = writeln!(s, "{:<7} {:<20} {:<22} {:>12} {:>12}", "verdict", "name", "role", "value", "tolerance");
    for c in checks {
        let verdict = if c.passes(scale) { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{:<7} {:<20} {:<22} {:>12.3e} {:>12.3e}",
            verdict,
            c.name,
            c.role,
            c.value,
            c.tolerance * scale
        );
    }
    s
}

pub fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<T> {
    let path = dir.join(name);
    let src = std::fs::read_to_string(&path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_str(&src).with_context(|| format!("parsing {}", path.display()))
}

/// Rebuilds the report of a finished run. Returns the text and whether every
/// check passed.
pub fn emit(dir: &Path, scale: Option<f64>) -> Result<(String, bool)> {
    let manifest: Manifest = read_json(dir, MANIFEST)?;
    let checks: Checks = read_json(dir, CHECKS)?;
    for a in &manifest.artifacts {
        let p = dir.join(a);
        if !p.is_file() {
            anyhow::bail!("missing artifact {}", p.display());
        }
    }
    let scale = scale.unwrap_or(manifest.tolerance_scale);
    let text = render(checks.kind, &checks.checks, scale);
    let pass = checks.checks.iter().all(|c| c.passes(scale));
    Ok((text, pass))
}
