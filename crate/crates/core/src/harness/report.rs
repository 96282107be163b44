use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Passes iff `|z| <= bound`.
    ZScore,
    /// Passes iff `|diff| <= bound`.
    Tolerance,
    /// Recorded only; always passes.
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub analytic: Option<f64>,
    pub mc: f64,
    pub stderr: f64,
    pub z: Option<f64>,
    pub diff: Option<f64>,
    pub bound: Option<f64>,
    pub check: Check,
    pub pass: bool,
}

impl ReportRow {
    /// A Monte Carlo value against a target. A zero standard error with a
    /// nonzero difference never passes.
    pub fn z_score(name: impl Into<String>, analytic: f64, mc: f64, stderr: f64, bound: f64) -> Self {
        let d = (mc - analytic).abs();
        let z = if stderr > 0.0 {
            Some(d / stderr)
        } else if d == 0.0 {
            Some(0.0)
        } else {
            None
        };
        let pass = z.is_some_and(|z| z <= bound);
        Self {
            name: name.into(),
            analytic: Some(analytic),
            mc,
            stderr,
            z,
            diff: Some(mc - analytic),
            bound: Some(bound),
            check: Check::ZScore,
            pass,
        }
    }

    /// `|diff| <= tol`, with `diff` supplied (it may be a complex modulus or
    /// a distance rather than `value - analytic`).
    pub fn tolerance(name: impl Into<String>, analytic: Option<f64>, value: f64, diff: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            analytic,
            mc: value,
            stderr: 0.0,
            z: None,
            diff: Some(diff),
            bound: Some(tol),
            check: Check::Tolerance,
            pass: diff.abs() <= tol,
        }
    }

    pub fn info(name: impl Into<String>, value: f64, stderr: f64) -> Self {
        Self { name: name.into(), analytic: None, mc: value, stderr, z: None, diff: None, bound: None, check: Check::Info, pass: true }
    }

    pub fn with_stderr(mut self, stderr: f64) -> Self {
        self.stderr = stderr;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub kind: String,
    /// SHA-256 of the canonical TOML form of the config.
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_time_secs: f64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub rows: Vec<ReportRow>,
    /// Files written next to `report.json`.
    pub artifacts: Vec<String>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.metadata;
        writeln!(f, "{} ({}) seed={} workers={} {:.2}s", m.name, m.kind, m.seed, m.workers, m.wall_time_secs)?;
        writeln!(f, "{:<36} {:>12} {:>12} {:>10} {:>8} {:>10}  result", "row", "analytic", "value", "stderr", "z", "bound")?;
        for r in &self.rows {
            let res = match (r.check, r.pass) {
                (Check::Info, _) => "info",
                (_, true) => "PASS",
                (_, false) => "FAIL",
            };
            writeln!(
                f,
                "{:<36} {:>12} {:>12.6} {:>10.2e} {:>8} {:>10}  {}",
                r.name,
                opt(r.analytic),
                r.mc,
                r.stderr,
                r.z.map_or_else(|| "-".into(), |z| format!("{z:.2}")),
                opt(r.bound),
                res
            )?;
        }
        Ok(())
    }
}
