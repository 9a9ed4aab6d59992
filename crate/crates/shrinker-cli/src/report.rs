//! Report bundles: a JSON summary whose every checked number carries the
//! bound it was checked against, plus the CSV and SVG files beside it.

use crate::error::CliResult;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    Below {
        max: f64,
    },
    AtMost {
        max: f64,
    },
    AtLeast {
        min: f64,
    },
    Within {
        min: f64,
        max: f64,
    },
    /// Boolean property; the value is 1 when it holds.
    True,
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::Below { max } => v < max,
            Bound::AtMost { max } => v <= max,
            Bound::AtLeast { min } => v >= min,
            Bound::Within { min, max } => v >= min && v <= max,
            Bound::True => v == 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Bound,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, tolerance: Bound) -> Self {
        Check { name: name.into(), value, passed: tolerance.admits(value), tolerance }
    }

    pub fn below(name: impl Into<String>, value: f64, max: f64) -> Self {
        Self::new(name, value, Bound::Below { max })
    }

    pub fn at_least(name: impl Into<String>, value: f64, min: f64) -> Self {
        Self::new(name, value, Bound::AtLeast { min })
    }

    pub fn flag(name: impl Into<String>, holds: bool) -> Self {
        Self::new(name, if holds { 1.0 } else { 0.0 }, Bound::True)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportBundle {
    pub command: String,
    pub params: Value,
    pub checks: Vec<Check>,
    pub data: Value,
    /// Files written next to the summary, relative to the bundle directory.
    pub files: Vec<String>,
    #[serde(skip)]
    pub dir: PathBuf,
    /// Wall-clock timings, kept out of the summary so it stays reproducible.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl ReportBundle {
    pub fn new(command: &str, dir: &Path, params: Value) -> Self {
        ReportBundle {
            command: command.into(),
            params,
            checks: vec![],
            data: json!({}),
            files: vec![],
            dir: dir.to_path_buf(),
            timings: vec![],
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, cs: impl IntoIterator<Item = Check>) {
        self.checks.extend(cs);
    }

    pub fn insert(&mut self, key: &str, v: Value) {
        self.data[key] = v;
    }

    /// Path for a new output file, recorded in the bundle.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn write(&self) -> CliResult<PathBuf> {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["passed"] = json!(self.passed());
        let path = self.dir.join("summary.json");
        shrinker::io::write_json(&path, &v)?;
        if !self.timings.is_empty() {
            let t: serde_json::Map<String, Value> = self.timings.iter().map(|(k, s)| (k.clone(), json!(s))).collect();
            shrinker::io::write_json(&self.dir.join("timing.json"), &Value::Object(t))?;
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Check::below("x", 0.5, 1.0).passed);
        assert!(!Check::below("x", 1.0, 1.0).passed);
        assert!(Check::new("x", 1.0, Bound::AtMost { max: 1.0 }).passed);
        assert!(!Check::new("x", f64::NAN, Bound::Within { min: 0.0, max: 1.0 }).passed);
        assert!(!Check::flag("x", false).passed);
    }
}
