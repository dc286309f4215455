use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::experiments::run_experiment;
use crate::output::to_json17;
use crate::runner::report_value;
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 1e-9 }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Golden {
    pub config_hash: String,
    pub tolerance: Tolerance,
    pub report: Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Match,
    Diff,
    New,
    Error,
}

#[derive(Debug, Serialize)]
pub struct Entry {
    pub scenario: String,
    pub file: PathBuf,
    pub golden: Option<PathBuf>,
    pub status: Status,
    pub diffs: Vec<String>,
}

pub fn golden_name(s: &Scenario) -> String {
    format!("{}.{}.json", s.name, &s.hash()[..16])
}

fn close(a: f64, b: f64, tol: Tolerance) -> bool {
    a == b || (a - b).abs() <= tol.abs + tol.rel * a.abs().max(b.abs())
}

/// Differences between `got` and `want` as `pointer: got vs want`, at most `limit`.
pub fn diff_values(got: &Value, want: &Value, tol: Tolerance, limit: usize) -> Vec<String> {
    fn walk(g: &Value, w: &Value, at: &str, tol: Tolerance, out: &mut Vec<String>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        match (g, w) {
            (Value::Number(a), Value::Number(b)) => {
                let same = match (a.as_i64(), b.as_i64(), a.as_u64(), b.as_u64()) {
                    (Some(x), Some(y), _, _) => x == y,
                    (_, _, Some(x), Some(y)) => x == y,
                    _ => close(a.as_f64().unwrap_or(f64::NAN), b.as_f64().unwrap_or(f64::NAN), tol),
                };
                if !same {
                    out.push(format!("{}: {} vs {}", at, a, b));
                }
            }
            (Value::Array(a), Value::Array(b)) => {
                if a.len() != b.len() {
                    out.push(format!("{}: length {} vs {}", at, a.len(), b.len()));
                    return;
                }
                for (i, (x, y)) in a.iter().zip(b).enumerate() {
                    walk(x, y, &format!("{}/{}", at, i), tol, out, limit);
                }
            }
            (Value::Object(a), Value::Object(b)) => {
                for k in a.keys().chain(b.keys().filter(|k| !a.contains_key(*k))) {
                    match (a.get(k), b.get(k)) {
                        (Some(x), Some(y)) => walk(x, y, &format!("{}/{}", at, k), tol, out, limit),
                        _ => out.push(format!("{}/{}: present on one side only", at, k)),
                    }
                }
            }
            _ if g == w => {}
            _ => out.push(format!("{}: {} vs {}", at, g, w)),
        }
    }
    let mut out = Vec::new();
    walk(got, want, "", tol, &mut out, limit);
    out
}

fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Re-runs every scenario in `dir` and compares with `golden_dir`; with `bless`, missing
/// goldens are written.
pub fn verify(dir: &Path, golden_dir: &Path, bless: bool, threads: Option<usize>) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for file in scenario_files(dir)? {
        let s = match Scenario::load(&file) {
            Ok(s) => s,
            Err(e) => {
                entries.push(Entry {
                    scenario: file.display().to_string(),
                    file,
                    golden: None,
                    status: Status::Error,
                    diffs: vec![format!("{:#}", e)],
                });
                continue;
            }
        };
        let golden_path = golden_dir.join(golden_name(&s));
        let report = run_experiment(&s, threads.or(s.threads)).map(|o| report_value(&s, &o));
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                entries.push(Entry {
                    scenario: s.name.clone(),
                    file,
                    golden: Some(golden_path),
                    status: Status::Error,
                    diffs: vec![format!("{:#}", e)],
                });
                continue;
            }
        };
        // Compare what would be written, so the 17-digit rounding is part of the check.
        let report: Value = serde_json::from_str(&to_json17(&report)?)?;
        let (status, diffs) = if golden_path.exists() {
            let text = std::fs::read_to_string(&golden_path)?;
            let golden: Golden =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", golden_path.display()))?;
            let d = diff_values(&report, &golden.report, golden.tolerance, 20);
            (if d.is_empty() { Status::Match } else { Status::Diff }, d)
        } else {
            if bless {
                std::fs::create_dir_all(golden_dir)?;
                let g = Golden {
                    config_hash: s.hash(),
                    tolerance: Tolerance::default(),
                    report,
                };
                std::fs::write(&golden_path, to_json17(&g)?)?;
            }
            (Status::New, Vec::new())
        };
        entries.push(Entry {
            scenario: s.name.clone(),
            file,
            golden: Some(golden_path),
            status,
            diffs,
        });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tolerance_is_applied_to_floats_only() {
        let tol = Tolerance { abs: 0.0, rel: 1e-9 };
        let a = json!({"x": 1.0, "n": 3, "s": "a", "v": [1.0, 2.0]});
        assert!(diff_values(&a, &a, tol, 10).is_empty());
        let b = json!({"x": 1.0 + 1e-12, "n": 3, "s": "a", "v": [1.0, 2.0]});
        assert!(diff_values(&a, &b, tol, 10).is_empty());
        let c = json!({"x": 1.0 + 1e-6, "n": 4, "s": "b", "v": [1.0]});
        let d = diff_values(&a, &c, tol, 10);
        assert_eq!(d.len(), 4, "{:?}", d);
        assert!(d.iter().any(|l| l.starts_with("/x")));
    }

    #[test]
    fn missing_keys_are_reported() {
        let d = diff_values(&json!({"a": 1}), &json!({"b": 1}), Tolerance::default(), 10);
        assert_eq!(d.len(), 2);
    }
}
