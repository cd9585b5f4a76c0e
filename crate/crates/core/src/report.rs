//! Residual reports: per-condition sup-norm residuals gathered over sample points.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

/// Maximum residual of one named condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResidual {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A point at which evaluation failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub point: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub conditions: Vec<ConditionResidual>,
    pub evaluated: usize,
    pub failed_points: Vec<PointFailure>,
}

impl ResidualReport {
    pub fn empty() -> ResidualReport {
        ResidualReport { conditions: Vec::new(), evaluated: 0, failed_points: Vec::new() }
    }

    /// True when every condition passes and at least one point was evaluated.
    pub fn passed(&self) -> bool {
        self.evaluated > 0 && self.conditions.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&ConditionResidual> {
        self.conditions.iter().find(|c| c.name == name)
    }

    /// Maximum residual of `name`, or `+∞` when absent.
    pub fn max(&self, name: &str) -> f64 {
        self.get(name).map_or(f64::INFINITY, |c| c.max_residual)
    }

    /// Worst residual over all conditions.
    pub fn worst(&self) -> f64 {
        self.conditions.iter().fold(0.0, |m: f64, c| if c.max_residual.is_nan() { f64::INFINITY } else { m.max(c.max_residual) })
    }

    pub fn failing(&self) -> Vec<&str> {
        self.conditions.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    /// Adds a condition that holds for structural reasons.
    pub fn push_trivial(&mut self, name: &str, tolerance: f64, note: &str) {
        self.conditions.push(ConditionResidual {
            name: name.to_string(),
            max_residual: 0.0,
            tolerance,
            pass: true,
            worst_point: None,
            note: Some(note.to_string()),
        });
    }

    pub fn set_note(&mut self, name: &str, note: &str) {
        if let Some(c) = self.conditions.iter_mut().find(|c| c.name == name) {
            c.note = Some(note.to_string());
        }
    }

    /// Appends the conditions of `other` (renamed with `prefix` when non-empty).
    pub fn extend(&mut self, other: ResidualReport, prefix: &str) {
        for mut c in other.conditions {
            if !prefix.is_empty() {
                c.name = format!("{prefix}{}", c.name);
            }
            self.conditions.push(c);
        }
        self.evaluated = self.evaluated.max(other.evaluated);
        self.failed_points.extend(other.failed_points);
    }
}

/// Evaluates `f` at every point in parallel and merges the results in point order.
/// `f` returns `(condition name, residual)` pairs; points where it errs are recorded and skipped.
pub fn evaluate_points<F>(points: &[Vec<f64>], tolerance: f64, f: F) -> ResidualReport
where
    F: Fn(&[f64]) -> Result<Vec<(String, f64)>> + Sync,
{
    let results: Vec<Result<Vec<(String, f64)>>> = points.par_iter().map(|p| f(p)).collect();
    let mut report = ResidualReport::empty();
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok(rows) => {
                report.evaluated += 1;
                for (name, v) in rows {
                    let v = if v.is_nan() { f64::INFINITY } else { v.abs() };
                    match report.conditions.iter_mut().find(|c| c.name == name) {
                        Some(c) => {
                            if v > c.max_residual {
                                c.max_residual = v;
                                c.worst_point = Some(p.clone());
                            }
                        }
                        None => report.conditions.push(ConditionResidual {
                            name,
                            max_residual: v,
                            tolerance,
                            pass: true,
                            worst_point: Some(p.clone()),
                            note: None,
                        }),
                    }
                }
            }
            Err(e) => report.failed_points.push(PointFailure { point: p.clone(), error: e.to_string() }),
        }
    }
    for c in &mut report.conditions {
        c.pass = c.max_residual <= c.tolerance;
    }
    report
}
