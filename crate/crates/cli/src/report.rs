//! The JSON report written by every run command.

use std::collections::BTreeMap;

use serde::Serialize;

use abundant_core::ResidualReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub tol: f64,
    pub grid: Vec<usize>,
    pub random: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    pub order: usize,
    pub force: bool,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub dimension: usize,
    pub settings: Settings,
    pub passed: bool,
    /// `section/condition` names of every failing row.
    pub failing: Vec<String>,
    pub sections: BTreeMap<String, ResidualReport>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, system: Option<String>, dimension: usize, settings: Settings) -> Report {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: Tool { name: "abundant", version: env!("CARGO_PKG_VERSION") },
            command: command.to_string(),
            system,
            dimension,
            settings,
            passed: true,
            failing: Vec::new(),
            sections: BTreeMap::new(),
            data: serde_json::Value::Null,
        }
    }

    /// Adds a residual table; points that could not be evaluated count as failures.
    pub fn section(&mut self, name: &str, rep: ResidualReport) {
        for c in rep.conditions.iter().filter(|c| !c.pass) {
            self.failing.push(format!("{name}/{}", c.name));
        }
        if rep.evaluated == 0 {
            self.failing.push(format!("{name}/<no points evaluated>"));
        }
        if !rep.failed_points.is_empty() {
            self.failing.push(format!("{name}/<{} points failed>", rep.failed_points.len()));
        }
        self.sections.insert(name.to_string(), rep);
        self.passed = self.failing.is_empty();
    }

    /// Records a failing check that is not a residual table row.
    pub fn fail(&mut self, what: String) {
        self.failing.push(what);
        self.passed = false;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One line per failing row, for stderr.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for f in &self.failing {
            let row = f.split_once('/').and_then(|(s, c)| self.sections.get(s).and_then(|r| r.get(c)));
            match row {
                Some(r) => out += &format!("FAIL {f}: {:.3e} > {:.1e}\n", r.max_residual, r.tolerance),
                None => out += &format!("FAIL {f}\n"),
            }
        }
        out
    }
}
