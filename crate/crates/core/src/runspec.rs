//! The serializable description of a system and a run, shared by the catalog and the CLI.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abundant::AbundantData;
use crate::error::{Error, Result};
use crate::geometry::{sym_count, DomainBox, ExprField, Field};

/// Run settings; every field is optional and falls back to the command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// A system `(g, S, t)` on a coordinate box plus optional extras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub coords: Vec<String>,
    /// One `[lo, hi]` interval per coordinate.
    pub domain: Vec<[f64; 2]>,
    /// Upper-triangular metric components `g_00, g_01, …`.
    pub metric: Vec<String>,
    /// Independent components `S_ijk`, `i ≤ j ≤ k`, lexicographic.
    pub s: Vec<String>,
    pub t: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub run: RunSettings,
}

fn is_default(r: &RunSettings) -> bool {
    *r == RunSettings::default()
}

impl RunSpec {
    /// Checks that the tables are sized consistently with the dimension.
    pub fn validate(&self) -> Result<()> {
        let n = self.dimension;
        let check = |what: &str, have: usize, need: usize| {
            if have == need {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{what}: expected {need} entries for dimension {n}, found {have}")))
            }
        };
        check("coords", self.coords.len(), n)?;
        check("domain", self.domain.len(), n)?;
        check("metric", self.metric.len(), sym_count(n, 2))?;
        check("s", self.s.len(), sym_count(n, 3))?;
        if let Some(r) = &self.reference {
            check("reference", r.len(), n + 1)?;
        }
        Ok(())
    }

    pub fn domain_box(&self) -> Result<DomainBox> {
        DomainBox::new(self.domain.iter().map(|d| d[0]).collect(), self.domain.iter().map(|d| d[1]).collect())
    }

    pub fn to_abundant(&self) -> Result<AbundantData> {
        self.validate()?;
        let coords: Vec<&str> = self.coords.iter().map(String::as_str).collect();
        let metric: Vec<&str> = self.metric.iter().map(String::as_str).collect();
        let s: Vec<&str> = self.s.iter().map(String::as_str).collect();
        AbundantData::from_exprs(&coords, self.domain_box()?, &metric, &s, &self.t, &self.params)
    }

    /// Parses an auxiliary scalar expression (Ω, V, reference components) in this chart.
    pub fn field(&self, src: &str) -> Result<Field> {
        Ok(ExprField::parse(src, &self.coords, &self.params)?.arc())
    }
}
