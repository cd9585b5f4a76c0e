//! Worked systems shipped with the library.
//!
//! The two Smorodinski–Winternitz entries store `(S, t)` obtained from their cubics
//! `C = −(1/x)dx³ − (1/y)dy³` and `C = −(1/y)dy³` on flat space: `u = tr C/(n+2)`,
//! `U = C − u⊙g`, then `S = 3U` and `t = 3∫u`. For `sw1` this gives `u = −dx/(4x) − dy/(4y)`,
//! `t = −¾ ln(xy)`, `S_xxx = −3/(4x)`, `S_xxy = 3/(4y)`, `S_xyy = 3/(4x)`, `S_yyy = −3/(4y)`.
//!
//! The sphere entries use the stereographic chart with `g = 4(dx² + dy²)/(1 + r²)²`.
//! The `s7` cubic is obtained from its potential through the trace-free second-order
//! equation that compatible potentials satisfy; it is intended for the classification check only.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::abundant::AbundantData;
use crate::error::{Error, Result};
use crate::geometry::{sym_indices, DomainBox, ExprField};
use crate::runspec::RunSpec;

/// Expected classification verdicts; `None` means "not asserted".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Expected {
    pub blaschke: Option<bool>,
    pub quadric: Option<bool>,
    pub improper_sphere: Option<bool>,
    pub graph: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub dimension: usize,
    pub coords: Vec<String>,
    pub domain: DomainBox,
    pub metric: Vec<String>,
    pub s: Vec<String>,
    pub t: String,
    pub params: BTreeMap<String, f64>,
    pub potential: Option<String>,
    pub reference: Option<Vec<String>>,
    /// The reference immersion is derived here rather than printed with the example.
    pub reference_derived: bool,
    pub expected: Expected,
    /// Only the classification assertions are meaningful for this entry.
    pub classification_only: bool,
    pub note: String,
}

const NAMES: [&str; 8] =
    ["harmonic-oscillator-2", "harmonic-oscillator-3", "harmonic-oscillator-4", "sw1", "sw2", "s9-generic", "s7", "sw1-3"];

const SPHERE: &str = "4/(1+x^2+y^2)^2";

/// Entry names in a fixed order.
pub fn list() -> Vec<&'static str> {
    NAMES.to_vec()
}

/// Short aliases accepted by [`get`].
fn canonical(name: &str) -> &str {
    match name {
        "ho-2" => "harmonic-oscillator-2",
        "ho-3" => "harmonic-oscillator-3",
        "ho-4" => "harmonic-oscillator-4",
        "s9" => "s9-generic",
        other => other,
    }
}

fn strs(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn flat_metric(n: usize) -> Vec<String> {
    sym_indices(n, 2).iter().map(|ij| if ij[0] == ij[1] { "1" } else { "0" }.to_string()).collect()
}

fn sphere_metric() -> Vec<String> {
    strs(&[SPHERE, "0", SPHERE])
}

fn harmonic_oscillator(n: usize) -> CatalogEntry {
    let coords = strs(&["x", "y", "z", "w"][..n]);
    let sq: Vec<String> = coords.iter().map(|c| format!("{c}^2")).collect();
    let lin: Vec<String> = coords.iter().enumerate().map(|(i, c)| format!("a{}*{c}", i + 1)).collect();
    let mut params: BTreeMap<String, f64> = (1..=n).map(|i| (format!("a{i}"), 0.0)).collect();
    params.insert("a0".into(), 1.0);
    params.insert("c".into(), 0.0);
    let mut reference = coords.clone();
    reference.push(format!("({})/2", sq.join("+")));
    CatalogEntry {
        name: format!("harmonic-oscillator-{n}"),
        dimension: n,
        domain: DomainBox::new(vec![-2.0; n], vec![2.0; n]).expect("valid box"),
        metric: flat_metric(n),
        s: vec!["0".into(); sym_indices(n, 3).len()],
        t: "0".into(),
        potential: Some(format!("a0*({})+{}+c", sq.join("+"), lin.join("+"))),
        reference: Some(reference),
        reference_derived: n > 2,
        expected: Expected { blaschke: Some(true), quadric: Some(true), improper_sphere: Some(true), graph: Some(true) },
        classification_only: false,
        note: "isotropic harmonic oscillator on Euclidean space: S = 0, t = 0; the immersion is the paraboloid".into(),
        coords,
        params,
    }
}

fn sw1() -> CatalogEntry {
    CatalogEntry {
        name: "sw1".into(),
        dimension: 2,
        coords: strs(&["x", "y"]),
        domain: DomainBox::new(vec![0.5, 0.5], vec![2.0, 2.0]).expect("valid box"),
        metric: flat_metric(2),
        s: strs(&["-3/(4*x)", "3/(4*y)", "3/(4*x)", "-3/(4*y)"]),
        t: "-3/4*ln(x*y)".into(),
        params: params(&[("a0", 1.0), ("a1", 1.0), ("a2", 1.0), ("a3", 0.0)]),
        potential: Some("a0*(x^2+y^2)+a1/x^2+a2/y^2+a3".into()),
        reference: Some(strs(&["ln(x)", "ln(y)", "(x^2+y^2)/4"])),
        reference_derived: false,
        expected: Expected { blaschke: Some(false), quadric: Some(false), improper_sphere: Some(true), graph: Some(true) },
        classification_only: false,
        note: "Smorodinski-Winternitz I on flat space; (S, t) from the cubic -(1/x)dx^3 - (1/y)dy^3".into(),
    }
}

fn sw2() -> CatalogEntry {
    CatalogEntry {
        name: "sw2".into(),
        dimension: 2,
        coords: strs(&["x", "y"]),
        domain: DomainBox::new(vec![-1.0, 0.5], vec![1.0, 2.0]).expect("valid box"),
        metric: flat_metric(2),
        s: strs(&["0", "3/(4*y)", "0", "-3/(4*y)"]),
        t: "-3/4*ln(y)".into(),
        params: params(&[("a0", 1.0), ("a1", 1.0), ("a2", 1.0), ("a3", 0.0)]),
        potential: Some("a0*(4*x^2+y^2)+a1*x+a2/y^2+a3".into()),
        reference: Some(strs(&["x", "ln(y)", "x^2/2+y^2/4"])),
        reference_derived: false,
        expected: Expected { blaschke: Some(false), quadric: Some(false), improper_sphere: Some(true), graph: Some(true) },
        classification_only: false,
        note: "Smorodinski-Winternitz II on flat space; (S, t) from the cubic -(1/y)dy^3".into(),
    }
}

fn s9() -> CatalogEntry {
    let a = "3*(5*x^4-10*x^2*y^2+y^4-1)/(x*(x^2+y^2-1)*(x^2+y^2+1)^3)";
    let b = "3*(x^4-10*x^2*y^2+5*y^4-1)/(y*(x^2+y^2-1)*(x^2+y^2+1)^3)";
    CatalogEntry {
        name: "s9-generic".into(),
        dimension: 2,
        coords: strs(&["x", "y"]),
        domain: DomainBox::new(vec![0.2, 0.2], vec![0.7, 0.7]).expect("valid box"),
        metric: sphere_metric(),
        s: vec![format!("-{a}"), b.to_string(), a.to_string(), format!("-{b}")],
        t: "9/4*ln(1+x^2+y^2)-3/4*ln(x*y*(1-x^2-y^2))".into(),
        params: params(&[("a0", 1.0), ("a1", 1.0), ("a2", 1.0), ("a3", 0.0)]),
        potential: Some(
            "a0*(x^2+y^2+1)^2/(x^2+y^2-1)^2+a1*(x^2+y^2+1)^2/x^2+a2*(x^2+y^2+1)^2/y^2+a3".into(),
        ),
        reference: Some(strs(&[
            "ln(x)-ln(1-x^2-y^2)",
            "ln(y)-ln(1-x^2-y^2)",
            "ln(1+x^2+y^2)/2-ln(1-x^2-y^2)/2",
        ])),
        reference_derived: false,
        expected: Expected { blaschke: Some(false), quadric: Some(false), improper_sphere: Some(true), graph: Some(true) },
        classification_only: false,
        note: "generic system on the 2-sphere in stereographic coordinates, inside the unit disk".into(),
    }
}

fn s7() -> CatalogEntry {
    let d = "((x^2+y^2-1)*(x^2+y^2+1)^3*(x^2-2*x+y^2+1)*(x^2+2*x+y^2+1))";
    let sxxx = format!("12*x*(x^4-10*x^2*y^2-2*x^2+5*y^4+6*y^2+1)/{d}");
    let sxxy = format!("12*y*(5*x^4-10*x^2*y^2-6*x^2+y^4+2*y^2+1)/{d}");
    CatalogEntry {
        name: "s7".into(),
        dimension: 2,
        coords: strs(&["x", "y"]),
        domain: DomainBox::new(vec![0.2, 0.2], vec![0.7, 0.7]).expect("valid box"),
        metric: sphere_metric(),
        s: vec![sxxx.clone(), sxxy.clone(), format!("-{sxxx}"), format!("-{sxxy}")],
        t: "-3/4*ln(4*y^2+(1-x^2-y^2)^2)+9/4*ln(1+x^2+y^2)-3/4*ln(1-x^2-y^2)".into(),
        params: params(&[("a0", 1.0), ("a1", 1.0), ("a2", 1.0), ("a3", 0.0)]),
        potential: None,
        reference: None,
        reference_derived: false,
        expected: Expected { blaschke: None, quadric: None, improper_sphere: Some(false), graph: Some(false) },
        classification_only: true,
        note: "system on the 2-sphere; the cubic is derived from the published potential and only the \
               Weingarten trace and the graph verdict are asserted"
            .into(),
    }
}

/// Three-dimensional analogue of `sw1`: `t = −(3/5)Σ ln x_i`, `S_iii = −6/(5x_i)`,
/// `S_iij = 3/(5x_j)`, other components zero.
fn sw1_3() -> CatalogEntry {
    let coords = strs(&["x", "y", "z"]);
    let s = sym_indices(3, 3)
        .iter()
        .map(|idx| {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            if i == j && j == k {
                format!("-6/(5*{})", coords[i])
            } else if i == j {
                format!("3/(5*{})", coords[k])
            } else if j == k {
                format!("3/(5*{})", coords[i])
            } else {
                "0".to_string()
            }
        })
        .collect();
    CatalogEntry {
        name: "sw1-3".into(),
        dimension: 3,
        domain: DomainBox::new(vec![0.5; 3], vec![2.0; 3]).expect("valid box"),
        metric: flat_metric(3),
        s,
        t: "-3/5*ln(x*y*z)".into(),
        params: BTreeMap::new(),
        potential: Some("x^2+y^2+z^2+1/x^2+1/y^2+1/z^2".into()),
        reference: None,
        reference_derived: false,
        expected: Expected { blaschke: Some(false), quadric: Some(false), improper_sphere: Some(true), graph: Some(true) },
        classification_only: false,
        note: "three-dimensional analogue of sw1 on flat space with cubic -(1/x)dx^3 - (1/y)dy^3 - (1/z)dz^3".into(),
        coords,
    }
}

fn params(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
    v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
}

/// Looks up an entry by name (short aliases `ho-2`, `ho-3`, `ho-4`, `s9` are accepted).
pub fn get(name: &str) -> Result<CatalogEntry> {
    Ok(match canonical(name) {
        "harmonic-oscillator-2" => harmonic_oscillator(2),
        "harmonic-oscillator-3" => harmonic_oscillator(3),
        "harmonic-oscillator-4" => harmonic_oscillator(4),
        "sw1" => sw1(),
        "sw2" => sw2(),
        "s9-generic" => s9(),
        "s7" => s7(),
        "sw1-3" => sw1_3(),
        _ => return Err(Error::Invalid(format!("unknown catalog entry '{name}' (known: {})", NAMES.join(", ")))),
    })
}

impl CatalogEntry {
    pub fn data(&self) -> Result<AbundantData> {
        self.to_run_spec().to_abundant()
    }

    /// Evaluates the reference immersion at `p`.
    pub fn reference_immersion(&self, p: &[f64]) -> Result<Vec<f64>> {
        let refs = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("entry '{}' has no reference immersion", self.name)))?;
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain(p.to_vec()));
        }
        refs.iter()
            .map(|e| {
                let f = ExprField::parse(e, &self.coords, &self.params)?;
                Ok(crate::geometry::ScalarField::jet(&f, p, 0)?.value())
            })
            .collect()
    }

    pub fn to_run_spec(&self) -> RunSpec {
        RunSpec {
            name: Some(self.name.clone()),
            dimension: self.dimension,
            coords: self.coords.clone(),
            domain: self.domain.lo.iter().zip(&self.domain.hi).map(|(a, b)| [*a, *b]).collect(),
            metric: self.metric.clone(),
            s: self.s.clone(),
            t: self.t.clone(),
            params: self.params.clone(),
            omega: None,
            potential: self.potential.clone(),
            reference: self.reference.clone(),
            run: Default::default(),
        }
    }
}
