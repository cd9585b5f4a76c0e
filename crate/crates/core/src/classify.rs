//! Geometric predicates on hypersurface data and the graph conditions on abundant data.

use serde::Serialize;

use crate::abundant::{sha_jet, tau_jet, AbundantData, DEFAULT_ORDER};
use crate::error::{Error, Result};
use crate::forms::{insert_last, pairing, tracefree2, trace2};
use crate::geometry::covariant_derivative;
use crate::hypersurface::HypersurfaceData;
use crate::report::{evaluate_points, ResidualReport};

/// Default classification threshold.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

impl Verdict {
    /// `True` below `threshold/10`, `False` above `10·threshold`, otherwise inconclusive.
    pub fn from_residual(r: f64, threshold: f64) -> Verdict {
        if r < threshold / 10.0 {
            Verdict::True
        } else if r > threshold * 10.0 || r.is_nan() {
            Verdict::False
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Verdict::True => Some(true),
            Verdict::False => Some(false),
            Verdict::Inconclusive => None,
        }
    }

    fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::False, _) | (_, Verdict::False) => Verdict::False,
            (Verdict::True, Verdict::True) => Verdict::True,
            _ => Verdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub verdict: Verdict,
    pub max_residual: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Predicate {
    fn new(r: f64, threshold: f64) -> Predicate {
        Predicate { verdict: Verdict::from_residual(r, threshold), max_residual: r, threshold, note: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    /// `u ≡ 0`.
    pub blaschke: Predicate,
    /// `U ≡ 0`.
    pub quadric_type: Predicate,
    /// `Â = −μ Id` with constant `μ`.
    pub relative_sphere: Predicate,
    /// `∇C` totally symmetric, the equivalent characterisation of relative spheres.
    pub relative_sphere_dual: Predicate,
    /// `Â ≡ 0`.
    pub improper_sphere: Predicate,
    /// `A ≡ 0`.
    pub graph: Predicate,
    /// Mean of `−tr Â/n` over the sample when the relative-sphere test passes.
    pub mu: Option<f64>,
    /// Sample values of `tr_G A`.
    pub trace_a: Vec<f64>,
    pub evaluated: usize,
    pub failed_points: usize,
}

struct PointData {
    u: f64,
    uu: f64,
    a: f64,
    sphere: f64,
    dual: f64,
    mu: f64,
    tr: f64,
}

fn point_data(hs: &HypersurfaceData, p: &[f64]) -> Result<PointData> {
    let n = hs.n();
    let j = hs.jets(p, 1)?;
    let a_hat = j.metric.inv.contract(1, &j.a, 0).values();
    let tr = trace2(&j.a, &j.metric).value();
    let mu = -tr / n as f64;
    let mut sphere: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            let id = if k == i { mu } else { 0.0 };
            sphere = sphere.max((a_hat.get(&[k, i]) + id).abs());
        }
    }
    let dc = covariant_derivative(&j.c, &j.gamma)?.values();
    let dual = dc.symmetry_residual(&[0, 1, 2, 3]);
    Ok(PointData {
        u: j.u.values().max_abs(),
        uu: j.uu.values().max_abs(),
        a: j.a.values().max_abs(),
        sphere,
        dual,
        mu,
        tr,
    })
}

/// Evaluates every predicate as a sup-residual over `points`.
pub fn classify_all(hs: &HypersurfaceData, points: &[Vec<f64>], threshold: f64) -> Result<ClassificationReport> {
    let data: Vec<Result<PointData>> = {
        use rayon::prelude::*;
        points.par_iter().map(|p| point_data(hs, p)).collect()
    };
    let failed_points = data.iter().filter(|d| d.is_err()).count();
    let ok: Vec<PointData> = data.into_iter().filter_map(|d| d.ok()).collect();
    if ok.is_empty() {
        return Err(Error::Precondition("no sample point could be evaluated".into()));
    }
    let sup = |f: fn(&PointData) -> f64| ok.iter().map(f).fold(0.0, f64::max);
    let k = ok.len() as f64;
    let mean_mu = ok.iter().map(|d| d.mu).sum::<f64>() / k;
    let var_mu = ok.iter().map(|d| (d.mu - mean_mu).powi(2)).sum::<f64>() / k;
    let var_tol = 1e-12 * (1.0 + mean_mu * mean_mu);

    let mut sphere = Predicate::new(sup(|d| d.sphere), threshold);
    let constant = var_mu < var_tol;
    if !constant {
        sphere.verdict = Verdict::False;
    }
    sphere.note = Some(format!("variance of mu {var_mu:.3e} (limit {var_tol:.3e})"));
    let dual = Predicate::new(sup(|d| d.dual), threshold);
    let improper = Predicate::new(sup(|d| d.sphere.max(d.mu.abs())), threshold);
    let graph = Predicate::new(sup(|d| d.a), threshold);
    let mut mu = (sphere.verdict == Verdict::True).then_some(mean_mu);
    if improper.verdict == Verdict::True {
        sphere = Predicate { verdict: Verdict::True, note: Some("improper sphere (mu = 0)".into()), ..sphere };
        mu = Some(0.0);
    }
    Ok(ClassificationReport {
        blaschke: Predicate::new(sup(|d| d.u), threshold),
        quadric_type: Predicate::new(sup(|d| d.uu), threshold),
        relative_sphere: sphere,
        relative_sphere_dual: dual,
        improper_sphere: improper,
        graph,
        mu,
        trace_a: ok.iter().map(|d| d.tr).collect(),
        evaluated: ok.len(),
        failed_points,
    })
}

impl ClassificationReport {
    /// Combined relative-sphere verdict of both characterisations.
    pub fn relative_sphere_combined(&self) -> Verdict {
        self.relative_sphere.verdict.and(self.relative_sphere_dual.verdict)
    }
}

/// Conditions on `(g, S, t)` equivalent to `A ≡ 0` for the associated hypersurface.
/// `n ≥ 3`: `P° = τ/8` and `9 Scal = |S|² − (n−1)(n+2)|dt|²`.
/// `n = 2`: `9 Scal = |S|² − 4|dt|²` and `τ = (2/3)Ⅹ − (8/9)(S(grad t) + dt⊗dt − ½|dt|²g)`.
pub fn graph_conditions_from_abundant(data: &AbundantData, points: &[Vec<f64>], tol: f64) -> ResidualReport {
    let n = data.n();
    let nf = n as f64;
    evaluate_points(points, tol, |p| {
        let aj = data.jets(p, DEFAULT_ORDER)?;
        let m = &aj.metric;
        let tau = tau_jet(&aj)?;
        let s2 = aj.s.norm_sq(m);
        let dt2 = pairing(&aj.dt, &aj.grad_t);
        if n >= 3 {
            let pc = tracefree2(aj.curv.schouten.as_ref().expect("n ≥ 3"), m);
            let res = (pc - tau.scale(1.0 / 8.0)).values().max_abs();
            let scal = (aj.curv.scal * 9.0 - s2 + dt2 * ((nf - 1.0) * (nf + 2.0))).value().abs();
            Ok(vec![("P0.tau".into(), res), ("Scal".into(), scal)])
        } else {
            let scal = (aj.curv.scal * 9.0 - s2 + dt2 * 4.0).value().abs();
            let sgt = insert_last(&aj.s, &aj.grad_t);
            let rhs = sha_jet(&aj)?.scale(2.0 / 3.0)
                - (sgt + aj.dt.outer(&aj.dt) - m.g.scale_by(dt2 * 0.5)).scale(8.0 / 9.0);
            let res = (tau - rhs).values().max_abs();
            Ok(vec![("Scal.2D".into(), scal), ("tau.2D".into(), res)])
        }
    })
}

fn perfect_square_at(data: &AbundantData, p: &[f64], tol: Option<f64>) -> Result<f64> {
    let nf = data.n() as f64;
    let aj = data.jets(p, DEFAULT_ORDER)?;
    let m = &aj.metric;
    if let Some(tol) = tol {
        let tau = tau_jet(&aj)?.values().max_abs();
        if tau > tol {
            return Err(Error::Precondition(format!("tau does not vanish at {p:?}: {tau:.3e}")));
        }
        let driem = covariant_derivative(&aj.curv.riem, &aj.gamma)?.values().max_abs();
        if driem > tol {
            return Err(Error::Precondition(format!("curvature is not parallel at {p:?}: {driem:.3e}")));
        }
    }
    let s2 = aj.s.norm_sq(m);
    let dt2 = pairing(&aj.dt, &aj.grad_t);
    Ok((aj.curv.scal * 9.0 - s2 + dt2 * ((nf - 1.0) * (nf + 2.0))).value().abs())
}

fn perfect_square_sup(data: &AbundantData, points: &[Vec<f64>], tol: Option<f64>) -> Result<f64> {
    if data.n() < 3 {
        return Err(Error::Dimension("the perfect-square identity is stated for n ≥ 3".into()));
    }
    points.iter().try_fold(0.0, |acc: f64, p| Ok(acc.max(perfect_square_at(data, p, tol)?)))
}

/// `sup |9 Scal − |S|² + (n−1)(n+2)|dt|²|` for `n ≥ 3` data with `τ ≡ 0` and parallel curvature.
/// Errors if either precondition fails at some point.
pub fn perfect_square_residual(data: &AbundantData, points: &[Vec<f64>], tol: f64) -> Result<f64> {
    perfect_square_sup(data, points, Some(tol))
}

/// The same expression without the preconditions, for diagnostics.
pub fn perfect_square_unchecked(data: &AbundantData, points: &[Vec<f64>]) -> Result<f64> {
    perfect_square_sup(data, points, None)
}
