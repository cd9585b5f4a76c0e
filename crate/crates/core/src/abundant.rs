//! Abundant manifolds `(M, g, S, t)`: derived tensors and the defining conditions.
//!
//! For `n ≥ 3` the conditions are the Hessian equation for `t`, the first-order equation
//! for `∇S` and the Weyl-type condition `Π_Weyl₀ 𝔖 = 0` together with conformal flatness.
//! For `n = 2` the system is expressed through the auxiliary tensors `Ⅹ`, `β`, `η`, `τ`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::forms::{composition, insert_last, pair_square, pairing, trace2, trace_square, tracefree2};
use crate::geometry::{
    christoffel, covariant_derivative, curvature, differential, divergence, gradient_vector, hessian, ChartGeometry,
    DomainBox, ExprField, Field, JetCurvature, SampleSpec, TensorField,
};
use crate::jets::Jet;
use crate::report::{evaluate_points, ResidualReport};
use crate::tensor::{codazzi0_projector, tracefree_sym_projector, weyl0_projector, Metric, Scalar, Tensor};

/// Jet order used by the verification routines.
pub const DEFAULT_ORDER: usize = 3;

/// Default pass threshold for identities.
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AbundantData {
    geometry: ChartGeometry,
    s: TensorField,
    t: Field,
    params: BTreeMap<String, f64>,
}

/// Metric, cubic and scalar jets at one point together with the curvature of `g`.
#[derive(Debug, Clone)]
pub struct AbundantJets {
    pub metric: Metric<Jet>,
    pub gamma: Tensor<Jet>,
    pub curv: JetCurvature,
    pub s: Tensor<Jet>,
    pub t: Jet,
    pub dt: Tensor<Jet>,
    pub grad_t: Tensor<Jet>,
}

/// The 2D auxiliary tensors.
#[derive(Debug, Clone)]
pub struct ShaBetaEta {
    pub sha: Tensor<f64>,
    pub beta: Tensor<f64>,
    pub eta: Tensor<f64>,
}

impl AbundantData {
    /// `s` must be a totally symmetric rank-3 field; trace-freeness is checked by the verifiers.
    pub fn new(geometry: ChartGeometry, s: TensorField, t: Field, params: BTreeMap<String, f64>) -> Result<AbundantData> {
        if s.n() != geometry.n() || s.rank() != 3 || !s.is_symmetric() {
            return Err(Error::Dimension(format!(
                "S must be a symmetric rank-3 field of dimension {}",
                geometry.n()
            )));
        }
        Ok(AbundantData { geometry, s, t, params })
    }

    /// Parses metric, cubic and scalar expressions. `metric` lists the upper-triangular
    /// components, `s` the independent components `S_ijk` with `i ≤ j ≤ k` in lexicographic order.
    pub fn from_exprs(
        coords: &[&str],
        domain: DomainBox,
        metric: &[&str],
        s: &[&str],
        t: &str,
        params: &BTreeMap<String, f64>,
    ) -> Result<AbundantData> {
        let geometry = ChartGeometry::from_exprs(coords, domain, metric, params)?;
        let names = geometry.coords().to_vec();
        let comps = s
            .iter()
            .map(|e| ExprField::parse(e, &names, params).map(ExprField::arc))
            .collect::<Result<Vec<_>>>()?;
        let s = TensorField::symmetric(geometry.n(), 3, comps)?;
        let t = ExprField::parse(t, &names, params)?.arc();
        AbundantData::new(geometry, s, t, params.clone())
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn geometry(&self) -> &ChartGeometry {
        &self.geometry
    }

    pub fn s_field(&self) -> &TensorField {
        &self.s
    }

    pub fn t_field(&self) -> &Field {
        &self.t
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Replaces `S` and `t`, keeping the chart.
    pub fn with_fields(&self, s: TensorField, t: Field) -> Result<AbundantData> {
        AbundantData::new(self.geometry.clone(), s, t, self.params.clone())
    }

    pub fn with_geometry(&self, geometry: ChartGeometry) -> Result<AbundantData> {
        AbundantData::new(geometry, self.s.clone(), self.t.clone(), self.params.clone())
    }

    /// Jets of order `order ≥ 2` at `p`.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<AbundantJets> {
        if order < 2 {
            return Err(Error::Precondition("abundant data needs jets of order ≥ 2".into()));
        }
        let metric = self.geometry.metric_jets(p, order)?;
        let gamma = christoffel(&metric);
        let curv = curvature(&metric, &gamma);
        let s = self.s.jets(p, order)?;
        let t = self.t.jet(p, order)?;
        let dt = differential(&t);
        let grad_t = gradient_vector(&t, &metric);
        Ok(AbundantJets { metric, gamma, curv, s, t, dt, grad_t })
    }

    /// Sample points of the chart's domain.
    pub fn sample(&self, spec: &SampleSpec) -> Vec<Vec<f64>> {
        self.geometry.sample(spec).points
    }

    /// `𝒯 = S + T⊗g + … − (2/n) g⊗T` with `T = dt`.
    pub fn structure_tensor(&self, p: &[f64]) -> Result<Tensor<f64>> {
        let aj = self.jets(p, 2)?;
        Ok(structure_tensor_jet(&aj).values())
    }

    pub fn s1_tensor(&self, p: &[f64]) -> Result<Tensor<f64>> {
        let aj = self.jets(p, 2)?;
        Ok(s1_jet(&aj)?.values())
    }

    /// The trace-free tensor `τ`.
    pub fn tau(&self, p: &[f64]) -> Result<Tensor<f64>> {
        let aj = self.jets(p, DEFAULT_ORDER)?;
        Ok(tau_jet(&aj)?.values())
    }

    pub fn sha_beta_eta(&self, p: &[f64]) -> Result<ShaBetaEta> {
        if self.n() != 2 {
            return Err(Error::Dimension("Ⅹ, β, η are defined for n = 2 only".into()));
        }
        let aj = self.jets(p, DEFAULT_ORDER)?;
        let sha = sha_jet(&aj)?;
        let tau = tau_jet(&aj)?;
        Ok(ShaBetaEta {
            beta: contract_with_s(&aj.s, &sha, &aj.metric).values(),
            eta: contract_with_s(&aj.s, &tau, &aj.metric).values(),
            sha: sha.values(),
        })
    }

    /// Per-point invariants of the input: trace-freeness of `S` and, for `n ≥ 3`, conformal flatness.
    pub fn check_invariants(&self, points: &[Vec<f64>], tol: f64) -> ResidualReport {
        evaluate_points(points, tol, |p| {
            let aj = self.jets(p, 2)?;
            let mut rows = vec![("S.tracefree".to_string(), aj.s.trace(0, 1, &aj.metric).max_abs())];
            if let Some(w) = &aj.curv.weyl {
                rows.push(("Weyl.g".to_string(), w.max_abs()));
            }
            Ok(rows)
        })
    }

    /// Checks the defining conditions at every point.
    pub fn verify_conditions(&self, points: &[Vec<f64>], tol: f64) -> ResidualReport {
        if self.n() == 2 {
            evaluate_points(points, tol, |p| conditions_2d(&self.jets(p, DEFAULT_ORDER)?))
        } else {
            evaluate_points(points, tol, |p| conditions_nd(&self.jets(p, DEFAULT_ORDER)?))
        }
    }

    /// Residual of the linear second-order equation for a compatible potential `V` (`n ≥ 3`).
    pub fn verify_potential_equation(&self, v: &Field, p: &[f64]) -> Result<f64> {
        let n = self.n();
        if n < 3 {
            return Err(Error::Dimension(
                "the potential equation is only available for n ≥ 3".into(),
            ));
        }
        let aj = self.jets(p, DEFAULT_ORDER)?;
        let v = v.jet(p, DEFAULT_ORDER)?;
        let m = &aj.metric;
        let hess = hessian(&v, &aj.gamma)?;
        let lhs = tracefree2(&hess, m);
        let dv = differential(&v);
        let grad_v = gradient_vector(&v, m);
        let nf = n as f64;
        let dt_grad_v = pairing(&aj.dt, &grad_v);
        let cross = aj.dt.outer(&dv) + dv.outer(&aj.dt);
        let rhs = cross - m.g.scale_by(dt_grad_v * (2.0 / nf)) + insert_last(&aj.s, &grad_v)
            + tau_jet(&aj)?.scale_by(v);
        Ok((lhs - rhs).values().max_abs())
    }

    /// Consequences of the `n ≥ 3` system: the trace of `∇S` (`div S`), the antisymmetrised
    /// derivative `∇_W S(X,·,·) − ∇_X S(W,·,·)` in Codazzi form, and the full expression for `∇S`.
    pub fn verify_derived_identities(&self, points: &[Vec<f64>], tol: f64) -> Result<ResidualReport> {
        if self.n() < 3 {
            return Err(Error::Dimension("the derived identities are stated for n ≥ 3".into()));
        }
        Ok(evaluate_points(points, tol, |p| derived_rows(&self.jets(p, DEFAULT_ORDER)?)))
    }

    /// Reduced 2D system valid when `dt = 0`: `Π_Sym⁴₀ ∇S = 0`, the equation for `∇ div S`
    /// and `Scal = −(2/9)|S|²`. The row `dt` reports how far the data is from standard scale.
    pub fn verify_standard_scale_2d(&self, points: &[Vec<f64>], tol: f64) -> Result<ResidualReport> {
        if self.n() != 2 {
            return Err(Error::Dimension("the standard-scale system is two-dimensional".into()));
        }
        Ok(evaluate_points(points, tol, |p| {
            let aj = self.jets(p, DEFAULT_ORDER)?;
            let m = &aj.metric;
            let ds = covariant_derivative(&aj.s, &aj.gamma)?;
            let sym4 = tracefree_sym_projector(4, &ds, m)?;
            let divs = divergence(&aj.s, m, &aj.gamma)?;
            let beta = contract_with_s(&aj.s, &divs, m);
            let s2 = aj.s.norm_sq(m);
            let d_divs = covariant_derivative(&divs, &aj.gamma)?.permuted(&[1, 2, 0]);
            let rhs = aj.s.scale_by(s2 * (1.0 / 3.0)) + beta_pattern(&beta, &m.g).scale(4.0 / 3.0);
            let scal = aj.curv.scal + s2 * (2.0 / 9.0);
            Ok(vec![
                ("Sym4.DS".into(), sym4.values().max_abs()),
                ("D.divS".into(), (d_divs - rhs).values().max_abs()),
                ("Scal".into(), scal.value().abs()),
                ("dt".into(), aj.dt.values().max_abs()),
            ])
        }))
    }
}

/// `𝒯(X,Y,Z) = S(X,Y,Z) + T(X)g(Y,Z) + T(Y)g(X,Z) − (2/n)g(X,Y)T(Z)`.
pub fn structure_tensor_jet(aj: &AbundantJets) -> Tensor<Jet> {
    let n = aj.s.n();
    let g = &aj.metric.g;
    let t = &aj.dt;
    let inv = 2.0 / n as f64;
    Tensor::covariant(n, 3, |i| {
        let (x, y, z) = (i[0], i[1], i[2]);
        aj.s.get(i) + t.get(&[x]) * g.get(&[y, z]) + t.get(&[y]) * g.get(&[x, z]) - g.get(&[x, y]) * t.get(&[z]) * inv
    })
}

/// `S₁(X,Y,Z,W) = g(S_X S_Y Z, W) + 3S(X,Y,W)dt(Z) + S(X,Y,Z)dt(W) + ((4/(n−2))𝒮(Y,Z) − 3S(Y,Z,grad t))g(X,W)`.
pub fn s1_jet(aj: &AbundantJets) -> Result<Tensor<Jet>> {
    let n = aj.s.n();
    if n < 3 {
        return Err(Error::Dimension("S₁ is defined for n ≥ 3".into()));
    }
    let m = &aj.metric;
    let comp = composition(&aj.s, m);
    let sq = trace_square(&aj.s, m);
    let sgt = insert_last(&aj.s, &aj.grad_t);
    let q = sq.scale(4.0 / (n as f64 - 2.0)) - sgt.scale(3.0);
    let s = &aj.s;
    let dt = &aj.dt;
    let g = &m.g;
    Ok(Tensor::covariant(n, 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        comp.get(i)
            + s.get(&[x, y, w]) * dt.get(&[z]) * 3.0
            + s.get(&[x, y, z]) * dt.get(&[w])
            + q.get(&[y, z]) * g.get(&[x, w])
    }))
}

/// `Ⅹ = div S + (2/3) S(grad t)`, the divergence taken on the first slot.
pub fn sha_jet(aj: &AbundantJets) -> Result<Tensor<Jet>> {
    let divs = divergence(&aj.s, &aj.metric, &aj.gamma)?;
    Ok(divs + insert_last(&aj.s, &aj.grad_t).scale(2.0 / 3.0))
}

/// `X ↦ tr_g S(X,·,B̂(·))` for a symmetric (0,2) tensor `B`.
pub fn contract_with_s(s: &Tensor<Jet>, b: &Tensor<Jet>, m: &Metric<Jet>) -> Tensor<Jet> {
    let up = b.raise(0, m).raise(1, m);
    let n = s.n();
    Tensor::covariant(n, 1, |i| {
        let mut acc = s.like().zero_like();
        for a in 0..n {
            for c in 0..n {
                acc = acc + s.get(&[i[0], a, c]) * up.get(&[a, c]);
            }
        }
        acc
    })
}

/// `½(β(X)g(Y,Z) + β(Y)g(X,Z) − β(Z)g(X,Y))`.
fn beta_pattern(beta: &Tensor<Jet>, g: &Tensor<Jet>) -> Tensor<Jet> {
    Tensor::covariant(beta.n(), 3, |i| {
        let (x, y, z) = (i[0], i[1], i[2]);
        (beta.get(&[x]) * g.get(&[y, z]) + beta.get(&[y]) * g.get(&[x, z]) - beta.get(&[z]) * g.get(&[x, y])) * 0.5
    })
}

/// `τ` for either regime. For `n ≥ 3`:
/// `τ = (2/(3(n−2)))𝒮° − (2/3)(S(grad t) + dt⊗dt)° + 2P°`.
/// For `n = 2`:
/// `τ = (2/3)∇²t − (2/3)S(grad t) + (1/3)Ⅹ − (8/9)(dt⊗dt − ½|dt|²g) − (1/9)|S|²g − ½Scal g`.
pub fn tau_jet(aj: &AbundantJets) -> Result<Tensor<Jet>> {
    let n = aj.s.n();
    let m = &aj.metric;
    let sgt = insert_last(&aj.s, &aj.grad_t);
    let dtdt = aj.dt.outer(&aj.dt);
    if n >= 3 {
        let p = aj.curv.schouten.as_ref().expect("Schouten tensor exists for n ≥ 3");
        let sq = trace_square(&aj.s, m);
        let b = sq.scale(2.0 / (3.0 * (n as f64 - 2.0))) - (sgt + dtdt).scale(2.0 / 3.0) + p.scale(2.0);
        return Ok(tracefree2(&b, m));
    }
    let hess = hessian(&aj.t, &aj.gamma)?;
    let sha = sha_jet(aj)?;
    let dt2 = pairing(&aj.dt, &aj.grad_t);
    let s2 = aj.s.norm_sq(m);
    let g = &m.g;
    Ok(hess.scale(2.0 / 3.0) - sgt.scale(2.0 / 3.0) + sha.scale(1.0 / 3.0)
        - (dtdt - g.scale_by(dt2 * 0.5)).scale(8.0 / 9.0)
        - g.scale_by(s2 * (1.0 / 9.0))
        - g.scale_by(aj.curv.scal * 0.5))
}

/// Residual rows of the `n ≥ 3` system.
fn conditions_nd(aj: &AbundantJets) -> Result<Vec<(String, f64)>> {
    let n = aj.s.n();
    let nf = n as f64;
    let m = &aj.metric;
    let p = aj.curv.schouten.as_ref().expect("Schouten tensor exists for n ≥ 3");
    let sq = trace_square(&aj.s, m);
    let s2 = aj.s.norm_sq(m);
    let dt2 = pairing(&aj.dt, &aj.grad_t);

    let hess = hessian(&aj.t, &aj.gamma)?;
    let ddt_rhs = p.scale(3.0)
        + (aj.dt.outer(&aj.dt) - m.g.scale_by(dt2 * 0.5)).scale(1.0 / 3.0)
        + (sq + m.g.scale_by(s2 * ((nf - 6.0) / (2.0 * (nf - 1.0) * (nf + 2.0))))).scale(1.0 / (3.0 * (nf - 2.0)));
    let ddt = (hess - ddt_rhs).values().max_abs();

    let ds = covariant_derivative(&aj.s, &aj.gamma)?.permuted(&[1, 2, 3, 0]);
    let ds_rhs = tracefree_sym_projector(3, &s1_jet(aj)?, m)?.scale(1.0 / 3.0);
    let ds_res = (ds - ds_rhs).values().max_abs();

    let weyl_s = weyl0_projector(&pair_square(&aj.s, m), m)?.values().max_abs();
    let weyl_g = aj.curv.weyl.as_ref().map_or(0.0, |w| w.values().max_abs());
    let tracefree = aj.s.trace(0, 1, m).values().max_abs();
    Ok(vec![
        ("DDt".into(), ddt),
        ("DS".into(), ds_res),
        ("Weyl.S".into(), weyl_s),
        ("Weyl.g".into(), weyl_g),
        ("S.tracefree".into(), tracefree),
    ])
}

fn derived_rows(aj: &AbundantJets) -> Result<Vec<(String, f64)>> {
    let n = aj.s.n();
    let nf = n as f64;
    let m = &aj.metric;
    let g = &m.g;
    let s = &aj.s;
    let dt = &aj.dt;
    let sq = trace_square(s, m);
    let s2 = s.norm_sq(m);
    let sgt = insert_last(s, &aj.grad_t);
    let ps = pair_square(s, m);
    let ds = covariant_derivative(s, &aj.gamma)?; // [w, x, y, z] = ∇_W S(X,Y,Z)

    let divs = divergence(s, m, &aj.gamma)?;
    let div_rhs = sq.scale(2.0 * nf / (nf - 2.0)) - sgt.scale(nf) - g.scale_by(s2 * (2.0 / (nf - 2.0)));
    let div_res = (divs.scale(3.0) - div_rhs).values().max_abs();

    let codazzi = codazzi0_projector(&ds, m)?.values().max_abs();
    let q = sq.scale(2.0 / (nf - 2.0)) - sgt.clone();
    let codazzi_q = Tensor::covariant(n, 4, |i| {
        let (w, x, y, z) = (i[0], i[1], i[2], i[3]);
        (ds.get(&[w, x, y, z]) - ds.get(&[x, w, y, z])) * 3.0
            - (q.get(&[x, z]) * g.get(&[y, w]) - q.get(&[w, z]) * g.get(&[x, y]) + q.get(&[x, y]) * g.get(&[z, w])
                - q.get(&[y, w]) * g.get(&[x, z]))
    })
    .values()
    .max_abs();

    let k1 = 4.0 / (3.0 * (nf - 2.0));
    let k2 = 3.0 / (nf + 2.0) * (2.0 / 9.0) * (nf + 2.0) / (nf - 2.0);
    let k3 = 3.0 / (nf + 2.0) * 4.0 / (9.0 * (nf - 2.0));
    let full = Tensor::covariant(n, 4, |i| {
        let (w, x, y, z) = (i[0], i[1], i[2], i[3]);
        let rhs = (ps.get(&[x, w, y, z]) + ps.get(&[y, w, x, z]) + ps.get(&[z, w, x, y])) * (1.0 / 3.0)
            + s.get(&[x, y, w]) * dt.get(&[z])
            + s.get(&[y, z, w]) * dt.get(&[x])
            + s.get(&[x, z, w]) * dt.get(&[y])
            + s.get(&[x, y, z]) * dt.get(&[w])
            + (sq.get(&[y, z]) * g.get(&[x, w]) + sq.get(&[x, z]) * g.get(&[y, w]) + sq.get(&[x, y]) * g.get(&[z, w])) * k1
            - (sgt.get(&[y, z]) * g.get(&[x, w]) + sgt.get(&[x, z]) * g.get(&[y, w]) + sgt.get(&[x, y]) * g.get(&[z, w]))
            - (g.get(&[x, y]) * sq.get(&[z, w]) + g.get(&[y, z]) * sq.get(&[x, w]) + g.get(&[z, x]) * sq.get(&[y, w])) * k2
            - (g.get(&[x, y]) * g.get(&[z, w]) + g.get(&[y, z]) * g.get(&[x, w]) + g.get(&[z, x]) * g.get(&[y, w]))
                * (s2 * k3);
        ds.get(i) * 3.0 - rhs
    })
    .values()
    .max_abs();
    Ok(vec![
        ("div.S".into(), div_res),
        ("Codazzi.DS".into(), codazzi),
        ("Codazzi.DS.Q".into(), codazzi_q),
        ("DS.full".into(), full),
    ])
}

/// Residual rows of the `n = 2` system.
fn conditions_2d(aj: &AbundantJets) -> Result<Vec<(String, f64)>> {
    let m = &aj.metric;
    let g = &m.g;
    let s = &aj.s;
    let dt = &aj.dt;
    let sha = sha_jet(aj)?;
    let tau = tau_jet(aj)?;
    let beta = contract_with_s(s, &sha, m);
    let eta = contract_with_s(s, &tau, m);
    let s2 = s.norm_sq(m);

    let phi = Tensor::covariant(2, 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        s.get(&[x, y, z]) * dt.get(&[w]) * (-2.0 / 3.0)
            + dt.get(&[x]) * s.get(&[y, z, w]) * 2.0
            + sha.get(&[x, y]) * g.get(&[z, w])
    });
    let ds = covariant_derivative(s, &aj.gamma)?.permuted(&[1, 2, 3, 0]);
    let ds_res = (ds - tracefree_sym_projector(3, &phi, m)?).values().max_abs();

    let sha_gt = insert_last(&sha, &aj.grad_t);
    let t3 = Tensor::covariant(2, 3, |i| {
        sha.get(&[i[0], i[1]]) * dt.get(&[i[2]]) - g.get(&[i[0], i[1]]) * sha_gt.get(&[i[2]]) * 0.5
    })
    .symmetrize(&[0, 1, 2]);
    let dsha = covariant_derivative(&sha, &aj.gamma)?.permuted(&[1, 2, 0]);
    let dsha_rhs = s.scale_by(s2 * (1.0 / 3.0)) + beta_pattern(&beta, g).scale(4.0 / 3.0) + t3.scale(4.0 / 3.0);
    let dsha_res = (dsha - dsha_rhs).values().max_abs();

    let div_tau = divergence(&tau, m, &aj.gamma)?;
    let sgg = insert_last(&insert_last(s, &aj.grad_t), &aj.grad_t);
    let scal = aj.curv.scal;
    let dscal = differential(&scal);
    let tau_rhs = beta - eta - sha_gt.scale(2.0 / 3.0) - sgg.scale(4.0 / 9.0) - dt.scale_by(s2 * (5.0 / 9.0))
        + dscal.scale(0.5)
        - dt.scale_by(scal);
    let tau_res = (div_tau - tau_rhs).values().max_abs();

    Ok(vec![
        ("DS.2D".into(), ds_res),
        ("DXi.2D".into(), dsha_res),
        ("divTau.2D".into(), tau_res),
        ("tau.trace".into(), trace2(&tau, m).value().abs()),
        ("tau.symmetric".into(), tau.symmetry_residual(&[0, 1])),
        ("S.tracefree".into(), s.trace(0, 1, m).values().max_abs()),
    ])
}
