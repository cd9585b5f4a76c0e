//! Relative affine hypersurface data `(G, C, A)` and its relation to abundant data.
//!
//! The cubic splits as `C = U + u⊙G` with `U` trace-free and `(n+2)u = tr_G C`.
//! The Weingarten form `A` is stored explicitly; `Ric*/(n−1)` for the dual connection
//! `∇* = ∇^G − Ĉ` is an independent cross-check.

use std::sync::Arc;

use crate::abundant::{tau_jet, AbundantData};
use crate::error::{Error, Result};
use crate::forms::{insert_last, one_form_cubic, pair_square, pairing, split_cubic, trace2, trace_square, tracefree2};
use crate::geometry::{
    christoffel, covariant_derivative, curvature, curvature_endo, differential, divergence, gradient_vector, hat3,
    hessian, ricci_from_endo, sym_indices, ChartGeometry, Field, JetCurvature, MapField, ScalarField, TensorField,
};
use crate::jets::{multi_indices, Jet, UniFn};
use crate::report::{evaluate_points, ResidualReport};
use crate::tensor::{codazzi0_projector, tracefree_sym_projector, weyl0_projector, Metric, Scalar, Slot, Tensor};

/// Highest derivative order that [`HypersurfaceData::jets`] can deliver.
pub const MAX_HS_ORDER: usize = 2;

#[derive(Debug, Clone)]
enum Kind {
    FromAbundant(AbundantData),
    Explicit { c: TensorField, a: TensorField },
    Rescaled { base: Arc<HypersurfaceData>, omega: Field },
    Perturbed { base: Arc<HypersurfaceData>, eps: f64 },
}

/// Hypersurface data on a chart. The metric `G` lives in the chart geometry.
#[derive(Debug, Clone)]
pub struct HypersurfaceData {
    geometry: ChartGeometry,
    kind: Kind,
}

/// Jets of the metric and the cubic only.
#[derive(Debug, Clone)]
pub struct CubicJets {
    pub metric: Metric<Jet>,
    pub c: Tensor<Jet>,
}

/// All hypersurface quantities at one point.
#[derive(Debug, Clone)]
pub struct HsJets {
    pub metric: Metric<Jet>,
    pub gamma: Tensor<Jet>,
    pub curv: JetCurvature,
    pub c: Tensor<Jet>,
    /// Trace-free part `U`.
    pub uu: Tensor<Jet>,
    pub u: Tensor<Jet>,
    pub a: Tensor<Jet>,
}

/// Value-level snapshot of the stored fields.
#[derive(Debug, Clone)]
pub struct HsValues {
    pub g: Tensor<f64>,
    pub c: Tensor<f64>,
    pub uu: Tensor<f64>,
    pub u: Tensor<f64>,
    pub a: Tensor<f64>,
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_HS_ORDER {
        return Err(Error::Precondition(format!("hypersurface jets are limited to order {MAX_HS_ORDER}")));
    }
    Ok(())
}

impl HypersurfaceData {
    /// Builds `(G, C, A)` from abundant data after checking the defining conditions at `points`.
    pub fn build_from_abundant(data: &AbundantData, points: &[Vec<f64>], tol: f64, force: bool) -> Result<HypersurfaceData> {
        if !force {
            let rep = data.verify_conditions(points, tol);
            if !rep.passed() {
                let mut failing: Vec<String> =
                    rep.failing().iter().map(|n| format!("{n} ({:.3e})", rep.max(n))).collect();
                if rep.evaluated == 0 {
                    failing.push("no point could be evaluated".into());
                }
                return Err(Error::Precondition(format!("abundant conditions fail: {}", failing.join(", "))));
            }
        }
        Ok(HypersurfaceData::from_abundant_unchecked(data))
    }

    /// The ansatz `G = g`, `C = (S + dt⊙g)/3` without checking the input.
    pub fn from_abundant_unchecked(data: &AbundantData) -> HypersurfaceData {
        HypersurfaceData { geometry: data.geometry().clone(), kind: Kind::FromAbundant(data.clone()) }
    }

    /// Explicit `C` (symmetric rank 3) and `A` (symmetric rank 2) on the chart of `G`.
    pub fn explicit(geometry: ChartGeometry, c: TensorField, a: TensorField) -> Result<HypersurfaceData> {
        let n = geometry.n();
        if c.n() != n || c.rank() != 3 || !c.is_symmetric() || a.n() != n || a.rank() != 2 || !a.is_symmetric() {
            return Err(Error::Dimension("C must be symmetric of rank 3 and A symmetric of rank 2".into()));
        }
        Ok(HypersurfaceData { geometry, kind: Kind::Explicit { c, a } })
    }

    /// `A → A + εG`, used to inject curvature.
    pub fn perturbed_weingarten(&self, eps: f64) -> HypersurfaceData {
        HypersurfaceData { geometry: self.geometry.clone(), kind: Kind::Perturbed { base: Arc::new(self.clone()), eps } }
    }

    /// Conformal rescaling with `G′ = Ω²G`, `C′ = Ω²(C − Υ⊙G)`,
    /// `A′ = A + 4Υ⊗Υ − 2∇*²ln Ω` with `Υ = d ln Ω` and `∇* = ∇^G − Ĉ`.
    pub fn rescale(&self, omega: Field) -> Result<HypersurfaceData> {
        let comps = self
            .geometry
            .metric_field()
            .components()
            .iter()
            .map(|g| {
                let om = omega.clone();
                MapField::new("omega^2*g", vec![om, g.clone()], |v| Ok(v[0] * v[0] * v[1])).arc()
            })
            .collect();
        let geometry = ChartGeometry::new(self.geometry.coords().to_vec(), self.geometry.domain().clone(), comps)?;
        Ok(HypersurfaceData { geometry, kind: Kind::Rescaled { base: Arc::new(self.clone()), omega } })
    }

    pub fn n(&self) -> usize {
        self.geometry.n()
    }

    pub fn geometry(&self) -> &ChartGeometry {
        &self.geometry
    }

    /// The abundant data this hypersurface was built from, if any.
    pub fn source_abundant(&self) -> Option<&AbundantData> {
        match &self.kind {
            Kind::FromAbundant(d) => Some(d),
            _ => None,
        }
    }

    /// Cubic jets carrying at least `order` derivatives and metric jets one order more.
    pub fn cubic_jets(&self, p: &[f64], order: usize) -> Result<CubicJets> {
        match &self.kind {
            Kind::FromAbundant(d) => {
                let aj = d.jets(p, (order + 1).max(2))?;
                let c = (&aj.s + &one_form_cubic(&aj.dt, &aj.metric.g)).scale(1.0 / 3.0);
                Ok(CubicJets { metric: aj.metric, c })
            }
            Kind::Explicit { c, .. } => {
                let metric = self.geometry.metric_jets(p, order + 1)?;
                Ok(CubicJets { metric, c: c.jets(p, order)? })
            }
            Kind::Rescaled { base, omega } => {
                let b = base.cubic_jets(p, order)?;
                let om = omega.jet(p, order + 1)?;
                let ups = differential(&positive_ln(&om, p)?);
                let metric = self.geometry.metric_jets(p, order + 1)?;
                let c = (&b.c - &one_form_cubic(&ups, &b.metric.g)).scale_by(om * om);
                Ok(CubicJets { metric, c })
            }
            Kind::Perturbed { base, .. } => base.cubic_jets(p, order),
        }
    }

    /// All quantities, each carrying at least `order ≤ 2` derivatives.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<HsJets> {
        check_order(order)?;
        let inner = order + 2;
        let (metric, c, a) = match &self.kind {
            Kind::FromAbundant(d) => {
                let aj = d.jets(p, inner)?;
                let c = (&aj.s + &one_form_cubic(&aj.dt, &aj.metric.g)).scale(1.0 / 3.0);
                let a = if d.n() == 2 { ansatz_weingarten_2d(&aj)? } else { ansatz_weingarten(&aj.metric, &aj.gamma, &c, aj.curv.scal)? };
                (aj.metric, c, a)
            }
            Kind::Explicit { c, a } => (self.geometry.metric_jets(p, inner)?, c.jets(p, inner)?, a.jets(p, inner)?),
            Kind::Rescaled { base, omega } => {
                let b = base.jets(p, order)?;
                let om = omega.jet(p, inner)?;
                let lnom = positive_ln(&om, p)?;
                let ups = differential(&lnom);
                let c = (&b.c - &one_form_cubic(&ups, &b.metric.g)).scale_by(om * om);
                let hess = dual_hessian(&lnom, &b.gamma, &b.c, &b.metric)?;
                let a = &(&b.a + &ups.outer(&ups).scale(4.0)) - &hess.scale(2.0);
                (self.geometry.metric_jets(p, inner)?, c, a)
            }
            Kind::Perturbed { base, eps } => {
                let b = base.jets(p, order)?;
                let a = &b.a + &b.metric.g.scale(*eps);
                return Ok(HsJets { a, ..b });
            }
        };
        let gamma = christoffel(&metric);
        let curv = curvature(&metric, &gamma);
        let (uu, u) = split_cubic(&c, &metric);
        Ok(HsJets { metric, gamma, curv, c, uu, u, a })
    }

    pub fn values(&self, p: &[f64]) -> Result<HsValues> {
        let j = self.jets(p, 0)?;
        Ok(HsValues { g: j.metric.g.values(), c: j.c.values(), uu: j.uu.values(), u: j.u.values(), a: j.a.values() })
    }

    /// `A = Ric*/(n−1)` with `Ric*` the Ricci tensor of `∇* = ∇^G − Ĉ`.
    pub fn weingarten_via_dual_curvature(&self, p: &[f64]) -> Result<Tensor<f64>> {
        let cj = self.cubic_jets(p, 1)?;
        Ok(dual_weingarten(&cj.metric, &cj.c).values())
    }

    /// The Gauss equations in split form plus the Codazzi equation for `A`.
    pub fn verify_integrability(&self, points: &[Vec<f64>], tol: f64) -> ResidualReport {
        let mut rep = evaluate_points(points, tol, |p| integrability_rows(&self.jets(p, 1)?));
        if self.n() == 2 {
            rep.set_note("A.identity.Weyl", "trivially satisfied: the Weyl tensor vanishes in dimension 2");
        }
        rep
    }

    /// Conditions for an abundant hypersurface co-normalisation.
    pub fn verify_abundant_conditions(&self, points: &[Vec<f64>], tol: f64) -> ResidualReport {
        evaluate_points(points, tol, |p| {
            let j = self.jets(p, 1)?;
            if self.n() == 2 {
                racs_rows_2d(&j)
            } else {
                racs_rows(&j)
            }
        })
    }

    /// Identities of the cubic split and, for data built from an abundant manifold with
    /// `n ≥ 3`, the contracted `∇U` formula and the expression of `A` through `τ`.
    pub fn verify_cubic_identities(&self, points: &[Vec<f64>], tol: f64) -> ResidualReport {
        evaluate_points(points, tol, |p| {
            let j = self.jets(p, 1)?;
            let mut rows = cubic_split_rows(&j)?;
            if let (Kind::FromAbundant(d), true) = (&self.kind, self.n() >= 3) {
                rows.extend(abundant_hs_rows(&j, d, p)?);
            }
            Ok(rows)
        })
    }

    /// `|du|`, the obstruction to writing `u = dt/3`.
    pub fn closedness(&self, p: &[f64]) -> Result<f64> {
        let cj = self.cubic_jets(p, 1)?;
        let (_, u) = split_cubic(&cj.c, &cj.metric);
        let n = self.n();
        let mut m: f64 = 0.0;
        for i in 0..n {
            for k in 0..n {
                m = m.max((u.get(&[k]).derivative(i).value() - u.get(&[i]).derivative(k).value()).abs());
            }
        }
        Ok(m)
    }

    /// Recovers `(g, S, t)` with `g = G`, `S = 3U` and `t(p) = 3∫u` along the segment from `base`.
    pub fn recover_abundant(&self, base: &[f64], points: &[Vec<f64>], tol: f64) -> Result<AbundantData> {
        self.geometry.check_point(base)?;
        for p in points {
            let r = self.closedness(p)?;
            if r > tol {
                return Err(Error::Precondition(format!("u is not closed at {p:?}: |du| = {r:.3e}")));
            }
        }
        let this = Arc::new(self.clone());
        let n = self.n();
        let comps: Vec<Field> = sym_indices(n, 3)
            .into_iter()
            .map(|idx| Arc::new(TraceFreeComponent { hs: this.clone(), idx }) as Field)
            .collect();
        let s = TensorField::symmetric(n, 3, comps)?;
        let t: Field = Arc::new(PotentialOfU { hs: this, base: base.to_vec() });
        let geometry = self.geometry.clone();
        let params = match &self.kind {
            Kind::FromAbundant(d) => d.params().clone(),
            _ => Default::default(),
        };
        AbundantData::new(geometry, s, t, params)
    }
}

fn positive_ln(om: &Jet, p: &[f64]) -> Result<Jet> {
    if !(om.value() > 0.0) {
        return Err(Error::Precondition(format!("conformal factor must be positive, got {} at {p:?}", om.value())));
    }
    Ok(om.apply(UniFn::Ln)?)
}

/// Hessian of `f` for the dual connection `∇^G − Ĉ`: `(∇^G)²f + C(·,·,grad f)`.
pub fn dual_hessian(f: &Jet, gamma: &Tensor<Jet>, c: &Tensor<Jet>, m: &Metric<Jet>) -> Result<Tensor<Jet>> {
    let hg = hessian(f, gamma)?;
    Ok(hg + insert_last(c, &gradient_vector(f, m)))
}

/// `(2/n)[(n+2)∇^G u − div_G C] + (Scal − |C|² + (n+2)²|u|²) G / (n(n−1))`.
pub fn ansatz_weingarten(m: &Metric<Jet>, gamma: &Tensor<Jet>, c: &Tensor<Jet>, scal: Jet) -> Result<Tensor<Jet>> {
    let n = m.n() as f64;
    let (_, u) = split_cubic(c, m);
    let du = covariant_derivative(&u, gamma)?;
    let divc = divergence(c, m, gamma)?;
    let u2 = u.norm_sq(m);
    let c2 = c.norm_sq(m);
    let k = (scal - c2 + u2 * ((n + 2.0) * (n + 2.0))) * (1.0 / (n * (n - 1.0)));
    Ok((du.scale(n + 2.0) - divc).scale(2.0 / n) + m.g.scale_by(k))
}

/// The 2D ansatz `A = (1/3)[2∇²t − Δt g − div S] + ½(Scal − |S|²/9 + (4/9)|dt|²) g`.
fn ansatz_weingarten_2d(aj: &crate::abundant::AbundantJets) -> Result<Tensor<Jet>> {
    let m = &aj.metric;
    let hess = hessian(&aj.t, &aj.gamma)?;
    let lap = trace2(&hess, m);
    let divs = divergence(&aj.s, m, &aj.gamma)?;
    let s2 = aj.s.norm_sq(m);
    let dt2 = pairing(&aj.dt, &aj.grad_t);
    let k = (aj.curv.scal - s2 * (1.0 / 9.0) + dt2 * (4.0 / 9.0)) * 0.5;
    Ok((hess.scale(2.0) - m.g.scale_by(lap) - divs).scale(1.0 / 3.0) + m.g.scale_by(k))
}

/// `Ric*/(n−1)` from metric and cubic jets (order ≥ 1).
pub fn dual_weingarten(m: &Metric<Jet>, c: &Tensor<Jet>) -> Tensor<Jet> {
    let n = m.n() as f64;
    let gamma_star = &christoffel(m) - &hat3(c, m);
    ricci_from_endo(&curvature_endo(&gamma_star)).scale(1.0 / (n - 1.0))
}

/// `Â` as a (1,1) tensor with slots (Contra, Co): `Â^k_i = G^{kl} A_li`.
fn a_hat(a: &Tensor<Jet>, m: &Metric<Jet>) -> Tensor<Jet> {
    m.inv.contract(1, a, 0)
}

fn integrability_rows(j: &HsJets) -> Result<Vec<(String, f64)>> {
    let n = j.metric.n();
    let nf = n as f64;
    let m = &j.metric;
    let g = &m.g;
    let du = covariant_derivative(&j.u, &j.gamma)?;
    let divc = divergence(&j.c, m, &j.gamma)?;
    let a0 = tracefree2(&j.a, m);
    let tr_a = trace2(&j.a, m);
    let u2 = j.u.norm_sq(m);
    let c2 = j.c.norm_sq(m);
    let scal = j.curv.scal;

    let a0_res = (&a0 - &(du.scale(nf + 2.0) - divc).scale(2.0 / nf)).values().max_abs();
    let tra_res = (tr_a * (nf - 1.0) - (scal - c2 + u2 * ((nf + 2.0) * (nf + 2.0)))).value().abs();

    let grad_u = j.u.raise(0, m);
    let ric_rhs = &(&j.curv.ric - &trace_square(&j.c, m)) + &insert_last(&j.c, &grad_u).scale(nf + 2.0);
    let ric_lhs = a0.scale((nf - 2.0) / 2.0) + g.scale_by(tr_a * ((nf - 1.0) / nf));
    let ric_res = (ric_lhs - ric_rhs).values().max_abs();

    let weyl_res = match &j.curv.weyl {
        Some(w) => (w + &weyl0_projector(&pair_square(&j.c, m), m)?.scale(2.0)).values().max_abs(),
        None => 0.0,
    };
    let duu = covariant_derivative(&j.uu, &j.gamma)?;
    let codazzi_u = codazzi0_projector(&duu, m)?.values().max_abs();

    // (∇_X A)(Y,Z) − (∇_Y A)(X,Z) − C(Y,Â X,Z) + C(X,Â Y,Z)
    let da = covariant_derivative(&j.a, &j.gamma)?;
    let ah = a_hat(&j.a, m);
    let c_a = j.c.contract(1, &ah, 0); // (Y, Z, X) ↦ C(Y, Â X, Z)
    let a_codazzi = Tensor::covariant(n, 3, |i| {
        let (x, y, z) = (i[0], i[1], i[2]);
        da.get(&[x, y, z]) - da.get(&[y, x, z]) - c_a.get(&[y, z, x]) + c_a.get(&[x, z, y])
    })
    .values()
    .max_abs();

    // R^G(X,Y)Z + (∇_X Ĉ)(Y,Z) − (∇_Y Ĉ)(X,Z) + Ĉ(X,Ĉ(Y,Z)) − Ĉ(Y,Ĉ(X,Z)) − G(Y,Z)Â(X) + G(X,Z)Â(Y)
    let rm = curvature_endo(&j.gamma);
    let ch = hat3(&j.c, m);
    let dch = covariant_derivative(&ch, &j.gamma)?; // [x, l, y, z]
    let zero = j.c.get(&[0, 0, 0]).zero_like();
    let gauss_full = Tensor::from_fn(n, &[Slot::Co, Slot::Co, Slot::Co, Slot::Contra], |i| {
        let (x, y, z, l) = (i[0], i[1], i[2], i[3]);
        let mut acc = rm.get(&[x, y, z, l]) + dch.get(&[x, l, y, z]) - dch.get(&[y, l, x, z]);
        for k in 0..n {
            acc = acc + ch.get(&[l, x, k]) * ch.get(&[k, y, z]) - ch.get(&[l, y, k]) * ch.get(&[k, x, z]);
        }
        acc - g.get(&[y, z]) * ah.get(&[l, x]) + g.get(&[x, z]) * ah.get(&[l, y]) + zero
    })
    .values()
    .max_abs();

    Ok(vec![
        ("A0".into(), a0_res),
        ("trA".into(), tra_res),
        ("A.identity.Ric".into(), ric_res),
        ("A.identity.Weyl".into(), weyl_res),
        ("A.identity.Codazzi".into(), codazzi_u),
        ("A.Codazzi".into(), a_codazzi),
        ("Gauss.full".into(), gauss_full),
        ("A.symmetric".into(), j.a.symmetry_residual(&[0, 1])),
        ("C.symmetric".into(), j.c.symmetry_residual(&[0, 1, 2])),
    ])
}

/// `𝔘(X,Y,Z,W) = g(U_X U_Y W, Z) = Σ U(X,Z,c) U(Y,W,c')`.
fn frak_u(uu: &Tensor<Jet>, m: &Metric<Jet>) -> Tensor<Jet> {
    pair_square(uu, m).permuted(&[0, 2, 1, 3])
}

fn racs_rows(j: &HsJets) -> Result<Vec<(String, f64)>> {
    let nf = j.metric.n() as f64;
    let m = &j.metric;
    let duu = covariant_derivative(&j.uu, &j.gamma)?;
    let lhs = tracefree_sym_projector(4, &duu, m)?;
    let rhs = tracefree_sym_projector(4, &(frak_u(&j.uu, m) + j.uu.outer(&j.u).scale(4.0)), m)?;
    let du_res = (lhs - rhs).values().max_abs();

    let p = j.curv.schouten.as_ref().expect("Schouten tensor exists for n ≥ 3");
    let du = covariant_derivative(&j.u, &j.gamma)?;
    let u2 = j.u.norm_sq(m);
    let uu2 = j.uu.norm_sq(m);
    let rhs = p + &(j.u.outer(&j.u) - m.g.scale_by(u2 * 0.5));
    let rhs = rhs
        + (trace_square(&j.uu, m) + m.g.scale_by(uu2 * ((nf - 6.0) / (2.0 * (nf + 2.0) * (nf - 1.0)))))
            .scale(1.0 / (nf - 2.0));
    let du_res2 = (du - rhs).values().max_abs();
    let weyl = j.curv.weyl.as_ref().map_or(0.0, |w| w.values().max_abs());
    Ok(vec![("DU".into(), du_res), ("Du".into(), du_res2), ("Weyl.G".into(), weyl)])
}

fn racs_rows_2d(j: &HsJets) -> Result<Vec<(String, f64)>> {
    let m = &j.metric;
    let duu = covariant_derivative(&j.uu, &j.gamma)?;
    let lhs = tracefree_sym_projector(4, &duu, m)?;
    let rhs = tracefree_sym_projector(4, &j.uu.outer(&j.u), m)?.scale(4.0);
    let du_res = (lhs - rhs).values().max_abs();

    let grad_u = j.u.raise(0, m);
    let x = (divergence(&j.uu, m, &j.gamma)? + insert_last(&j.uu, &grad_u).scale(2.0)).scale(3.0);
    let dx = covariant_derivative(&x, &j.gamma)?;
    let lhs = tracefree_sym_projector(3, &(dx - x.outer(&j.u).scale(4.0)), m)?;
    let uu2 = j.uu.norm_sq(m);
    let ddiv_res = (lhs - j.uu.scale_by(uu2 * 9.0)).values().max_abs();

    let divu = divergence(&j.u, m, &j.gamma)?.data()[0];
    let divu_res = (divu - j.curv.scal * 0.5 - uu2).value().abs();
    Ok(vec![("DU.2D".into(), du_res), ("DdivU.2D".into(), ddiv_res), ("divu.2D".into(), divu_res)])
}

/// Both identities of the cubic split, evaluated on the stored `C`.
fn cubic_split_rows(j: &HsJets) -> Result<Vec<(String, f64)>> {
    let n = j.metric.n();
    let nf = n as f64;
    let m = &j.metric;
    let grad_u = j.u.raise(0, m);
    let u2 = j.u.norm_sq(m);
    let lhs = tracefree2(&trace_square(&j.c, m), m);
    let rhs = tracefree2(&trace_square(&j.uu, m), m)
        + insert_last(&j.uu, &grad_u).scale(4.0)
        + (j.u.outer(&j.u) - m.g.scale_by(u2 * (1.0 / nf))).scale(nf + 6.0);
    let square = (lhs - rhs).values().max_abs();

    let du = covariant_derivative(&j.u, &j.gamma)?; // (∇_Y u)(X) at [y, x]
    let divu = trace2(&du, m);
    let rhs = divergence(&j.uu, m, &j.gamma)? + du.permuted(&[1, 0]) + du.clone() + m.g.scale_by(divu);
    let div = (divergence(&j.c, m, &j.gamma)? - rhs).values().max_abs();
    Ok(vec![("C2Uu.square".into(), square), ("C2Uu.div".into(), div)])
}

fn abundant_hs_rows(j: &HsJets, d: &AbundantData, p: &[f64]) -> Result<Vec<(String, f64)>> {
    let n = j.metric.n();
    let nf = n as f64;
    let m = &j.metric;
    let grad_u = j.u.raise(0, m);
    let lhs = insert_last(&j.uu, &grad_u);
    let rhs = tracefree2(&trace_square(&j.uu, m), m).scale(2.0 / (nf - 2.0))
        - divergence(&j.uu, m, &j.gamma)?.scale(1.0 / nf);
    let div_u = (lhs - rhs).values().max_abs();

    let aj = d.jets(p, 3)?;
    let tau = tau_jet(&aj)?;
    let pc = tracefree2(j.curv.schouten.as_ref().expect("n ≥ 3"), m);
    let k = (j.curv.scal - j.uu.norm_sq(m) + j.u.norm_sq(m) * ((nf - 1.0) * (nf + 2.0))) * (1.0 / (nf * (nf - 1.0)));
    let a_tau = (pc.scale(8.0) - tau).scale(1.0 / 3.0) + m.g.scale_by(k);
    let a_res = (&j.a - &a_tau).values().max_abs();
    Ok(vec![("divU.formula".into(), div_u), ("A.formula.via.tau".into(), a_res)])
}

/// Splits a numeric cubic; rejects asymmetric input.
pub fn decompose_cubic(c: &Tensor<f64>, g: &Metric<f64>) -> Result<(Tensor<f64>, Tensor<f64>)> {
    if c.rank() != 3 || !c.is_covariant() {
        return Err(Error::Dimension("C must be a covariant (0,3) tensor".into()));
    }
    let r = c.symmetry_residual(&[0, 1, 2]);
    if r > 1e-10 * (1.0 + c.max_abs()) {
        return Err(crate::tensor::TensorError::NotSymmetric(r).into());
    }
    Ok(split_cubic(c, g))
}

/// `S_idx = 3U_idx` of a hypersurface, as a scalar field.
#[derive(Debug)]
struct TraceFreeComponent {
    hs: Arc<HypersurfaceData>,
    idx: Vec<usize>,
}

impl ScalarField for TraceFreeComponent {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let cj = self.hs.cubic_jets(p, order)?;
        let (uu, _) = split_cubic(&cj.c, &cj.metric);
        Ok(uu.get(&self.idx).truncate(order) * 3.0)
    }
}

/// `t(p) = 3∫_base^p u` along the straight segment; higher jet entries come from `3u`.
#[derive(Debug)]
struct PotentialOfU {
    hs: Arc<HypersurfaceData>,
    base: Vec<f64>,
}

impl PotentialOfU {
    fn integrand(&self, p: &[f64], s: f64) -> Result<f64> {
        let q: Vec<f64> = self.base.iter().zip(p).map(|(b, x)| b + s * (x - b)).collect();
        let cj = self.hs.cubic_jets(&q, 0)?;
        let (_, u) = split_cubic(&cj.c, &cj.metric);
        Ok(3.0 * (0..p.len()).map(|i| u.get(&[i]).value() * (p[i] - self.base[i])).sum::<f64>())
    }
}

impl ScalarField for PotentialOfU {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let n = p.len();
        let value = adaptive_simpson(&|s| self.integrand(p, s), 0.0, 1.0, 1e-10)?;
        let mut coeffs = vec![value];
        if order > 0 {
            let cj = self.hs.cubic_jets(p, order - 1)?;
            let (_, u) = split_cubic(&cj.c, &cj.metric);
            for alpha in multi_indices(n, order).into_iter().skip(1) {
                let i = alpha.iter().position(|&a| a > 0).expect("non-zero multi-index");
                let mut rest = alpha.clone();
                rest[i] -= 1;
                coeffs.push(3.0 * u.get(&[i]).get(&rest));
            }
        }
        Ok(Jet::from_coeffs(n, order, &coeffs)?)
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(
        f: &dyn Fn(f64) -> Result<f64>,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm)?, f(rm)?);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 {
            return Err(Error::Numerical("adaptive Simpson did not converge".into()));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(rec(f, (a, fa), (lm, flm), (m, fm), left, 0.5 * tol, depth - 1)?
            + rec(f, (m, fm), (rm, frm), (b, fb), right, 0.5 * tol, depth - 1)?)
    }
    let (fa, fb) = (f(a)?, f(b)?);
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, (a, fa), (m, fm), (b, fb), whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainBox, ExprField};
    use std::collections::BTreeMap;

    /// Graph of `F = e^x + e^{2y} + e^{3z} + e^w + a·xyz + b·yzw` with the vertical transversal
    /// field: `G = ∇²F`, `C = -½ ∂³F`, `A = 0`.
    fn graph() -> HypersurfaceData {
        let coords: Vec<String> = ["x", "y", "z", "w"].iter().map(|s| s.to_string()).collect();
        let params = BTreeMap::from([("a".to_string(), 0.4), ("b".to_string(), -0.3)]);
        let f = |s: &str| ExprField::parse(s, &coords, &params).unwrap().arc();
        let dom = DomainBox::new(vec![-0.3; 4], vec![0.3; 4]).unwrap();
        let g = ["exp(x)", "a*z", "a*y", "0", "4*exp(2*y)", "a*x + b*w", "b*z", "9*exp(3*z)", "b*y", "exp(w)"];
        let geometry = ChartGeometry::new(coords.clone(), dom, g.iter().map(|s| f(s)).collect()).unwrap();
        let c: Vec<Field> = sym_indices(4, 3)
            .iter()
            .map(|idx| {
                let src = match idx.as_slice() {
                    [0, 0, 0] => "-0.5*exp(x)",
                    [1, 1, 1] => "-4*exp(2*y)",
                    [2, 2, 2] => "-13.5*exp(3*z)",
                    [3, 3, 3] => "-0.5*exp(w)",
                    [0, 1, 2] => "-0.5*a",
                    [1, 2, 3] => "-0.5*b",
                    _ => "0",
                };
                f(src)
            })
            .collect();
        let a: Vec<Field> = (0..10).map(|_| f("0")).collect();
        HypersurfaceData::explicit(
            geometry,
            TensorField::symmetric(4, 3, c).unwrap(),
            TensorField::symmetric(4, 2, a).unwrap(),
        )
        .unwrap()
    }

    fn pts() -> Vec<Vec<f64>> {
        vec![vec![0.0; 4], vec![0.1, -0.2, 0.25, 0.05], vec![-0.25, 0.15, -0.1, 0.2]]
    }

    #[test]
    fn graph_hypersurface_satisfies_gauss_and_weyl_identity() {
        let rep = graph().verify_integrability(&pts(), 1e-9);
        for c in &rep.conditions {
            println!("{} {:e}", c.name, c.max_residual);
        }
        assert!(rep.passed(), "{:?}", rep.failing());
        let w = graph().jets(&pts()[1], 0).unwrap().curv.weyl.unwrap().values().max_abs();
        println!("|W| {w:e}");
        assert!(w > 1e-3);
    }

    #[test]
    fn dual_weingarten_matches_zero_weingarten_of_graph() {
        let a = graph().weingarten_via_dual_curvature(&pts()[1]).unwrap();
        assert!(a.max_abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn perturbation_breaks_trace_condition() {
        let hs = graph().perturbed_weingarten(1e-3);
        assert!(hs.verify_integrability(&pts(), 1e-9).max("trA") > 1e-4);
    }

    #[test]
    fn simpson_integrates_polynomials_and_exp() {
        let v = adaptive_simpson(&|s| Ok(s.exp()), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
        let v = adaptive_simpson(&|s| Ok(3.0 * s * s), 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }
}
