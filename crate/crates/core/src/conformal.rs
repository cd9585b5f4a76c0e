//! Conformal rescalings on both sides of the correspondence.
//!
//! Abundant side: `g′ = Ω²g`, `S′ = Ω²S` (so `Ŝ` is unchanged), `t′ = t − 3 ln Ω`.
//! Hypersurface side: `G′ = Ω²G`, `C′ = Ω²(C − Υ⊙G)`, `A′ = A + 4Υ⊗Υ − 2∇*²ln Ω`
//! with `Υ = d ln Ω` and the Hessian of `∇* = ∇^G − Ĉ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abundant::AbundantData;
use crate::error::{Error, Result};
use crate::forms::split_cubic;
use crate::geometry::{ChartGeometry, Field, MapField, TensorField};
use crate::hypersurface::HypersurfaceData;
use crate::jets::{Jet, UniFn};
use crate::reconstruct::ImmersionSample;
use crate::report::{evaluate_points, ResidualReport};
use crate::tensor::Tensor;

fn checked_ln(om: &Jet) -> Result<Jet> {
    if !(om.value() > 0.0) {
        return Err(Error::Precondition(format!("conformal factor must be positive, got {}", om.value())));
    }
    Ok(om.apply(UniFn::Ln)?)
}

fn times_omega_sq(omega: &Field, f: &Field, label: &str) -> Field {
    MapField::new(label, vec![omega.clone(), f.clone()], |v| {
        checked_ln(&v[0])?;
        Ok(v[0] * v[0] * v[1])
    })
    .arc()
}

/// `(Ω²g, Ω²S, t − 3 ln Ω)`.
pub fn rescale_abundant(data: &AbundantData, omega: &Field) -> Result<AbundantData> {
    let geo = data.geometry();
    let g: Vec<Field> = geo.metric_field().components().iter().map(|c| times_omega_sq(omega, c, "omega^2*g")).collect();
    let geometry = ChartGeometry::new(geo.coords().to_vec(), geo.domain().clone(), g)?;
    let s: Vec<Field> = data.s_field().components().iter().map(|c| times_omega_sq(omega, c, "omega^2*S")).collect();
    let s = TensorField::symmetric(data.n(), 3, s)?;
    let t = MapField::new("t-3*ln(omega)", vec![omega.clone(), data.t_field().clone()], |v| {
        Ok(v[1] - checked_ln(&v[0])? * 3.0)
    })
    .arc();
    AbundantData::new(geometry, s, t, data.params().clone())
}

/// `G′ = Ω²G`, `C′ = Ω²(C − Υ⊙G)`, `A′ = A + 4Υ⊗Υ − 2∇*²ln Ω`.
pub fn rescale_hypersurface(hs: &HypersurfaceData, omega: &Field) -> Result<HypersurfaceData> {
    hs.rescale(omega.clone())
}

/// `ξ′ = Ω⁻²(ξ + 2 grad_G ln Ω)` at each sample, with the gradient pushed forward by the
/// sampled tangent frame.
pub fn transversal_transform(hs: &HypersurfaceData, omega: &Field, samples: &[ImmersionSample]) -> Result<Vec<Vec<f64>>> {
    if samples.is_empty() {
        return Err(Error::Invalid("no transversal samples".into()));
    }
    let n = hs.n();
    samples
        .iter()
        .map(|s| {
            if s.tangents.len() != n {
                return Err(Error::Invalid("sample lacks its tangent frame".into()));
            }
            let om = omega.jet(&s.p, 1)?;
            let ln = checked_ln(&om)?;
            let m = hs.geometry().metric_jets(&s.p, 0)?;
            let inv = m.inv.values();
            let grad: Vec<f64> =
                (0..n).map(|k| (0..n).map(|l| inv.get(&[k, l]) * ln.derivative(l).value()).sum()).collect();
            let w = om.value().powi(-2);
            Ok((0..n + 1)
                .map(|r| w * (s.xi[r] + 2.0 * (0..n).map(|k| grad[k] * s.tangents[k][r]).sum::<f64>()))
                .collect())
        })
        .collect()
}

/// `Ω = exp(t/3)`, which makes `t′ ≡ 0`.
pub fn standard_scale_factor(data: &AbundantData) -> Field {
    MapField::new("exp(t/3)", vec![data.t_field().clone()], |v| Ok((v[0] * (1.0 / 3.0)).apply(UniFn::Exp)?)).arc()
}

pub fn to_standard_scale(data: &AbundantData) -> Result<(AbundantData, Field)> {
    let omega = standard_scale_factor(data);
    Ok((rescale_abundant(data, &omega)?, omega))
}

/// Compares `build(rescale(data, Ω))` with `rescale(build(data), Ω)` field by field.
pub fn verify_compatibility(data: &AbundantData, omega: &Field, points: &[Vec<f64>], tol: f64) -> Result<ResidualReport> {
    let left = HypersurfaceData::from_abundant_unchecked(&rescale_abundant(data, omega)?);
    let right = rescale_hypersurface(&HypersurfaceData::from_abundant_unchecked(data), omega)?;
    Ok(compare_hypersurfaces(&left, &right, points, tol))
}

/// Max differences of `G, C, U, u, A` between two hypersurface data sets on the same chart.
pub fn compare_hypersurfaces(a: &HypersurfaceData, b: &HypersurfaceData, points: &[Vec<f64>], tol: f64) -> ResidualReport {
    evaluate_points(points, tol, |p| {
        let (x, y) = (a.values(p)?, b.values(p)?);
        let d = |s: &Tensor<f64>, t: &Tensor<f64>| (s - t).max_abs();
        Ok(vec![
            ("G".into(), d(&x.g, &y.g)),
            ("C".into(), d(&x.c, &y.c)),
            ("U".into(), d(&x.uu, &y.uu)),
            ("u".into(), d(&x.u, &y.u)),
            ("A".into(), d(&x.a, &y.a)),
        ])
    })
}

/// `U′ = Ω²U` and `u′ = u − Υ` against the split of the rescaled cubic, and the trace law
/// `tr Ĉ′ = tr Ĉ − (n+2)Υ`.
pub fn verify_split_transformation(hs: &HypersurfaceData, omega: &Field, points: &[Vec<f64>], tol: f64) -> Result<ResidualReport> {
    let rescaled = rescale_hypersurface(hs, omega)?;
    let nf = hs.n() as f64;
    Ok(evaluate_points(points, tol, |p| {
        let base = hs.cubic_jets(p, 0)?;
        let new = rescaled.cubic_jets(p, 0)?;
        let (uu, u) = split_cubic(&base.c, &base.metric);
        let (uu2, u2) = split_cubic(&new.c, &new.metric);
        let om = omega.jet(p, 1)?;
        let ups: Vec<f64> = (0..hs.n()).map(|i| checked_ln(&om).map(|l| l.derivative(i).value())).collect::<Result<_>>()?;
        let w = om.value() * om.value();
        let uu_res = (uu.values().scale(w) - uu2.values()).max_abs();
        let u_res = (0..hs.n()).map(|i| (u.get(&[i]).value() - ups[i] - u2.get(&[i]).value()).abs()).fold(0.0, f64::max);
        let t_old = base.c.trace(1, 2, &base.metric).values();
        let t_new = new.c.trace(1, 2, &new.metric).values();
        let tr_res = (0..hs.n())
            .map(|i| (t_new.get(&[i]) - (t_old.get(&[i]) - (nf + 2.0) * ups[i])).abs())
            .fold(0.0, f64::max);
        Ok(vec![("U.scaling".into(), uu_res), ("u.shift".into(), u_res), ("trace.law".into(), tr_res)])
    }))
}

/// Differences of the abundant-hypersurface condition residuals before and after rescaling.
pub fn verify_condition_invariance(hs: &HypersurfaceData, omega: &Field, points: &[Vec<f64>], tol: f64) -> Result<ResidualReport> {
    let rescaled = rescale_hypersurface(hs, omega)?;
    let before = hs.verify_abundant_conditions(points, tol);
    let after = rescaled.verify_abundant_conditions(points, tol);
    let mut rep = ResidualReport::empty();
    rep.evaluated = before.evaluated.min(after.evaluated);
    rep.failed_points = before.failed_points;
    rep.failed_points.extend(after.failed_points.iter().cloned());
    for c in &before.conditions {
        let other = after.max(&c.name);
        let mut row = c.clone();
        row.max_residual = c.max_residual.max(other);
        row.pass = row.max_residual < tol;
        row.worst_point = None;
        row.note = Some(format!("before {:.3e}, after {:.3e}", c.max_residual, other));
        rep.conditions.push(row);
    }
    Ok(rep)
}

/// A seeded smooth positive factor `exp(Σ aᵢxᵢ + Σ bᵢ sin(cᵢxᵢ) + d·x₀x₁)` with small coefficients,
/// written in the expression language over `coords`.
pub fn random_conformal_factor(coords: &[String], seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for x in coords {
        let a: f64 = rng.gen_range(-0.3..0.3);
        let b: f64 = rng.gen_range(-0.2..0.2);
        let c: f64 = rng.gen_range(0.5..1.5);
        terms.push(format!("({a:.6})*{x} + ({b:.6})*sin(({c:.6})*{x})"));
    }
    if coords.len() >= 2 {
        let d: f64 = rng.gen_range(-0.1..0.1);
        terms.push(format!("({d:.6})*{}*{}", coords[0], coords[1]));
    }
    format!("exp({})", terms.join(" + "))
}

/// Composition of two rescalings as one factor `Ω₁Ω₂`.
pub fn product_factor(a: &Field, b: &Field) -> Field {
    MapField::new("omega1*omega2", vec![a.clone(), b.clone()], |v| Ok(v[0] * v[1])).arc()
}
