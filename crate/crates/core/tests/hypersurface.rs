use abundant_core::abundant::AbundantData;
use abundant_core::catalog;
use abundant_core::geometry::SampleSpec;
use abundant_core::hypersurface::HypersurfaceData;

fn points(d: &AbundantData) -> Vec<Vec<f64>> {
    let side = if d.n() == 2 { 6 } else { 2 };
    d.sample(&SampleSpec::new(vec![side; d.n()], 10, 11))
}

#[test]
fn catalog_hypersurfaces_integrate() {
    for name in catalog::list() {
        let e = catalog::get(name).unwrap();
        let d = e.data().unwrap();
        let pts = points(&d);
        let hs = HypersurfaceData::build_from_abundant(&d, &pts, 1e-8, false).unwrap();
        let rep = hs.verify_integrability(&pts, 1e-8);
        for c in &rep.conditions {
            println!("{} {} {:e}", e.name, c.name, c.max_residual);
        }
        let rep2 = hs.verify_abundant_conditions(&pts, 1e-8);
        for c in &rep2.conditions {
            println!("{} {} {:e}", e.name, c.name, c.max_residual);
        }
        let rep3 = hs.verify_cubic_identities(&pts, 1e-8);
        for c in &rep3.conditions {
            println!("{} {} {:e}", e.name, c.name, c.max_residual);
        }
        assert!(rep.passed(), "{}: {:?} {:?}", e.name, rep.failing(), rep.failed_points.first());
        assert!(rep2.passed(), "{}: {:?}", e.name, rep2.failing());
        assert!(rep3.passed(), "{}: {:?}", e.name, rep3.failing());
    }
}

fn recovery_check(name: &str) {
    let d = catalog::get(name).unwrap().data().unwrap();
    let pts = points(&d);
    let hs = HypersurfaceData::build_from_abundant(&d, &pts, 1e-8, false).unwrap();
    let base = d.geometry().domain().center();
    let rec = hs.recover_abundant(&base, &pts, 1e-8).unwrap();
    let other_base = pts[3].clone();
    let rec2 = hs.recover_abundant(&other_base, &pts, 1e-8).unwrap();
    let mut diffs = Vec::new();
    for p in &pts {
        let (a, b) = (d.jets(p, 2).unwrap(), rec.jets(p, 2).unwrap());
        let ds = (a.s.values() - b.s.values()).max_abs();
        let ddt = (a.dt.values() - b.dt.values()).max_abs();
        assert!(ds < 1e-7 && ddt < 1e-7, "{name} at {p:?}: S {ds:e} dt {ddt:e}");
        let c = rec2.jets(p, 2).unwrap();
        diffs.push(b.t.value() - c.t.value());
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
    assert!(var < 1e-12, "{name}: variance {var:e}");
    assert!(rec.jets(&base, 2).unwrap().t.value().abs() < 1e-14);
    let rep = rec.verify_conditions(&pts[..10], 1e-8);
    assert!(rep.passed(), "{name}: {:?}", rep.failing());
}

#[test]
fn recovery_round_trip() {
    for name in ["sw1", "harmonic-oscillator-3", "sw1-3"] {
        recovery_check(name);
    }
}

#[test]
fn recovery_rejects_non_closed_u() {
    use abundant_core::geometry::{ChartGeometry, DomainBox, ExprField, TensorField};
    use std::collections::BTreeMap;
    let coords: Vec<String> = vec!["x".into(), "y".into()];
    let f = |s: &str| ExprField::parse(s, &coords, &BTreeMap::new()).unwrap().arc();
    let dom = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let geo = ChartGeometry::euclidean(&["x", "y"], dom).unwrap();
    // C = u⊙g with u = (y, 0): du ≠ 0
    let c = TensorField::symmetric(2, 3, vec![f("3*y"), f("0"), f("y"), f("0")]).unwrap();
    let a = TensorField::symmetric(2, 2, vec![f("0"), f("0"), f("0")]).unwrap();
    let hs = HypersurfaceData::explicit(geo, c, a).unwrap();
    assert!(hs.recover_abundant(&[0.5, 0.5], &[vec![0.3, 0.3]], 1e-8).is_err());
}

#[test]
fn weingarten_routes_agree() {
    for name in catalog::list() {
        let d = catalog::get(name).unwrap().data().unwrap();
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        for p in points(&d).iter().take(10) {
            let a = hs.values(p).unwrap().a;
            let b = hs.weingarten_via_dual_curvature(p).unwrap();
            assert!((a - b).max_abs() < 1e-8, "{name} at {p:?}");
        }
    }
}

#[test]
fn perturbed_weingarten_fails_integrability() {
    for name in catalog::list() {
        let d = catalog::get(name).unwrap().data().unwrap();
        let pts = points(&d);
        let hs = HypersurfaceData::from_abundant_unchecked(&d).perturbed_weingarten(0.01);
        let rep = hs.verify_integrability(&pts, 1e-8);
        assert!(rep.max("trA") > 1e-3, "{name}: {}", rep.max("trA"));
    }
}

#[test]
fn build_rejects_scaled_cubic() {
    use abundant_core::geometry::{MapField, TensorField};
    let d = catalog::get("sw1").unwrap().data().unwrap();
    let comps = d.s_field().components().iter().map(|c| MapField::new("1.1*S", vec![c.clone()], |v| Ok(v[0] * 1.1)).arc()).collect();
    let bad = d.with_fields(TensorField::symmetric(2, 3, comps).unwrap(), d.t_field().clone()).unwrap();
    let err = HypersurfaceData::build_from_abundant(&bad, &points(&d), 1e-8, false).unwrap_err();
    println!("{err}");
    assert!(HypersurfaceData::build_from_abundant(&bad, &points(&d), 1e-8, true).is_ok());
}
