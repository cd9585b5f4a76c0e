use std::time::Instant;

use abundant_core::catalog;
use abundant_core::hypersurface::HypersurfaceData;
use abundant_core::reconstruct::{
    affine_fit, holonomy_residual, immerse_grid, integrate_path, quadric_fit, richardson_order, unit_square_loop,
};

fn hs(name: &str) -> (catalog::CatalogEntry, HypersurfaceData) {
    let e = catalog::get(name).unwrap();
    let h = HypersurfaceData::from_abundant_unchecked(&e.data().unwrap());
    (e, h)
}

#[test]
fn reconstructions_match_reference_immersions() {
    for name in ["sw1", "sw2", "s9-generic"] {
        let (e, h) = hs(name);
        let t0 = Instant::now();
        let dom = e.data().unwrap().geometry().domain().clone();
        let grid = immerse_grid(&h, &dom, &[20, 20], 1e-3).unwrap();
        let rec: Vec<Vec<f64>> = grid.samples.iter().map(|s| s.f.clone()).collect();
        let refs: Vec<Vec<f64>> = grid.samples.iter().map(|s| e.reference_immersion(&s.p).unwrap()).collect();
        let fit = affine_fit(&rec, &refs).unwrap();
        println!("{name} rms {:e} in {:?}", fit.rms, t0.elapsed());
        assert!(fit.rms < 1e-5, "{name}: {}", fit.rms);
        if name != "s9-generic" {
            let xi0 = &grid.samples[0].xi;
            let drift = grid.samples.iter().flat_map(|s| s.xi.iter().zip(xi0).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
            assert!(drift < 1e-7, "{name}: xi drift {drift}");
        }
        let q = quadric_fit(&rec).unwrap();
        println!("{name} quadric ratio {:e}", q.ratio);
    }
}

#[test]
fn oscillator_grid_lies_on_a_quadric_with_constant_xi() {
    let (e, h) = hs("ho-2");
    let dom = e.data().unwrap().geometry().domain().clone();
    let grid = immerse_grid(&h, &dom, &[8, 8], 1e-2).unwrap();
    let rec: Vec<Vec<f64>> = grid.samples.iter().map(|s| s.f.clone()).collect();
    assert!(quadric_fit(&rec).unwrap().ratio < 1e-8);
    for s in &grid.samples {
        assert!(s.xi.iter().zip(&grid.samples[0].xi).all(|(a, b)| (a - b).abs() < 1e-12));
    }
}

#[test]
fn sw1_is_not_a_quadric() {
    let (e, h) = hs("sw1");
    let dom = e.data().unwrap().geometry().domain().clone();
    let grid = immerse_grid(&h, &dom, &[8, 8], 1e-2).unwrap();
    let rec: Vec<Vec<f64>> = grid.samples.iter().map(|s| s.f.clone()).collect();
    let r = quadric_fit(&rec).unwrap().ratio;
    println!("sw1 quadric ratio {r:e}");
    assert!(r > 1e-3);
}

#[test]
fn holonomy_and_convergence_on_catalog() {
    for name in catalog::list() {
        let (e, h) = hs(name);
        let dom = e.data().unwrap().geometry().domain().clone();
        let lp = unit_square_loop(&dom);
        let t0 = Instant::now();
        let hol = holonomy_residual(&h, &lp, 1e-3).unwrap();
        let order = richardson_order(&h, &lp, 1e-2).unwrap();
        println!("{name} holonomy {hol:e} order {order:.3} in {:?}", t0.elapsed());
        assert!(hol < 1e-7, "{name}: {hol}");
        assert!(order >= 3.8, "{name}: {order}");
        let bad = h.perturbed_weingarten(0.05);
        let hol_bad = holonomy_residual(&bad, &lp, 1e-3).unwrap();
        assert!(hol_bad > 1e-3, "{name}: {hol_bad}");
    }
}

#[test]
fn path_independence() {
    for name in catalog::list() {
        let (e, h) = hs(name);
        let dom = e.data().unwrap().geometry().domain().clone();
        let lp = unit_square_loop(&dom);
        let a = integrate_path(&h, &[lp[0].clone(), lp[1].clone(), lp[2].clone()], 1e-3).unwrap();
        let b = integrate_path(&h, &[lp[0].clone(), lp[3].clone(), lp[2].clone()], 1e-3).unwrap();
        let d = (&a.f - &b.f).amax().max((&a.w - &b.w).amax());
        assert!(d < 1e-6, "{name}: {d}");
    }
}
