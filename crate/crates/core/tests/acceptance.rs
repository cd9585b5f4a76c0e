//! Acceptance harness: one line per criterion, nonzero exit on any failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use abundant_core::catalog::{self, CatalogEntry};
use abundant_core::classify::{classify_all, Verdict, DEFAULT_THRESHOLD};
use abundant_core::conformal::{random_conformal_factor, verify_compatibility, verify_condition_invariance};
use abundant_core::geometry::{ChartGeometry, DomainBox, ExprField, Field, SampleSpec, ScalarField, TensorField};
use abundant_core::hypersurface::HypersurfaceData;
use abundant_core::reconstruct::{
    affine_fit, holonomy_residual, immerse_grid, quadric_fit, richardson_order, unit_square_loop,
};
use abundant_core::tensor::{codazzi0_unchecked, sym_projector, tracefree_sym_projector, weyl0_projector};
use abundant_core::{AbundantData, Metric, ResidualReport, Tensor};

type Outcome = std::result::Result<String, String>;

fn entry(name: &str) -> CatalogEntry {
    catalog::get(name).expect("catalog entry")
}

fn data(name: &str) -> AbundantData {
    entry(name).data().expect("catalog data")
}

fn field(d: &AbundantData, src: &str) -> Field {
    ExprField::parse(src, d.geometry().coords(), d.params()).expect("expression").arc()
}

fn points(d: &AbundantData, seed: u64) -> Vec<Vec<f64>> {
    let side = if d.n() == 2 { 6 } else { 2 };
    d.sample(&SampleSpec::new(vec![side; d.n()], 20, seed))
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Fails with the failing rows, otherwise returns the worst residual.
fn report_ok(tag: &str, rep: &ResidualReport) -> std::result::Result<f64, String> {
    if !rep.failed_points.is_empty() {
        return Err(format!("{tag}: {} points failed to evaluate ({})", rep.failed_points.len(), rep.failed_points[0].error));
    }
    if !rep.passed() {
        let rows: Vec<String> = rep.failing().iter().map(|r| format!("{r}={:.2e}", rep.max(r))).collect();
        return Err(format!("{tag}: {}", rows.join(", ")));
    }
    Ok(rep.worst())
}

fn criterion_1() -> Outcome {
    let mut lines = Vec::new();
    for name in ["sw1", "sw2", "s9-generic"] {
        let t0 = Instant::now();
        let d = data(name);
        let pts = d.sample(&SampleSpec::new(vec![10, 10], 100, 2024));
        if pts.len() != 200 {
            return Err(format!("{name}: only {} sample points", pts.len()));
        }
        let rep = d.verify_conditions(&pts, 1e-8);
        let worst = report_ok(name, &rep)?;
        let secs = t0.elapsed().as_secs_f64();
        if secs >= 10.0 {
            return Err(format!("{name}: {secs:.1} s"));
        }
        lines.push(format!("{name} {worst:.1e} in {secs:.2} s"));
    }
    Ok(lines.join("; "))
}

fn criterion_2() -> Outcome {
    let mut lines = Vec::new();
    for name in ["sw1", "sw2", "s9-generic"] {
        let t0 = Instant::now();
        let e = entry(name);
        let d = e.data().map_err(|x| x.to_string())?;
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        let grid = immerse_grid(&hs, d.geometry().domain(), &[20, 20], 1e-3).map_err(|x| x.to_string())?;
        let rec: Vec<Vec<f64>> = grid.samples.iter().map(|s| s.f.clone()).collect();
        let refs: Vec<Vec<f64>> = grid.samples.iter().map(|s| e.reference_immersion(&s.p).unwrap()).collect();
        let fit = affine_fit(&rec, &refs).map_err(|x| x.to_string())?;
        let secs = t0.elapsed().as_secs_f64();
        if !(fit.rms < 1e-4) || secs >= 30.0 {
            return Err(format!("{name}: rms {:.2e} in {secs:.1} s", fit.rms));
        }
        lines.push(format!("{name} rms {:.1e} in {secs:.1} s", fit.rms));
    }
    Ok(lines.join("; "))
}

fn criterion_3() -> Outcome {
    let mut lines = Vec::new();
    for (name, side) in [("ho-2", 10), ("ho-3", 6)] {
        let d = data(name);
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        let r = classify_all(&hs, &points(&d, 3), DEFAULT_THRESHOLD).map_err(|x| x.to_string())?;
        let verdicts = [r.blaschke.verdict, r.quadric_type.verdict, r.improper_sphere.verdict, r.graph.verdict];
        if verdicts.iter().any(|v| *v != Verdict::True) {
            return Err(format!("{name}: verdicts {verdicts:?}"));
        }
        let grid = immerse_grid(&hs, d.geometry().domain(), &vec![side; d.n()], 1e-2).map_err(|x| x.to_string())?;
        let rec: Vec<Vec<f64>> = grid.samples.iter().map(|s| s.f.clone()).collect();
        let q = quadric_fit(&rec).map_err(|x| x.to_string())?;
        if !(q.ratio < 1e-8) {
            return Err(format!("{name}: quadric ratio {:.2e}", q.ratio));
        }
        lines.push(format!("{name} all true, ratio {:.1e}", q.ratio));
    }
    Ok(lines.join("; "))
}

fn criterion_4() -> Outcome {
    let d = data("s7");
    let hs = HypersurfaceData::from_abundant_unchecked(&d);
    let pts = d.sample(&SampleSpec::new(vec![], 50, 17));
    let r = classify_all(&hs, &pts, DEFAULT_THRESHOLD).map_err(|x| x.to_string())?;
    if r.evaluated != 50 {
        return Err(format!("only {} of 50 points evaluated", r.evaluated));
    }
    let mut worst: f64 = 0.0;
    for (p, tr) in pts.iter().zip(&r.trace_a) {
        let x = 2.0 * p[0] / (1.0 + p[0] * p[0] + p[1] * p[1]);
        let want = 2.0 / (1.0 - x * x);
        worst = worst.max(((tr - want) / want).abs());
    }
    check(
        worst < 1e-8 && r.graph.verdict == Verdict::False,
        format!("relative error {worst:.1e}, graph {:?}", r.graph.verdict),
    )
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in catalog::list() {
        let d = data(name);
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        let rep = hs.verify_integrability(&points(&d, 5), 1e-9);
        if !rep.failed_points.is_empty() {
            return Err(format!("{name}: {} points failed", rep.failed_points.len()));
        }
        let r = rep.max("trA");
        if !(r < 1e-9) {
            return Err(format!("{name}: trA {r:.2e}"));
        }
        worst = worst.max(r);
    }
    Ok(format!("worst trA {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in catalog::list() {
        let d = data(name);
        let pts = points(&d, 6);
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        worst = worst.max(report_ok(name, &hs.verify_integrability(&pts, 1e-8))?);
        let bad = hs.perturbed_weingarten(0.01).verify_integrability(&pts, 1e-8);
        let hit = bad.conditions.iter().map(|c| c.max_residual).fold(0.0, f64::max);
        if !(hit > 1e-3) {
            return Err(format!("{name}: A + 0.01G only reaches {hit:.2e}"));
        }
    }
    Ok(format!("worst {worst:.1e}; A + 0.01G detected on every system"))
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    for name in ["ho-3", "sw1"] {
        let d = data(name);
        let pts = points(&d, 7);
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        for seed in 0..5 {
            let om = field(&d, &random_conformal_factor(d.geometry().coords(), seed));
            let tag = format!("{name}/seed {seed}");
            let comp = verify_compatibility(&d, &om, &pts, 1e-8).map_err(|x| x.to_string())?;
            worst = worst.max(report_ok(&tag, &comp)?);
            let inv = verify_condition_invariance(&hs, &om, &pts, 1e-8).map_err(|x| x.to_string())?;
            worst = worst.max(report_ok(&tag, &inv)?);
        }
    }
    Ok(format!("worst {worst:.1e}"))
}

fn criterion_8() -> Outcome {
    let (mut worst, mut min_order) = (0.0f64, f64::INFINITY);
    for name in catalog::list() {
        let d = data(name);
        let hs = HypersurfaceData::from_abundant_unchecked(&d);
        let lp = unit_square_loop(d.geometry().domain());
        let hol = holonomy_residual(&hs, &lp, 1e-3).map_err(|x| x.to_string())?;
        let order = richardson_order(&hs, &lp, 1e-2).map_err(|x| x.to_string())?;
        if !(hol < 1e-7) || !(order >= 3.8) {
            return Err(format!("{name}: holonomy {hol:.2e}, order {order:.2}"));
        }
        worst = worst.max(hol);
        min_order = min_order.min(order);
    }
    Ok(format!("worst holonomy {worst:.1e}, minimum order {min_order:.2}"))
}

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    for name in ["sw1", "ho-3"] {
        let d = data(name);
        let pts = points(&d, 9);
        let hs = HypersurfaceData::build_from_abundant(&d, &pts, 1e-8, false).map_err(|x| x.to_string())?;
        let rec = hs.recover_abundant(&d.geometry().domain().center(), &pts, 1e-8).map_err(|x| x.to_string())?;
        let rec2 = hs.recover_abundant(&pts[3], &pts, 1e-8).map_err(|x| x.to_string())?;
        let (mut ds, mut ddt) = (0.0f64, 0.0f64);
        let mut diffs = Vec::new();
        for p in &pts {
            let (a, b, c) = (d.jets(p, 2).unwrap(), rec.jets(p, 2).unwrap(), rec2.jets(p, 2).unwrap());
            ds = ds.max((a.s.values() - b.s.values()).max_abs());
            ddt = ddt.max((a.dt.values() - b.dt.values()).max_abs());
            diffs.push(b.t.value() - c.t.value());
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / diffs.len() as f64;
        if !(ds < 1e-7 && ddt < 1e-7 && var < 1e-12) {
            return Err(format!("{name}: S {ds:.2e}, dt {ddt:.2e}, variance {var:.2e}"));
        }
        lines.push(format!("{name} S {ds:.1e} dt {ddt:.1e} var {var:.1e}"));
    }
    Ok(lines.join("; "))
}

fn random_tensor(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Tensor<f64> {
    Tensor::covariant(n, rank, |_| rng.gen_range(-1.0..1.0))
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric<f64> {
    let a = random_tensor(rng, n, 2);
    let g = Tensor::covariant(n, 2, |i| {
        let diag = if i[0] == i[1] { n as f64 } else { 0.0 };
        diag + (0..n).map(|k| 0.3 * a.get(&[i[0], k]) * a.get(&[i[1], k])).sum::<f64>()
    });
    Metric::new(&g).expect("positive definite")
}

/// Lift of a curvature-type tensor to the `Sym²⊗Sym²` slot pattern, normalised so that the
/// Weyl projector maps the lift of an algebraic Weyl tensor back to itself.
fn weyl_lift(w: &Tensor<f64>) -> Tensor<f64> {
    Tensor::covariant(w.n(), 4, |i| {
        let (x, y, z, v) = (i[0], i[1], i[2], i[3]);
        (w.get(&[x, z, y, v]) + w.get(&[x, v, y, z])) * (2.0 / 3.0)
    })
}

fn criterion_10_projectors() -> std::result::Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut note = |tag: &str, a: &Tensor<f64>, b: &Tensor<f64>| {
        let r = (a - b).max_abs() / (1.0 + b.max_abs());
        worst = worst.max(r);
        if r < 1e-12 {
            Ok(())
        } else {
            Err(format!("{tag}: {r:.2e}"))
        }
    };
    for k in 0..100 {
        let n = 2 + k % 3;
        let m = random_metric(&mut rng, n);
        for rank in 2..=4 {
            let b = random_tensor(&mut rng, n, rank);
            let s = sym_projector(rank, &b).unwrap();
            note("sym", &sym_projector(rank, &s).unwrap(), &s)?;
            let p = tracefree_sym_projector(rank, &b, &m).unwrap();
            note("tracefree_sym", &tracefree_sym_projector(rank, &p, &m).unwrap(), &p)?;
        }
        let b = random_tensor(&mut rng, n, 4).symmetrize(&[0, 1]).symmetrize(&[2, 3]);
        let once = weyl_lift(&weyl0_projector(&b, &m).unwrap());
        let twice = weyl_lift(&weyl0_projector(&once, &m).unwrap());
        note("weyl0", &twice, &once)?;
        let raw = random_tensor(&mut rng, n, 4).permuted(&[1, 2, 3, 0]);
        let b = tracefree_sym_projector(3, &raw, &m).unwrap().permuted(&[3, 0, 1, 2]);
        let c = codazzi0_unchecked(&b, &m);
        note("codazzi0", &codazzi0_unchecked(&c, &m), &c)?;
    }
    Ok(worst)
}

/// Random explicit hypersurface data with polynomial metric and cubic on `[-1,1]ⁿ`.
fn random_explicit(rng: &mut ChaCha8Rng, n: usize) -> HypersurfaceData {
    let names = ["x", "y", "z"];
    let coords: Vec<String> = names[..n].iter().map(|s| s.to_string()).collect();
    let empty = BTreeMap::new();
    let f = |s: String| ExprField::parse(&s, &coords, &empty).unwrap().arc();
    let poly = |rng: &mut ChaCha8Rng, c0: f64, amp: f64| {
        let mut s = format!("{c0:.6}");
        for x in &coords {
            s += &format!(" + ({:.6})*{x} + ({:.6})*{x}^2", amp * rng.gen_range(-1.0..1.0), amp * rng.gen_range(-1.0..1.0));
        }
        s
    };
    let mut g = Vec::new();
    for i in 0..n {
        for j in i..n {
            g.push(f(if i == j { poly(rng, 3.0, 0.3) } else { poly(rng, 0.0, 0.2) }));
        }
    }
    let sym3 = n * (n + 1) * (n + 2) / 6;
    let c: Vec<Field> = (0..sym3).map(|_| {
            let c0 = rng.gen_range(-1.0..1.0);
            f(poly(rng, c0, 0.5))
        }).collect();
    let a: Vec<Field> = (0..n * (n + 1) / 2).map(|_| f("0".into())).collect();
    let dom = DomainBox::new(vec![-1.0; n], vec![1.0; n]).unwrap();
    let geo = ChartGeometry::new(coords.clone(), dom, g).unwrap();
    HypersurfaceData::explicit(geo, TensorField::symmetric(n, 3, c).unwrap(), TensorField::symmetric(n, 2, a).unwrap())
        .unwrap()
}

fn criterion_10_cubic() -> std::result::Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut split: f64 = 0.0;
    for k in 0..20 {
        let n = 2 + k % 2;
        let hs = random_explicit(&mut rng, n);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect()).collect();
        let rep = hs.verify_cubic_identities(&pts, 1e-10);
        split = split.max(report_ok(&format!("random cubic {k}"), &rep)?);
    }
    let mut div_u: f64 = 0.0;
    let mut derived: f64 = 0.0;
    for name in catalog::list() {
        let d = data(name);
        if d.n() < 3 {
            continue;
        }
        let pts = points(&d, 12);
        let rep = HypersurfaceData::from_abundant_unchecked(&d).verify_cubic_identities(&pts, 1e-8);
        report_ok(name, &rep)?;
        div_u = div_u.max(rep.max("divU.formula"));
        if name.starts_with("harmonic-oscillator") && d.n() >= 3 {
            let rep = d.verify_derived_identities(&pts, 1e-8).map_err(|x| x.to_string())?;
            derived = derived.max(report_ok(name, &rep)?);
        }
    }
    Ok(format!("cubic split {split:.1e}, divU {div_u:.1e}, derived identities {derived:.1e}"))
}

/// Gradient and Hessian of every catalog expression against central differences of the value
/// and of the exact gradient.
fn criterion_10_jets() -> std::result::Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for name in catalog::list() {
        let e = entry(name);
        let d = e.data().map_err(|x| x.to_string())?;
        let pts = d.sample(&SampleSpec::new(vec![], 5, 13));
        let mut exprs: Vec<String> = e.metric.clone();
        exprs.extend(e.s.iter().cloned());
        exprs.push(e.t.clone());
        exprs.extend(e.potential.iter().cloned());
        exprs.extend(e.reference.iter().flatten().cloned());
        let n = e.dimension;
        for src in &exprs {
            let f = ExprField::parse(src, &e.coords, &e.params).map_err(|x| x.to_string())?;
            count += 1;
            for p in &pts {
                let j = f.jet(p, 2).map_err(|x| x.to_string())?;
                for i in 0..n {
                    let h = 1e-5 * (1.0 + p[i].abs());
                    let shifted = |s: f64| {
                        let mut q = p.clone();
                        q[i] += s;
                        f.jet(&q, 1).unwrap()
                    };
                    let (up, dn) = (shifted(h), shifted(-h));
                    let mut rel = |exact: f64, approx: f64| {
                        let r = (exact - approx).abs() / (1.0 + exact.abs());
                        worst = worst.max(r);
                        r
                    };
                    let mut alpha = vec![0; n];
                    alpha[i] = 1;
                    let r1 = rel(j.get(&alpha), (up.value() - dn.value()) / (2.0 * h));
                    let mut r2: f64 = 0.0;
                    for k in 0..n {
                        let mut beta = alpha.clone();
                        beta[k] += 1;
                        r2 = r2.max(rel(j.get(&beta), (up.gradient()[k] - dn.gradient()[k]) / (2.0 * h)));
                    }
                    if !(r1 < 1e-5 && r2 < 1e-5) {
                        return Err(format!("{name}: '{src}' at {p:?}, axis {i}: {r1:.2e} / {r2:.2e}"));
                    }
                }
            }
        }
    }
    Ok(format!("{count} expressions, worst relative {worst:.1e}"))
}

fn criterion_10() -> Outcome {
    let proj = criterion_10_projectors()?;
    let cubic = criterion_10_cubic()?;
    let jets = criterion_10_jets()?;
    Ok(format!("projectors {proj:.1e}; {cubic}; jets: {jets}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("catalog verification", criterion_1),
        ("immersion reproduction", criterion_2),
        ("harmonic oscillator", criterion_3),
        ("s7 Weingarten trace", criterion_4),
        ("trace of A", criterion_5),
        ("integrability suite", criterion_6),
        ("conformal compatibility", criterion_7),
        ("flatness", criterion_8),
        ("round trip", criterion_9),
        ("algebraic engine", criterion_10),
    ];
    let mut failures = 0;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title} ({secs:.1} s): {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {title} ({secs:.1} s): {detail}", k + 1)
            }
        }
    }
    if failures == 0 {
        println!("all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
