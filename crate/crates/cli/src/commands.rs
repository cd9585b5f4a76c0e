use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use abundant_core::abundant::DEFAULT_ORDER;
use abundant_core::catalog;
use abundant_core::classify::{classify_all, graph_conditions_from_abundant, Verdict};
use abundant_core::conformal::{
    random_conformal_factor, verify_compatibility, verify_condition_invariance, verify_split_transformation,
};
use abundant_core::geometry::SampleSpec;
use abundant_core::hypersurface::HypersurfaceData;
use abundant_core::jets::MAX_ORDER;
use abundant_core::reconstruct::{
    affine_fit, export_obj, holonomy_residual, immerse_grid, quadric_fit, unit_square_loop, DEFAULT_STEP,
};
use abundant_core::runspec::RunSpec;
use abundant_core::{AbundantData, Tensor};

use crate::report::{Report, Settings};
use crate::{ConformalArgs, RunArgs};

/// RMS limit for the affine fit against a reference immersion.
pub const FIT_TOL: f64 = 1e-4;
const DEFAULT_TOL: f64 = 1e-8;
const DEFAULT_RANDOM: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Run(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

struct Loaded {
    spec: RunSpec,
    data: AbundantData,
}

impl Loaded {
    fn name(&self) -> Option<String> {
        self.spec.name.clone()
    }
}

fn load(src: &str) -> Result<Loaded, CliError> {
    let spec = match src.strip_prefix("catalog:") {
        Some(name) => catalog::get(name).map_err(|e| CliError::Parse(e.to_string()))?.to_run_spec(),
        None => {
            let path = Path::new(src);
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            toml::from_str(&text).map_err(|e| CliError::Parse(format!("{src}: {e}")))?
        }
    };
    let data = spec.to_abundant().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(Loaded { spec, data })
}

fn parse_grid(s: &str, n: usize) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Parse(format!("--grid expects counts like 10x10, got '{s}'"));
    let counts: Vec<usize> = s.split(['x', 'X']).map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    match counts.len() {
        1 => Ok(vec![counts[0]; n]),
        k if k == n => Ok(counts),
        _ => Err(CliError::Parse(format!("--grid has {} counts for dimension {n}", counts.len()))),
    }
}

struct Resolved {
    settings: Settings,
    out: Option<PathBuf>,
}

/// Flags override the spec file's `[run]` table, which overrides the command defaults.
fn resolve(a: &RunArgs, spec: &RunSpec, n: usize, default_side: usize, step: Option<f64>) -> Result<Resolved, CliError> {
    let run = &spec.run;
    let grid = match (&a.grid, &run.grid) {
        (Some(g), _) => parse_grid(g, n)?,
        (None, Some(g)) if g.len() == n => g.clone(),
        (None, Some(g)) => return Err(CliError::Parse(format!("[run] grid has {} counts for dimension {n}", g.len()))),
        (None, None) => vec![default_side; n],
    };
    let tol = a.tol.or(run.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Parse(format!("tolerance must be positive, got {tol}")));
    }
    let order = a.order.or(run.order).unwrap_or(MAX_ORDER);
    if order < DEFAULT_ORDER {
        return Err(CliError::Parse(format!("this command needs jets of order {DEFAULT_ORDER}, but the cap is {order}")));
    }
    let step = step.map(|d| a.step.or(run.step).unwrap_or(d));
    if let Some(h) = step {
        if !(h > 0.0) {
            return Err(CliError::Parse(format!("step must be positive, got {h}")));
        }
    }
    let settings = Settings {
        tol,
        grid,
        random: a.random.or(run.random).unwrap_or(DEFAULT_RANDOM),
        seed: a.seed.or(run.seed).unwrap_or(0),
        step,
        order,
        force: a.force,
    };
    Ok(Resolved { settings, out: a.out.clone().or_else(|| run.out.clone().map(PathBuf::from)) })
}

fn sample_side(n: usize) -> usize {
    match n {
        2 => 10,
        3 => 4,
        _ => 3,
    }
}

fn points(data: &AbundantData, s: &Settings) -> Vec<Vec<f64>> {
    data.sample(&SampleSpec::new(s.grid.clone(), s.random, s.seed))
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn emit(report: &Report, out: Option<&Path>) -> Result<bool, CliError> {
    let json = report.to_json();
    print!("{json}");
    if let Some(dir) = out {
        write_file(dir, "report.json", &json)?;
    }
    eprint!("{}", report.summary());
    Ok(report.passed)
}

/// Builds the hypersurface, recording the precondition failure in the report instead of aborting.
fn build_hs(l: &Loaded, pts: &[Vec<f64>], s: &Settings, report: &mut Report) -> Option<HypersurfaceData> {
    match HypersurfaceData::build_from_abundant(&l.data, pts, s.tol, s.force) {
        Ok(hs) => Some(hs),
        Err(e) => {
            report.fail(format!("build: {e}"));
            None
        }
    }
}

pub fn verify(a: &RunArgs) -> Result<bool, CliError> {
    let l = load(&a.spec)?;
    let n = l.data.n();
    let r = resolve(a, &l.spec, n, sample_side(n), None)?;
    let pts = points(&l.data, &r.settings);
    let mut report = Report::new("verify", l.name(), n, r.settings.clone());
    report.section("conditions", l.data.verify_conditions(&pts, r.settings.tol));
    report.section("invariants", l.data.check_invariants(&pts, r.settings.tol));
    emit(&report, r.out.as_deref())
}

#[derive(Serialize)]
struct PointDump {
    point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u_tracefree: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    u: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn flat(t: &Tensor<f64>) -> Option<Vec<f64>> {
    Some(t.data().to_vec())
}

pub fn build(a: &RunArgs) -> Result<bool, CliError> {
    let l = load(&a.spec)?;
    let n = l.data.n();
    let r = resolve(a, &l.spec, n, sample_side(n), None)?;
    let s = &r.settings;
    let pts = points(&l.data, s);
    let mut report = Report::new("build", l.name(), n, s.clone());
    if !s.force {
        report.section("conditions", l.data.verify_conditions(&pts, s.tol));
    }
    if report.passed {
        let hs = HypersurfaceData::from_abundant_unchecked(&l.data);
        let dump: Vec<PointDump> = pts
            .iter()
            .map(|p| match hs.values(p) {
                Ok(v) => PointDump {
                    point: p.clone(),
                    g: flat(&v.g),
                    c: flat(&v.c),
                    u_tracefree: flat(&v.uu),
                    u: flat(&v.u),
                    a: flat(&v.a),
                    error: None,
                },
                Err(e) => PointDump {
                    point: p.clone(),
                    g: None,
                    c: None,
                    u_tracefree: None,
                    u: None,
                    a: None,
                    error: Some(e.to_string()),
                },
            })
            .collect();
        report.data = json!({ "layout": "row-major, last index fastest", "points": dump });
    }
    emit(&report, r.out.as_deref())
}

pub fn integrability(a: &RunArgs) -> Result<bool, CliError> {
    let l = load(&a.spec)?;
    let n = l.data.n();
    let r = resolve(a, &l.spec, n, sample_side(n), None)?;
    let s = &r.settings;
    let pts = points(&l.data, s);
    let mut report = Report::new("integrability", l.name(), n, s.clone());
    if let Some(hs) = build_hs(&l, &pts, s, &mut report) {
        report.section("integrability", hs.verify_integrability(&pts, s.tol));
        report.section("abundant_conditions", hs.verify_abundant_conditions(&pts, s.tol));
        report.section("cubic_identities", hs.verify_cubic_identities(&pts, s.tol));
    }
    emit(&report, r.out.as_deref())
}

fn mesh_side(n: usize) -> usize {
    match n {
        2 => 20,
        3 => 6,
        _ => 4,
    }
}

pub fn reconstruct(a: &RunArgs) -> Result<bool, CliError> {
    let l = load(&a.spec)?;
    let n = l.data.n();
    let r = resolve(a, &l.spec, n, mesh_side(n), Some(DEFAULT_STEP))?;
    let s = &r.settings;
    let step = s.step.expect("reconstruct has a step");
    let pts = points(&l.data, &Settings { grid: vec![sample_side(n); n], ..s.clone() });
    let mut report = Report::new("reconstruct", l.name(), n, s.clone());
    let Some(hs) = build_hs(&l, &pts, s, &mut report) else {
        return emit(&report, r.out.as_deref());
    };
    let domain = l.data.geometry().domain().clone();
    let grid = immerse_grid(&hs, &domain, &s.grid, step).map_err(|e| CliError::Run(e.to_string()))?;
    let rec: Vec<Vec<f64>> = grid.samples.iter().map(|x| x.f.clone()).collect();
    let quadric = quadric_fit(&rec).ok();
    let holonomy = holonomy_residual(&hs, &unit_square_loop(&domain), step).map_err(|e| CliError::Run(e.to_string()))?;

    let mut affine = None;
    if let Some(refs) = &l.spec.reference {
        let fields = refs.iter().map(|e| l.spec.field(e)).collect::<Result<Vec<_>, _>>();
        let fields = fields.map_err(|e| CliError::Parse(format!("reference: {e}")))?;
        let target: Result<Vec<Vec<f64>>, _> =
            grid.samples.iter().map(|x| fields.iter().map(|f| f.jet(&x.p, 0).map(|j| j.value())).collect()).collect();
        match target.and_then(|t| affine_fit(&rec, &t)) {
            Ok(fit) => {
                if !(fit.rms < FIT_TOL) {
                    report.fail(format!("affine_fit: rms {:.3e} > {FIT_TOL:.0e}", fit.rms));
                }
                affine = Some(fit);
            }
            Err(e) => report.fail(format!("affine_fit: {e}")),
        }
    }

    let mut obj = None;
    if n == 2 {
        let dir = r.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let name = format!("{}.obj", l.name().unwrap_or_else(|| "mesh".into()));
        let text = export_obj(&grid).map_err(|e| CliError::Run(e.to_string()))?;
        obj = Some(write_file(&dir, &name, &text)?.display().to_string());
    }
    report.data = json!({
        "obj": obj,
        "holonomy": holonomy,
        "quadric_fit": quadric,
        "affine_fit": affine,
        "fit_tolerance": FIT_TOL,
        "samples": grid.samples,
    });
    emit(&report, r.out.as_deref())
}

pub fn classify(a: &RunArgs) -> Result<bool, CliError> {
    let l = load(&a.spec)?;
    let n = l.data.n();
    let r = resolve(a, &l.spec, n, sample_side(n), None)?;
    let s = &r.settings;
    let pts = points(&l.data, s);
    let mut report = Report::new("classify", l.name(), n, s.clone());
    let Some(hs) = build_hs(&l, &pts, s, &mut report) else {
        return emit(&report, r.out.as_deref());
    };
    let c = classify_all(&hs, &pts, s.tol).map_err(|e| CliError::Run(e.to_string()))?;
    let verdicts = [
        ("blaschke", c.blaschke.verdict),
        ("quadric_type", c.quadric_type.verdict),
        ("relative_sphere", c.relative_sphere.verdict),
        ("relative_sphere_dual", c.relative_sphere_dual.verdict),
        ("improper_sphere", c.improper_sphere.verdict),
        ("graph", c.graph.verdict),
    ];
    for (name, v) in verdicts {
        if v == Verdict::Inconclusive {
            report.fail(format!("classification/{name} inconclusive"));
        }
    }
    if c.failed_points > 0 {
        report.fail(format!("classification/<{} points failed>", c.failed_points));
    }
    let graph = graph_conditions_from_abundant(&l.data, &pts, s.tol);
    report.data = json!({ "classification": c, "graph_conditions": graph });
    emit(&report, r.out.as_deref())
}

pub fn conformal(a: &ConformalArgs) -> Result<bool, CliError> {
    let l = load(&a.run.spec)?;
    let n = l.data.n();
    let r = resolve(&a.run, &l.spec, n, sample_side(n), None)?;
    let s = &r.settings;
    let src = match (&a.omega, &l.spec.omega) {
        (Some(o), _) | (None, Some(o)) => o.clone(),
        (None, None) => random_conformal_factor(&l.spec.coords, s.seed),
    };
    let omega = l.spec.field(&src).map_err(|e| CliError::Parse(format!("omega: {e}")))?;
    let pts = points(&l.data, s);
    let mut report = Report::new("conformal", l.name(), n, s.clone());
    let Some(hs) = build_hs(&l, &pts, s, &mut report) else {
        return emit(&report, r.out.as_deref());
    };
    let run = |e: abundant_core::Error| CliError::Run(e.to_string());
    report.section("compatibility", verify_compatibility(&l.data, &omega, &pts, s.tol).map_err(run)?);
    report.section("split", verify_split_transformation(&hs, &omega, &pts, s.tol).map_err(run)?);
    report.section("invariance", verify_condition_invariance(&hs, &omega, &pts, s.tol).map_err(run)?);
    report.data = json!({ "omega": src });
    emit(&report, r.out.as_deref())
}

pub fn catalog_list() -> Result<bool, CliError> {
    for name in catalog::list() {
        println!("{name}");
    }
    Ok(true)
}

pub fn catalog_get(name: &str) -> Result<bool, CliError> {
    let e = catalog::get(name).map_err(|e| CliError::Parse(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&e).expect("entry serializes"));
    Ok(true)
}

pub fn catalog_export(name: &str, out: Option<&Path>) -> Result<bool, CliError> {
    let e = catalog::get(name).map_err(|e| CliError::Parse(e.to_string()))?;
    let text = toml::to_string(&e.to_run_spec()).map_err(|e| CliError::Run(e.to_string()))?;
    match out {
        Some(dir) => {
            let path = write_file(dir, &format!("{}.toml", e.name), &text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(true)
}
