//! Coordinate-chart geometry computed from jets.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z`, `Ric(Y,Z) = tr(X ↦ R(X,Y)Z)`
//! and `Riem(X,Y,Z,W) = g(R(X,Y)W, Z)`, so that a round sphere has `Riem = P⧀g`
//! and `Weyl = Riem − P⧀g`. Covariant derivatives put the new slot first.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exprlang::{parse, CompiledExpr, Expr};
use crate::jets::{Jet, MAX_DIM, MAX_ORDER};
use crate::tensor::{kn_unchecked, Metric, Scalar, Slot, Tensor};

/// A scalar function on a chart, evaluated as a jet.
pub trait ScalarField: Send + Sync + Debug {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet>;

    /// Expression text, when the field is an expression.
    fn source(&self) -> Option<String> {
        None
    }
}

pub type Field = Arc<dyn ScalarField>;

/// A field given by an expression in the chart coordinates.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
    compiled: CompiledExpr,
}

impl ExprField {
    pub fn new(expr: Expr, coords: &[String], params: &BTreeMap<String, f64>) -> Result<ExprField> {
        let compiled = expr.compile(coords, params)?;
        Ok(ExprField { expr, compiled })
    }

    /// Parses `src`; identifiers may be coordinates or parameter names.
    pub fn parse(src: &str, coords: &[String], params: &BTreeMap<String, f64>) -> Result<ExprField> {
        let mut declared: Vec<&str> = coords.iter().map(String::as_str).collect();
        declared.extend(params.keys().map(String::as_str));
        let expr = parse(src, &declared)?;
        ExprField::new(expr, coords, params)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn arc(self) -> Field {
        Arc::new(self)
    }
}

impl ScalarField for ExprField {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        Ok(self.compiled.eval_jet(p, order)?)
    }

    fn source(&self) -> Option<String> {
        Some(self.expr.to_string())
    }
}

/// A constant field.
#[derive(Debug, Clone, Copy)]
pub struct ConstField(pub f64);

impl ScalarField for ConstField {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        Ok(Jet::constant(self.0, p.len(), order))
    }

    fn source(&self) -> Option<String> {
        Some(Expr::num(self.0).to_string())
    }
}

pub fn constant_field(v: f64) -> Field {
    Arc::new(ConstField(v))
}

/// Pointwise jet function of other fields, e.g. `Ω²·g_ij`.
#[derive(Clone)]
pub struct MapField {
    args: Vec<Field>,
    f: Arc<dyn Fn(&[Jet]) -> Result<Jet> + Send + Sync>,
    label: String,
}

impl MapField {
    pub fn new(
        label: impl Into<String>,
        args: Vec<Field>,
        f: impl Fn(&[Jet]) -> Result<Jet> + Send + Sync + 'static,
    ) -> MapField {
        MapField { args, f: Arc::new(f), label: label.into() }
    }

    pub fn arc(self) -> Field {
        Arc::new(self)
    }
}

impl Debug for MapField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapField").field("label", &self.label).field("args", &self.args).finish()
    }
}

impl ScalarField for MapField {
    fn jet(&self, p: &[f64], order: usize) -> Result<Jet> {
        let vals = self.args.iter().map(|a| a.jet(p, order)).collect::<Result<Vec<_>>>()?;
        (self.f)(&vals)
    }
}

/// Sorted multi-indices `i_1 ≤ … ≤ i_r` in lexicographic order: the storage
/// order of independent components of a symmetric tensor.
pub fn sym_indices(n: usize, rank: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, rank: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == rank {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(n, rank, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, rank, 0, &mut Vec::new(), &mut out);
    out
}

/// Number of independent components of a symmetric rank-`rank` tensor.
pub fn sym_count(n: usize, rank: usize) -> usize {
    sym_indices(n, rank).len()
}

/// A covariant tensor field given by component fields.
#[derive(Debug, Clone)]
pub struct TensorField {
    n: usize,
    rank: usize,
    symmetric: bool,
    comps: Vec<Field>,
}

impl TensorField {
    /// Totally symmetric field from its independent components in [`sym_indices`] order.
    pub fn symmetric(n: usize, rank: usize, comps: Vec<Field>) -> Result<TensorField> {
        let need = sym_count(n, rank);
        if comps.len() != need {
            return Err(Error::Dimension(format!(
                "symmetric rank-{rank} field in dimension {n} needs {need} components, got {}",
                comps.len()
            )));
        }
        Ok(TensorField { n, rank, symmetric: true, comps })
    }

    /// Field with all `n^rank` components in row-major order.
    pub fn full(n: usize, rank: usize, comps: Vec<Field>) -> Result<TensorField> {
        let need = n.pow(rank as u32);
        if comps.len() != need {
            return Err(Error::Dimension(format!("rank-{rank} field in dimension {n} needs {need} components, got {}", comps.len())));
        }
        Ok(TensorField { n, rank, symmetric: false, comps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    /// Component jets assembled into a covariant tensor.
    pub fn jets(&self, p: &[f64], order: usize) -> Result<Tensor<Jet>> {
        let vals: Vec<Jet> = self.comps.iter().map(|c| c.jet(p, order)).collect::<Result<_>>()?;
        if !self.symmetric {
            return Ok(Tensor::from_data(self.n, &vec![Slot::Co; self.rank], vals)?);
        }
        let index: BTreeMap<Vec<usize>, usize> =
            sym_indices(self.n, self.rank).into_iter().enumerate().map(|(k, v)| (v, k)).collect();
        let mut key = Vec::with_capacity(self.rank);
        Ok(Tensor::covariant(self.n, self.rank, |idx| {
            key.clear();
            key.extend_from_slice(idx);
            key.sort_unstable();
            vals[index[&key]]
        }))
    }
}

/// Axis-aligned coordinate box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<DomainBox> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("domain bounds must have equal, positive length".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid(format!("empty or unbounded domain box {lo:?}..{hi:?}")));
        }
        Ok(DomainBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| {
                let slack = 1e-12 * (1.0 + a.abs().max(b.abs()));
                *x >= a - slack && *x <= b + slack
            })
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }
}

/// Curvature quantities at a point. Schouten and Weyl are absent for `n = 2`.
#[derive(Debug, Clone)]
pub struct CurvatureStack {
    pub riem: Tensor<f64>,
    pub ric: Tensor<f64>,
    pub scal: f64,
    pub schouten: Option<Tensor<f64>>,
    pub weyl: Option<Tensor<f64>>,
}

/// Which connection a covariant derivative uses.
#[derive(Debug, Clone)]
pub enum Connection {
    LeviCivita,
    /// `∇ = ∇^g + D` for a (1,2) tensor `D` with slots (Contra, Co, Co).
    WithDifference(Tensor<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffOp {
    Gradient,
    HessianScalar,
    Divergence,
    Laplacian,
}

/// A coordinate chart with a metric given by expressions.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    coords: Vec<String>,
    domain: DomainBox,
    metric: TensorField,
}

impl ChartGeometry {
    /// `metric` holds the `n(n+1)/2` upper-triangular components `g_00, g_01, …, g_11, …`.
    pub fn new(coords: Vec<String>, domain: DomainBox, metric: Vec<Field>) -> Result<ChartGeometry> {
        let n = coords.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::Dimension(format!("dimension {n} outside 2..={MAX_DIM}")));
        }
        if domain.dim() != n {
            return Err(Error::Dimension(format!("domain box has dimension {}, chart has {n}", domain.dim())));
        }
        let metric = TensorField::symmetric(n, 2, metric)?;
        Ok(ChartGeometry { coords, domain, metric })
    }

    /// Parses metric component expressions.
    pub fn from_exprs(
        coords: &[&str],
        domain: DomainBox,
        metric: &[&str],
        params: &BTreeMap<String, f64>,
    ) -> Result<ChartGeometry> {
        let coords: Vec<String> = coords.iter().map(|s| s.to_string()).collect();
        let comps =
            metric.iter().map(|s| ExprField::parse(s, &coords, params).map(ExprField::arc)).collect::<Result<Vec<_>>>()?;
        ChartGeometry::new(coords, domain, comps)
    }

    /// Flat metric `δ` on the given box.
    pub fn euclidean(coords: &[&str], domain: DomainBox) -> Result<ChartGeometry> {
        let n = coords.len();
        let comps = sym_indices(n, 2).iter().map(|ij| constant_field(if ij[0] == ij[1] { 1.0 } else { 0.0 })).collect();
        ChartGeometry::new(coords.iter().map(|s| s.to_string()).collect(), domain, comps)
    }

    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn metric_field(&self) -> &TensorField {
        &self.metric
    }

    pub fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.n() {
            return Err(Error::Dimension(format!("point has {} coordinates, chart has {}", p.len(), self.n())));
        }
        if !self.domain.contains(p) {
            return Err(Error::OutOfDomain(p.to_vec()));
        }
        Ok(())
    }

    /// Metric jets of the given order; rejects degenerate metrics.
    pub fn metric_jets(&self, p: &[f64], order: usize) -> Result<Metric<Jet>> {
        self.check_point(p)?;
        check_order(order)?;
        Ok(Metric::new(&self.metric.jets(p, order)?)?)
    }

    pub fn christoffels(&self, p: &[f64]) -> Result<Tensor<f64>> {
        Ok(christoffel(&self.metric_jets(p, 1)?).values())
    }

    pub fn curvature_stack(&self, p: &[f64]) -> Result<CurvatureStack> {
        let m = self.metric_jets(p, 2)?;
        Ok(curvature(&m, &christoffel(&m)).values())
    }

    pub fn covariant_derivative(&self, field: &TensorField, p: &[f64], conn: &Connection) -> Result<Tensor<f64>> {
        if field.n() != self.n() {
            return Err(Error::Dimension("field and chart dimensions differ".into()));
        }
        let m = self.metric_jets(p, 1)?;
        let mut gamma = christoffel(&m);
        if let Connection::WithDifference(d) = conn {
            if d.slots() != [Slot::Contra, Slot::Co, Slot::Co] || d.n() != self.n() {
                return Err(Error::Dimension("difference tensor must be a (1,2) tensor with slots (Contra, Co, Co)".into()));
            }
            gamma = &gamma + &d.map(|v| Jet::constant(v, self.n(), 0));
        }
        let t = field.jets(p, 1)?;
        Ok(covariant_derivative(&t, &gamma)?.values())
    }

    pub fn differential_op(&self, kind: DiffOp, field: &TensorField, p: &[f64]) -> Result<Tensor<f64>> {
        if field.n() != self.n() {
            return Err(Error::Dimension("field and chart dimensions differ".into()));
        }
        let scalar = |f: &TensorField| -> Result<Field> {
            if f.rank() != 0 {
                return Err(Error::Dimension(format!("{kind:?} needs a scalar field")));
            }
            Ok(f.components()[0].clone())
        };
        match kind {
            DiffOp::Gradient => {
                let m = self.metric_jets(p, 0)?;
                let f = scalar(field)?.jet(p, 1)?;
                Ok(gradient_vector(&f, &m).values())
            }
            DiffOp::HessianScalar | DiffOp::Laplacian => {
                let m = self.metric_jets(p, 1)?;
                let f = scalar(field)?.jet(p, 2)?;
                let h = hessian(&f, &christoffel(&m))?;
                if kind == DiffOp::HessianScalar {
                    Ok(h.values())
                } else {
                    Ok(h.trace(0, 1, &m).values())
                }
            }
            DiffOp::Divergence => {
                if field.rank() == 0 {
                    return Err(Error::Dimension("divergence needs rank ≥ 1".into()));
                }
                let m = self.metric_jets(p, 1)?;
                let t = field.jets(p, 1)?;
                Ok(divergence(&t, &m, &christoffel(&m))?.values())
            }
        }
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Precondition(format!("jet order {order} exceeds {MAX_ORDER}")));
    }
    Ok(())
}

fn require_order(t: &Tensor<Jet>, what: &str) -> Result<()> {
    if t.data().iter().any(|j| j.order() == 0) {
        return Err(Error::Precondition(format!("{what}: jet order exhausted")));
    }
    Ok(())
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_lj + ∂_j g_li − ∂_l g_ij)`, slots (Contra, Co, Co).
pub fn christoffel(m: &Metric<Jet>) -> Tensor<Jet> {
    let n = m.n();
    let dg: Vec<Vec<Jet>> = (0..n).map(|l| m.g.data().iter().map(|v| v.derivative(l)).collect()).collect();
    let first = Tensor::covariant(n, 3, |i| {
        let (l, a, b) = (i[0], i[1], i[2]);
        (dg[a][l * n + b] + dg[b][l * n + a] - dg[l][a * n + b]) * 0.5
    });
    m.inv.contract(1, &first, 0)
}

/// Covariant derivative of `t` for the torsion-free connection with Christoffels `gamma`;
/// the derivative slot comes first.
pub fn covariant_derivative(t: &Tensor<Jet>, gamma: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    require_order(t, "covariant derivative")?;
    let n = t.n();
    let r = t.rank();
    let mut slots = vec![Slot::Co];
    slots.extend_from_slice(t.slots());
    let tslots = t.slots().to_vec();
    let mut src = vec![0usize; r];
    Ok(Tensor::from_fn(n, &slots, |idx| {
        let a = idx[0];
        let body = &idx[1..];
        let mut acc = t.get(body).derivative(a);
        for s in 0..r {
            src.copy_from_slice(body);
            for m in 0..n {
                src[s] = m;
                let v = t.get(&src);
                acc = match tslots[s] {
                    Slot::Co => acc - gamma.get(&[m, a, body[s]]) * v,
                    Slot::Contra => acc + gamma.get(&[body[s], a, m]) * v,
                };
            }
        }
        acc
    }))
}

/// `R(∂_i,∂_j)∂_k = Rm[i,j,k,l] ∂_l`, slots (Co, Co, Co, Contra).
pub fn curvature_endo(gamma: &Tensor<Jet>) -> Tensor<Jet> {
    let n = gamma.n();
    Tensor::from_fn(n, &[Slot::Co, Slot::Co, Slot::Co, Slot::Contra], |idx| {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = gamma.get(&[l, j, k]).derivative(i) - gamma.get(&[l, i, k]).derivative(j);
        for m in 0..n {
            acc = acc + gamma.get(&[l, i, m]) * gamma.get(&[m, j, k]) - gamma.get(&[l, j, m]) * gamma.get(&[m, i, k]);
        }
        acc
    })
}

/// `Ric(Y,Z) = tr(X ↦ R(X,Y)Z)`.
pub fn ricci_from_endo(rm: &Tensor<Jet>) -> Tensor<Jet> {
    let n = rm.n();
    Tensor::covariant(n, 2, |idx| {
        let mut acc = rm.get(&[0, idx[0], idx[1], 0]);
        for a in 1..n {
            acc = acc + rm.get(&[a, idx[0], idx[1], a]);
        }
        acc
    })
}

/// `Riem(X,Y,Z,W) = g(R(X,Y)W, Z)`.
pub fn riemann_lowered(rm: &Tensor<Jet>, m: &Metric<Jet>) -> Tensor<Jet> {
    let n = rm.n();
    Tensor::covariant(n, 4, |idx| {
        let (x, y, z, w) = (idx[0], idx[1], idx[2], idx[3]);
        let mut acc = rm.get(&[x, y, w, 0]) * m.g.get(&[0, z]);
        for l in 1..n {
            acc = acc + rm.get(&[x, y, w, l]) * m.g.get(&[l, z]);
        }
        acc
    })
}

/// `P = (Ric − Scal/(2(n−1)) g)/(n−2)`; requires `n ≥ 3`.
pub fn schouten(ric: &Tensor<Jet>, scal: Jet, m: &Metric<Jet>) -> Tensor<Jet> {
    let n = ric.n() as f64;
    (ric - &m.g.scale_by(scal * (1.0 / (2.0 * (n - 1.0))))).scale(1.0 / (n - 2.0))
}

/// Curvature of a torsion-free connection together with the metric quantities.
#[derive(Debug, Clone)]
pub struct JetCurvature {
    pub riem: Tensor<Jet>,
    pub ric: Tensor<Jet>,
    pub scal: Jet,
    pub schouten: Option<Tensor<Jet>>,
    pub weyl: Option<Tensor<Jet>>,
}

impl JetCurvature {
    pub fn values(&self) -> CurvatureStack {
        CurvatureStack {
            riem: self.riem.values(),
            ric: self.ric.values(),
            scal: self.scal.value(),
            schouten: self.schouten.as_ref().map(Tensor::values),
            weyl: self.weyl.as_ref().map(Tensor::values),
        }
    }
}

pub fn curvature(m: &Metric<Jet>, gamma: &Tensor<Jet>) -> JetCurvature {
    let rm = curvature_endo(gamma);
    let ric = ricci_from_endo(&rm);
    let riem = riemann_lowered(&rm, m);
    let scal = ric.trace(0, 1, m).data()[0];
    let (schouten, weyl) = if m.n() >= 3 {
        let p = schouten(&ric, scal, m);
        let w = &riem - &kn_unchecked(&p, &m.g);
        (Some(p), Some(w))
    } else {
        (None, None)
    };
    JetCurvature { riem, ric, scal, schouten, weyl }
}

/// `df` as a covector.
pub fn differential(f: &Jet) -> Tensor<Jet> {
    let n = f.n();
    Tensor::from_fn(n, &[Slot::Co], |i| f.derivative(i[0]))
}

/// `grad f = g^{-1} df`.
pub fn gradient_vector(f: &Jet, m: &Metric<Jet>) -> Tensor<Jet> {
    differential(f).raise(0, m)
}

/// `∇²f(X,Y) = (∇_X df)(Y)`.
pub fn hessian(f: &Jet, gamma: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    if f.order() < 2 {
        return Err(Error::Precondition("hessian needs a jet of order ≥ 2".into()));
    }
    covariant_derivative(&differential(f), gamma)
}

/// Contracts the derivative slot of `∇t` with the first slot of `t`.
pub fn divergence(t: &Tensor<Jet>, m: &Metric<Jet>, gamma: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    Ok(covariant_derivative(t, gamma)?.trace(0, 1, m))
}

/// Raises the last slot of a covariant (0,3) tensor to give the endomorphism-valued form `Ŝ(X,Y)`:
/// slots (Contra, Co, Co) with the contravariant index first.
pub fn hat3<S: Scalar>(s: &Tensor<S>, m: &Metric<S>) -> Tensor<S> {
    s.raise(2, m).permuted(&[2, 0, 1])
}

/// Sampling plan: a tensor grid plus seeded uniform random points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub grid: Vec<usize>,
    pub random: usize,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(grid: Vec<usize>, random: usize, seed: u64) -> SampleSpec {
        SampleSpec { grid, random, seed }
    }
}

/// Sampled points and the number of candidate points that had to be dropped.
#[derive(Debug, Clone, Default)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub rejected: usize,
}

/// Maximum number of redraws for a rejected random point.
pub const MAX_RETRIES: usize = 100;

/// Grid nodes with endpoints included (a single node sits at the midpoint).
pub fn grid_points(domain: &DomainBox, grid: &[usize]) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let counts: Vec<usize> = (0..n).map(|i| grid.get(i).or(grid.last()).copied().unwrap_or(0)).collect();
    if counts.iter().any(|&c| c == 0) {
        return Vec::new();
    }
    let axis = |i: usize, k: usize| {
        let (a, b) = (domain.lo[i], domain.hi[i]);
        if counts[i] == 1 {
            0.5 * (a + b)
        } else {
            a + (b - a) * k as f64 / (counts[i] - 1) as f64
        }
    };
    let total: usize = counts.iter().product();
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; n];
            for i in (0..n).rev() {
                p[i] = axis(i, flat % counts[i]);
                flat /= counts[i];
            }
            p
        })
        .collect()
}

/// Grid nodes plus seeded random points. Points failing `accept` are dropped
/// (grid) or redrawn up to [`MAX_RETRIES`] times (random).
pub fn sample_points(domain: &DomainBox, spec: &SampleSpec, accept: impl Fn(&[f64]) -> bool) -> SampleSet {
    let mut set = SampleSet::default();
    for p in grid_points(domain, &spec.grid) {
        if accept(&p) {
            set.points.push(p);
        } else {
            set.rejected += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random {
        let mut found = false;
        for _ in 0..=MAX_RETRIES {
            let p: Vec<f64> = domain.lo.iter().zip(&domain.hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
            if accept(&p) {
                set.points.push(p);
                found = true;
                break;
            }
        }
        if !found {
            set.rejected += 1;
        }
    }
    set
}

impl ChartGeometry {
    /// Samples points at which the metric evaluates and is non-degenerate.
    pub fn sample(&self, spec: &SampleSpec) -> SampleSet {
        sample_points(&self.domain, spec, |p| self.metric_jets(p, 0).is_ok())
    }
}
