//! Realising hypersurface data as an immersion `f: M → ℝ^{n+1}` with transversal field `ξ`.
//!
//! The frame `W` holds, column by column, the ambient coordinates of `∂₁, …, ∂ₙ, ξ`.
//! Along a path `γ` it solves `W′ = W·ω(γ′)` and `f′ = W·(γ′, 0)` with classical RK4,
//! starting from `W = I`, `f = 0` at the base point.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{grid_points, DomainBox};
use crate::hypersurface::HypersurfaceData;

/// Default RK4 step in chart units.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Smallest admissible `|det W|` along a path.
pub const DET_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameState {
    pub p: Vec<f64>,
    pub w: DMatrix<f64>,
    pub f: DVector<f64>,
}

impl FrameState {
    pub fn identity(p: &[f64]) -> FrameState {
        let m = p.len() + 1;
        FrameState { p: p.to_vec(), w: DMatrix::identity(m, m), f: DVector::zeros(m) }
    }

    /// `ξ`, the last column of the frame.
    pub fn xi(&self) -> DVector<f64> {
        self.w.column(self.w.ncols() - 1).into_owned()
    }
}

/// The matrices `ω_i` with `ω(v) = Σ vⁱ ω_i`: `ω^k_j = Γ̃^k_ij`, `ω^{n+1}_j = G_ij`,
/// `ω^k_{n+1} = −Â^k_i`, `ω^{n+1}_{n+1} = 0`, where `Γ̃` are the Christoffels of `∇ = ∇^G + Ĉ`.
pub fn connection_matrices(hs: &HypersurfaceData, p: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    hs.geometry().check_point(p)?;
    let n = hs.n();
    let j = hs.jets(p, 0)?;
    let gamma = j.gamma.values();
    let ch = crate::geometry::hat3(&j.c, &j.metric).values();
    let g = j.metric.g.values();
    let a_hat = j.metric.inv.contract(1, &j.a, 0).values();
    Ok((0..n)
        .map(|i| {
            let mut w = DMatrix::zeros(n + 1, n + 1);
            for k in 0..n {
                for jj in 0..n {
                    w[(k, jj)] = gamma.get(&[k, i, jj]) + ch.get(&[k, i, jj]);
                }
                w[(k, n)] = -a_hat.get(&[k, i]);
            }
            for jj in 0..n {
                w[(n, jj)] = g.get(&[i, jj]);
            }
            w
        })
        .collect())
}

/// `ω^·_·` for a single coordinate direction.
pub fn connection_matrix(hs: &HypersurfaceData, p: &[f64], direction: usize) -> Result<DMatrix<f64>> {
    if direction >= hs.n() {
        return Err(Error::Dimension(format!("direction {direction} out of range")));
    }
    Ok(connection_matrices(hs, p)?.swap_remove(direction))
}

fn omega_along(hs: &HypersurfaceData, q: &[f64], d: &[f64]) -> Result<DMatrix<f64>> {
    let mats = connection_matrices(hs, q)?;
    let m = hs.n() + 1;
    Ok(mats.iter().zip(d).fold(DMatrix::zeros(m, m), |acc, (w, di)| acc + w * *di))
}

fn check_det(w: &DMatrix<f64>, p: &[f64]) -> Result<()> {
    let det = w.determinant();
    if !(det.abs() > DET_THRESHOLD) {
        return Err(Error::Numerical(format!("frame degenerates at {p:?}: det W = {det:.3e}")));
    }
    Ok(())
}

/// Integrates the straight segment from `state.p` to `b` with exactly `steps` RK4 steps.
pub fn integrate_segment_steps(hs: &HypersurfaceData, state: &FrameState, b: &[f64], steps: usize) -> Result<FrameState> {
    let n = hs.n();
    if b.len() != n {
        return Err(Error::Dimension("endpoint dimension mismatch".into()));
    }
    hs.geometry().check_point(b)?;
    let a = state.p.clone();
    let d: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
    if d.iter().all(|x| *x == 0.0) || steps == 0 {
        return Ok(FrameState { p: b.to_vec(), ..state.clone() });
    }
    let mut dv = DVector::zeros(n + 1);
    for i in 0..n {
        dv[i] = d[i];
    }
    let h = 1.0 / steps as f64;
    let at = |s: f64| -> Vec<f64> { a.iter().zip(&d).map(|(x, di)| x + s * di).collect() };
    let (mut w, mut f) = (state.w.clone(), state.f.clone());
    let mut om0 = omega_along(hs, &a, &d)?;
    for k in 0..steps {
        let s0 = k as f64 * h;
        let s1 = if k + 1 == steps { 1.0 } else { (k + 1) as f64 * h };
        let om_mid = omega_along(hs, &at(0.5 * (s0 + s1)), &d)?;
        let om1 = omega_along(hs, &at(s1), &d)?;
        let k1w = &w * &om0;
        let k1f = &w * &dv;
        let w2 = &w + &k1w * (0.5 * h);
        let k2w = &w2 * &om_mid;
        let k2f = &w2 * &dv;
        let w3 = &w + &k2w * (0.5 * h);
        let k3w = &w3 * &om_mid;
        let k3f = &w3 * &dv;
        let w4 = &w + &k3w * h;
        let k4w = &w4 * &om1;
        let k4f = &w4 * &dv;
        w += (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0);
        f += (k1f + k2f * 2.0 + k3f * 2.0 + k4f) * (h / 6.0);
        check_det(&w, &at(s1))?;
        om0 = om1;
    }
    Ok(FrameState { p: b.to_vec(), w, f })
}

fn steps_for(a: &[f64], b: &[f64], step: f64) -> usize {
    let len = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (len / step).ceil() as usize
}

/// Continues `state` along a polyline whose first vertex must equal `state.p`.
pub fn continue_path(hs: &HypersurfaceData, state: FrameState, path: &[Vec<f64>], step: f64) -> Result<FrameState> {
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    for q in path {
        hs.geometry().check_point(q)?;
    }
    let mut st = state;
    for q in path {
        let steps = steps_for(&st.p, q, step);
        st = integrate_segment_steps(hs, &st, q, steps)?;
    }
    Ok(st)
}

/// Integrates from the identity state at `path[0]` with steps of length at most `step`.
pub fn integrate_path(hs: &HypersurfaceData, path: &[Vec<f64>], step: f64) -> Result<FrameState> {
    let first = path.first().ok_or_else(|| Error::Invalid("empty path".into()))?;
    hs.geometry().check_point(first)?;
    continue_path(hs, FrameState::identity(first), &path[1..], step)
}

/// `‖W_loop − I‖_F` after transporting the identity frame around a closed polyline.
pub fn holonomy_residual(hs: &HypersurfaceData, lp: &[Vec<f64>], step: f64) -> Result<f64> {
    let (first, last) = match (lp.first(), lp.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Invalid("empty loop".into())),
    };
    if first.iter().zip(last).any(|(a, b)| (a - b).abs() > 1e-14) {
        return Err(Error::Invalid("loop is not closed".into()));
    }
    let st = integrate_path(hs, lp, step)?;
    let m = hs.n() + 1;
    Ok((st.w - DMatrix::<f64>::identity(m, m)).norm())
}

/// A closed square in the first two coordinates, centred in the box, with side
/// `min(1, smallest box width)`; the remaining coordinates sit at the box centre.
pub fn unit_square_loop(domain: &DomainBox) -> Vec<Vec<f64>> {
    let c = domain.center();
    let side = domain.widths().into_iter().fold(1.0, f64::min);
    let h = 0.5 * side;
    let corner = |sx: f64, sy: f64| {
        let mut p = c.clone();
        p[0] += sx * h;
        p[1] += sy * h;
        p
    };
    vec![corner(-1.0, -1.0), corner(1.0, -1.0), corner(1.0, 1.0), corner(-1.0, 1.0), corner(-1.0, -1.0)]
}

/// One node of a reconstructed grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImmersionSample {
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub xi: Vec<f64>,
    /// Ambient coordinates of `∂₁, …, ∂ₙ`.
    pub tangents: Vec<Vec<f64>>,
}

/// Reconstructed grid; `samples` follow the node order of [`grid_points`]
/// (the last coordinate varies fastest).
#[derive(Debug, Clone, Serialize)]
pub struct ImmersedGrid {
    pub counts: Vec<usize>,
    pub samples: Vec<ImmersionSample>,
}

/// Integrates from the first grid node along coordinate axes, first coordinate first.
/// Every branch of one axis sweep runs in parallel once its starting node is known.
pub fn immerse_grid(hs: &HypersurfaceData, domain: &DomainBox, counts: &[usize], step: f64) -> Result<ImmersedGrid> {
    let n = hs.n();
    if counts.len() != n || counts.iter().any(|&c| c == 0) {
        return Err(Error::Invalid(format!("grid needs {n} positive counts")));
    }
    if !(step > 0.0) {
        return Err(Error::Invalid(format!("step must be positive, got {step}")));
    }
    let nodes = grid_points(domain, counts);
    let base = nodes[0].clone();
    let axis_values: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let stride: usize = counts[i + 1..].iter().product();
            (0..counts[i]).map(|k| nodes[k * stride][i]).collect()
        })
        .collect();
    let mut states = vec![FrameState::identity(&base)];
    for (axis, values) in axis_values.iter().enumerate() {
        let branches: Vec<Result<Vec<FrameState>>> = states
            .into_par_iter()
            .map(|start| {
                let mut out = Vec::with_capacity(values.len());
                let mut st = start;
                for v in values {
                    let mut q = st.p.clone();
                    q[axis] = *v;
                    st = integrate_segment_steps(hs, &st, &q, steps_for(&st.p, &q, step))?;
                    out.push(st.clone());
                }
                Ok(out)
            })
            .collect();
        states = branches.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    }
    let samples = states
        .into_iter()
        .map(|s| ImmersionSample {
            xi: s.xi().iter().copied().collect(),
            f: s.f.iter().copied().collect(),
            tangents: (0..n).map(|i| s.w.column(i).iter().copied().collect()).collect(),
            p: s.p,
        })
        .collect();
    Ok(ImmersedGrid { counts: counts.to_vec(), samples })
}

/// Least-squares affine map `x ↦ L x + b` taking reconstructed points onto reference points.
#[derive(Debug, Clone, Serialize)]
pub struct AffineFit {
    pub l: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub rms: f64,
}

impl AffineFit {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.l.iter().zip(&self.b).map(|(row, bi)| row.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + bi).collect()
    }
}

/// Minimises `Σ‖L·x_k + b − y_k‖²`; `rms = sqrt(mean ‖L·x_k + b − y_k‖²)`.
pub fn affine_fit(rec: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<AffineFit> {
    let d = rec.first().map(Vec::len).ok_or_else(|| Error::Invalid("no samples".into()))?;
    let m = reference[0].len();
    if rec.len() != reference.len() || rec.iter().any(|r| r.len() != d) || reference.iter().any(|r| r.len() != m) {
        return Err(Error::Dimension("sample sets differ in size or dimension".into()));
    }
    if rec.len() < (d + 1) * (d + 2) / 2 {
        return Err(Error::Invalid(format!("affine fit needs at least {} samples", (d + 1) * (d + 2) / 2)));
    }
    let k = rec.len();
    let x = DMatrix::from_fn(k, d + 1, |r, c| if c < d { rec[r][c] } else { 1.0 });
    let y = DMatrix::from_fn(k, m, |r, c| reference[r][c]);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Numerical("degenerate samples: affine normal equations are rank deficient".into()));
    }
    let sol = svd.solve(&y, 0.0).map_err(|e| Error::Numerical(e.to_string()))?; // (d+1)×m
    let resid = &x * &sol - &y;
    let rms = (resid.norm_squared() / k as f64).sqrt();
    let l = (0..m).map(|i| (0..d).map(|j| sol[(j, i)]).collect()).collect();
    let b = (0..m).map(|i| sol[(d, i)]).collect();
    Ok(AffineFit { l, b, rms })
}

/// Homogeneous quadric fit; `coeffs` multiply the monomials `1, x_i, x_i x_j (i ≤ j)` of the
/// normalised points (centred, scaled to unit RMS radius).
#[derive(Debug, Clone, Serialize)]
pub struct QuadricFit {
    pub coeffs: Vec<f64>,
    pub center: Vec<f64>,
    pub scale: f64,
    /// `σ_min / σ_max` of the design matrix.
    pub ratio: f64,
}

pub fn quadric_fit(points: &[Vec<f64>]) -> Result<QuadricFit> {
    let d = points.first().map(Vec::len).ok_or_else(|| Error::Invalid("no samples".into()))?;
    let nmono = (d + 1) * (d + 2) / 2;
    if points.len() < 2 * nmono {
        return Err(Error::Invalid(format!("quadric fit needs at least {} samples", 2 * nmono)));
    }
    let k = points.len() as f64;
    let center: Vec<f64> = (0..d).map(|i| points.iter().map(|p| p[i]).sum::<f64>() / k).collect();
    let scale = (points.iter().map(|p| p.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum::<f64>()).sum::<f64>() / k).sqrt();
    if !(scale > 0.0) {
        return Err(Error::Numerical("degenerate samples: all points coincide".into()));
    }
    let mono = |p: &[f64]| {
        let q: Vec<f64> = p.iter().zip(&center).map(|(x, c)| (x - c) / scale).collect();
        let mut row = vec![1.0];
        row.extend(q.iter().copied());
        for i in 0..d {
            for j in i..d {
                row.push(q[i] * q[j]);
            }
        }
        row
    };
    let rows: Vec<Vec<f64>> = points.iter().map(|p| mono(p)).collect();
    let a = DMatrix::from_fn(rows.len(), nmono, |r, c| rows[r][c]);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let (imin, smin) = svd.singular_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, s)| if *s < acc.1 { (i, *s) } else { acc });
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::Numerical("degenerate samples".into()));
    }
    Ok(QuadricFit { coeffs: v_t.row(imin).iter().copied().collect(), center, scale, ratio: smin / smax })
}

/// Wavefront OBJ for a 2D grid: vertex `i·n₁ + j + 1` is node `(i, j)` (row-major, the first
/// coordinate indexes rows); each grid cell is split into two triangles.
pub fn export_obj(grid: &ImmersedGrid) -> Result<String> {
    if grid.counts.len() != 2 || grid.samples.len() != grid.counts[0] * grid.counts[1] {
        return Err(Error::Invalid("OBJ export needs a complete two-dimensional grid".into()));
    }
    let (n0, n1) = (grid.counts[0], grid.counts[1]);
    let mut out = String::new();
    for s in &grid.samples {
        writeln!(out, "v {:.16e} {:.16e} {:.16e}", s.f[0], s.f[1], s.f[2]).expect("write to string");
    }
    for i in 0..n0.saturating_sub(1) {
        for j in 0..n1.saturating_sub(1) {
            let v = |a: usize, b: usize| a * n1 + b + 1;
            writeln!(out, "f {} {} {}", v(i, j), v(i + 1, j), v(i + 1, j + 1)).expect("write to string");
            writeln!(out, "f {} {} {}", v(i, j), v(i + 1, j + 1), v(i, j + 1)).expect("write to string");
        }
    }
    Ok(out)
}

/// Convergence order from endpoints computed with steps `step`, `step/2` and `step/4`: `log₂(‖e₁ − e₂‖ / ‖e₂ − e₄‖)` on the stacked `(W, f)`. When both differences
/// are at rounding level the integrator is exact on this path and the order is `∞`.
pub fn richardson_order(hs: &HypersurfaceData, path: &[Vec<f64>], step: f64) -> Result<f64> {
    let run = |k: usize| -> Result<DVector<f64>> {
        let mut st = FrameState::identity(&path[0]);
        for q in &path[1..] {
            let steps = k * steps_for(&st.p, q, step);
            st = integrate_segment_steps(hs, &st, q, steps)?;
        }
        Ok(DVector::from_iterator(
            st.w.len() + st.f.len(),
            st.w.iter().copied().chain(st.f.iter().copied()),
        ))
    };
    if path.len() < 2 {
        return Err(Error::Invalid("path needs at least two vertices".into()));
    }
    let (a, b, c) = (run(1)?, run(2)?, run(4)?);
    let (d1, d2) = ((&a - &b).norm(), (&b - &c).norm());
    let floor = 1e-13 * (1.0 + c.norm());
    if d1 <= floor && d2 <= floor {
        return Ok(f64::INFINITY);
    }
    Ok((d1 / d2).log2())
}
