//! Dense pointwise tensors over `f64` or [`Jet`] components.
//!
//! Components are stored row-major: the flat index of `(i_0, …, i_{r-1})` is
//! `Σ i_k n^{r-1-k}`. Projectors act on covariant slots; when a tensor has
//! more slots than a projector needs, the trailing slots are passive.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::jets::Jet;

/// Largest rank handled by the stack-allocated index helpers.
pub const MAX_RANK: usize = 8;

/// Non-degeneracy threshold for metrics.
pub const DET_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("slot mismatch: {0}")]
    SlotMismatch(String),
    #[error("degenerate metric: |det| = {0:e} < {DET_THRESHOLD:e}")]
    Degenerate(f64),
    #[error("input not symmetric (residual {0:e})")]
    NotSymmetric(f64),
    #[error("input not trace-free (residual {0:e})")]
    NotTraceFree(f64),
    #[error("valence too small: need {need} slots, have {have}")]
    ValenceTooSmall { need: usize, have: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn constant_like(&self, v: f64) -> Self;
    fn recip(&self) -> Self;
    fn zero_like(&self) -> Self {
        self.constant_like(0.0)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn constant_like(&self, v: f64) -> f64 {
        v
    }
    fn recip(&self) -> f64 {
        1.0 / self
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn constant_like(&self, v: f64) -> Jet {
        Jet::constant_like(self, v)
    }
    fn recip(&self) -> Jet {
        Jet::recip(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Co,
    Contra,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    n: usize,
    slots: Vec<Slot>,
    data: Vec<S>,
}

/// Iterates all multi-indices of a given rank in storage order.
pub(crate) struct IndexIter {
    n: usize,
    rank: usize,
    cur: [usize; MAX_RANK],
    started: bool,
    done: bool,
}

impl IndexIter {
    pub(crate) fn new(n: usize, rank: usize) -> IndexIter {
        assert!(rank <= MAX_RANK, "rank {rank} exceeds {MAX_RANK}");
        IndexIter { n, rank, cur: [0; MAX_RANK], started: false, done: n == 0 && rank > 0 }
    }

    pub(crate) fn next_index(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.cur[..self.rank]);
        }
        let mut k = self.rank;
        loop {
            if k == 0 {
                self.done = true;
                return None;
            }
            k -= 1;
            self.cur[k] += 1;
            if self.cur[k] < self.n {
                break;
            }
            self.cur[k] = 0;
        }
        Some(&self.cur[..self.rank])
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn from_fn(n: usize, slots: &[Slot], mut f: impl FnMut(&[usize]) -> S) -> Tensor<S> {
        let rank = slots.len();
        let mut data = Vec::with_capacity(n.pow(rank as u32));
        let mut it = IndexIter::new(n, rank);
        while let Some(idx) = it.next_index() {
            data.push(f(idx));
        }
        Tensor { n, slots: slots.to_vec(), data }
    }

    /// All-covariant tensor of the given rank.
    pub fn covariant(n: usize, rank: usize, f: impl FnMut(&[usize]) -> S) -> Tensor<S> {
        Tensor::from_fn(n, &vec![Slot::Co; rank], f)
    }

    pub fn zeros(n: usize, slots: &[Slot], like: S) -> Tensor<S> {
        let z = like.zero_like();
        Tensor { n, slots: slots.to_vec(), data: vec![z; n.pow(slots.len() as u32)] }
    }

    pub fn from_data(n: usize, slots: &[Slot], data: Vec<S>) -> Result<Tensor<S>, TensorError> {
        if data.len() != n.pow(slots.len() as u32) {
            return Err(TensorError::SlotMismatch(format!(
                "{} components for n={n}, rank {}",
                data.len(),
                slots.len()
            )));
        }
        Ok(Tensor { n, slots: slots.to_vec(), data })
    }

    pub fn scalar(n: usize, v: S) -> Tensor<S> {
        Tensor { n, slots: vec![], data: vec![v] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn is_covariant(&self) -> bool {
        self.slots.iter().all(|s| *s == Slot::Co)
    }

    #[inline]
    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> S {
        self.data[self.flat(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], v: S) {
        let f = self.flat(idx);
        self.data[f] = v;
    }

    pub(crate) fn like(&self) -> S {
        self.data[0]
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(S) -> T) -> Tensor<T> {
        Tensor { n: self.n, slots: self.slots.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, o: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
        assert_eq!(self.slots, o.slots, "slot pattern mismatch");
        assert_eq!(self.n, o.n);
        Tensor {
            n: self.n,
            slots: self.slots.clone(),
            data: self.data.iter().zip(&o.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Tensor<S> {
        self.map(|v| v * s)
    }

    pub fn scale_by(&self, s: S) -> Tensor<S> {
        self.map(|v| v * s)
    }

    /// Component values (drops derivative information for jets).
    pub fn values(&self) -> Tensor<f64> {
        self.map(|v| v.value())
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m: f64, v| m.max(v.value().abs()))
    }

    /// Result slot `j` is this tensor's slot `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> Tensor<S> {
        assert_eq!(order.len(), self.rank());
        let slots: Vec<Slot> = order.iter().map(|&o| self.slots[o]).collect();
        let mut src = [0usize; MAX_RANK];
        Tensor::from_fn(self.n, &slots, |idx| {
            for (j, &o) in order.iter().enumerate() {
                src[o] = idx[j];
            }
            self.get(&src[..idx.len()])
        })
    }

    pub fn outer(&self, o: &Tensor<S>) -> Tensor<S> {
        assert_eq!(self.n, o.n);
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&o.slots);
        let mut data = Vec::with_capacity(self.data.len() * o.data.len());
        for &a in &self.data {
            for &b in &o.data {
                data.push(a * b);
            }
        }
        Tensor { n: self.n, slots, data }
    }

    /// Contracts slot `a` of `self` with slot `b` of `o` (no metric).
    /// Result slots: remaining slots of `self`, then remaining slots of `o`.
    pub fn contract(&self, a: usize, o: &Tensor<S>, b: usize) -> Tensor<S> {
        let n = self.n;
        let mut slots: Vec<Slot> = self.slots.iter().enumerate().filter(|(i, _)| *i != a).map(|(_, s)| *s).collect();
        let ra = slots.len();
        slots.extend(o.slots.iter().enumerate().filter(|(i, _)| *i != b).map(|(_, s)| *s));
        let zero = self.like().zero_like();
        let mut ia = [0usize; MAX_RANK];
        let mut ib = [0usize; MAX_RANK];
        Tensor::from_fn(n, &slots, |idx| {
            let (left, right) = idx.split_at(ra);
            let mut p = 0;
            for (k, v) in ia.iter_mut().enumerate().take(self.rank()) {
                if k != a {
                    *v = left[p];
                    p += 1;
                }
            }
            p = 0;
            for (k, v) in ib.iter_mut().enumerate().take(o.rank()) {
                if k != b {
                    *v = right[p];
                    p += 1;
                }
            }
            let mut acc = zero;
            for s in 0..n {
                ia[a] = s;
                ib[b] = s;
                acc = acc + self.get(&ia[..self.rank()]) * o.get(&ib[..o.rank()]);
            }
            acc
        })
    }

    /// Trace over slots `i < j`, through the metric when both are of the same kind.
    pub fn trace(&self, i: usize, j: usize, metric: &Metric<S>) -> Tensor<S> {
        assert!(i < j && j < self.rank(), "trace slots");
        let (si, sj) = (self.slots[i], self.slots[j]);
        let n = self.n;
        let slots: Vec<Slot> =
            self.slots.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, s)| *s).collect();
        let w = match (si, sj) {
            (Slot::Co, Slot::Co) => Some(&metric.inv),
            (Slot::Contra, Slot::Contra) => Some(&metric.g),
            _ => None,
        };
        let zero = self.like().zero_like();
        let mut full = [0usize; MAX_RANK];
        Tensor::from_fn(n, &slots, |idx| {
            let mut p = 0;
            for (k, v) in full.iter_mut().enumerate().take(self.rank()) {
                if k != i && k != j {
                    *v = idx[p];
                    p += 1;
                }
            }
            let mut acc = zero;
            for a in 0..n {
                full[i] = a;
                match w {
                    Some(w) => {
                        for b in 0..n {
                            full[j] = b;
                            acc = acc + w.data[a * n + b] * self.get(&full[..self.rank()]);
                        }
                    }
                    None => {
                        full[j] = a;
                        acc = acc + self.get(&full[..self.rank()]);
                    }
                }
            }
            acc
        })
    }

    pub fn raise(&self, slot: usize, metric: &Metric<S>) -> Tensor<S> {
        assert_eq!(self.slots[slot], Slot::Co, "raise needs a covariant slot");
        self.transform_slot(slot, &metric.inv, Slot::Contra)
    }

    pub fn lower(&self, slot: usize, metric: &Metric<S>) -> Tensor<S> {
        assert_eq!(self.slots[slot], Slot::Contra, "lower needs a contravariant slot");
        self.transform_slot(slot, &metric.g, Slot::Co)
    }

    fn transform_slot(&self, slot: usize, w: &Tensor<S>, to: Slot) -> Tensor<S> {
        let n = self.n;
        let mut slots = self.slots.clone();
        slots[slot] = to;
        let zero = self.like().zero_like();
        let mut src = [0usize; MAX_RANK];
        Tensor::from_fn(n, &slots, |idx| {
            src[..idx.len()].copy_from_slice(idx);
            let mut acc = zero;
            for s in 0..n {
                src[slot] = s;
                acc = acc + w.data[idx[slot] * n + s] * self.get(&src[..idx.len()]);
            }
            acc
        })
    }

    /// All-covariant version of this tensor.
    pub fn all_lowered(&self, metric: &Metric<S>) -> Tensor<S> {
        let mut t = self.clone();
        for k in 0..t.rank() {
            if t.slots[k] == Slot::Contra {
                t = t.lower(k, metric);
            }
        }
        t
    }

    /// Full contraction `⟨T, T⟩` with the metric on every slot.
    pub fn norm_sq(&self, metric: &Metric<S>) -> S {
        let co = self.all_lowered(metric);
        let mut up = co.clone();
        for k in 0..up.rank() {
            up = up.raise(k, metric);
        }
        co.data.iter().zip(&up.data).fold(self.like().zero_like(), |acc, (&a, &b)| acc + a * b)
    }

    /// Average over all permutations of the listed slots.
    pub fn symmetrize(&self, which: &[usize]) -> Tensor<S> {
        let perms = permutations(which.len());
        let inv = 1.0 / perms.len() as f64;
        let mut src = [0usize; MAX_RANK];
        let zero = self.like().zero_like();
        Tensor::from_fn(self.n, &self.slots, |idx| {
            let mut acc = zero;
            for p in &perms {
                src[..idx.len()].copy_from_slice(idx);
                for (k, &slot) in which.iter().enumerate() {
                    src[slot] = idx[which[p[k]]];
                }
                acc = acc + self.get(&src[..idx.len()]);
            }
            acc * inv
        })
    }

    /// Max deviation from symmetry under the listed slots (values only).
    pub fn symmetry_residual(&self, which: &[usize]) -> f64 {
        let s = self.symmetrize(which);
        s.data.iter().zip(&self.data).fold(0.0, |m: f64, (a, b)| m.max((a.value() - b.value()).abs()))
    }

    /// Inserts `g` in slots `at, at+1`.
    pub fn insert_metric(&self, at: usize, metric: &Metric<S>) -> Tensor<S> {
        let mut slots = self.slots.clone();
        slots.insert(at, Slot::Co);
        slots.insert(at, Slot::Co);
        let mut src = [0usize; MAX_RANK];
        let n = self.n;
        Tensor::from_fn(n, &slots, |idx| {
            let r = idx.len() - 2;
            src[..at].copy_from_slice(&idx[..at]);
            src[at..r].copy_from_slice(&idx[at + 2..]);
            metric.g.data[idx[at] * n + idx[at + 1]] * self.get(&src[..r])
        })
    }
}

impl<S: Scalar> Add for &Tensor<S> {
    type Output = Tensor<S>;
    fn add(self, o: &Tensor<S>) -> Tensor<S> {
        self.zip_with(o, |a, b| a + b)
    }
}

impl<S: Scalar> Sub for &Tensor<S> {
    type Output = Tensor<S>;
    fn sub(self, o: &Tensor<S>) -> Tensor<S> {
        self.zip_with(o, |a, b| a - b)
    }
}

impl<S: Scalar> Add for Tensor<S> {
    type Output = Tensor<S>;
    fn add(self, o: Tensor<S>) -> Tensor<S> {
        &self + &o
    }
}

impl<S: Scalar> Sub for Tensor<S> {
    type Output = Tensor<S>;
    fn sub(self, o: Tensor<S>) -> Tensor<S> {
        &self - &o
    }
}

impl<S: Scalar> Neg for Tensor<S> {
    type Output = Tensor<S>;
    fn neg(self) -> Tensor<S> {
        self.map(|v| -v)
    }
}

pub(crate) fn permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(m - 1) {
        for pos in 0..m {
            let mut q = p.clone();
            q.insert(pos, m - 1);
            out.push(q);
        }
    }
    out
}

/// A metric with its inverse.
#[derive(Debug, Clone)]
pub struct Metric<S> {
    pub g: Tensor<S>,
    pub inv: Tensor<S>,
}

impl<S: Scalar> Metric<S> {
    /// Symmetrizes `g` and inverts it; rejects `|det g| < 1e-10`.
    pub fn new(g: &Tensor<S>) -> Result<Metric<S>, TensorError> {
        if g.rank() != 2 || !g.is_covariant() {
            return Err(TensorError::SlotMismatch("metric must be a (0,2) tensor".into()));
        }
        let g = g.symmetrize(&[0, 1]);
        let (inv, det) = invert(g.data(), g.n())?;
        if det.abs() < DET_THRESHOLD {
            return Err(TensorError::Degenerate(det.abs()));
        }
        let inv = Tensor { n: g.n(), slots: vec![Slot::Contra, Slot::Contra], data: inv };
        Ok(Metric { g, inv: inv.symmetrize(&[0, 1]) })
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn det(&self) -> f64 {
        let v = self.g.values();
        nalgebra::DMatrix::from_row_slice(self.n(), self.n(), v.data()).determinant()
    }

    /// Mixed identity tensor `δ^i_j` (slots Contra, Co).
    pub fn identity(&self) -> Tensor<S> {
        let one = self.g.like().constant_like(1.0);
        let zero = one.zero_like();
        Tensor::from_fn(self.n(), &[Slot::Contra, Slot::Co], |i| if i[0] == i[1] { one } else { zero })
    }
}

/// Gauss–Jordan inverse with partial pivoting on values; also returns the determinant value.
pub fn invert<S: Scalar>(m: &[S], n: usize) -> Result<(Vec<S>, f64), TensorError> {
    let mut a = m.to_vec();
    let one = m[0].constant_like(1.0);
    let zero = one.zero_like();
    let mut inv: Vec<S> = (0..n * n).map(|k| if k / n == k % n { one } else { zero }).collect();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].value().abs().total_cmp(&a[s * n + col].value().abs()))
            .unwrap_or(col);
        let pv = a[piv * n + col].value();
        if pv == 0.0 {
            return Err(TensorError::Degenerate(0.0));
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
                inv.swap(piv * n + c, col * n + c);
            }
            det = -det;
        }
        det *= pv;
        let r = a[col * n + col].recip();
        for c in 0..n {
            a[col * n + c] = a[col * n + c] * r;
            inv[col * n + c] = inv[col * n + c] * r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            for c in 0..n {
                a[row * n + c] = a[row * n + c] - f * a[col * n + c];
                inv[row * n + c] = inv[row * n + c] - f * inv[col * n + c];
            }
        }
    }
    Ok((inv, det))
}

fn require_covariant<S: Scalar>(b: &Tensor<S>, m: usize) -> Result<(), TensorError> {
    if b.rank() < m {
        return Err(TensorError::ValenceTooSmall { need: m, have: b.rank() });
    }
    if !b.slots()[..m].iter().all(|s| *s == Slot::Co) {
        return Err(TensorError::SlotMismatch("projector slots must be covariant".into()));
    }
    Ok(())
}

/// Symmetrization over the first `m` slots.
pub fn sym_projector<S: Scalar>(m: usize, b: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
    require_covariant(b, m)?;
    Ok(b.symmetrize(&(0..m).collect::<Vec<_>>()))
}

/// Projection of the first `m ∈ {2,3,4}` slots onto totally symmetric, trace-free tensors.
pub fn tracefree_sym_projector<S: Scalar>(m: usize, b: &Tensor<S>, metric: &Metric<S>) -> Result<Tensor<S>, TensorError> {
    require_covariant(b, m)?;
    let n = b.n() as f64;
    let first: Vec<usize> = (0..m).collect();
    let sb = b.symmetrize(&first);
    let tr = sb.trace(0, 1, metric);
    let inner = match m {
        2 => &sb - &tr.insert_metric(0, metric).scale(1.0 / n),
        3 => &sb - &tr.insert_metric(1, metric).scale(3.0 / (n + 2.0)),
        4 => {
            let trtr = tr.trace(0, 1, metric);
            let t = &tr - &trtr.insert_metric(0, metric).scale(1.0 / (2.0 * (n + 2.0)));
            &sb - &t.insert_metric(2, metric).scale(6.0 / (n + 4.0))
        }
        _ => return Err(TensorError::Unsupported(format!("trace-free projector for m = {m}"))),
    };
    Ok(inner.symmetrize(&first))
}

/// `(B1 ⧀ B2)(X,Y,Z,W) = B1(X,Z)B2(Y,W) + B1(Y,W)B2(X,Z) − B1(X,W)B2(Y,Z) − B1(Y,Z)B2(X,W)`.
pub fn kulkarni_nomizu<S: Scalar>(b1: &Tensor<S>, b2: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
    for b in [b1, b2] {
        require_covariant(b, 2)?;
        if b.rank() != 2 {
            return Err(TensorError::SlotMismatch("Kulkarni–Nomizu needs (0,2) inputs".into()));
        }
        let r = b.symmetry_residual(&[0, 1]);
        if r > 1e-9 * (1.0 + b.max_abs()) {
            return Err(TensorError::NotSymmetric(r));
        }
    }
    Ok(kn_unchecked(b1, b2))
}

pub(crate) fn kn_unchecked<S: Scalar>(b1: &Tensor<S>, b2: &Tensor<S>) -> Tensor<S> {
    Tensor::covariant(b1.n(), 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        b1.get(&[x, z]) * b2.get(&[y, w]) + b1.get(&[y, w]) * b2.get(&[x, z])
            - b1.get(&[x, w]) * b2.get(&[y, z])
            - b1.get(&[y, z]) * b2.get(&[x, w])
    })
}

/// Projection of `B ∈ Sym²⊗Sym²` onto algebraic Weyl tensors. Zero for `n < 3`.
pub fn weyl0_projector<S: Scalar>(b: &Tensor<S>, metric: &Metric<S>) -> Result<Tensor<S>, TensorError> {
    require_covariant(b, 4)?;
    if b.rank() != 4 {
        return Err(TensorError::SlotMismatch("Weyl projector needs a (0,4) input".into()));
    }
    let scale = 1.0 + b.max_abs();
    let r = b.symmetry_residual(&[0, 1]).max(b.symmetry_residual(&[2, 3]));
    if r > 1e-9 * scale {
        return Err(TensorError::NotSymmetric(r));
    }
    let n = b.n();
    if n < 3 {
        return Ok(Tensor::zeros(n, &[Slot::Co; 4], b.like()));
    }
    let b1 = Tensor::covariant(n, 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        (b.get(&[x, z, y, w]) - b.get(&[x, w, y, z]) - b.get(&[y, z, x, w]) + b.get(&[y, w, x, z])) * 0.25
    });
    let nf = n as f64;
    let bb = b1.trace(0, 2, metric).scale(1.0 / (nf - 2.0));
    let trbb = bb.trace(0, 1, metric).data()[0];
    let corr = &bb - &metric.g.scale_by(trbb * (1.0 / (2.0 * (nf - 1.0))));
    Ok(&b1 - &kn_unchecked(&corr, &metric.g))
}

/// Codazzi projector on `T*M ⊗ Sym³₀`:
/// `2ΠB(X;Y,Z,W) = B(X;Y,Z,W) − B(Y;X,Z,W) + (1/n)(b(X,Z)G(Y,W) + b(X,W)G(Y,Z) − b(Y,Z)G(X,W) − b(Y,W)G(X,Z))`
/// with `b = tr_G B` over the first two slots.
pub fn codazzi0_projector<S: Scalar>(b: &Tensor<S>, metric: &Metric<S>) -> Result<Tensor<S>, TensorError> {
    require_covariant(b, 4)?;
    if b.rank() != 4 {
        return Err(TensorError::SlotMismatch("Codazzi projector needs a (0,4) input".into()));
    }
    let scale = 1.0 + b.max_abs();
    let sr = b.symmetry_residual(&[1, 2, 3]);
    if sr > 1e-9 * scale {
        return Err(TensorError::NotSymmetric(sr));
    }
    let tf = b.trace(1, 2, metric).max_abs();
    if tf > 1e-9 * scale {
        return Err(TensorError::NotTraceFree(tf));
    }
    Ok(codazzi0_unchecked(b, metric))
}

/// The Codazzi formula without input checks. On `T*M⊗T*M⊗Sym²` it is an idempotent map whose
/// image is the part skew in the first two slots.
pub fn codazzi0_unchecked<S: Scalar>(b: &Tensor<S>, metric: &Metric<S>) -> Tensor<S> {
    let n = b.n();
    let tb = b.trace(0, 1, metric);
    let g = &metric.g;
    let inv_n = 1.0 / n as f64;
    Tensor::covariant(n, 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        let pure = b.get(&[x, y, z, w]) - b.get(&[y, x, z, w]);
        let tr = tb.get(&[x, z]) * g.get(&[y, w]) + tb.get(&[x, w]) * g.get(&[y, z])
            - tb.get(&[y, z]) * g.get(&[x, w])
            - tb.get(&[y, w]) * g.get(&[x, z]);
        (pure + tr * inv_n) * 0.5
    })
}

/// Index gymnastics by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricOp {
    Raise(usize),
    Lower(usize),
    Contract(usize, usize),
}

pub fn metric_op<S: Scalar>(op: MetricOp, t: &Tensor<S>, metric: &Metric<S>) -> Result<Tensor<S>, TensorError> {
    let check = |s: usize| {
        if s >= t.rank() {
            Err(TensorError::SlotMismatch(format!("slot {s} out of range for rank {}", t.rank())))
        } else {
            Ok(())
        }
    };
    match op {
        MetricOp::Raise(s) => {
            check(s)?;
            if t.slots()[s] != Slot::Co {
                return Err(TensorError::SlotMismatch(format!("slot {s} is not covariant")));
            }
            Ok(t.raise(s, metric))
        }
        MetricOp::Lower(s) => {
            check(s)?;
            if t.slots()[s] != Slot::Contra {
                return Err(TensorError::SlotMismatch(format!("slot {s} is not contravariant")));
            }
            Ok(t.lower(s, metric))
        }
        MetricOp::Contract(a, b) => {
            check(a.max(b))?;
            if a == b {
                return Err(TensorError::SlotMismatch("cannot contract a slot with itself".into()));
            }
            Ok(t.trace(a.min(b), a.max(b), metric))
        }
    }
}

/// `|T|_g`² as a plain number.
pub fn norm_sq<S: Scalar>(t: &Tensor<S>, metric: &Metric<S>) -> f64 {
    t.norm_sq(metric).value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Tensor<f64> {
        Tensor::covariant(n, rank, |_| rng.gen_range(-1.0..1.0))
    }

    fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric<f64> {
        let a = random_tensor(rng, n, 2);
        let g = Tensor::covariant(n, 2, |i| {
            let mut s = if i[0] == i[1] { n as f64 } else { 0.0 };
            for k in 0..n {
                s += 0.3 * a.get(&[i[0], k]) * a.get(&[i[1], k]);
            }
            s
        });
        Metric::new(&g).unwrap()
    }

    fn close(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        (a - b).max_abs()
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn symmetrize_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_tensor(&mut rng, 3, 3);
        let s = sym_projector(3, &b).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let avg = (b.get(&[i, j, k]) + b.get(&[i, k, j]) + b.get(&[j, i, k]) + b.get(&[j, k, i]) + b.get(&[k, i, j]) + b.get(&[k, j, i])) / 6.0;
                    assert!((s.get(&[i, j, k]) - avg).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn antisymmetric_goes_to_zero() {
        let b = Tensor::covariant(3, 2, |i| i[0] as f64 - i[1] as f64);
        assert!(sym_projector(2, &b).unwrap().max_abs() == 0.0);
        assert!(matches!(sym_projector(3, &b), Err(TensorError::ValenceTooSmall { .. })));
    }

    #[test]
    fn projector_kills_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in 2..=4 {
            let m = random_metric(&mut rng, n);
            assert!(tracefree_sym_projector(2, &m.g, &m).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn tracefree_results_have_no_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..=4 {
            let m = random_metric(&mut rng, n);
            for mm in 2..=4 {
                let b = random_tensor(&mut rng, n, mm);
                let p = tracefree_sym_projector(mm, &b, &m).unwrap();
                assert!(p.symmetry_residual(&(0..mm).collect::<Vec<_>>()) < 1e-14);
                for i in 0..mm {
                    for j in i + 1..mm {
                        assert!(p.trace(i, j, &m).max_abs() < 1e-12, "n={n} m={mm} ({i},{j})");
                    }
                }
                assert!(close(&tracefree_sym_projector(mm, &p, &m).unwrap(), &p) < 1e-12);
                let absorbed = tracefree_sym_projector(mm, &sym_projector(mm, &b).unwrap(), &m).unwrap();
                assert!(close(&absorbed, &p) < 1e-12);
            }
        }
    }

    #[test]
    fn partial_projector_on_four_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_metric(&mut rng, 3);
        let b = random_tensor(&mut rng, 3, 4);
        let p = tracefree_sym_projector(3, &b, &m).unwrap();
        assert!(p.trace(0, 1, &m).max_abs() < 1e-12);
        assert!(p.symmetry_residual(&[0, 1, 2]) < 1e-14);
        // agrees with Π_Sym³Φ − 3/(n+2) Π_Sym³(g⊗φ), φ = tr(Π_Sym³Φ)
        let s = b.symmetrize(&[0, 1, 2]);
        let phi = s.trace(0, 1, &m);
        let alt = &s - &phi.insert_metric(0, &m).symmetrize(&[0, 1, 2]).scale(3.0 / 5.0);
        assert!(close(&alt, &p) < 1e-13);
    }

    #[test]
    fn weyl_projector_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 3..=4 {
            let m = random_metric(&mut rng, n);
            let raw = random_tensor(&mut rng, n, 4);
            let b = raw.symmetrize(&[0, 1]).symmetrize(&[2, 3]);
            let w = weyl0_projector(&b, &m).unwrap();
            for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                assert!(w.trace(i, j, &m).max_abs() < 1e-12);
            }
            let bianchi = Tensor::covariant(n, 4, |i| w.get(&[i[0], i[1], i[2], i[3]]) + w.get(&[i[1], i[2], i[0], i[3]]) + w.get(&[i[2], i[0], i[1], i[3]]));
            assert!(bianchi.max_abs() < 1e-12);
            let skew = &w + &w.permuted(&[1, 0, 2, 3]);
            assert!(skew.max_abs() < 1e-12);
            let pair = &w - &w.permuted(&[2, 3, 0, 1]);
            assert!(pair.max_abs() < 1e-12);
            let gg = m.g.outer(&m.g);
            assert!(weyl0_projector(&gg, &m).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn kulkarni_nomizu_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_metric(&mut rng, 3);
        let kn = kulkarni_nomizu(&m.g, &m.g).unwrap();
        let x = [0.3, -1.0, 0.7];
        let y = [1.1, 0.2, -0.4];
        let gdot = |a: &[f64], b: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += m.g.get(&[i, j]) * a[i] * b[j];
                }
            }
            s
        };
        let mut lhs = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for l in 0..3 {
                        lhs += kn.get(&[i, j, k, l]) * x[i] * y[j] * x[k] * y[l];
                    }
                }
            }
        }
        let rhs = 2.0 * (gdot(&x, &x) * gdot(&y, &y) - gdot(&x, &y).powi(2));
        assert!((lhs - rhs).abs() < 1e-12);
        let asym = Tensor::covariant(3, 2, |i| i[0] as f64);
        assert!(matches!(kulkarni_nomizu(&asym, &m.g), Err(TensorError::NotSymmetric(_))));
    }

    fn random_codazzi_input(rng: &mut ChaCha8Rng, m: &Metric<f64>) -> Tensor<f64> {
        let n = m.n();
        let raw = random_tensor(rng, n, 4).permuted(&[1, 2, 3, 0]);
        // project slots 1..3 (moved to the front) and move the free slot back
        tracefree_sym_projector(3, &raw, m).unwrap().permuted(&[3, 0, 1, 2])
    }

    #[test]
    fn codazzi_projector_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m3 = random_metric(&mut rng, 3);
        let b = random_codazzi_input(&mut rng, &m3);
        let p = codazzi0_projector(&b, &m3).unwrap();
        assert!((&p + &p.permuted(&[1, 0, 2, 3])).max_abs() < 1e-12);
        let sym = random_codazzi_input(&mut rng, &m3);
        let sym = (&sym + &sym.permuted(&[1, 0, 2, 3])).symmetrize(&[0, 1, 2, 3]);
        let sym = tracefree_sym_projector(4, &sym, &m3).unwrap();
        assert!(codazzi0_projector(&sym, &m3).unwrap().max_abs() < 1e-12);
        let m2 = random_metric(&mut rng, 2);
        let b2 = random_codazzi_input(&mut rng, &m2);
        assert!(codazzi0_projector(&b2, &m2).unwrap().max_abs() < 1e-12);
        let bad = random_tensor(&mut rng, 3, 4);
        assert!(codazzi0_projector(&bad, &m3).is_err());
    }

    #[test]
    fn metric_gymnastics() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_metric(&mut rng, 4);
        assert!((norm_sq(&m.g, &m) - 4.0).abs() < 1e-12);
        let t = random_tensor(&mut rng, 4, 3);
        let back = t.raise(1, &m).lower(1, &m);
        assert!(close(&back, &t) < 1e-12);
        assert!(metric_op(MetricOp::Lower(0), &t, &m).is_err());
        assert!(metric_op(MetricOp::Contract(1, 1), &t, &m).is_err());
        let deg = Tensor::covariant(2, 2, |i| if i == [0, 0] { 1.0 } else { 0.0 });
        assert!(matches!(Metric::new(&deg), Err(TensorError::Degenerate(_))));
    }

    #[test]
    fn jet_inverse_matches_derivative_of_inverse() {
        use crate::jets::Jet;
        let x = Jet::seed_variable(0, 0.4, 1, 2).unwrap();
        let one = x.constant_like(1.0);
        let g = Tensor::covariant(2, 2, |i| match (i[0], i[1]) {
            (0, 0) => one + x * x,
            (1, 1) => one * 2.0,
            _ => x,
        });
        let m = Metric::new(&g).unwrap();
        // d/dx g^{-1} = -g^{-1} (dg) g^{-1}
        let gv = g.values();
        let ginv = m.inv.values();
        let dg = g.map(|v| v.derivative(0).value());
        for i in 0..2 {
            for j in 0..2 {
                let mut expect = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        expect -= ginv.get(&[i, a]) * dg.get(&[a, b]) * ginv.get(&[b, j]);
                    }
                }
                assert!((m.inv.get(&[i, j]).derivative(0).value() - expect).abs() < 1e-13);
            }
        }
        let _ = gv;
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn projectors_idempotent(seed in 0u64..10_000, n in 2usize..=4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_metric(&mut rng, n);
            for mm in 2..=4 {
                let b = random_tensor(&mut rng, n, mm);
                let s = sym_projector(mm, &b).unwrap();
                prop_assert!(close(&sym_projector(mm, &s).unwrap(), &s) < 1e-12);
                let p = tracefree_sym_projector(mm, &b, &m).unwrap();
                prop_assert!(close(&tracefree_sym_projector(mm, &p, &m).unwrap(), &p) < 1e-12);
            }
        }

        #[test]
        fn kn_pair_exchange(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = random_tensor(&mut rng, 3, 2).symmetrize(&[0, 1]);
            let kn = kulkarni_nomizu(&b, &b).unwrap();
            prop_assert!((&kn - &kn.permuted(&[2, 3, 0, 1])).max_abs() < 1e-14);
        }
    }
}
