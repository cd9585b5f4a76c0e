//! Truncated multivariate derivative tables.
//!
//! A [`Jet`] stores the raw partial derivatives `∂^α f(p)` for every
//! multi-index `|α| ≤ k` in `n ≤ 4` variables, `k ≤ 4`. Entries are *not*
//! Taylor coefficients; the factor `α!` only shows up inside univariate
//! composition.
//!
//! Multi-indices are enumerated in graded lexicographic order: by total
//! degree first, then lexicographically descending. For `n = 2, k = 2` the
//! table is `(1; x, y; xx, xy, yy)`. The order-`k` table is a prefix of the
//! order-4 table, which lets jets of different order share lookup tables.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use thiserror::Error;

pub const MAX_ORDER: usize = 4;
pub const MAX_DIM: usize = 4;
/// C(4+4, 4)
pub const MAX_LEN: usize = 70;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("variable index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("jet shape mismatch: (n={0}, k={1}) vs (n={2}, k={3})")]
    Mismatch(usize, usize, usize, usize),
    #[error("division by zero at base point")]
    DivisionByZero,
    #[error("{func} undefined at base value {value}")]
    Domain { func: String, value: f64 },
    #[error("order {0} exceeds the maximum {MAX_ORDER}")]
    OrderTooHigh(usize),
    #[error("dimension {0} not in 1..={MAX_DIM}")]
    BadDimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniFn {
    Ln,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Tan,
    PowReal(f64),
}

impl UniFn {
    pub fn name(&self) -> &'static str {
        match self {
            UniFn::Ln => "ln",
            UniFn::Exp => "exp",
            UniFn::Sqrt => "sqrt",
            UniFn::Sin => "sin",
            UniFn::Cos => "cos",
            UniFn::Tan => "tan",
            UniFn::PowReal(_) => "pow",
        }
    }
}

struct Tables {
    alphas: Vec<[u8; MAX_DIM]>,
    /// base-5 code of α -> position
    lookup: Vec<u16>,
    /// shift[i][pos] = position of α + e_i, or NONE
    shift: Vec<Vec<u16>>,
    /// per target position: (pos β, pos α−β, C(α, β))
    pairs: Vec<Vec<(u16, u16, f64)>>,
    len_by_order: [usize; MAX_ORDER + 1],
}

const NONE: u16 = u16::MAX;

fn code(a: &[u8; MAX_DIM]) -> usize {
    a.iter().fold(0usize, |acc, &d| acc * 5 + d as usize)
}

fn binom(n: usize, k: usize) -> f64 {
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

fn build_tables(n: usize) -> Tables {
    let mut alphas = Vec::new();
    let mut len_by_order = [0; MAX_ORDER + 1];
    for deg in 0..=MAX_ORDER {
        let mut level = Vec::new();
        collect_degree(n, deg, 0, [0u8; MAX_DIM], &mut level);
        alphas.extend(level);
        len_by_order[deg] = alphas.len();
    }
    let mut lookup = vec![NONE; 625];
    for (pos, a) in alphas.iter().enumerate() {
        lookup[code(a)] = pos as u16;
    }
    let shift = (0..n)
        .map(|i| {
            alphas
                .iter()
                .map(|a| {
                    let mut b = *a;
                    b[i] += 1;
                    if b.iter().map(|&d| d as usize).sum::<usize>() > MAX_ORDER {
                        NONE
                    } else {
                        lookup[code(&b)]
                    }
                })
                .collect()
        })
        .collect();
    let pairs = alphas
        .iter()
        .map(|a| {
            let mut out = Vec::new();
            for (pb, b) in alphas.iter().enumerate() {
                if (0..n).all(|i| b[i] <= a[i]) {
                    let mut d = *a;
                    let mut c = 1.0;
                    for i in 0..n {
                        d[i] -= b[i];
                        c *= binom(a[i] as usize, b[i] as usize);
                    }
                    out.push((pb as u16, lookup[code(&d)], c));
                }
            }
            out
        })
        .collect();
    Tables { alphas, lookup, shift, pairs, len_by_order }
}

// lexicographically descending within a degree
fn collect_degree(n: usize, remaining: usize, slot: usize, cur: [u8; MAX_DIM], out: &mut Vec<[u8; MAX_DIM]>) {
    if slot == n - 1 {
        let mut a = cur;
        a[slot] = remaining as u8;
        out.push(a);
        return;
    }
    for d in (0..=remaining).rev() {
        let mut a = cur;
        a[slot] = d as u8;
        collect_degree(n, remaining - d, slot + 1, a, out);
    }
}

fn tables(n: usize) -> &'static Tables {
    static T: OnceLock<Vec<Tables>> = OnceLock::new();
    &T.get_or_init(|| (1..=MAX_DIM).map(build_tables).collect())[n - 1]
}

/// Number of table entries for `n` variables up to order `k`: C(n+k, k).
pub fn table_len(n: usize, k: usize) -> usize {
    binom(n + k, k).round() as usize
}

/// Multi-indices of the order-`k` table in storage order.
pub fn multi_indices(n: usize, k: usize) -> Vec<Vec<usize>> {
    let t = tables(n);
    t.alphas[..t.len_by_order[k]]
        .iter()
        .map(|a| a[..n].iter().map(|&d| d as usize).collect())
        .collect()
}

/// Storage position of the multi-index `alpha`.
pub fn index_of(alpha: &[usize]) -> Option<usize> {
    let n = alpha.len();
    if n == 0 || n > MAX_DIM || alpha.iter().sum::<usize>() > MAX_ORDER {
        return None;
    }
    let mut a = [0u8; MAX_DIM];
    for (i, &d) in alpha.iter().enumerate() {
        a[i] = d as u8;
    }
    let p = tables(n).lookup[code(&a)];
    (p != NONE).then_some(p as usize)
}

#[derive(Clone, Copy)]
pub struct Jet {
    n: u8,
    k: u8,
    c: [f64; MAX_LEN],
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(n={}, k={}, {:?})", self.n, self.k, self.coeffs())
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.k == other.k && self.coeffs() == other.coeffs()
    }
}

impl Jet {
    fn check_shape(n: usize, k: usize) -> Result<(), JetError> {
        if n == 0 || n > MAX_DIM {
            return Err(JetError::BadDimension(n));
        }
        if k > MAX_ORDER {
            return Err(JetError::OrderTooHigh(k));
        }
        Ok(())
    }

    /// Constant jet. Panics on an invalid shape.
    pub fn constant(v: f64, n: usize, k: usize) -> Jet {
        Self::check_shape(n, k).expect("invalid jet shape");
        let mut c = [0.0; MAX_LEN];
        c[0] = v;
        Jet { n: n as u8, k: k as u8, c }
    }

    pub fn zero(n: usize, k: usize) -> Jet {
        Jet::constant(0.0, n, k)
    }

    /// The coordinate function `x_index` at base value `value`.
    pub fn seed_variable(index: usize, value: f64, n: usize, k: usize) -> Result<Jet, JetError> {
        Self::check_shape(n, k)?;
        if index >= n {
            return Err(JetError::IndexOutOfRange { index, n });
        }
        let mut j = Jet::constant(value, n, k);
        if k >= 1 {
            j.c[1 + index] = 1.0;
        }
        Ok(j)
    }

    /// Builds a jet from raw partials in storage order.
    pub fn from_coeffs(n: usize, k: usize, coeffs: &[f64]) -> Result<Jet, JetError> {
        Self::check_shape(n, k)?;
        let len = table_len(n, k);
        if coeffs.len() != len {
            return Err(JetError::Mismatch(n, k, n, coeffs.len()));
        }
        let mut c = [0.0; MAX_LEN];
        c[..len].copy_from_slice(coeffs);
        Ok(Jet { n: n as u8, k: k as u8, c })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.k as usize
    }

    #[inline]
    pub fn len(&self) -> usize {
        tables(self.n()).len_by_order[self.order()]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c[..self.len()]
    }

    /// `∂^α` at the base point; zero if `|α|` exceeds the order.
    pub fn get(&self, alpha: &[usize]) -> f64 {
        assert_eq!(alpha.len(), self.n(), "multi-index length");
        if alpha.iter().sum::<usize>() > self.order() {
            return 0.0;
        }
        self.c[index_of(alpha).expect("multi-index")]
    }

    pub fn gradient(&self) -> Vec<f64> {
        assert!(self.k >= 1, "gradient of an order-0 jet");
        self.c[1..=self.n()].to_vec()
    }

    /// Partial derivative as a jet of one order less.
    pub fn derivative(&self, i: usize) -> Jet {
        assert!(self.k >= 1, "derivative of an order-0 jet");
        assert!(i < self.n(), "derivative index out of range");
        let t = tables(self.n());
        let k = self.order() - 1;
        let mut c = [0.0; MAX_LEN];
        for (pos, slot) in c.iter_mut().enumerate().take(t.len_by_order[k]) {
            *slot = self.c[t.shift[i][pos] as usize];
        }
        Jet { n: self.n, k: k as u8, c }
    }

    pub fn truncate(&self, k: usize) -> Jet {
        assert!(k <= self.order(), "cannot raise jet order by truncation");
        let mut j = *self;
        j.k = k as u8;
        let len = j.len();
        for v in &mut j.c[len..self.len()] {
            *v = 0.0;
        }
        j
    }

    /// Same shape, constant value.
    pub fn constant_like(&self, v: f64) -> Jet {
        Jet::constant(v, self.n(), self.order())
    }

    fn shape_to(&self, other: &Jet) -> (usize, usize) {
        assert_eq!(self.n, other.n, "jet dimension mismatch");
        (self.n(), self.order().min(other.order()))
    }

    fn mul_impl(&self, other: &Jet) -> Jet {
        let (n, k) = self.shape_to(other);
        let t = tables(n);
        let mut c = [0.0; MAX_LEN];
        for (pos, slot) in c.iter_mut().enumerate().take(t.len_by_order[k]) {
            let mut acc = 0.0;
            for &(b, d, w) in &t.pairs[pos] {
                acc += w * self.c[b as usize] * other.c[d as usize];
            }
            *slot = acc;
        }
        Jet { n: n as u8, k: k as u8, c }
    }

    /// Composition `f ∘ self` from the Taylor coefficients `f^(m)(a0)/m!`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let k = self.order();
        let mut h = *self;
        h.c[0] = 0.0;
        let mut r = self.constant_like(taylor[k]);
        for m in (0..k).rev() {
            r = r.mul_impl(&h);
            r.c[0] += taylor[m];
        }
        r
    }

    pub fn recip(&self) -> Jet {
        let a0 = self.value();
        assert!(a0 != 0.0, "reciprocal of a jet with zero base value");
        let k = self.order();
        let mut tc = vec![0.0; k + 1];
        let mut p = 1.0 / a0;
        for (m, v) in tc.iter_mut().enumerate() {
            *v = if m % 2 == 0 { p } else { -p };
            p /= a0;
        }
        self.compose(&tc)
    }

    pub fn checked_recip(&self) -> Result<Jet, JetError> {
        if self.value() == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        Ok(self.recip())
    }

    /// Integer power by repeated multiplication (and a reciprocal for `e < 0`).
    pub fn powi(&self, e: i32) -> Result<Jet, JetError> {
        let base = if e < 0 { self.checked_recip()? } else { *self };
        let mut e = e.unsigned_abs();
        let mut acc = self.constant_like(1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul_impl(&sq);
            }
            e >>= 1;
            if e > 0 {
                sq = sq.mul_impl(&sq);
            }
        }
        Ok(acc)
    }

    pub fn apply(&self, f: UniFn) -> Result<Jet, JetError> {
        apply_univariate(f, self)
    }
}

/// Checked binary operation; both jets must have the same `(n, k)`.
pub fn combine(op: BinOp, a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    if a.n != b.n || a.k != b.k {
        return Err(JetError::Mismatch(a.n(), a.order(), b.n(), b.order()));
    }
    Ok(match op {
        BinOp::Add => *a + *b,
        BinOp::Sub => *a - *b,
        BinOp::Mul => a.mul_impl(b),
        BinOp::Div => a.mul_impl(&b.checked_recip()?),
    })
}

fn domain(f: UniFn, value: f64) -> JetError {
    JetError::Domain { func: f.name().to_string(), value }
}

fn falling(r: f64, m: usize) -> f64 {
    (0..m).fold(1.0, |acc, i| acc * (r - i as f64))
}

fn factorial(m: usize) -> f64 {
    (1..=m).fold(1.0, |acc, i| acc * i as f64)
}

/// Taylor coefficients of `tan` at `a0` via `p_{m+1}(t) = p_m'(t)(1 + t²)`.
fn tan_taylor(a0: f64, k: usize) -> Vec<f64> {
    let t = a0.tan();
    let mut p = vec![0.0, 1.0];
    let mut out = Vec::with_capacity(k + 1);
    for m in 0..=k {
        let v = p.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        out.push(v / factorial(m));
        let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
        let mut next = vec![0.0; dp.len() + 2];
        for (i, &c) in dp.iter().enumerate() {
            next[i] += c;
            next[i + 2] += c;
        }
        p = next;
    }
    out
}

pub fn apply_univariate(f: UniFn, a: &Jet) -> Result<Jet, JetError> {
    let a0 = a.value();
    let k = a.order();
    let tc: Vec<f64> = match f {
        UniFn::Exp => {
            let e = a0.exp();
            (0..=k).map(|m| e / factorial(m)).collect()
        }
        UniFn::Ln => {
            if a0 <= 0.0 {
                return Err(domain(f, a0));
            }
            (0..=k)
                .map(|m| {
                    if m == 0 {
                        a0.ln()
                    } else {
                        let s = if m % 2 == 1 { 1.0 } else { -1.0 };
                        s / (m as f64 * a0.powi(m as i32))
                    }
                })
                .collect()
        }
        UniFn::Sqrt => {
            if a0 <= 0.0 {
                return Err(domain(f, a0));
            }
            (0..=k).map(|m| falling(0.5, m) * a0.powf(0.5 - m as f64) / factorial(m)).collect()
        }
        UniFn::PowReal(r) => {
            if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
                if a0 == 0.0 && r < 0.0 {
                    return Err(domain(f, a0));
                }
                return a.powi(r as i32);
            }
            if a0 <= 0.0 {
                return Err(domain(f, a0));
            }
            (0..=k).map(|m| falling(r, m) * a0.powf(r - m as f64) / factorial(m)).collect()
        }
        UniFn::Sin | UniFn::Cos => {
            let (s, c) = a0.sin_cos();
            let cycle = if f == UniFn::Sin { [s, c, -s, -c] } else { [c, -s, -c, s] };
            (0..=k).map(|m| cycle[m % 4] / factorial(m)).collect()
        }
        UniFn::Tan => {
            if a0.cos().abs() < 1e-300 {
                return Err(domain(f, a0));
            }
            tan_taylor(a0, k)
        }
    };
    Ok(a.compose(&tc))
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let (n, k) = self.shape_to(&o);
        let mut r = if self.order() == k { self } else { self.truncate(k) };
        debug_assert_eq!(r.n(), n);
        for i in 0..r.len() {
            r.c[i] += o.c[i];
        }
        r
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let (_, k) = self.shape_to(&o);
        let mut r = if self.order() == k { self } else { self.truncate(k) };
        for i in 0..r.len() {
            r.c[i] -= o.c[i];
        }
        r
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        self.mul_impl(&o)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self.mul_impl(&o.recip())
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        let len = self.len();
        for v in &mut self.c[..len] {
            *v = -*v;
        }
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, s: f64) -> Jet {
        let len = self.len();
        for v in &mut self.c[..len] {
            *v *= s;
        }
        self
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, s: f64) -> Jet {
        self.c[0] += s;
        self
    }
}

impl AddAssign for Jet {
    fn add_assign(&mut self, o: Jet) {
        *self = *self + o;
    }
}

impl SubAssign for Jet {
    fn sub_assign(&mut self, o: Jet) {
        *self = *self - o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn var(i: usize, v: f64, n: usize, k: usize) -> Jet {
        Jet::seed_variable(i, v, n, k).unwrap()
    }

    #[test]
    fn table_sizes() {
        for n in 1..=4 {
            for k in 0..=4 {
                assert_eq!(multi_indices(n, k).len(), table_len(n, k));
                assert_eq!(Jet::zero(n, k).len(), table_len(n, k));
            }
        }
        assert_eq!(table_len(4, 4), MAX_LEN);
    }

    #[test]
    fn graded_lex_order() {
        let m = multi_indices(2, 2);
        assert_eq!(m, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        let m3 = multi_indices(3, 2);
        assert_eq!(&m3[4..], &[vec![2, 0, 0], vec![1, 1, 0], vec![1, 0, 1], vec![0, 2, 0], vec![0, 1, 1], vec![0, 0, 2]]);
    }

    #[test]
    fn seed_table() {
        let x = var(0, 3.0, 2, 2);
        assert_eq!(x.coeffs(), &[3.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(Jet::seed_variable(1, -1.0, 1, 2), Err(JetError::IndexOutOfRange { index: 1, n: 1 }));
    }

    #[test]
    fn product_of_seeds() {
        let p = var(0, 3.0, 2, 2) * var(1, 4.0, 2, 2);
        assert_eq!(p.value(), 12.0);
        assert_eq!(p.get(&[1, 0]), 4.0);
        assert_eq!(p.get(&[0, 1]), 3.0);
        assert_eq!(p.get(&[1, 1]), 1.0);
        assert_eq!(p.get(&[2, 0]), 0.0);
    }

    #[test]
    fn cube_by_leibniz() {
        let x = var(0, 2.0, 1, 3);
        let r = combine(BinOp::Mul, &(x * x), &x).unwrap();
        assert_eq!(r.coeffs(), &[8.0, 12.0, 12.0, 6.0]);
    }

    #[test]
    fn self_quotient_is_one() {
        let x = var(0, 1.3, 2, 4);
        let y = var(1, -0.7, 2, 4);
        let a = (x * y + x.apply(UniFn::Sin).unwrap()).apply(UniFn::Exp).unwrap();
        let q = combine(BinOp::Div, &a, &a).unwrap();
        assert_relative_eq!(q.value(), 1.0, epsilon = 1e-14);
        for v in &q.coeffs()[1..] {
            assert!(v.abs() < 1e-13, "{v}");
        }
    }

    #[test]
    fn combine_checks() {
        let a = Jet::zero(2, 2);
        assert!(matches!(combine(BinOp::Add, &a, &Jet::zero(2, 3)), Err(JetError::Mismatch(..))));
        assert!(matches!(combine(BinOp::Add, &a, &Jet::zero(3, 2)), Err(JetError::Mismatch(..))));
        assert_eq!(combine(BinOp::Div, &a, &a), Err(JetError::DivisionByZero));
    }

    #[test]
    fn ln_table() {
        let l = var(0, 2.0, 1, 3).apply(UniFn::Ln).unwrap();
        assert_relative_eq!(l.coeffs()[0], 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(l.coeffs()[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(l.coeffs()[2], -0.25, epsilon = 1e-15);
        assert_relative_eq!(l.coeffs()[3], 0.25, epsilon = 1e-15);
        assert!(matches!(var(0, -1.0, 1, 1).apply(UniFn::Ln), Err(JetError::Domain { .. })));
    }

    #[test]
    fn exp_of_zero() {
        let e = Jet::zero(3, 4).apply(UniFn::Exp).unwrap();
        assert_eq!(e.value(), 1.0);
        assert!(e.coeffs()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tan_matches_closed_form() {
        let t = var(0, 0.4, 1, 4).apply(UniFn::Tan).unwrap();
        let s = 1.0 / 0.4f64.cos().powi(2);
        let tn = 0.4f64.tan();
        assert_relative_eq!(t.coeffs()[1], s, epsilon = 1e-14);
        assert_relative_eq!(t.coeffs()[2], 2.0 * tn * s, epsilon = 1e-13);
        assert_relative_eq!(t.coeffs()[3], 2.0 * s * s + 4.0 * tn * tn * s, epsilon = 1e-12);
        assert_relative_eq!(t.coeffs()[4], 16.0 * tn * s * s + 8.0 * tn.powi(3) * s, epsilon = 1e-12);
    }

    #[test]
    fn derivative_and_truncate() {
        let x = var(0, 1.5, 2, 4);
        let y = var(1, 0.5, 2, 4);
        let f = x * x * y;
        let fx = f.derivative(0);
        assert_eq!(fx.order(), 3);
        assert_relative_eq!(fx.value(), 2.0 * 1.5 * 0.5);
        assert_relative_eq!(fx.get(&[1, 0]), 2.0 * 0.5);
        assert_relative_eq!(fx.get(&[1, 1]), 2.0);
        let ft = f.truncate(1);
        assert_eq!(ft.len(), 3);
        assert_eq!(ft.get(&[1, 1]), 0.0);
    }

    #[test]
    fn mixed_orders_truncate_to_min() {
        let a = var(0, 1.0, 2, 4);
        let b = var(1, 2.0, 2, 2);
        let p = a * b;
        assert_eq!(p.order(), 2);
        assert_eq!((a + b).order(), 2);
    }

    #[test]
    fn powi_negative() {
        let x = var(0, 2.0, 1, 3);
        let r = x.powi(-2).unwrap();
        assert_relative_eq!(r.coeffs()[0], 0.25);
        assert_relative_eq!(r.coeffs()[1], -0.25);
        assert_relative_eq!(r.coeffs()[2], 6.0 / 16.0);
        assert_relative_eq!(r.coeffs()[3], -24.0 / 32.0);
        assert!(Jet::zero(1, 1).powi(-1).is_err());
    }

    fn fd_check(f: impl Fn(&[Jet]) -> Jet, p: &[f64], tol: f64) {
        let n = p.len();
        let jets: Vec<Jet> = (0..n).map(|i| var(i, p[i], n, 2)).collect();
        let j = f(&jets);
        let ev = |q: &[f64]| f(&q.iter().map(|&v| Jet::constant(v, n, 0)).collect::<Vec<_>>()).value();
        let h = 1e-4;
        for i in 0..n {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[i] += h;
            pm[i] -= h;
            let d = (ev(&pp) - ev(&pm)) / (2.0 * h);
            let mut alpha = vec![0; n];
            alpha[i] = 1;
            assert!((d - j.get(&alpha)).abs() < tol * (1.0 + d.abs()), "d{i}: fd {d} vs {}", j.get(&alpha));
            for l in 0..n {
                let mut a = vec![0; n];
                a[i] += 1;
                a[l] += 1;
                let q = |si: f64, sl: f64| {
                    let mut r = p.to_vec();
                    r[i] += si;
                    r[l] += sl;
                    ev(&r)
                };
                let d2 = (q(h, h) - q(h, -h) - q(-h, h) + q(-h, -h)) / (4.0 * h * h);
                assert!((d2 - j.get(&a)).abs() < 1e3 * tol * (1.0 + d2.abs()), "d{i}{l}: fd {d2} vs {}", j.get(&a));
            }
        }
    }

    #[test]
    fn sqrt_norm_matches_fd() {
        fd_check(|v| (v[0] * v[0] + v[1] * v[1]).apply(UniFn::Sqrt).unwrap(), &[3.0, 4.0], 1e-7);
    }

    #[test]
    fn chain_identity() {
        let x = var(0, 0.8, 3, 4);
        let y = var(1, 1.1, 3, 4);
        let z = var(2, 0.3, 3, 4);
        let a = x * x + y * z + 1.0;
        let b = a.apply(UniFn::Ln).unwrap().apply(UniFn::Exp).unwrap();
        for (u, v) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
        }
    }

    proptest! {
        #[test]
        fn add_is_linear(x0 in -2.0..2.0f64, y0 in -2.0..2.0f64, s in -3.0..3.0f64) {
            let x = var(0, x0, 2, 3);
            let y = var(1, y0, 2, 3);
            let a = x * y * y;
            let b = (x * x).apply(UniFn::Sin).unwrap();
            let c = (x + y).apply(UniFn::Exp).unwrap();
            let lhs = (a * s + b) + c;
            let rhs = a * s + (b + c);
            for (u, v) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()));
            }
        }

        #[test]
        fn mul_matches_fd(x0 in 0.2..2.0f64, y0 in 0.2..2.0f64) {
            fd_check(|v| (v[0] * v[1] + 1.0) * (v[0] * v[0]).apply(UniFn::Cos).unwrap(), &[x0, y0], 1e-6);
        }

        #[test]
        fn powreal_matches_pow(x0 in 0.1..3.0f64, r in -2.5..2.5f64) {
            let x = var(0, x0, 1, 4);
            let j = x.apply(UniFn::PowReal(r)).unwrap();
            for m in 0..=4 {
                let exact = falling(r, m) * x0.powf(r - m as f64);
                prop_assert!((j.coeffs()[m] - exact).abs() < 1e-10 * (1.0 + exact.abs()));
            }
        }
    }
}
