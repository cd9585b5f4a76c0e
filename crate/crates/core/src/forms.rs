//! Quadratic expressions in a cubic form and small tensor assembly helpers.
//!
//! For a covariant cubic `S` write `Ŝ(X,Y)` for the endomorphism-valued form obtained by
//! raising the last slot and `S_X = Ŝ(X,·)`.

use crate::tensor::{Metric, Scalar, Slot, Tensor};

fn check_cubic<S: Scalar>(s: &Tensor<S>) {
    assert!(s.rank() == 3 && s.is_covariant(), "expected a covariant (0,3) tensor");
}

/// `tr(S_X S_Y) = Σ S(X,a,b) S(Y,a',b')` with both pairs contracted through the metric.
pub fn trace_square<S: Scalar>(s: &Tensor<S>, m: &Metric<S>) -> Tensor<S> {
    check_cubic(s);
    let up = s.raise(1, m).raise(2, m);
    let n = s.n();
    Tensor::covariant(n, 2, |i| {
        let mut acc = s.like().zero_like();
        for a in 0..n {
            for b in 0..n {
                acc = acc + s.get(&[i[0], a, b]) * up.get(&[i[1], a, b]);
            }
        }
        acc
    })
}

/// `g(S_X Y, S_Z W) = Σ S(X,Y,a) S(Z,W,a')`.
pub fn pair_square<S: Scalar>(s: &Tensor<S>, m: &Metric<S>) -> Tensor<S> {
    check_cubic(s);
    let up = s.raise(2, m);
    let n = s.n();
    Tensor::covariant(n, 4, |i| {
        let mut acc = s.like().zero_like();
        for a in 0..n {
            acc = acc + s.get(&[i[0], i[1], a]) * up.get(&[i[2], i[3], a]);
        }
        acc
    })
}

/// `g(S_X S_Y Z, W) = Σ S(X,W,c) S(Y,Z,c')`.
pub fn composition<S: Scalar>(s: &Tensor<S>, m: &Metric<S>) -> Tensor<S> {
    check_cubic(s);
    let up = s.raise(2, m);
    let n = s.n();
    Tensor::covariant(n, 4, |i| {
        let (x, y, z, w) = (i[0], i[1], i[2], i[3]);
        let mut acc = s.like().zero_like();
        for c in 0..n {
            acc = acc + s.get(&[x, w, c]) * up.get(&[y, z, c]);
        }
        acc
    })
}

/// `S(·,·,v)` for a contravariant vector `v`.
pub fn insert_last<S: Scalar>(s: &Tensor<S>, v: &Tensor<S>) -> Tensor<S> {
    assert_eq!(v.slots(), [Slot::Contra]);
    let r = s.rank();
    s.contract(r - 1, v, 0)
}

/// `u(X)g(Y,Z) + u(Y)g(X,Z) + u(Z)g(X,Y)`.
pub fn one_form_cubic<S: Scalar>(u: &Tensor<S>, g: &Tensor<S>) -> Tensor<S> {
    let n = u.n();
    Tensor::covariant(n, 3, |i| {
        let (x, y, z) = (i[0], i[1], i[2]);
        u.get(&[x]) * g.get(&[y, z]) + u.get(&[y]) * g.get(&[x, z]) + u.get(&[z]) * g.get(&[x, y])
    })
}

/// Trace of a (0,2) tensor.
pub fn trace2<S: Scalar>(b: &Tensor<S>, m: &Metric<S>) -> S {
    b.trace(0, 1, m).data()[0]
}

/// `b − (tr b / n) g`.
pub fn tracefree2<S: Scalar>(b: &Tensor<S>, m: &Metric<S>) -> Tensor<S> {
    let n = b.n() as f64;
    b - &m.g.scale_by(trace2(b, m) * (1.0 / n))
}

/// `a(v)` for a covector `a` and a vector `v`.
pub fn pairing<S: Scalar>(a: &Tensor<S>, v: &Tensor<S>) -> S {
    a.contract(0, v, 0).data()[0]
}

/// Splits a symmetric cubic into its trace-free part and the 1-form `u = tr C / (n+2)`.
pub fn split_cubic<S: Scalar>(c: &Tensor<S>, m: &Metric<S>) -> (Tensor<S>, Tensor<S>) {
    check_cubic(c);
    let n = c.n() as f64;
    let u = c.trace(0, 1, m).scale(1.0 / (n + 2.0));
    let uu = &*c - &one_form_cubic(&u, &m.g);
    (uu, u)
}
