//! Reverse-mode automatic differentiation.
//!
//! Model densities are written once against [`Real`] and evaluated either on
//! plain `f64` or on [`Var`], which records a tape. Expensive inner blocks
//! (the cumulative-count likelihood) push a single fused node with
//! analytically computed partials instead of many elementary ones.

use alloc::vec::Vec;
use core::cell::RefCell;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::special;

pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
{
    fn value(self) -> f64;
    /// A constant living on the same tape as `self`.
    fn constant(self, v: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn softplus(self) -> Self;
    fn ln_gamma(self) -> Self;
    fn normal_cdf(self) -> Self;
    fn ln_normal_cdf(self) -> Self;
    /// `ln(1 + x)`.
    fn ln_1p(self) -> Self;
    /// Node whose value is `value` and whose partial with respect to
    /// `inputs[i]` is `partials[i]`.
    fn fused(inputs: &[Self], value: f64, partials: &[f64]) -> Self;

    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn constant(self, v: f64) -> Self {
        v
    }
    #[inline]
    fn exp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        libm::log(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        libm::sqrt(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        libm::tanh(self)
    }
    #[inline]
    fn softplus(self) -> Self {
        special::softplus(self)
    }
    #[inline]
    fn ln_gamma(self) -> Self {
        special::ln_gamma(self)
    }
    #[inline]
    fn normal_cdf(self) -> Self {
        special::normal_cdf(self)
    }
    #[inline]
    fn ln_normal_cdf(self) -> Self {
        special::ln_normal_cdf(self)
    }
    #[inline]
    fn ln_1p(self) -> Self {
        libm::log1p(self)
    }
    #[inline]
    fn fused(_inputs: &[Self], value: f64, _partials: &[f64]) -> Self {
        value
    }
}

const CONST: u32 = u32::MAX;

#[derive(Default)]
struct Inner {
    // edges of node i are parents[starts[i]..starts[i + 1]]
    starts: Vec<u32>,
    parents: Vec<u32>,
    weights: Vec<f64>,
}

/// Gradient tape. Nodes are appended in evaluation order.
pub struct Tape {
    inner: RefCell<Inner>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::with_capacity(0)
    }

    pub fn with_capacity(edges: usize) -> Self {
        let mut starts = Vec::with_capacity(edges / 2 + 1);
        starts.push(0);
        Tape {
            inner: RefCell::new(Inner {
                starts,
                parents: Vec::with_capacity(edges),
                weights: Vec::with_capacity(edges),
            }),
        }
    }

    /// Independent variable.
    pub fn var(&self, v: f64) -> Var<'_> {
        let mut t = self.inner.borrow_mut();
        let idx = (t.starts.len() - 1) as u32;
        let end = t.parents.len() as u32;
        t.starts.push(end);
        Var { tape: self, idx, val: v }
    }

    pub fn constant(&self, v: f64) -> Var<'_> {
        Var { tape: self, idx: CONST, val: v }
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_edges(&self) -> usize {
        self.inner.borrow().parents.len()
    }

    fn push(&self, val: f64, edges: &[(u32, f64)]) -> Var<'_> {
        let mut t = self.inner.borrow_mut();
        let before = t.parents.len();
        for &(p, w) in edges {
            if p != CONST {
                t.parents.push(p);
                t.weights.push(w);
            }
        }
        if t.parents.len() == before {
            return Var { tape: self, idx: CONST, val };
        }
        let idx = (t.starts.len() - 1) as u32;
        let end = t.parents.len() as u32;
        t.starts.push(end);
        Var { tape: self, idx, val }
    }

    /// Adjoints of `out` with respect to the first `grad.len()` nodes.
    pub fn gradient_into(&self, out: Var<'_>, grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        if out.idx == CONST {
            return;
        }
        let t = self.inner.borrow();
        let n = out.idx as usize + 1;
        let mut adj = alloc::vec![0.0; n];
        adj[n - 1] = 1.0;
        for i in (0..n).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (t.starts[i] as usize, t.starts[i + 1] as usize);
            for j in s..e {
                adj[t.parents[j] as usize] += a * t.weights[j];
            }
        }
        let m = grad.len().min(n);
        grad[..m].copy_from_slice(&adj[..m]);
    }
}

/// Value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl core::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Var({}, #{})", self.val, self.idx)
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    #[inline]
    fn unary(self, val: f64, d: f64) -> Self {
        if self.idx == CONST {
            return Var { tape: self.tape, idx: CONST, val };
        }
        self.tape.push(val, &[(self.idx, d)])
    }

    #[inline]
    fn binary(self, other: Self, val: f64, da: f64, db: f64) -> Self {
        if self.idx == CONST && other.idx == CONST {
            return Var { tape: self.tape, idx: CONST, val };
        }
        self.tape.push(val, &[(self.idx, da), (other.idx, db)])
    }
}

impl Add for Var<'_> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.val + o.val, 1.0, 1.0)
    }
}
impl Sub for Var<'_> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.val - o.val, 1.0, -1.0)
    }
}
impl Mul for Var<'_> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.val * o.val, o.val, self.val)
    }
}
impl Div for Var<'_> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.val;
        let v = self.val * inv;
        self.binary(o, v, inv, -v * inv)
    }
}
impl Neg for Var<'_> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.val, -1.0)
    }
}
impl Add<f64> for Var<'_> {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        self.unary(self.val + o, 1.0)
    }
}
impl Sub<f64> for Var<'_> {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        self.unary(self.val - o, 1.0)
    }
}
impl Mul<f64> for Var<'_> {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        self.unary(self.val * o, o)
    }
}
impl Div<f64> for Var<'_> {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        self.unary(self.val / o, 1.0 / o)
    }
}
impl AddAssign for Var<'_> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Real for Var<'_> {
    #[inline]
    fn value(self) -> f64 {
        self.val
    }
    #[inline]
    fn constant(self, v: f64) -> Self {
        Var { tape: self.tape, idx: CONST, val: v }
    }
    fn exp(self) -> Self {
        let e = libm::exp(self.val);
        self.unary(e, e)
    }
    fn ln(self) -> Self {
        self.unary(libm::log(self.val), 1.0 / self.val)
    }
    fn sqrt(self) -> Self {
        let s = libm::sqrt(self.val);
        self.unary(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = libm::tanh(self.val);
        self.unary(t, 1.0 - t * t)
    }
    fn softplus(self) -> Self {
        self.unary(special::softplus(self.val), special::logistic(self.val))
    }
    fn ln_gamma(self) -> Self {
        self.unary(special::ln_gamma(self.val), special::digamma(self.val))
    }
    fn normal_cdf(self) -> Self {
        self.unary(special::normal_cdf(self.val), special::normal_pdf(self.val))
    }
    fn ln_normal_cdf(self) -> Self {
        self.unary(special::ln_normal_cdf(self.val), special::inv_mills(self.val))
    }
    fn ln_1p(self) -> Self {
        self.unary(libm::log1p(self.val), 1.0 / (1.0 + self.val))
    }
    fn fused(inputs: &[Self], value: f64, partials: &[f64]) -> Self {
        debug_assert_eq!(inputs.len(), partials.len());
        let tape = inputs[0].tape;
        let mut t = tape.inner.borrow_mut();
        let before = t.parents.len();
        for (x, &w) in inputs.iter().zip(partials) {
            if x.idx != CONST && w != 0.0 {
                t.parents.push(x.idx);
                t.weights.push(w);
            }
        }
        if t.parents.len() == before {
            return Var { tape, idx: CONST, val: value };
        }
        let idx = (t.starts.len() - 1) as u32;
        let end = t.parents.len() as u32;
        t.starts.push(end);
        Var { tape, idx, val: value }
    }
}

/// Evaluates `f` on a fresh tape and writes its gradient into `grad`.
pub fn value_and_gradient<F>(x: &[f64], grad: &mut [f64], capacity: usize, f: F) -> f64
where
    F: for<'t> FnOnce(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::with_capacity(capacity);
    let xs: Vec<Var<'_>> = x.iter().map(|&v| tape.var(v)).collect();
    let out = f(&xs);
    tape.gradient_into(out, grad);
    out.val
}

/// Central finite-difference gradient, used to check analytic gradients.
pub fn finite_diff_gradient<F: Fn(&[f64]) -> f64>(x: &[f64], h: f64, f: F) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = xp[i];
            xp[i] = orig + h;
            let up = f(&xp);
            xp[i] = orig - h;
            let dn = f(&xp);
            xp[i] = orig;
            (up - dn) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly<T: Real>(x: &[T]) -> T {
        let a = x[0];
        let b = x[1];
        (a * b).exp() + (a / b).ln_1p() - b.tanh() * 3.0 + a.ln_gamma() + b.normal_cdf().ln()
            + (a - 2.0).softplus()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let x = [0.7, 1.3];
        let mut g = [0.0; 2];
        let v = value_and_gradient(&x, &mut g, 64, |xs| poly(xs));
        assert!((v - poly(&x)).abs() < 1e-14);
        let fd = finite_diff_gradient(&x, 1e-6, |x| poly(x));
        for i in 0..2 {
            assert!((g[i] - fd[i]).abs() < 1e-7, "{} vs {}", g[i], fd[i]);
        }
    }

    #[test]
    fn constants_leave_no_nodes() {
        let tape = Tape::new();
        let c = tape.constant(2.0);
        let d = (c * c).exp() + 1.0;
        assert_eq!(tape.len(), 0);
        assert!((d.value() - (libm::exp(4.0) + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn fused_node_propagates_partials() {
        let x = [0.5, -1.0, 2.0];
        let mut g = [0.0; 3];
        value_and_gradient(&x, &mut g, 16, |xs| {
            let s = xs[0] * 2.0;
            Real::fused(&[s, xs[1], xs[2]], 0.0, &[1.0, 3.0, -1.0])
        });
        assert_eq!(g, [2.0, 3.0, -1.0]);
    }
}
