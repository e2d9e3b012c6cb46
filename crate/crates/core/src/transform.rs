//! Bijections between the unconstrained sampling space and constrained
//! parameters, with their log-Jacobians, plus the block layout of a model's
//! parameter vector.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::ad::Real;
use crate::error::{bail, Result};
use crate::special;

/// `c_1 = u_1`, `c_k = c_{k-1} + exp(u_k)`. Returns `sum_{k>=2} u_k`.
pub fn ordered<T: Real>(u: &[T], out: &mut Vec<T>) -> T {
    let mut lj = u[0].constant(0.0);
    let mut c = u[0];
    out.push(c);
    for &v in &u[1..] {
        c = c + v.exp();
        lj += v;
        out.push(c);
    }
    lj
}

pub fn ordered_inv(c: &[f64]) -> Result<Vec<f64>> {
    let mut u = Vec::with_capacity(c.len());
    u.push(c[0]);
    for w in c.windows(2) {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            bail!(Domain, "values are not strictly increasing");
        }
        u.push(libm::log(d));
    }
    Ok(u)
}

/// Stick-breaking simplex of length `u.len() + 1`; centered so that `u = 0`
/// maps to the uniform simplex.
pub fn simplex<T: Real>(u: &[T], out: &mut Vec<T>) -> T {
    let k = u.len() + 1;
    let mut lj = u[0].constant(0.0);
    let mut stick = u[0].constant(1.0);
    for (i, &v) in u.iter().enumerate() {
        let adj = v - libm::log((k - i - 1) as f64);
        // z = logistic(adj), log z = -softplus(-adj), log(1-z) = -softplus(adj)
        let lz = -(-adj).softplus();
        let l1z = -adj.softplus();
        let x = stick * lz.exp();
        lj += stick.ln() + lz + l1z;
        stick = stick * l1z.exp();
        out.push(x);
    }
    out.push(stick);
    lj
}

pub fn simplex_inv(x: &[f64]) -> Result<Vec<f64>> {
    let k = x.len();
    if x.iter().any(|&v| !(v > 0.0)) {
        bail!(Domain, "simplex entries must be positive");
    }
    let mut stick = 1.0;
    let mut u = Vec::with_capacity(k - 1);
    for (i, &v) in x[..k - 1].iter().enumerate() {
        let z = (v / stick).min(1.0 - 1e-15);
        u.push(special::logit(z) + libm::log((k - i - 1) as f64));
        stick -= v;
    }
    Ok(u)
}

/// `exp(u)` with log-Jacobian `u`.
pub fn positive<T: Real>(u: T) -> (T, T) {
    (u.exp(), u)
}

/// `tanh(u)` with log-Jacobian `log(1 - tanh(u)^2)`, computed stably.
pub fn correlation<T: Real>(u: T) -> (T, T) {
    let lj = (-(u * -2.0).softplus() - u + core::f64::consts::LN_2) * 2.0;
    (u.tanh(), lj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Free,
    Positive,
    Correlation,
    /// Increasing vector of the given length.
    Ordered(usize),
    /// Simplex over the given number of categories.
    Simplex(usize),
}

impl BlockKind {
    fn u_len(self) -> usize {
        match self {
            BlockKind::Free | BlockKind::Positive | BlockKind::Correlation => 1,
            BlockKind::Ordered(n) => n,
            BlockKind::Simplex(k) => k - 1,
        }
    }

    fn c_len(self) -> usize {
        match self {
            BlockKind::Free | BlockKind::Positive | BlockKind::Correlation => 1,
            BlockKind::Ordered(n) => n,
            BlockKind::Simplex(k) => k,
        }
    }
}

/// A named, repeated block of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
    pub count: usize,
    pub u_offset: usize,
    pub c_offset: usize,
}

impl Block {
    pub fn width(&self) -> usize {
        self.kind.c_len()
    }

    /// Offset of element `j` of replicate `i` in the constrained vector.
    pub fn at(&self, i: usize, j: usize) -> usize {
        self.c_offset + i * self.kind.c_len() + j
    }

    /// All replicates of a width-one block.
    pub fn range_all(&self, count: usize) -> core::ops::Range<usize> {
        self.c_offset..self.c_offset + count * self.width()
    }

    pub fn range(&self, i: usize) -> core::ops::Range<usize> {
        let w = self.kind.c_len();
        self.c_offset + i * w..self.c_offset + (i + 1) * w
    }
}

/// Handle into a [`ParamLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamLayout {
    pub blocks: Vec<Block>,
    u_dim: usize,
    c_dim: usize,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, kind: BlockKind, count: usize) -> BlockId {
        self.blocks.push(Block {
            name: name.into(),
            kind,
            count,
            u_offset: self.u_dim,
            c_offset: self.c_dim,
        });
        self.u_dim += kind.u_len() * count;
        self.c_dim += kind.c_len() * count;
        BlockId(self.blocks.len() - 1)
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0]
    }

    pub fn find(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn u_dim(&self) -> usize {
        self.u_dim
    }

    pub fn c_dim(&self) -> usize {
        self.c_dim
    }

    /// Maps `u` to constrained values (appended to `out`) and returns the
    /// total log-Jacobian.
    pub fn constrain<T: Real>(&self, u: &[T], out: &mut Vec<T>) -> T {
        out.clear();
        out.reserve(self.c_dim);
        let mut lj = u[0].constant(0.0);
        for b in &self.blocks {
            let w = b.kind.u_len();
            for i in 0..b.count {
                let s = &u[b.u_offset + i * w..b.u_offset + (i + 1) * w];
                match b.kind {
                    BlockKind::Free => out.push(s[0]),
                    BlockKind::Positive => {
                        let (v, l) = positive(s[0]);
                        out.push(v);
                        lj += l;
                    }
                    BlockKind::Correlation => {
                        let (v, l) = correlation(s[0]);
                        out.push(v);
                        lj += l;
                    }
                    BlockKind::Ordered(_) => lj += ordered(s, out),
                    BlockKind::Simplex(_) => lj += simplex(s, out),
                }
            }
        }
        lj
    }

    pub fn constrain_f64(&self, u: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        self.constrain(u, &mut out);
        out
    }

    pub fn unconstrain(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.c_dim {
            bail!(Dimension, "expected {} constrained values, got {}", self.c_dim, c.len());
        }
        let mut u = Vec::with_capacity(self.u_dim);
        for b in &self.blocks {
            let w = b.kind.c_len();
            for i in 0..b.count {
                let s = &c[b.c_offset + i * w..b.c_offset + (i + 1) * w];
                match b.kind {
                    BlockKind::Free => u.push(s[0]),
                    BlockKind::Positive => {
                        if !(s[0] > 0.0) {
                            bail!(Domain, "{} must be positive", b.name);
                        }
                        u.push(libm::log(s[0]))
                    }
                    BlockKind::Correlation => {
                        if !(s[0].abs() < 1.0) {
                            bail!(Domain, "{} must lie in (-1, 1)", b.name);
                        }
                        u.push(libm::atanh(s[0]))
                    }
                    BlockKind::Ordered(_) => u.extend(ordered_inv(s)?),
                    BlockKind::Simplex(_) => u.extend(simplex_inv(s)?),
                }
            }
        }
        Ok(u)
    }

    /// Names of the constrained values, 1-based: `beta0[3]`, `C0[2,5]`, `kappa0`.
    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.c_dim);
        for b in &self.blocks {
            let w = b.kind.c_len();
            let vector = matches!(b.kind, BlockKind::Ordered(_) | BlockKind::Simplex(_));
            for i in 0..b.count {
                for j in 0..w {
                    out.push(match (b.count > 1, vector) {
                        (true, true) => format!("{}[{},{}]", b.name, i + 1, j + 1),
                        (true, false) => format!("{}[{}]", b.name, i + 1),
                        (false, true) => format!("{}[{}]", b.name, j + 1),
                        (false, false) => b.name.clone(),
                    });
                }
            }
        }
        out
    }
}
