//! Generic log densities used by the hierarchical models.

use core::f64::consts::PI;

use crate::ad::Real;
use crate::special::{ln_beta, ln_gamma, LN_SQRT_2PI};

/// Normal prior given by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normal {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfNormal {
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    pub df: f64,
    pub loc: f64,
    pub scale: f64,
}

impl Normal {
    pub fn new(mean: f64, sd: f64) -> Self {
        Normal { mean, sd }
    }

    pub fn lpdf<T: Real>(&self, x: T) -> T {
        let z = (x - self.mean) / self.sd;
        z.square() * -0.5 - (LN_SQRT_2PI + libm::log(self.sd))
    }
}

impl HalfNormal {
    pub fn new(sd: f64) -> Self {
        HalfNormal { sd }
    }

    /// Density on `x > 0`.
    pub fn lpdf<T: Real>(&self, x: T) -> T {
        let z = x / self.sd;
        z.square() * -0.5 - (LN_SQRT_2PI + libm::log(self.sd) - core::f64::consts::LN_2)
    }
}

impl StudentT {
    pub fn new(df: f64, loc: f64, scale: f64) -> Self {
        StudentT { df, loc, scale }
    }

    pub fn lpdf<T: Real>(&self, x: T) -> T {
        let nu = self.df;
        let z = (x - self.loc) / self.scale;
        let c = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * libm::log(nu * PI) - libm::log(self.scale);
        (z.square() / nu).ln_1p() * (-0.5 * (nu + 1.0)) + c
    }
}

/// `(rho + 1) / 2 ~ Beta(shape, shape)`, expressed as a density on `rho`.
pub fn correlation_lpdf<T: Real>(rho: T, shape: f64) -> T {
    let a = (rho + 1.0) * 0.5;
    let b = (-rho + 1.0) * 0.5;
    (a.ln() + b.ln()) * (shape - 1.0) - (ln_beta(shape, shape) + core::f64::consts::LN_2)
}

/// Log density of `n` bivariate-normal pairs sharing one mean and covariance.
pub fn bvn_lpdf<T: Real>(x0: &[T], x1: &[T], mu: [T; 2], sd: [T; 2], rho: T) -> T {
    let n = x0.len() as f64;
    let one_m = -rho.square() + 1.0;
    let mut q = mu[0].constant(0.0);
    for (&a, &b) in x0.iter().zip(x1) {
        let z0 = (a - mu[0]) / sd[0];
        let z1 = (b - mu[1]) / sd[1];
        q += z0.square() + z1.square() - z0 * z1 * rho * 2.0;
    }
    -(sd[0].ln() + sd[1].ln() + one_m.ln() * 0.5) * n - q / one_m * 0.5 - 2.0 * LN_SQRT_2PI * n
}

/// Log density of `n` iid normal values.
pub fn normal_iid_lpdf<T: Real>(x: &[T], mu: T, sd: T) -> T {
    let mut q = mu.constant(0.0);
    for &v in x {
        q += ((v - mu) / sd).square();
    }
    q * -0.5 - sd.ln() * x.len() as f64 - LN_SQRT_2PI * x.len() as f64
}

/// Dirichlet log density of simplex `x` with concentration `alpha`.
pub fn dirichlet_lpdf<T: Real>(x: &[T], alpha: &[T]) -> T {
    let mut sum_a = alpha[0].constant(0.0);
    let mut lp = alpha[0].constant(0.0);
    for (&xi, &ai) in x.iter().zip(alpha) {
        sum_a += ai;
        lp += (ai - 1.0) * xi.ln() - ai.ln_gamma();
    }
    lp + sum_a.ln_gamma()
}
