//! Threshold-probability algebra, the factorized binomial likelihood and the
//! induced-Dirichlet cutpoint density.

use alloc::vec;
use alloc::vec::Vec;

use crate::ad::Real;
use crate::data::StudyCounts;
use crate::error::{bail, Result};
use crate::special::{self, ln_normal_cdf, ln_normal_interval, normal_logpdf, LN_SQRT_2PI};

/// Probabilities are clamped into `[EPS, 1 - EPS]` before logs.
pub const EPS: f64 = 1e-12;

/// Strictly increasing latent cutpoints `c_1 < ... < c_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cutpoints(Vec<f64>);

impl Cutpoints {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            bail!(Domain, "at least one cutpoint is required");
        }
        if c.iter().any(|v| !v.is_finite()) {
            bail!(Domain, "non-finite cutpoint");
        }
        if let Some(k) = c.windows(2).position(|w| w[1] <= w[0]) {
            bail!(Domain, "cutpoints not strictly increasing at k={}", k + 2);
        }
        Ok(Cutpoints(c))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Category probabilities `p_1..p_K`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalProbs(Vec<f64>);

impl OrdinalProbs {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            bail!(Domain, "need at least two categories");
        }
        if p.iter().any(|&v| !(v >= 0.0)) {
            bail!(Domain, "negative or NaN category probability");
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            bail!(Domain, "category probabilities sum to {s}");
        }
        Ok(OrdinalProbs(p))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    /// `P(Y <= k)` for `k = 1..K-1`.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.0[..self.0.len() - 1]
            .iter()
            .map(|&p| {
                acc += p;
                acc
            })
            .collect()
    }

    /// `P(Y > k)` for `k = 1..K-1`, summed from the top to keep tail accuracy.
    pub fn survival(&self) -> Vec<f64> {
        let k = self.0.len();
        let mut out = vec![0.0; k - 1];
        let mut acc = 0.0;
        for j in (1..k).rev() {
            acc += self.0[j];
            out[j - 1] = acc;
        }
        out
    }

    /// `P(Y > k | Y > k - 1)`, clamped.
    pub fn conditional(&self) -> Vec<f64> {
        let s = self.survival();
        let mut prev = 1.0;
        s.iter()
            .map(|&v| {
                let r = if prev > 0.0 { v / prev } else { EPS };
                prev = v;
                r.clamp(EPS, 1.0 - EPS)
            })
            .collect()
    }
}

/// Concentration of the induced-Dirichlet prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletHyper {
    pub alpha: Vec<f64>,
    pub phi_mean: Vec<f64>,
    pub kappa: f64,
    pub anchor: f64,
}

/// Floor added to every concentration, `alpha = ALPHA_FLOOR + phi * kappa`.
pub const ALPHA_FLOOR: f64 = 0.01;

impl DirichletHyper {
    pub fn from_mean(phi_mean: Vec<f64>, kappa: f64, anchor: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            bail!(Domain, "kappa must be non-negative");
        }
        let s: f64 = phi_mean.iter().sum();
        if (s - 1.0).abs() > 1e-9 || phi_mean.iter().any(|&p| p < 0.0) {
            bail!(Domain, "phi_mean is not a simplex");
        }
        let alpha = phi_mean.iter().map(|&p| ALPHA_FLOOR + p * kappa).collect();
        Ok(DirichletHyper { alpha, phi_mean, kappa, anchor })
    }

    /// Hyperparameters with the given concentrations; `phi_mean` and `kappa`
    /// are recovered from `alpha - ALPHA_FLOOR` when that is positive.
    pub fn from_alpha(alpha: Vec<f64>, anchor: f64) -> Result<Self> {
        if alpha.iter().any(|&a| !(a > 0.0)) {
            bail!(Domain, "Dirichlet concentrations must be positive");
        }
        let kappa: f64 = alpha.iter().map(|&a| (a - ALPHA_FLOOR).max(0.0)).sum();
        let phi_mean = if kappa > 0.0 {
            alpha.iter().map(|&a| (a - ALPHA_FLOOR).max(0.0) / kappa).collect()
        } else {
            vec![1.0 / alpha.len() as f64; alpha.len()]
        };
        Ok(DirichletHyper { alpha, phi_mean, kappa, anchor })
    }

    /// Flat Dirichlet (all ones) on K categories.
    pub fn flat(k: usize) -> Self {
        Self::from_alpha(vec![1.0; k], 0.0).unwrap()
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale > 0.0) || !scale.is_finite() {
        bail!(Domain, "scale must be positive, got {scale}");
    }
    Ok(())
}

/// `p_j = Phi((c_j - beta)/scale) - Phi((c_{j-1} - beta)/scale)`.
pub fn ordinal_probs(c: &Cutpoints, beta: f64, scale: f64) -> Result<OrdinalProbs> {
    check_scale(scale)?;
    let z: Vec<f64> = c.0.iter().map(|&ck| (ck - beta) / scale).collect();
    let k = z.len() + 1;
    let mut p = Vec::with_capacity(k);
    for j in 0..k {
        let lo = if j == 0 { f64::NEG_INFINITY } else { z[j - 1] };
        let hi = if j == k - 1 { f64::INFINITY } else { z[j] };
        p.push(interval(lo, hi));
    }
    Ok(OrdinalProbs(p))
}

fn interval(lo: f64, hi: f64) -> f64 {
    match (lo == f64::NEG_INFINITY, hi == f64::INFINITY) {
        (true, true) => 1.0,
        (true, false) => special::normal_cdf(hi),
        (false, true) => special::normal_sf(lo),
        (false, false) => special::normal_interval(lo, hi),
    }
}

/// `P^cond_k = P^surv_k / P^surv_{k-1}` with `P^surv_k = Phi((beta - c_k)/scale)`.
pub fn conditional_probs(c: &Cutpoints, beta: f64, scale: f64) -> Result<Vec<f64>> {
    check_scale(scale)?;
    let mut prev = 0.0;
    Ok(c.0
        .iter()
        .map(|&ck| {
            let ls = ln_normal_cdf((beta - ck) / scale);
            let r = libm::exp(ls - prev);
            prev = ls;
            r.clamp(EPS, 1.0 - EPS)
        })
        .collect())
}

/// Factorized binomial log-likelihood kernel (binomial coefficients dropped).
///
/// Missing thresholds are skipped by conditioning each observed count on the
/// previous observed one, with success probability equal to the product of
/// the intervening conditional probabilities.
pub fn factorized_loglik(counts: &StudyCounts, pcond: &[f64]) -> Result<f64> {
    if pcond.len() != counts.cum.len() {
        bail!(Dimension, "{} conditional probabilities for {} thresholds", pcond.len(), counts.cum.len());
    }
    let mut ll = 0.0;
    let mut prev_c = counts.n_total;
    let mut next = 0;
    for (k, c) in counts.observed() {
        let mut r: f64 = pcond[next..=k].iter().product();
        if !r.is_finite() {
            bail!(Numeric, "non-finite probability ratio at threshold {}", k + 1);
        }
        r = r.clamp(EPS, 1.0 - EPS);
        let fail = prev_c - c;
        if c > 0 {
            ll += c as f64 * libm::log(r);
        }
        if fail > 0 {
            ll += fail as f64 * libm::log1p(-r);
        }
        prev_c = c;
        next = k + 1;
    }
    if ll.is_nan() {
        bail!(Numeric, "NaN log-likelihood");
    }
    Ok(ll)
}

/// Log binomial coefficients of the factorized likelihood; together with the
/// kernel they give the full log-pmf.
pub fn log_binomial_coefficients(counts: &StudyCounts) -> f64 {
    let mut prev = counts.n_total;
    let mut out = 0.0;
    for (_, c) in counts.observed() {
        out += special::ln_binomial(prev as f64, c as f64);
        prev = c;
    }
    out
}

/// Factorized log-likelihood with survival probabilities `Phi(z_k)`.
///
/// Emits a single fused node whose partials with respect to `z` are
/// computed analytically. Entries of `z` at missing thresholds are ignored.
pub fn loglik_z<T: Real>(counts: &StudyCounts, z: &[T]) -> T {
    let mut grad = vec![0.0; z.len()];
    let ll = loglik_z_grad(counts, |k| z[k].value(), &mut grad);
    T::fused(z, ll, &grad)
}

/// Value and `d ll / d z_k` of the factorized likelihood for survival
/// probabilities `Phi(z(k))`.
pub fn loglik_z_grad(counts: &StudyCounts, z: impl Fn(usize) -> f64, grad: &mut [f64]) -> f64 {
    let ln_hi = libm::log1p(-EPS);
    let ln_lo = libm::log(EPS);
    let mut ll = 0.0;
    let mut prev_c = counts.n_total;
    // previous observed threshold and its log survival
    let mut prev: Option<(usize, f64, f64)> = None;
    for (k, c) in counts.observed() {
        let zk = z(k);
        let (ls, mk) = special::ln_normal_cdf_mills(zk);
        let fail = (prev_c - c) as f64;
        let succ = c as f64;
        let lr = match prev {
            Some((_, ls_prev, _)) => ls - ls_prev,
            None => ls,
        };
        if lr > ln_hi {
            ll += succ * ln_hi + fail * ln_lo;
        } else if lr < ln_lo {
            ll += succ * ln_lo + fail * ln_hi;
        } else {
            let r = libm::exp(lr);
            let one_m_r = -libm::expm1(lr);
            let l1m = libm::log(one_m_r);
            let mut term = 0.0;
            if succ > 0.0 {
                term += succ * lr;
            }
            if fail > 0.0 {
                term += fail * l1m;
            }
            ll += term;
            let dlr = succ - fail * r / one_m_r;
            grad[k] += dlr * mk;
            if let Some((kp, _, mp)) = prev {
                grad[kp] -= dlr * mp;
            }
        }
        prev = Some((k, ls, mk));
        prev_c = c;
    }
    ll
}

/// Factorized log-likelihood with survival probabilities
/// `Phi((loc - cuts[k]) / scale)`, as one fused node over `loc`, `scale` and
/// the cutpoints.
pub fn loglik_loc_scale<T: Real>(counts: &StudyCounts, loc: T, scale: T, cuts: &[T]) -> T {
    let (l, s) = (loc.value(), scale.value());
    let n = cuts.len();
    let mut g = vec![0.0; n];
    let ll = loglik_z_grad(counts, |k| (l - cuts[k].value()) / s, &mut g);
    let mut inputs = Vec::with_capacity(n + 2);
    let mut partials = Vec::with_capacity(n + 2);
    let mut dloc = 0.0;
    let mut dscale = 0.0;
    for k in 0..n {
        if g[k] != 0.0 {
            let z = (l - cuts[k].value()) / s;
            dloc += g[k] / s;
            dscale -= g[k] * z / s;
            inputs.push(cuts[k]);
            partials.push(-g[k] / s);
        }
    }
    inputs.push(loc);
    partials.push(dloc);
    inputs.push(scale);
    partials.push(dscale);
    T::fused(&inputs, ll, &partials)
}

/// `c_k = Phi^{-1}(sum_{j<=k} p_j) + anchor`. The flag reports whether any
/// zero probability had to be floored at `EPS`.
pub fn probs_to_cutpoints(p: &OrdinalProbs, anchor: f64) -> (Cutpoints, bool) {
    let mut clamped = false;
    let mut q: Vec<f64> = p
        .0
        .iter()
        .map(|&v| {
            if v < EPS {
                clamped = true;
                EPS
            } else {
                v
            }
        })
        .collect();
    if clamped {
        let s: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= s);
    }
    let q = OrdinalProbs(q);
    let lower = q.cumulative();
    let upper = q.survival();
    let c = lower
        .iter()
        .zip(&upper)
        .map(|(&lo, &up)| {
            if lo <= 0.5 {
                special::normal_quantile(lo) + anchor
            } else {
                -special::normal_quantile(up) + anchor
            }
        })
        .collect();
    (Cutpoints(c), clamped)
}

pub fn cutpoints_to_probs(c: &Cutpoints, anchor: f64) -> OrdinalProbs {
    ordinal_probs(c, anchor, 1.0).expect("unit scale")
}

/// `log Dir(P(c - anchor) | alpha) + sum_k log phi(c_k - anchor)`.
///
/// Returns negative infinity when a category probability underflows.
pub fn induced_dirichlet_logpdf(c: &Cutpoints, hyper: &DirichletHyper) -> f64 {
    if hyper.alpha.len() != c.len() + 1 {
        return f64::NAN;
    }
    induced_dirichlet_lpdf(c.as_slice(), &hyper.alpha, hyper.anchor)
}

/// Generic induced-Dirichlet log density; `alpha` may depend on parameters.
pub fn induced_dirichlet_lpdf<T: Real>(c: &[T], alpha: &[T], anchor: f64) -> T {
    let k = c.len() + 1;
    let zero = alpha[0].constant(0.0);
    let mut lp = zero;
    let mut sum_a = zero;
    for j in 0..k {
        let lo = if j == 0 { None } else { Some(c[j - 1]) };
        let hi = if j == k - 1 { None } else { Some(c[j]) };
        let a = lo.map_or(f64::NEG_INFINITY, |v| v.value() - anchor);
        let b = hi.map_or(f64::INFINITY, |v| v.value() - anchor);
        if !(a < b) {
            return zero.constant(f64::NEG_INFINITY);
        }
        let lnp = ln_normal_interval(a, b);
        if !lnp.is_finite() {
            return zero.constant(f64::NEG_INFINITY);
        }
        let lnp_t = match (lo, hi) {
            (Some(l), Some(h)) => T::fused(
                &[l, h],
                lnp,
                &[-libm::exp(normal_logpdf(a) - lnp), libm::exp(normal_logpdf(b) - lnp)],
            ),
            (Some(l), None) => T::fused(&[l], lnp, &[-libm::exp(normal_logpdf(a) - lnp)]),
            (None, Some(h)) => T::fused(&[h], lnp, &[libm::exp(normal_logpdf(b) - lnp)]),
            (None, None) => zero,
        };
        lp += (alpha[j] - 1.0) * lnp_t - alpha[j].ln_gamma();
        sum_a += alpha[j];
    }
    lp += sum_a.ln_gamma();
    for &ck in c {
        lp += ((ck - anchor).square() * -0.5) - LN_SQRT_2PI;
    }
    lp
}

/// `-log(kappa)`: correction for a density specified on `log kappa` while
/// `kappa` is the sampled quantity.
pub fn log_kappa_jacobian(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        bail!(Domain, "kappa must be positive, got {kappa}");
    }
    Ok(-libm::log(kappa))
}
