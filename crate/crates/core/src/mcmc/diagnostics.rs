//! Rank-normalized split R-hat and bulk/tail effective sample size.
//!
//! Undefined values (constant parameters, too few draws, a single chain for
//! R-hat) are returned as `None`.

use alloc::vec;
use alloc::vec::Vec;

use super::draws::PosteriorDraws;
use crate::special::{normal_quantile, quantile_sorted as quantile};

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub rhat: Vec<Option<f64>>,
    pub ess_bulk: Vec<Option<f64>>,
    pub ess_tail: Vec<Option<f64>>,
    pub divergence_count: usize,
    pub treedepth_hits: usize,
    /// More than half of the transitions diverged.
    pub divergence_warning: bool,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> Option<f64> {
        self.rhat.iter().flatten().copied().fold(None, |m, r| Some(m.map_or(r, |m: f64| m.max(r))))
    }

    pub fn min_ess_bulk(&self) -> Option<f64> {
        self.ess_bulk.iter().flatten().copied().fold(None, |m, r| Some(m.map_or(r, |m: f64| m.min(r))))
    }

    pub fn min_ess(&self) -> Option<f64> {
        let t = self.ess_tail.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        self.min_ess_bulk().map(|b| b.min(t))
    }
}

pub fn diagnostics(d: &PosteriorDraws) -> Diagnostics {
    let mut rhat = Vec::with_capacity(d.dim());
    let mut bulk = Vec::with_capacity(d.dim());
    let mut tail = Vec::with_capacity(d.dim());
    for p in 0..d.dim() {
        let chains = d.chains_of(p);
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        rhat.push(if d.n_chains > 1 { split_rhat(&refs) } else { None });
        bulk.push(ess_bulk(&refs));
        tail.push(ess_tail(&refs));
    }
    Diagnostics {
        rhat,
        ess_bulk: bulk,
        ess_tail: tail,
        divergence_count: d.divergence_count(),
        treedepth_hits: d.treedepth_hits(),
        divergence_warning: d.divergence_warning(),
    }
}

fn is_constant(chains: &[&[f64]]) -> bool {
    let first = match chains.iter().find_map(|c| c.first()) {
        Some(&v) => v,
        None => return true,
    };
    chains.iter().all(|c| c.iter().all(|&v| v == first))
}

fn all_finite(chains: &[&[f64]]) -> bool {
    chains.iter().all(|c| c.iter().all(|v| v.is_finite()))
}

/// Splits each chain into two halves; the middle draw of an odd-length
/// chain is dropped.
fn split_chains(chains: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let h = c.len() / 2;
        out.push(c[..h].to_vec());
        out.push(c[c.len() - h..].to_vec());
    }
    out
}

/// Average ranks over the pooled draws, mapped through the normal quantile
/// with the (r - 3/8) / (S + 1/4) offset.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = chains.iter().map(|c| c.len()).sum();
    let mut idx: Vec<(f64, usize, usize)> = Vec::with_capacity(total);
    for (ci, c) in chains.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            idx.push((v, ci, i));
        }
    }
    idx.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<Vec<f64>> = chains.iter().map(|c| vec![0.0; c.len()]).collect();
    let s = total as f64;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && idx[j + 1].0 == idx[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        let z = normal_quantile((r - 0.375) / (s + 0.25));
        for e in &idx[i..=j] {
            out[e.1][e.2] = z;
        }
        i = j + 1;
    }
    out
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn rhat_basic(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains.iter().map(|c| c.len()).min()? as f64;
    if chains.len() < 2 || n < 2.0 {
        return None;
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * var(&means);
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    if !(w > 0.0) {
        return None;
    }
    Some(libm::sqrt(((n - 1.0) / n * w + b / n) / w))
}

fn pooled_median(chains: &[&[f64]]) -> f64 {
    let mut all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    quantile(&all, 0.5)
}

/// Maximum of the bulk and folded rank-normalized split R-hat.
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    if chains.len() < 2 || chains.iter().any(|c| c.len() < 4) || !all_finite(chains) || is_constant(chains) {
        return None;
    }
    let split = split_chains(chains);
    let bulk = rhat_basic(&rank_normalize(&split))?;
    let med = pooled_median(chains);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = rhat_basic(&rank_normalize(&folded))?;
    Some(bulk.max(tail))
}

/// Effective sample size with Geyer's initial monotone sequence estimator.
fn ess_raw(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min()?;
    if m == 0 || n < 3 {
        return None;
    }
    let refs: Vec<&[f64]> = chains.iter().map(|c| &c[..n]).collect();
    if !all_finite(&refs) || is_constant(&refs) {
        return None;
    }
    let means: Vec<f64> = refs.iter().map(|c| mean(c)).collect();
    let nf = n as f64;
    // biased autocovariance at lag t averaged over chains
    let acov = |t: usize| -> f64 {
        let mut s = 0.0;
        for (c, &mu) in refs.iter().zip(&means) {
            let mut a = 0.0;
            for i in 0..n - t {
                a += (c[i] - mu) * (c[i + t] - mu);
            }
            s += a / nf;
        }
        s / m as f64
    };
    let acov0 = acov(0);
    let mean_var = acov0 * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&means);
    }
    if !(var_plus > 0.0) {
        return None;
    }
    let mut rho = vec![0.0; n];
    rho[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = 1.0 - (mean_var - acov(1)) / var_plus;
    rho[1] = rho_odd;
    let mut t = 0;
    while t + 5 < n && !(rho_even + rho_odd).is_nan() && rho_even + rho_odd > 0.0 {
        t += 2;
        rho_even = 1.0 - (mean_var - acov(t)) / var_plus;
        rho_odd = 1.0 - (mean_var - acov(t + 1)) / var_plus;
        if rho_even + rho_odd >= 0.0 {
            rho[t] = rho_even;
            rho[t + 1] = rho_odd;
        }
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho[max_t] = rho_even;
    }
    // monotone sequence
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        if rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1] {
            rho[t] = (rho[t - 2] + rho[t - 1]) / 2.0;
            rho[t + 1] = rho[t];
        }
    }
    let total = (m * n) as f64;
    let mut tau = -1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t];
    tau = tau.max(1.0 / libm::log10(total));
    Some(total / tau)
}

/// Bulk ESS: ESS of the rank-normalized split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> Option<f64> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) || !all_finite(chains) || is_constant(chains) {
        return None;
    }
    ess_raw(&rank_normalize(&split_chains(chains)))
}

/// Tail ESS: the smaller ESS of the 5% and 95% quantile indicators.
pub fn ess_tail(chains: &[&[f64]]) -> Option<f64> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) || !all_finite(chains) || is_constant(chains) {
        return None;
    }
    let mut all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let split = split_chains(chains);
    let mut best: Option<f64> = None;
    for p in [0.05, 0.95] {
        let q = quantile(&all, p);
        let ind: Vec<Vec<f64>> =
            split.iter().map(|c| c.iter().map(|&v| if v <= q { 1.0 } else { 0.0 }).collect()).collect();
        let e = ess_raw(&ind)?;
        best = Some(best.map_or(e, |b| b.min(e)));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn iid(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect()
    }

    fn refs(c: &[Vec<f64>]) -> Vec<&[f64]> {
        c.iter().map(|v| v.as_slice()).collect()
    }

    #[test]
    fn iid_draws_have_rhat_near_one() {
        let c = iid(4, 1000, 11);
        let r = split_rhat(&refs(&c)).unwrap();
        assert!((1.0 - 1e-3..1.01).contains(&r), "rhat {r}");
        let e = ess_bulk(&refs(&c)).unwrap();
        assert!(e > 3000.0 && e < 5000.0, "ess {e}");
        let t = ess_tail(&refs(&c)).unwrap();
        assert!(t > 2500.0 && t < 5500.0, "tail {t}");
    }

    #[test]
    fn offset_chain_gives_large_rhat() {
        let c = iid(1, 500, 5);
        let shifted: Vec<f64> = c[0].iter().map(|v| v + 5.0).collect();
        let both = vec![c[0].clone(), shifted];
        assert!(split_rhat(&refs(&both)).unwrap() > 1.5);
    }

    #[test]
    fn constant_parameter_is_undefined() {
        let c = vec![vec![2.0; 100]; 4];
        assert_eq!(split_rhat(&refs(&c)), None);
        assert_eq!(ess_bulk(&refs(&c)), None);
        assert_eq!(ess_tail(&refs(&c)), None);
    }

    #[test]
    fn ar1_ess_matches_theory() {
        // AR(1) with phi has integrated autocorrelation time (1+phi)/(1-phi)
        let phi: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20_000;
        let mut x = 0.0;
        let chain: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = phi * x + libm::sqrt(1.0 - phi * phi) * e;
                x
            })
            .collect();
        let ess = ess_raw(&[chain]).unwrap();
        let want = n as f64 * (1.0 - phi) / (1.0 + phi);
        assert!((ess / want - 1.0).abs() < 0.1, "ess {ess} want {want}");
    }

    #[test]
    fn single_chain_rhat_absent_in_report() {
        let c = iid(1, 200, 2);
        let names = vec!["x".into()];
        let d = PosteriorDraws {
            names,
            n_chains: 1,
            n_iter: 200,
            values: c[0].clone(),
            divergent: vec![vec![false; 200]],
            hit_max_treedepth: vec![vec![false; 200]],
            treedepth: vec![vec![1; 200]],
            accept_stat: vec![vec![1.0; 200]],
            energy: vec![vec![0.0; 200]],
            n_leapfrog: vec![vec![1; 200]],
            stepsize: vec![1.0],
            inv_metric: vec![vec![1.0]],
            warmup_divergences: vec![0],
        };
        let r = diagnostics(&d);
        assert_eq!(r.rhat, vec![None]);
        assert!(r.ess_bulk[0].is_some() && r.ess_tail[0].is_some());
    }
}
