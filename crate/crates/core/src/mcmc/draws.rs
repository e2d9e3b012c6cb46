use alloc::string::String;
use alloc::vec::Vec;

use super::nuts::ChainOutput;

/// Post-warmup draws of all chains with per-transition sampler records.
/// Values are stored chain-major: `values[(chain * n_iter + iter) * dim + param]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    pub n_chains: usize,
    pub n_iter: usize,
    pub values: Vec<f64>,
    /// `[chain][iter]`
    pub divergent: Vec<Vec<bool>>,
    pub hit_max_treedepth: Vec<Vec<bool>>,
    pub treedepth: Vec<Vec<u32>>,
    pub accept_stat: Vec<Vec<f64>>,
    pub energy: Vec<Vec<f64>>,
    pub n_leapfrog: Vec<Vec<u32>>,
    pub stepsize: Vec<f64>,
    pub inv_metric: Vec<Vec<f64>>,
    pub warmup_divergences: Vec<usize>,
}

impl PosteriorDraws {
    pub fn from_chains(names: Vec<String>, chains: Vec<ChainOutput>) -> Self {
        let n_chains = chains.len();
        let n_iter = chains.first().map_or(0, |c| c.divergent.len());
        let mut d = PosteriorDraws {
            names,
            n_chains,
            n_iter,
            values: Vec::new(),
            divergent: Vec::with_capacity(n_chains),
            hit_max_treedepth: Vec::with_capacity(n_chains),
            treedepth: Vec::with_capacity(n_chains),
            accept_stat: Vec::with_capacity(n_chains),
            energy: Vec::with_capacity(n_chains),
            n_leapfrog: Vec::with_capacity(n_chains),
            stepsize: Vec::with_capacity(n_chains),
            inv_metric: Vec::with_capacity(n_chains),
            warmup_divergences: Vec::with_capacity(n_chains),
        };
        for c in chains {
            d.values.extend(c.draws);
            d.divergent.push(c.divergent);
            d.hit_max_treedepth.push(c.hit_max_treedepth);
            d.treedepth.push(c.treedepth);
            d.accept_stat.push(c.accept_stat);
            d.energy.push(c.energy);
            d.n_leapfrog.push(c.n_leapfrog);
            d.stepsize.push(c.stepsize);
            d.inv_metric.push(c.inv_metric);
            d.warmup_divergences.push(c.warmup_divergences);
        }
        d
    }

    /// Same sampler records with new parameter values, e.g. after mapping
    /// every draw to the constrained space.
    pub fn with_values(&self, names: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.n_chains * self.n_iter * names.len());
        PosteriorDraws { names, values, ..self.clone_records() }
    }

    fn clone_records(&self) -> Self {
        PosteriorDraws {
            names: Vec::new(),
            n_chains: self.n_chains,
            n_iter: self.n_iter,
            values: Vec::new(),
            divergent: self.divergent.clone(),
            hit_max_treedepth: self.hit_max_treedepth.clone(),
            treedepth: self.treedepth.clone(),
            accept_stat: self.accept_stat.clone(),
            energy: self.energy.clone(),
            n_leapfrog: self.n_leapfrog.clone(),
            stepsize: self.stepsize.clone(),
            inv_metric: self.inv_metric.clone(),
            warmup_divergences: self.warmup_divergences.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        self.n_chains * self.n_iter
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, chain: usize, iter: usize, param: usize) -> f64 {
        self.values[(chain * self.n_iter + iter) * self.dim() + param]
    }

    /// Parameter vector of one draw.
    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let d = self.dim();
        let s = (chain * self.n_iter + iter) * d;
        &self.values[s..s + d]
    }

    /// Iterates all draws, chain by chain.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim().max(1))
    }

    /// One parameter, split by chain.
    pub fn chains_of(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains).map(|c| (0..self.n_iter).map(|i| self.get(c, i, param)).collect()).collect()
    }

    /// One parameter, all chains pooled.
    pub fn pooled(&self, param: usize) -> Vec<f64> {
        self.iter_draws().map(|d| d[param]).collect()
    }

    pub fn divergence_count(&self) -> usize {
        self.divergent.iter().flatten().filter(|&&d| d).count()
    }

    pub fn treedepth_hits(&self) -> usize {
        self.hit_max_treedepth.iter().flatten().filter(|&&d| d).count()
    }

    /// True when more than half of the post-warmup transitions diverged.
    pub fn divergence_warning(&self) -> bool {
        2 * self.divergence_count() > self.n_draws()
    }

    /// Keeps only the listed chains.
    pub fn select_chains(&self, keep: &[usize]) -> Self {
        let d = self.dim();
        let mut values = Vec::with_capacity(keep.len() * self.n_iter * d);
        for &c in keep {
            let s = c * self.n_iter * d;
            values.extend_from_slice(&self.values[s..s + self.n_iter * d]);
        }
        let pick = |v: &Vec<Vec<bool>>| keep.iter().map(|&c| v[c].clone()).collect::<Vec<_>>();
        PosteriorDraws {
            names: self.names.clone(),
            n_chains: keep.len(),
            n_iter: self.n_iter,
            values,
            divergent: pick(&self.divergent),
            hit_max_treedepth: pick(&self.hit_max_treedepth),
            treedepth: keep.iter().map(|&c| self.treedepth[c].clone()).collect(),
            accept_stat: keep.iter().map(|&c| self.accept_stat[c].clone()).collect(),
            energy: keep.iter().map(|&c| self.energy[c].clone()).collect(),
            n_leapfrog: keep.iter().map(|&c| self.n_leapfrog[c].clone()).collect(),
            stepsize: keep.iter().map(|&c| self.stepsize[c]).collect(),
            inv_metric: keep.iter().map(|&c| self.inv_metric[c].clone()).collect(),
            warmup_divergences: keep.iter().map(|&c| self.warmup_divergences[c]).collect(),
        }
    }
}
