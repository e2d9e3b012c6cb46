//! Gradient-based sampling: NUTS with warmup adaptation, diagnostics and the
//! draws container.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};

mod adapt;
pub mod diagnostics;
mod draws;
mod nuts;

pub use adapt::{StepsizeAdapter, WindowSchedule};
pub use diagnostics::{diagnostics, ess_bulk, ess_tail, split_rhat, Diagnostics};
pub use draws::PosteriorDraws;
pub use nuts::{leapfrog, run_chain, ChainOutput, Metric, Point};

/// Log density with gradient on an unconstrained space.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Writes the gradient into `grad` and returns the log density.
    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
    fn logp(&self, x: &[f64]) -> f64 {
        let mut g = alloc::vec![0.0; x.len()];
        self.logp_grad(x, &mut g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricKind {
    #[default]
    Diag,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_chains: usize,
    pub n_warmup: usize,
    pub n_iter: usize,
    pub target_accept: f64,
    pub max_treedepth: usize,
    pub seed: u64,
    pub metric: MetricKind,
    /// Energy error above which a transition is marked divergent.
    pub max_delta_h: f64,
    pub init_stepsize: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_chains: 4,
            n_warmup: 1000,
            n_iter: 1000,
            target_accept: 0.8,
            max_treedepth: 10,
            seed: 1,
            metric: MetricKind::Diag,
            max_delta_h: 1000.0,
            init_stepsize: 1.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            bail!(Config, "target_accept must lie in (0, 1)");
        }
        if self.n_chains == 0 || self.n_iter == 0 {
            bail!(Config, "need at least one chain and one iteration");
        }
        if self.max_treedepth == 0 || self.max_treedepth > 30 {
            bail!(Config, "max_treedepth must lie in 1..=30");
        }
        Ok(())
    }
}

/// Runs a set of chains; implementations decide how chains are scheduled.
pub trait ChainExecutor: Sync {
    fn run_chains(&self, target: &dyn LogDensity, inits: &[Vec<f64>], cfg: &SamplerConfig) -> Result<Vec<ChainOutput>>;
}

/// Runs chains one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl ChainExecutor for Serial {
    fn run_chains(&self, target: &dyn LogDensity, inits: &[Vec<f64>], cfg: &SamplerConfig) -> Result<Vec<ChainOutput>> {
        inits.iter().enumerate().map(|(c, init)| run_chain(target, init, cfg, c)).collect()
    }
}

/// Samples `cfg.n_chains` chains and collects them; `names` label the
/// unconstrained coordinates.
pub fn sample(
    exec: &dyn ChainExecutor,
    target: &dyn LogDensity,
    inits: &[Vec<f64>],
    cfg: &SamplerConfig,
    names: Vec<String>,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if inits.len() != cfg.n_chains {
        bail!(Config, "{} initial points for {} chains", inits.len(), cfg.n_chains);
    }
    let chains = exec.run_chains(target, inits, cfg)?;
    Ok(PosteriorDraws::from_chains(names, chains))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    struct Gauss2 {
        rho: f64,
    }

    impl LogDensity for Gauss2 {
        fn dim(&self) -> usize {
            2
        }
        fn logp_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let r = self.rho;
            let d = 1.0 - r * r;
            g[0] = -(x[0] - r * x[1]) / d;
            g[1] = -(x[1] - r * x[0]) / d;
            -0.5 * (x[0] * x[0] - 2.0 * r * x[0] * x[1] + x[1] * x[1]) / d
        }
    }

    struct StdNormal(usize);

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn logp_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            for i in 0..x.len() {
                g[i] = -x[i];
            }
            -0.5 * x.iter().map(|v| v * v).sum::<f64>()
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn standard_normal_calibration() {
        let t = StdNormal(5);
        let cfg = SamplerConfig { seed: 42, ..Default::default() };
        let inits = vec![vec![0.5; 5]; 4];
        let d = sample(&Serial, &t, &inits, &cfg, names(5)).unwrap();
        assert_eq!(d.n_draws(), 4000);
        for p in 0..5 {
            let x = d.pooled(p);
            let m = x.iter().sum::<f64>() / x.len() as f64;
            let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (x.len() as f64 - 1.0);
            assert!(m.abs() < 0.05, "mean {m}");
            assert!((v - 1.0).abs() < 0.1, "var {v}");
        }
        let diag = diagnostics(&d);
        assert!(diag.max_rhat().unwrap() < 1.01);
        assert_eq!(diag.divergence_count, 0);
    }

    #[test]
    fn correlated_gaussian_with_dense_metric() {
        let t = Gauss2 { rho: 0.999 };
        let cfg = SamplerConfig { seed: 7, metric: MetricKind::Dense, ..Default::default() };
        let inits = vec![vec![0.1, -0.1]; 4];
        let d = sample(&Serial, &t, &inits, &cfg, names(2)).unwrap();
        let diag = diagnostics(&d);
        assert!(diag.max_rhat().unwrap() < 1.01, "{:?}", diag.rhat);
        // the adapted metric should carry the correlation
        let m = &d.inv_metric[0];
        assert!(m[1] / libm::sqrt(m[0] * m[3]) > 0.95);
    }

    #[test]
    fn non_finite_init_is_an_error() {
        struct Bad;
        impl LogDensity for Bad {
            fn dim(&self) -> usize {
                1
            }
            fn logp_grad(&self, _x: &[f64], g: &mut [f64]) -> f64 {
                g[0] = 0.0;
                f64::NEG_INFINITY
            }
        }
        let cfg = SamplerConfig { n_chains: 1, ..Default::default() };
        assert!(sample(&Serial, &Bad, &[vec![0.0]], &cfg, names(1)).is_err());
    }
}
