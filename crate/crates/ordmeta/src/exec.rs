//! Chains on a worker pool.

use ordmeta_core::mcmc::{run_chain, ChainExecutor, ChainOutput, LogDensity, SamplerConfig};
use ordmeta_core::Result;
use rayon::prelude::*;

/// Runs chains in parallel on a private pool. Each chain owns its random
/// stream, so output does not depend on the thread count.
pub struct Threaded {
    pool: rayon::ThreadPool,
}

impl Threaded {
    pub fn new(threads: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
        Threaded { pool }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl ChainExecutor for Threaded {
    fn run_chains(&self, target: &dyn LogDensity, inits: &[Vec<f64>], cfg: &SamplerConfig) -> Result<Vec<ChainOutput>> {
        self.pool.install(|| inits.par_iter().enumerate().map(|(c, init)| run_chain(target, init, cfg, c)).collect())
    }
}

/// `--threads`, else `ORDMETA_THREADS`, else the available parallelism.
pub fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("ORDMETA_THREADS").ok().and_then(|v| v.trim().parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
