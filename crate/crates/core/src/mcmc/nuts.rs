//! No-U-Turn sampler with multinomial trajectory sampling and the
//! generalized U-turn criterion, plus the adaptive warmup driver.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{CovEstimator, StepsizeAdapter, VarEstimator, WindowSchedule};
use super::{LogDensity, MetricKind, SamplerConfig};
use crate::error::{bail, Result};

/// Inverse mass matrix. The dense variant also stores the Cholesky factor
/// `L` of the inverse metric, used to draw momenta.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Diag(Vec<f64>),
    Dense { inv: Vec<f64>, chol: Vec<f64>, n: usize },
}

impl Metric {
    pub fn unit_diag(n: usize) -> Self {
        Metric::Diag(vec![1.0; n])
    }

    pub fn dense(inv: Vec<f64>, n: usize) -> Result<Self> {
        let chol = cholesky(&inv, n)?;
        Ok(Metric::Dense { inv, chol, n })
    }

    /// `M^{-1} p`.
    pub fn velocity(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Metric::Diag(d) => {
                for i in 0..p.len() {
                    out[i] = d[i] * p[i];
                }
            }
            Metric::Dense { inv, n, .. } => {
                for i in 0..*n {
                    out[i] = (0..*n).map(|j| inv[i * n + j] * p[j]).sum();
                }
            }
        }
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        let mut v = vec![0.0; p.len()];
        self.velocity(p, &mut v);
        0.5 * p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Momentum with covariance `M`.
    pub fn sample_momentum(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Metric::Diag(d) => {
                for i in 0..out.len() {
                    let z: f64 = rng.sample(StandardNormal);
                    out[i] = z / libm::sqrt(d[i]);
                }
            }
            Metric::Dense { chol, n, .. } => {
                let z: Vec<f64> = (0..*n).map(|_| rng.sample(StandardNormal)).collect();
                // solve L^T p = z
                for i in (0..*n).rev() {
                    let mut s = z[i];
                    for j in i + 1..*n {
                        s -= chol[j * n + i] * out[j];
                    }
                    out[i] = s / chol[i * n + i];
                }
            }
        }
    }

    pub fn diag_values(&self) -> Vec<f64> {
        match self {
            Metric::Diag(d) => d.clone(),
            Metric::Dense { inv, n, .. } => (0..*n).map(|i| inv[i * n + i]).collect(),
        }
    }
}

/// Lower Cholesky factor of a row-major symmetric positive definite matrix.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    bail!(Numeric, "matrix is not positive definite");
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Phase-space point.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
}

impl Point {
    pub fn new(target: &dyn LogDensity, q: Vec<f64>) -> Self {
        let n = q.len();
        let mut grad = vec![0.0; n];
        let logp = target.logp_grad(&q, &mut grad);
        Point { q, p: vec![0.0; n], grad, logp }
    }

    pub fn hamiltonian(&self, metric: &Metric) -> f64 {
        -self.logp + metric.kinetic(&self.p)
    }
}

/// One leapfrog step of size `eps` (negative to integrate backwards).
pub fn leapfrog(target: &dyn LogDensity, metric: &Metric, z: &mut Point, eps: f64, scratch: &mut [f64]) {
    for i in 0..z.p.len() {
        z.p[i] += 0.5 * eps * z.grad[i];
    }
    metric.velocity(&z.p, scratch);
    for i in 0..z.q.len() {
        z.q[i] += eps * scratch[i];
    }
    z.logp = target.logp_grad(&z.q, &mut z.grad);
    if !z.logp.is_finite() {
        z.logp = f64::NEG_INFINITY;
    }
    for i in 0..z.p.len() {
        z.p[i] += 0.5 * eps * z.grad[i];
    }
}

fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn criterion(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

struct Nuts<'a> {
    target: &'a dyn LogDensity,
    metric: Metric,
    eps: f64,
    max_depth: usize,
    max_delta_h: f64,
    rng: ChaCha8Rng,
    z: Point,
    scratch: Vec<f64>,
    n_leapfrog: usize,
    sum_metro: f64,
    divergent: bool,
}

/// Per-transition sampler output.
struct Transition {
    accept: f64,
    depth: usize,
    divergent: bool,
    n_leapfrog: usize,
    energy: f64,
}

struct Subtree<'v> {
    p_sharp_beg: &'v mut Vec<f64>,
    p_sharp_end: &'v mut Vec<f64>,
    rho: &'v mut Vec<f64>,
    p_beg: &'v mut Vec<f64>,
    p_end: &'v mut Vec<f64>,
}

impl<'a> Nuts<'a> {
    fn p_sharp(&mut self) -> Vec<f64> {
        let mut v = vec![0.0; self.z.p.len()];
        self.metric.velocity(&self.z.p, &mut v);
        v
    }

    fn transition(&mut self) -> Transition {
        let n = self.z.q.len();
        let mut p = vec![0.0; n];
        self.metric.sample_momentum(&mut self.rng, &mut p);
        self.z.p = p;
        let mut z_fwd = self.z.clone();
        let mut z_bck = self.z.clone();
        let mut z_sample = self.z.clone();
        let mut z_propose = self.z.clone();

        let mut p_sharp_fwd_fwd = self.p_sharp();
        let mut p_sharp_fwd_bck = p_sharp_fwd_fwd.clone();
        let mut p_sharp_bck_fwd = p_sharp_fwd_fwd.clone();
        let mut p_sharp_bck_bck = p_sharp_fwd_fwd.clone();
        let mut p_fwd_fwd = self.z.p.clone();
        let mut p_fwd_bck = self.z.p.clone();
        let mut p_bck_fwd = self.z.p.clone();
        let mut p_bck_bck = self.z.p.clone();
        let mut rho = self.z.p.clone();
        let mut log_sum_weight = 0.0;
        let h0 = self.z.hamiltonian(&self.metric);
        self.n_leapfrog = 0;
        self.sum_metro = 0.0;
        self.divergent = false;
        let mut depth = 0;

        while depth < self.max_depth {
            let mut rho_fwd = vec![0.0; n];
            let mut rho_bck = vec![0.0; n];
            let mut lsw_subtree = f64::NEG_INFINITY;
            let valid;
            if self.rng.random::<f64>() > 0.5 {
                self.z = z_fwd.clone();
                rho_bck.clone_from(&rho);
                p_bck_fwd.clone_from(&p_fwd_bck);
                p_sharp_bck_fwd.clone_from(&p_sharp_fwd_bck);
                let mut st = Subtree {
                    p_sharp_beg: &mut p_sharp_fwd_bck,
                    p_sharp_end: &mut p_sharp_fwd_fwd,
                    rho: &mut rho_fwd,
                    p_beg: &mut p_fwd_bck,
                    p_end: &mut p_fwd_fwd,
                };
                valid = self.build_tree(depth, &mut z_propose, &mut st, h0, 1.0, &mut lsw_subtree);
                z_fwd = self.z.clone();
            } else {
                self.z = z_bck.clone();
                rho_fwd.clone_from(&rho);
                p_fwd_bck.clone_from(&p_bck_fwd);
                p_sharp_fwd_bck.clone_from(&p_sharp_bck_fwd);
                let mut st = Subtree {
                    p_sharp_beg: &mut p_sharp_bck_fwd,
                    p_sharp_end: &mut p_sharp_bck_bck,
                    rho: &mut rho_bck,
                    p_beg: &mut p_bck_fwd,
                    p_end: &mut p_bck_bck,
                };
                valid = self.build_tree(depth, &mut z_propose, &mut st, h0, -1.0, &mut lsw_subtree);
                z_bck = self.z.clone();
            }
            if !valid {
                break;
            }
            depth += 1;
            if lsw_subtree > log_sum_weight {
                z_sample = z_propose.clone();
            } else {
                let accept = libm::exp(lsw_subtree - log_sum_weight);
                if self.rng.random::<f64>() < accept {
                    z_sample = z_propose.clone();
                }
            }
            log_sum_weight = log_sum_exp2(log_sum_weight, lsw_subtree);
            rho = add(&rho_bck, &rho_fwd);
            let mut persist = criterion(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
            let ext = add(&rho_bck, &p_fwd_bck);
            persist &= criterion(&p_sharp_bck_bck, &p_sharp_fwd_bck, &ext);
            let ext = add(&rho_fwd, &p_bck_fwd);
            persist &= criterion(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &ext);
            if !persist {
                break;
            }
        }
        let accept = if self.n_leapfrog > 0 { self.sum_metro / self.n_leapfrog as f64 } else { 0.0 };
        self.z = z_sample;
        Transition {
            accept,
            depth,
            divergent: self.divergent,
            n_leapfrog: self.n_leapfrog,
            energy: self.z.hamiltonian(&self.metric),
        }
    }

    fn build_tree(
        &mut self,
        depth: usize,
        z_propose: &mut Point,
        st: &mut Subtree<'_>,
        h0: f64,
        sign: f64,
        log_sum_weight: &mut f64,
    ) -> bool {
        if depth == 0 {
            let eps = sign * self.eps;
            leapfrog(self.target, &self.metric, &mut self.z, eps, &mut self.scratch);
            self.n_leapfrog += 1;
            let mut h = self.z.hamiltonian(&self.metric);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            if h - h0 > self.max_delta_h {
                self.divergent = true;
            }
            *log_sum_weight = log_sum_exp2(*log_sum_weight, h0 - h);
            self.sum_metro += if h0 - h > 0.0 { 1.0 } else { libm::exp(h0 - h) };
            z_propose.clone_from(&self.z);
            let ps = self.p_sharp();
            st.p_sharp_beg.clone_from(&ps);
            *st.p_sharp_end = ps;
            for (r, p) in st.rho.iter_mut().zip(&self.z.p) {
                *r += p;
            }
            st.p_beg.clone_from(&self.z.p);
            st.p_end.clone_from(&self.z.p);
            return !self.divergent;
        }
        let n = self.z.q.len();
        // initial subtree
        let mut lsw_init = f64::NEG_INFINITY;
        let mut p_init_end = vec![0.0; n];
        let mut p_sharp_init_end = vec![0.0; n];
        let mut rho_init = vec![0.0; n];
        let valid_init = {
            let mut sub = Subtree {
                p_sharp_beg: &mut *st.p_sharp_beg,
                p_sharp_end: &mut p_sharp_init_end,
                rho: &mut rho_init,
                p_beg: &mut *st.p_beg,
                p_end: &mut p_init_end,
            };
            self.build_tree(depth - 1, z_propose, &mut sub, h0, sign, &mut lsw_init)
        };
        if !valid_init {
            return false;
        }
        // final subtree
        let mut z_propose_final = self.z.clone();
        let mut lsw_final = f64::NEG_INFINITY;
        let mut p_final_beg = vec![0.0; n];
        let mut p_sharp_final_beg = vec![0.0; n];
        let mut rho_final = vec![0.0; n];
        let valid_final = {
            let mut sub = Subtree {
                p_sharp_beg: &mut p_sharp_final_beg,
                p_sharp_end: &mut *st.p_sharp_end,
                rho: &mut rho_final,
                p_beg: &mut p_final_beg,
                p_end: &mut *st.p_end,
            };
            self.build_tree(depth - 1, &mut z_propose_final, &mut sub, h0, sign, &mut lsw_final)
        };
        if !valid_final {
            return false;
        }
        // multinomial sample from the right subtree
        let lsw_subtree = log_sum_exp2(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp2(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree {
            *z_propose = z_propose_final;
        } else {
            let accept = libm::exp(lsw_final - lsw_subtree);
            if self.rng.random::<f64>() < accept {
                *z_propose = z_propose_final;
            }
        }
        let rho_subtree = add(&rho_init, &rho_final);
        for (r, v) in st.rho.iter_mut().zip(&rho_subtree) {
            *r += v;
        }
        let mut persist = criterion(st.p_sharp_beg, st.p_sharp_end, &rho_subtree);
        let ext = add(&rho_init, &p_final_beg);
        persist &= criterion(st.p_sharp_beg, &p_sharp_final_beg, &ext);
        let ext = add(&rho_final, &p_init_end);
        persist &= criterion(&p_sharp_init_end, st.p_sharp_end, &ext);
        persist
    }

    /// Doubles or halves the step size until one leapfrog step crosses an
    /// acceptance probability of 0.8.
    fn init_stepsize(&mut self) -> Result<()> {
        let z_init = self.z.clone();
        let n = self.z.q.len();
        let log08 = libm::log(0.8);
        let mut direction = 0.0;
        loop {
            self.z = z_init.clone();
            let mut p = vec![0.0; n];
            self.metric.sample_momentum(&mut self.rng, &mut p);
            self.z.p = p;
            let h0 = self.z.hamiltonian(&self.metric);
            leapfrog(self.target, &self.metric, &mut self.z, self.eps, &mut self.scratch);
            let mut h = self.z.hamiltonian(&self.metric);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            let delta = h0 - h;
            if direction == 0.0 {
                direction = if delta > log08 { 1.0 } else { -1.0 };
            } else if (direction == 1.0 && !(delta > log08)) || (direction == -1.0 && !(delta < log08)) {
                break;
            }
            self.eps = if direction == 1.0 { 2.0 * self.eps } else { 0.5 * self.eps };
            if self.eps > 1e7 {
                bail!(Sampler, "step size diverged to infinity during initialization");
            }
            if self.eps == 0.0 {
                bail!(Sampler, "step size collapsed to zero during initialization");
            }
        }
        self.z = z_init;
        Ok(())
    }
}

/// Everything recorded by one chain after warmup.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    /// `n_iter x dim`, row-major, unconstrained scale.
    pub draws: Vec<f64>,
    pub dim: usize,
    pub divergent: Vec<bool>,
    pub treedepth: Vec<u32>,
    pub hit_max_treedepth: Vec<bool>,
    pub accept_stat: Vec<f64>,
    pub energy: Vec<f64>,
    pub n_leapfrog: Vec<u32>,
    pub stepsize: f64,
    pub inv_metric: Vec<f64>,
    pub warmup_divergences: usize,
}

/// Runs warmup and sampling for one chain. The random stream is selected
/// by `(cfg.seed, chain)`.
pub fn run_chain(target: &dyn LogDensity, init: &[f64], cfg: &SamplerConfig, chain: usize) -> Result<ChainOutput> {
    let n = target.dim();
    if init.len() != n {
        bail!(Dimension, "initial point has length {}, target dimension is {n}", init.len());
    }
    let z = Point::new(target, init.to_vec());
    if !z.logp.is_finite() || z.grad.iter().any(|g| !g.is_finite()) {
        bail!(Sampler, "log density or gradient is not finite at the initial point");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(chain as u64);
    let mut s = Nuts {
        target,
        metric: Metric::unit_diag(n),
        eps: cfg.init_stepsize,
        max_depth: cfg.max_treedepth,
        max_delta_h: cfg.max_delta_h,
        rng,
        z,
        scratch: vec![0.0; n],
        n_leapfrog: 0,
        sum_metro: 0.0,
        divergent: false,
    };
    if cfg.metric == MetricKind::Dense {
        let mut id = vec![0.0; n * n];
        for i in 0..n {
            id[i * n + i] = 1.0;
        }
        s.metric = Metric::dense(id, n)?;
    }
    s.init_stepsize()?;
    let mut step = StepsizeAdapter::new(cfg.target_accept, s.eps);
    let mut sched = WindowSchedule::new(cfg.n_warmup);
    let mut var_est = VarEstimator::new(n);
    let mut cov_est = CovEstimator::new(n);
    let mut warmup_div = 0;
    for _ in 0..cfg.n_warmup {
        let t = s.transition();
        if t.divergent {
            warmup_div += 1;
        }
        s.eps = step.learn(t.accept);
        if sched.in_window() {
            match cfg.metric {
                MetricKind::Diag => var_est.add(&s.z.q),
                MetricKind::Dense => cov_est.add(&s.z.q),
            }
        }
        if sched.end_of_window() {
            sched.compute_next_window();
            s.metric = match cfg.metric {
                MetricKind::Diag => Metric::Diag(var_est.regularized()),
                MetricKind::Dense => Metric::dense(cov_est.regularized(), n)?,
            };
            var_est = VarEstimator::new(n);
            cov_est = CovEstimator::new(n);
            s.init_stepsize()?;
            step = StepsizeAdapter::new(cfg.target_accept, s.eps);
        }
        sched.advance();
    }
    if cfg.n_warmup > 0 {
        s.eps = step.complete();
    }

    let mut out = ChainOutput {
        draws: Vec::with_capacity(cfg.n_iter * n),
        dim: n,
        divergent: Vec::with_capacity(cfg.n_iter),
        treedepth: Vec::with_capacity(cfg.n_iter),
        hit_max_treedepth: Vec::with_capacity(cfg.n_iter),
        accept_stat: Vec::with_capacity(cfg.n_iter),
        energy: Vec::with_capacity(cfg.n_iter),
        n_leapfrog: Vec::with_capacity(cfg.n_iter),
        stepsize: s.eps,
        inv_metric: match &s.metric {
            Metric::Diag(d) => d.clone(),
            Metric::Dense { inv, .. } => inv.clone(),
        },
        warmup_divergences: warmup_div,
    };
    for _ in 0..cfg.n_iter {
        let t = s.transition();
        out.draws.extend_from_slice(&s.z.q);
        out.divergent.push(t.divergent);
        out.treedepth.push(t.depth as u32);
        out.hit_max_treedepth.push(t.depth >= cfg.max_treedepth);
        out.accept_stat.push(t.accept);
        out.energy.push(t.energy);
        out.n_leapfrog.push(t.n_leapfrog as u32);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Gauss {
        prec: Vec<f64>,
        n: usize,
    }

    impl LogDensity for Gauss {
        fn dim(&self) -> usize {
            self.n
        }
        fn logp_grad(&self, x: &[f64], g: &mut [f64]) -> f64 {
            let n = self.n;
            let mut lp = 0.0;
            for i in 0..n {
                let s: f64 = (0..n).map(|j| self.prec[i * n + j] * x[j]).sum();
                g[i] = -s;
                lp -= 0.5 * x[i] * s;
            }
            lp
        }
    }

    fn std_normal(n: usize) -> Gauss {
        let mut prec = vec![0.0; n * n];
        for i in 0..n {
            prec[i * n + i] = 1.0;
        }
        Gauss { prec, n }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let t = Gauss { prec: vec![2.0, 0.5, 0.5, 1.0], n: 2 };
        let m = Metric::Diag(vec![0.7, 1.3]);
        let mut z = Point::new(&t, vec![0.3, -1.2]);
        z.p = vec![0.8, 0.1];
        let start = z.clone();
        let mut sc = vec![0.0; 2];
        for _ in 0..20 {
            leapfrog(&t, &m, &mut z, 0.1, &mut sc);
        }
        z.p.iter_mut().for_each(|p| *p = -*p);
        for _ in 0..20 {
            leapfrog(&t, &m, &mut z, 0.1, &mut sc);
        }
        for i in 0..2 {
            assert!((z.q[i] - start.q[i]).abs() < 1e-10);
            assert!((z.p[i] + start.p[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn leapfrog_preserves_volume() {
        // the one-step map on (q, p) is linear for a quadratic target; its
        // determinant must be one
        let t = Gauss { prec: vec![2.0, 0.5, 0.5, 1.0], n: 2 };
        let m = Metric::Diag(vec![1.0, 1.0]);
        let step = |x: [f64; 4]| {
            let mut z = Point::new(&t, vec![x[0], x[1]]);
            z.p = vec![x[2], x[3]];
            leapfrog(&t, &m, &mut z, 0.3, &mut [0.0; 2]);
            [z.q[0], z.q[1], z.p[0], z.p[1]]
        };
        let base = step([0.0; 4]);
        let mut j = vec![vec![0.0; 4]; 4];
        for c in 0..4 {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            let col = step(e);
            for r in 0..4 {
                j[r][c] = col[r] - base[r];
            }
        }
        let ld = crate::transform::tests::log_abs_det(j);
        assert!(ld.abs() < 1e-10, "log det {ld}");
    }

    #[test]
    fn energy_is_nearly_conserved_with_small_steps() {
        let t = std_normal(3);
        let m = Metric::unit_diag(3);
        let mut z = Point::new(&t, vec![0.5, -0.3, 1.1]);
        z.p = vec![0.2, 0.9, -0.4];
        let h0 = z.hamiltonian(&m);
        let mut sc = vec![0.0; 3];
        for _ in 0..100 {
            leapfrog(&t, &m, &mut z, 0.01, &mut sc);
        }
        assert!((z.hamiltonian(&m) - h0).abs() < 1e-4);
    }

    #[test]
    fn dense_momentum_has_metric_covariance() {
        let inv = vec![2.0, 0.6, 0.6, 0.5];
        let m = Metric::dense(inv.clone(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut acc = [0.0; 4];
        let n = 200_000;
        let mut p = [0.0; 2];
        for _ in 0..n {
            m.sample_momentum(&mut rng, &mut p);
            acc[0] += p[0] * p[0];
            acc[1] += p[0] * p[1];
            acc[3] += p[1] * p[1];
        }
        // covariance should be the inverse of `inv`
        let det = 2.0 * 0.5 - 0.36;
        let want = [0.5 / det, -0.6 / det, 2.0 / det];
        assert!((acc[0] / n as f64 - want[0]).abs() < 0.02 * want[0].abs());
        assert!((acc[1] / n as f64 - want[1]).abs() < 0.03 * want[1].abs());
        assert!((acc[3] / n as f64 - want[2]).abs() < 0.02 * want[2].abs());
    }

    #[test]
    fn same_seed_same_chain() {
        let t = std_normal(3);
        let cfg = SamplerConfig { n_warmup: 100, n_iter: 50, ..Default::default() };
        let a = run_chain(&t, &[0.1, 0.2, 0.3], &cfg, 1).unwrap();
        let b = run_chain(&t, &[0.1, 0.2, 0.3], &cfg, 1).unwrap();
        assert_eq!(a, b);
        let c = run_chain(&t, &[0.1, 0.2, 0.3], &cfg, 2).unwrap();
        assert_ne!(a.draws, c.draws);
    }
}
