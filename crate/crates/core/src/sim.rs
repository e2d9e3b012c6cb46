//! Simulation lab: data-generating mechanisms, MCAR threshold missingness,
//! performance metrics with Monte Carlo standard errors and the adaptive
//! replication loop.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::data::{MADataset, StudyCounts, MISSING};
use crate::error::{bail, Result};
use crate::kernel::{self, Cutpoints, OrdinalProbs, ALPHA_FLOOR};
use crate::mcmc::{ChainExecutor, SamplerConfig};
use crate::model::{sample_bvn, sample_dirichlet, std_normal, Family, JonesTransform, MaModel, ModelSpec};
use crate::posterior::{fit, summary_se_sp, Interval};
use crate::special::{beta_quantile, normal_cdf, normal_quantile};

/// Truth hyperparameters of one screening instrument. Cutpoints are the
/// population (fixed-effect) values per disease group.
#[derive(Debug, Clone, PartialEq)]
pub struct TestProfile {
    pub name: String,
    pub k: usize,
    pub miss_rate: f64,
    pub cut: [Vec<f64>; 2],
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    pub rho: f64,
    /// Target mean SD of random cutpoints on the probability scale, per group.
    pub rc_sd: [f64; 2],
    /// `mu_beta, sigma_beta, mu_gamma, sigma_gamma` for the HSROC mechanism.
    pub hsroc: [f64; 4],
    pub hsroc_rc_sd: f64,
    pub jones_log_scale_sd: f64,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

impl TestProfile {
    fn build(name: &str, k: usize, miss: f64, cut0: Vec<f64>, cut1: Vec<f64>, mu: [f64; 2], rc: [f64; 2], hrc: f64) -> Self {
        TestProfile {
            name: name.to_string(),
            k,
            miss_rate: miss,
            cut: [cut0, cut1],
            mu,
            sigma: [0.5, 0.6],
            rho: 0.4,
            rc_sd: rc,
            hsroc: [0.5 * (mu[1] - mu[0]), 0.5, 0.0, 0.1],
            hsroc_rc_sd: hrc,
            jones_log_scale_sd: 0.1,
        }
    }

    pub fn gad2() -> Self {
        let c0 = vec![-1.2, -0.5, 0.1, 0.6, 1.1, 1.7];
        let c1 = vec![-1.4, -0.7, -0.1, 0.5, 1.0, 1.6];
        Self::build("GAD2", 7, 0.15, c0, c1, [-0.78, 0.81], [0.036, 0.068], 0.069)
    }

    pub fn hads() -> Self {
        let c0 = linspace(-1.6, 2.4, 21);
        let c1 = c0.iter().map(|c| c - 0.1).collect();
        Self::build("HADS", 22, 0.40, c0, c1, [-1.0, 0.6], [0.010, 0.011], 0.010)
    }

    pub fn bai() -> Self {
        let c0 = linspace(-2.0, 3.0, 63);
        let c1 = c0.iter().map(|c| c + 0.05).collect();
        Self::build("BAI", 64, 0.55, c0, c1, [-1.0, 0.7], [0.005, 0.003], 0.003)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "GAD2" | "GAD-2" => Some(Self::gad2()),
            "HADS" => Some(Self::hads()),
            "BAI" => Some(Self::bai()),
            _ => None,
        }
    }

    /// Shared HSROC cutpoints matching the bivariate truth at the HSROC
    /// location.
    pub fn hsroc_cut(&self) -> Vec<f64> {
        let shift = 0.5 * (self.mu[0] + self.mu[1]);
        self.cut[0].iter().zip(&self.cut[1]).map(|(a, b)| 0.5 * (a + b) - shift).collect()
    }
}

/// Dirichlet concentration whose induced cumulative probabilities have the
/// requested mean SD across thresholds; solved for `kappa` by bisection on
/// `log kappa`.
pub fn calibrate_kappa(phi: &[f64], target_sd: f64) -> f64 {
    let mean_sd = |kappa: f64| {
        let alpha: Vec<f64> = phi.iter().map(|p| ALPHA_FLOOR + p * kappa).collect();
        let total: f64 = alpha.iter().sum();
        let mut a = 0.0;
        let mut s = 0.0;
        for al in &alpha[..alpha.len() - 1] {
            a += al;
            let b = total - a;
            s += libm::sqrt(a * b / (total * total * (total + 1.0)));
        }
        s / (alpha.len() - 1) as f64
    };
    let (mut lo, mut hi) = (-5.0_f64, 40.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_sd(libm::exp(mid)) > target_sd {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    libm::exp(0.5 * (lo + hi))
}

/// Median cutpoints of the induced-Dirichlet law with concentration `alpha`.
pub fn median_cutpoints(alpha: &[f64]) -> Vec<f64> {
    let total: f64 = alpha.iter().sum();
    let mut a = 0.0;
    alpha[..alpha.len() - 1]
        .iter()
        .map(|al| {
            a += al;
            normal_quantile(beta_quantile(a, total - a, 0.5))
        })
        .collect()
}

fn probs_of(c: &[f64]) -> Vec<f64> {
    kernel::cutpoints_to_probs(&Cutpoints::new(c.to_vec()).expect("ordered preset cutpoints"), 0.0).as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub profile: TestProfile,
    pub dgm: Family,
    pub n_studies: usize,
    /// Inclusive range of per-group sample sizes.
    pub n_range: (i64, i64),
    pub seed: u64,
    /// Floor on studies reporting each threshold after masking.
    pub min_studies_per_threshold: usize,
    /// Thresholds enter the metrics only with at least this many reporting studies.
    pub min_reporting: usize,
}

impl SimScenario {
    pub fn new(profile: TestProfile, dgm: Family, n_studies: usize, seed: u64) -> Self {
        SimScenario { profile, dgm, n_studies, n_range: (50, 500), seed, min_studies_per_threshold: 1, min_reporting: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.profile.miss_rate) {
            bail!(Config, "missing rate must lie in [0, 1)");
        }
        if !matches!(self.dgm, Family::JonesFC | Family::OBivFC | Family::OBivRC | Family::OHsrocRC) {
            bail!(Config, "{} is not a data-generating mechanism", self.dgm.name());
        }
        if self.n_studies == 0 || self.n_range.0 < 1 || self.n_range.1 < self.n_range.0 {
            bail!(Config, "invalid study count or sample-size range");
        }
        if self.profile.cut.iter().any(|c| c.len() + 1 != self.profile.k) {
            bail!(Config, "cutpoint vectors must have K-1 entries");
        }
        Ok(())
    }

    /// Seed of replication `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(rep as u64);
        r.next_u64()
    }
}

/// Population quantities implied by a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct DgmTruth {
    pub se: Vec<f64>,
    pub sp: Vec<f64>,
    /// Induced-Dirichlet concentrations of random cutpoints, per group
    /// (one shared entry for HSROC).
    pub alpha: Vec<Vec<f64>>,
    /// Jones `(mu, log scale mean)` per group.
    pub jones: Option<[(f64, f64); 2]>,
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn truth(scn: &SimScenario) -> DgmTruth {
    let p = &scn.profile;
    let n_thr = p.k - 1;
    let fc_se: Vec<f64> = p.cut[1].iter().map(|c| normal_cdf(p.mu[1] - c)).collect();
    let fc_sp: Vec<f64> = p.cut[0].iter().map(|c| normal_cdf(c - p.mu[0])).collect();
    match scn.dgm {
        Family::OBivRC => {
            let alpha: Vec<Vec<f64>> = (0..2)
                .map(|d| {
                    let phi = probs_of(&p.cut[d]);
                    let kappa = calibrate_kappa(&phi, p.rc_sd[d]);
                    phi.iter().map(|v| ALPHA_FLOOR + v * kappa).collect()
                })
                .collect();
            let m0 = median_cutpoints(&alpha[0]);
            let m1 = median_cutpoints(&alpha[1]);
            DgmTruth {
                se: m1.iter().map(|c| normal_cdf(p.mu[1] - c)).collect(),
                sp: m0.iter().map(|c| normal_cdf(c - p.mu[0])).collect(),
                alpha,
                jones: None,
            }
        }
        Family::OHsrocRC => {
            let [mb, _, mg, _] = p.hsroc;
            let phi = probs_of(&p.hsroc_cut());
            let kappa = calibrate_kappa(&phi, p.hsroc_rc_sd);
            let alpha: Vec<f64> = phi.iter().map(|v| ALPHA_FLOOR + v * kappa).collect();
            let m = median_cutpoints(&alpha);
            DgmTruth {
                se: m.iter().map(|c| normal_cdf((mb - c) / libm::exp(mg))).collect(),
                sp: m.iter().map(|c| normal_cdf((c + mb) / libm::exp(-mg))).collect(),
                alpha: vec![alpha],
                jones: None,
            }
        }
        Family::JonesFC => {
            let g: Vec<f64> = (1..=n_thr).map(|k| JonesTransform::Log.g(k)).collect();
            // probit Sp = (g - mu0) / s0 and probit Se = (mu1 - g) / s1
            let ysp: Vec<f64> = fc_sp.iter().map(|v| normal_quantile(*v)).collect();
            let yse: Vec<f64> = fc_se.iter().map(|v| normal_quantile(*v)).collect();
            let (a0, b0) = fit_line(&g, &ysp);
            let (a1, b1) = fit_line(&g, &yse);
            let s0 = 1.0 / a0;
            let s1 = -1.0 / a1;
            let jones = [(-b0 * s0, libm::log(s0)), (b1 * s1, libm::log(s1))];
            DgmTruth {
                se: g.iter().map(|gk| normal_cdf((jones[1].0 - gk) / s1)).collect(),
                sp: g.iter().map(|gk| normal_cdf((gk - jones[0].0) / s0)).collect(),
                alpha: vec![],
                jones: Some(jones),
            }
        }
        _ => DgmTruth { se: fc_se, sp: fc_sp, alpha: vec![], jones: None },
    }
}

/// Complete simulated dataset with the study-level category probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub data: MADataset,
    pub truth: DgmTruth,
    pub study_probs: Vec<[Vec<f64>; 2]>,
}

fn multinomial(n: i64, p: &[f64], rng: &mut dyn RngCore) -> Vec<i64> {
    let mut left = n as u64;
    let mut rest = 1.0;
    let mut out = Vec::with_capacity(p.len());
    for (j, &pj) in p.iter().enumerate() {
        if j + 1 == p.len() {
            out.push(left as i64);
            break;
        }
        let q = if rest > 0.0 { (pj / rest).clamp(0.0, 1.0) } else { 0.0 };
        let x = if left == 0 || q == 0.0 { 0 } else { Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0) };
        out.push(x as i64);
        left -= x;
        rest -= pj;
    }
    out
}

fn probs_at(c: &[f64], loc: f64, scale: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(c.len() + 1);
    let mut prev = 0.0;
    for &ck in c {
        let f = normal_cdf((ck - loc) / scale);
        p.push((f - prev).max(0.0));
        prev = f;
    }
    p.push((1.0 - prev).max(0.0));
    p
}

pub fn generate_dataset(scn: &SimScenario, rep_seed: u64) -> Result<SimDataset> {
    scn.validate()?;
    let t = truth(scn);
    let p = &scn.profile;
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let mut studies = Vec::with_capacity(scn.n_studies);
    let mut study_probs = Vec::with_capacity(scn.n_studies);
    let g: Vec<f64> = (1..p.k).map(|k| JonesTransform::Log.g(k)).collect();
    for _ in 0..scn.n_studies {
        let probs: [Vec<f64>; 2] = match scn.dgm {
            Family::OBivFC | Family::OBivRC => {
                let b = sample_bvn(p.mu, p.sigma, p.rho, &mut rng);
                core::array::from_fn(|d| {
                    let c = if scn.dgm == Family::OBivRC { random_cuts(&t.alpha[d], &mut rng) } else { p.cut[d].clone() };
                    probs_at(&c, b[d], 1.0)
                })
            }
            Family::OHsrocRC => {
                let [mb, sb, mg, sg] = p.hsroc;
                let beta = mb + sb * std_normal(&mut rng);
                let gamma = mg + sg * std_normal(&mut rng);
                let c = random_cuts(&t.alpha[0], &mut rng);
                [probs_at(&c, -beta, libm::exp(-gamma)), probs_at(&c, beta, libm::exp(gamma))]
            }
            Family::JonesFC => {
                let j = t.jones.expect("jones truth");
                let s = [libm::exp(j[0].1), libm::exp(j[1].1)];
                let m = sample_bvn([j[0].0, j[1].0], [p.sigma[0] * s[0], p.sigma[1] * s[1]], p.rho, &mut rng);
                core::array::from_fn(|d| {
                    let sc = libm::exp(j[d].1 + p.jones_log_scale_sd * std_normal(&mut rng));
                    probs_at(&g, m[d], sc)
                })
            }
            f => bail!(Config, "{} is not a data-generating mechanism", f.name()),
        };
        let pair: [StudyCounts; 2] = core::array::from_fn(|d| {
            let n = rng.random_range(scn.n_range.0..=scn.n_range.1);
            StudyCounts::from_categories(&multinomial(n, &probs[d], &mut rng), d as u8)
        });
        studies.push(pair);
        study_probs.push(probs);
    }
    Ok(SimDataset { data: MADataset { k: p.k, studies }, truth: t, study_probs })
}

fn random_cuts(alpha: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let p = sample_dirichlet(alpha, rng);
    kernel::probs_to_cutpoints(&OrdinalProbs::new(p).expect("simplex"), 0.0).0.into_vec()
}

/// MCAR masking per (study, threshold), shared by both disease groups.
/// Every study keeps at least one threshold; thresholds reported by fewer
/// than `min_studies_per_threshold` studies get random studies restored.
pub fn apply_missingness(data: &MADataset, miss_rate: f64, rep_seed: u64, min_studies_per_threshold: usize) -> MADataset {
    if miss_rate <= 0.0 {
        return data.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    rng.set_stream(1);
    let n_thr = data.n_thresholds();
    let s = data.n_studies();
    let mut mask = vec![vec![false; n_thr]; s];
    for row in mask.iter_mut() {
        for m in row.iter_mut() {
            *m = rng.random::<f64>() < miss_rate;
        }
        if row.iter().all(|&m| m) {
            let keep = rng.random_range(0..n_thr);
            row[keep] = false;
        }
    }
    let floor = min_studies_per_threshold.min(s);
    for k in 0..n_thr {
        let mut masked: Vec<usize> = (0..s).filter(|&i| mask[i][k]).collect();
        while s - masked.len() < floor {
            let j = rng.random_range(0..masked.len());
            mask[masked.swap_remove(j)][k] = false;
        }
    }
    let mut out = data.clone();
    for (i, pair) in out.studies.iter_mut().enumerate() {
        for g in pair.iter_mut() {
            for k in 0..n_thr {
                if mask[i][k] {
                    g.cum[k] = MISSING;
                }
            }
        }
    }
    out
}

/// Running sums for one estimand.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EstimandAcc {
    pub n: usize,
    pub sum_err: f64,
    pub sum_sq_err: f64,
    pub hits: usize,
    pub sum_width: f64,
}

impl EstimandAcc {
    pub fn update(&mut self, est: f64, lo: f64, hi: f64, truth: f64) {
        let e = est - truth;
        self.n += 1;
        self.sum_err += e;
        self.sum_sq_err += e * e;
        if lo <= truth && truth <= hi {
            self.hits += 1;
        }
        self.sum_width += hi - lo;
    }

    pub fn merge(&mut self, o: &EstimandAcc) {
        self.n += o.n;
        self.sum_err += o.sum_err;
        self.sum_sq_err += o.sum_sq_err;
        self.hits += o.hits;
        self.sum_width += o.sum_width;
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    pub fn rmse(&self) -> f64 {
        libm::sqrt(self.sum_sq_err / self.nf())
    }

    pub fn bias(&self) -> f64 {
        self.sum_err / self.nf()
    }

    pub fn coverage(&self) -> f64 {
        self.hits as f64 / self.nf()
    }

    pub fn width(&self) -> f64 {
        self.sum_width / self.nf()
    }

    /// Population variance of the errors, so that `rmse^2 = bias^2 + var`.
    pub fn error_variance(&self) -> f64 {
        (self.sum_sq_err / self.nf() - self.bias() * self.bias()).max(0.0)
    }

    pub fn mcse_rmse(&self) -> f64 {
        self.rmse() / libm::sqrt(2.0 * self.nf())
    }

    pub fn mcse_bias(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        libm::sqrt(self.error_variance() * self.nf() / (self.nf() - 1.0) / self.nf())
    }

    pub fn mcse_coverage(&self) -> f64 {
        let c = self.coverage();
        libm::sqrt(c * (1.0 - c) / self.nf())
    }
}

/// Threshold-averaged metric with its averaged MCSE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub mcse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityMetrics {
    pub rmse: MetricValue,
    pub bias: MetricValue,
    /// Mean over thresholds of the absolute per-threshold bias.
    pub abs_bias: MetricValue,
    pub coverage: MetricValue,
    pub width: MetricValue,
    pub n_thresholds: usize,
}

/// Per-model accumulators over thresholds for Se and Sp.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAccumulator {
    pub model: String,
    pub se: Vec<EstimandAcc>,
    pub sp: Vec<EstimandAcc>,
    pub n_ok: usize,
    pub n_failed: usize,
}

fn average(accs: &[EstimandAcc]) -> Option<QuantityMetrics> {
    let used: Vec<&EstimandAcc> = accs.iter().filter(|a| a.n > 0).collect();
    if used.is_empty() {
        return None;
    }
    let n = used.len() as f64;
    let avg = |f: &dyn Fn(&EstimandAcc) -> f64| used.iter().map(|a| f(a)).sum::<f64>() / n;
    Some(QuantityMetrics {
        rmse: MetricValue { value: avg(&|a| a.rmse()), mcse: avg(&|a| a.mcse_rmse()) },
        bias: MetricValue { value: avg(&|a| a.bias()), mcse: avg(&|a| a.mcse_bias()) },
        abs_bias: MetricValue { value: avg(&|a| a.bias().abs()), mcse: avg(&|a| a.mcse_bias()) },
        coverage: MetricValue { value: avg(&|a| a.coverage()), mcse: avg(&|a| a.mcse_coverage()) },
        width: MetricValue { value: avg(&|a| a.width()), mcse: f64::NAN },
        n_thresholds: used.len(),
    })
}

impl MetricAccumulator {
    pub fn new(model: &str, n_thr: usize) -> Self {
        MetricAccumulator {
            model: model.to_string(),
            se: vec![EstimandAcc::default(); n_thr],
            sp: vec![EstimandAcc::default(); n_thr],
            n_ok: 0,
            n_failed: 0,
        }
    }

    pub fn se_metrics(&self) -> Option<QuantityMetrics> {
        average(&self.se)
    }

    pub fn sp_metrics(&self) -> Option<QuantityMetrics> {
        average(&self.sp)
    }

    /// Mean of the Se and Sp RMSE MCSEs; infinite before any update.
    pub fn stop_statistic(&self) -> f64 {
        match (self.se_metrics(), self.sp_metrics()) {
            (Some(a), Some(b)) => 0.5 * (a.rmse.mcse + b.rmse.mcse),
            _ => f64::INFINITY,
        }
    }

    pub fn record(&mut self, rep: &ModelRep) {
        match rep {
            ModelRep::Failed(_) => self.n_failed += 1,
            ModelRep::Ok(rows) => {
                self.n_ok += 1;
                for r in rows {
                    self.se[r.threshold - 1].update(r.se.median, r.se.lo, r.se.hi, r.truth_se);
                    self.sp[r.threshold - 1].update(r.sp.median, r.sp.lo, r.sp.hi, r.truth_sp);
                }
            }
        }
    }

    pub fn merge(&mut self, o: &MetricAccumulator) {
        for (a, b) in self.se.iter_mut().zip(&o.se) {
            a.merge(b);
        }
        for (a, b) in self.sp.iter_mut().zip(&o.sp) {
            a.merge(b);
        }
        self.n_ok += o.n_ok;
        self.n_failed += o.n_failed;
    }
}

/// Estimates at one eligible threshold of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow {
    pub threshold: usize,
    pub se: Interval,
    pub sp: Interval,
    pub truth_se: f64,
    pub truth_sp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelRep {
    Ok(Vec<RepRow>),
    Failed(String),
}

/// Settings of the replication loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub sampler: SamplerConfig,
    /// Stop once the mean RMSE MCSE falls below this many percentage points.
    pub mcse_threshold_pct: f64,
    pub max_reps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { sampler: SamplerConfig::default(), mcse_threshold_pct: 0.125, max_reps: 1000 }
    }
}

/// Simulated, masked dataset of replication `rep`.
pub fn replication_data(scn: &SimScenario, rep: usize) -> Result<(MADataset, DgmTruth)> {
    let seed = scn.rep_seed(rep);
    let sim = generate_dataset(scn, seed)?;
    let data = apply_missingness(&sim.data, scn.profile.miss_rate, seed, scn.min_studies_per_threshold);
    Ok((data, sim.truth))
}

/// Fits one model to one dataset and collects the eligible thresholds.
pub fn fit_replication(
    scn: &SimScenario,
    spec: &ModelSpec,
    data: &MADataset,
    truth: &DgmTruth,
    sampler: &SamplerConfig,
    exec: &dyn ChainExecutor,
) -> ModelRep {
    let eligible: Vec<usize> = (1..data.k).filter(|&k| data.reporting(k - 1) >= scn.min_reporting).collect();
    let row = |k: usize, se: Interval, sp: Interval| RepRow { threshold: k, se, sp, truth_se: truth.se[k - 1], truth_sp: truth.sp[k - 1] };
    let run = || -> Result<Vec<RepRow>> {
        if spec.family == Family::StratBiv {
            let mut rows = Vec::with_capacity(eligible.len());
            for &k in &eligible {
                let mut s = spec.clone();
                s.strat_threshold = Some(k);
                let m = MaModel::new(s, data.clone())?;
                let f = fit(&m, exec, sampler)?;
                let (se, sp) = summary_se_sp(&m, &f.draws, 0)?[0];
                rows.push(row(k, se, sp));
            }
            Ok(rows)
        } else {
            let m = MaModel::new(spec.clone(), data.clone())?;
            let f = fit(&m, exec, sampler)?;
            let all = summary_se_sp(&m, &f.draws, 0)?;
            Ok(eligible.iter().map(|&k| row(k, all[k - 1].0, all[k - 1].1)).collect())
        }
    };
    match run() {
        Ok(rows) => ModelRep::Ok(rows),
        Err(e) => ModelRep::Failed(e.to_string()),
    }
}

/// Runs all models on one replication.
pub fn run_replication(
    scn: &SimScenario,
    models: &[ModelSpec],
    sampler: &SamplerConfig,
    rep: usize,
    exec: &dyn ChainExecutor,
) -> Result<Vec<ModelRep>> {
    let (data, truth) = replication_data(scn, rep)?;
    let mut cfg = sampler.clone();
    cfg.seed = scn.rep_seed(rep) ^ sampler.seed;
    Ok(models.iter().map(|m| fit_replication(scn, m, &data, &truth, &cfg, exec)).collect())
}

/// Index of the replication after which the loop stops, given the stop
/// statistic observed after each replication.
pub fn stopping_point(stats: &[f64], threshold: f64) -> Option<usize> {
    stats.iter().position(|&s| s < threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub accumulators: Vec<MetricAccumulator>,
    pub n_reps: usize,
    /// Stop statistic (worst model) after every replication.
    pub trace: Vec<f64>,
}

/// Adds replications until every model's stop statistic is below the
/// threshold or the cap is reached. `on_rep` is called after each one.
pub fn adaptive_loop(
    scn: &SimScenario,
    models: &[ModelSpec],
    cfg: &SimConfig,
    exec: &dyn ChainExecutor,
    on_rep: &mut dyn FnMut(usize, &[MetricAccumulator]),
) -> Result<SimResult> {
    scn.validate()?;
    let n_thr = scn.profile.k - 1;
    let mut accs: Vec<MetricAccumulator> = models.iter().map(|m| MetricAccumulator::new(m.family.name(), n_thr)).collect();
    let threshold = cfg.mcse_threshold_pct / 100.0;
    let mut trace = Vec::new();
    let mut n = 0;
    while n < cfg.max_reps {
        let reps = run_replication(scn, models, &cfg.sampler, n, exec)?;
        for (a, r) in accs.iter_mut().zip(&reps) {
            a.record(r);
        }
        n += 1;
        on_rep(n, &accs);
        let stat = accs.iter().map(|a| a.stop_statistic()).fold(f64::NEG_INFINITY, f64::max);
        trace.push(stat);
        if stat < threshold {
            break;
        }
    }
    Ok(SimResult { accumulators: accs, n_reps: n, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_counts;

    #[test]
    fn zero_heterogeneity_gives_identical_studies() {
        let mut p = TestProfile::gad2();
        p.sigma = [0.0, 0.0];
        let scn = SimScenario::new(p, Family::OBivFC, 5, 1);
        let sim = generate_dataset(&scn, 3).unwrap();
        for s in &sim.study_probs[1..] {
            assert_eq!(s, &sim.study_probs[0]);
        }
    }

    #[test]
    fn pooled_frequencies_match_truth() {
        let mut p = TestProfile::gad2();
        p.sigma = [0.0, 0.0];
        let scn = SimScenario::new(p.clone(), Family::OBivFC, 50, 2);
        let sim = generate_dataset(&scn, 9).unwrap();
        for d in 0..2 {
            let n: i64 = sim.data.studies.iter().map(|s| s[d].n_total).sum();
            let probs = probs_at(&p.cut[d], p.mu[d], 1.0);
            let mut counts = vec![0i64; p.k];
            for s in &sim.data.studies {
                for (j, c) in s[d].category_counts().unwrap().iter().enumerate() {
                    counts[j] += c;
                }
            }
            for j in 0..p.k {
                let f = counts[j] as f64 / n as f64;
                assert!((f - probs[j]).abs() < 3.0 / libm::sqrt(n as f64));
            }
        }
    }

    #[test]
    fn generated_data_is_valid_and_reproducible() {
        for dgm in [Family::OBivFC, Family::OBivRC, Family::OHsrocRC, Family::JonesFC] {
            let scn = SimScenario::new(TestProfile::gad2(), dgm, 10, 5);
            let a = replication_data(&scn, 2).unwrap();
            let b = replication_data(&scn, 2).unwrap();
            assert_eq!(a, b);
            assert!(validate_counts(&a.0).is_empty());
            let t = &a.1;
            assert!(t.se.windows(2).all(|w| w[1] <= w[0]));
            assert!(t.sp.windows(2).all(|w| w[1] >= w[0]));
        }
    }

    #[test]
    fn kappa_calibration_hits_target_sd() {
        let phi = probs_of(&TestProfile::gad2().cut[1]);
        let kappa = calibrate_kappa(&phi, 0.068);
        let alpha: Vec<f64> = phi.iter().map(|p| ALPHA_FLOOR + p * kappa).collect();
        // Monte Carlo SD of the cumulative probabilities
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let k = alpha.len() - 1;
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k];
        for _ in 0..n {
            let p = sample_dirichlet(&alpha, &mut rng);
            let mut c = 0.0;
            for j in 0..k {
                c += p[j];
                s1[j] += c;
                s2[j] += c * c;
            }
        }
        let nf = n as f64;
        let sd: f64 = (0..k).map(|j| libm::sqrt(s2[j] / nf - (s1[j] / nf).powi(2))).sum::<f64>() / k as f64;
        assert!((sd - 0.068).abs() < 0.002, "{sd}");
    }

    #[test]
    fn missingness_rate_and_constraints() {
        let scn = SimScenario::new(TestProfile::gad2(), Family::OBivFC, 20, 1);
        let data = generate_dataset(&scn, 1).unwrap().data;
        assert_eq!(apply_missingness(&data, 0.0, 4, 1), data);
        let reps = 1000;
        let mut masked = 0usize;
        let cells = data.n_studies() * data.n_thresholds();
        for r in 0..reps {
            let m = apply_missingness(&data, 0.15, r, 1);
            for s in &m.studies {
                assert!(s[0].observed().count() > 0);
                assert_eq!(s[0].observed().count(), s[1].observed().count());
                masked += s[0].cum.iter().filter(|&&c| c == MISSING).count();
            }
            for k in 0..data.n_thresholds() {
                assert!(m.reporting(k) >= 1);
            }
        }
        let total = (reps as usize * cells) as f64;
        let rate = masked as f64 / total;
        let se = libm::sqrt(0.15 * 0.85 / total);
        assert!((rate - 0.15).abs() < 2.0 * se, "rate {rate}");
    }

    #[test]
    fn accumulator_formulas() {
        let mut a = EstimandAcc::default();
        a.update(0.4, 0.3, 0.6, 0.5);
        a.update(0.6, 0.55, 0.7, 0.5);
        assert!((a.rmse() - 0.1).abs() < 1e-15);
        assert!(a.bias().abs() < 1e-15);
        assert_eq!(a.coverage(), 0.5);
        let mut b = EstimandAcc::default();
        for _ in 0..8 {
            b.update(0.6, 0.0, 1.0, 0.5);
        }
        assert!((b.mcse_rmse() - 0.025).abs() < 1e-15);
        let mut c = EstimandAcc::default();
        for _ in 0..5 {
            c.update(0.5, 0.4, 0.6, 0.5);
        }
        assert_eq!((c.rmse(), c.bias(), c.coverage()), (0.0, 0.0, 1.0));
    }

    #[test]
    fn rmse_bias_variance_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = EstimandAcc::default();
        let est: Vec<f64> = (0..57).map(|_| 0.7 + 0.05 * std_normal(&mut rng)).collect();
        for &e in &est {
            a.update(e, e - 0.1, e + 0.1, 0.71);
        }
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let var = est.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / est.len() as f64;
        assert!((a.rmse() * a.rmse() - (a.bias() * a.bias() + var)).abs() < 1e-12);
    }

    #[test]
    fn stopping_replays_first_crossing() {
        let stats = [0.9, 0.5, 0.3, 0.2, 0.1];
        assert_eq!(stopping_point(&stats, 0.25), Some(3));
        assert_eq!(stopping_point(&stats, f64::INFINITY), Some(0));
        assert_eq!(stopping_point(&stats, 0.0), None);
    }
}
