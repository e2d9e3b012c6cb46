//! Hierarchical model families for single-test meta-analysis.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::ad::{value_and_gradient, Real};
use crate::data::{validate_counts, MADataset, StudyCounts, MISSING};
use crate::density::{bvn_lpdf, correlation_lpdf, dirichlet_lpdf, normal_iid_lpdf, HalfNormal, Normal, StudentT};
use crate::error::{bail, Result};
use crate::kernel::{self, induced_dirichlet_lpdf, loglik_loc_scale, OrdinalProbs, ALPHA_FLOOR};
use crate::mcmc::LogDensity;
use crate::special::{self, normal_cdf, normal_quantile};
use crate::transform::{BlockId, BlockKind, ParamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    OBivFC,
    OBivRC,
    OHsrocFC,
    OHsrocRC,
    JonesFC,
    StratBiv,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::OBivFC, Family::OBivRC, Family::OHsrocFC, Family::OHsrocRC, Family::JonesFC, Family::StratBiv];

    pub fn name(self) -> &'static str {
        match self {
            Family::OBivFC => "obiv_fc",
            Family::OBivRC => "obiv_rc",
            Family::OHsrocFC => "ohsroc_fc",
            Family::OHsrocRC => "ohsroc_rc",
            Family::JonesFC => "jones",
            Family::StratBiv => "strat_biv",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.name() == s)
    }

    pub fn random_cutpoints(self) -> bool {
        matches!(self, Family::OBivRC | Family::OHsrocRC)
    }
}

/// Positive function applied to the HSROC scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleLink {
    #[default]
    Exp,
    Softplus,
}

impl ScaleLink {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            ScaleLink::Exp => x.exp(),
            ScaleLink::Softplus => x.softplus(),
        }
    }
}

/// Threshold transform of the Jones model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum JonesTransform {
    #[default]
    Log,
    BoxCox(f64),
}

pub const BOX_COX_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

impl JonesTransform {
    pub fn validate(self) -> Result<()> {
        if let JonesTransform::BoxCox(l) = self {
            if !BOX_COX_GRID.contains(&l) {
                bail!(Config, "Box-Cox lambda {l} is not one of {:?}", BOX_COX_GRID);
            }
        }
        Ok(())
    }

    /// Transformed position of threshold `k` (1-based). Threshold `k`
    /// separates raw scores `k - 1` and `k`; scores are offset by one so the
    /// transform sees `k`.
    pub fn g(self, k: usize) -> f64 {
        let x = k as f64;
        match self {
            JonesTransform::Log => libm::log(x),
            JonesTransform::BoxCox(l) if l == 0.0 => libm::log(x),
            JonesTransform::BoxCox(l) => (libm::pow(x, l) - 1.0) / l,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorSet {
    /// Location means (probit scale); also the HSROC `mu_beta`.
    pub mu_beta: Normal,
    /// Between-study SDs per group; the HSROC `sigma_beta` uses entry 0.
    pub sigma_beta: [HalfNormal; 2],
    /// `(rho + 1) / 2 ~ Beta(shape, shape)`.
    pub rho_shape: f64,
    /// Dirichlet concentrations for cutpoints (length K); `None` means all ones.
    pub dirichlet_alpha: Option<Vec<f64>>,
    /// Prior on `log kappa`.
    pub kappa: StudentT,
    pub mu_gamma: Normal,
    pub sigma_gamma: HalfNormal,
    /// Jones: mean and SD of the per-study locations on the transformed scale.
    pub jones_location: Normal,
    pub jones_location_sd: HalfNormal,
    /// Jones: mean and SD of the per-study log scales.
    pub jones_log_scale: Normal,
    pub jones_log_scale_sd: HalfNormal,
}

impl Default for PriorSet {
    fn default() -> Self {
        PriorSet {
            mu_beta: Normal::new(0.0, 2.0),
            sigma_beta: [HalfNormal::new(0.5), HalfNormal::new(0.5)],
            rho_shape: 2.0,
            dirichlet_alpha: None,
            kappa: StudentT::new(5.0, 3.0, 1.5),
            mu_gamma: Normal::new(0.0, 0.5),
            sigma_gamma: HalfNormal::new(0.25),
            jones_location: Normal::new(0.0, 5.0),
            jones_location_sd: HalfNormal::new(1.0),
            jones_log_scale: Normal::new(0.0, 1.5),
            jones_log_scale_sd: HalfNormal::new(0.5),
        }
    }
}

impl PriorSet {
    pub fn validate(&self, k: usize) -> Result<()> {
        let sds = [
            self.mu_beta.sd,
            self.sigma_beta[0].sd,
            self.sigma_beta[1].sd,
            self.kappa.scale,
            self.kappa.df,
            self.mu_gamma.sd,
            self.sigma_gamma.sd,
            self.jones_location.sd,
            self.jones_location_sd.sd,
            self.jones_log_scale.sd,
            self.jones_log_scale_sd.sd,
            self.rho_shape,
        ];
        if sds.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            bail!(Config, "prior scales and shapes must be positive and finite");
        }
        if let Some(a) = &self.dirichlet_alpha {
            if a.len() != k {
                bail!(Config, "dirichlet_alpha has length {}, expected K = {k}", a.len());
            }
            if a.iter().any(|&v| !(v > 0.0)) {
                bail!(Config, "dirichlet_alpha entries must be positive");
            }
        }
        Ok(())
    }

    pub fn alpha(&self, k: usize) -> Vec<f64> {
        self.dirichlet_alpha.clone().unwrap_or_else(|| vec![1.0; k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub priors: PriorSet,
    pub scale_link: ScaleLink,
    pub jones_transform: JonesTransform,
    /// Threshold (1-based) used by the stratified model.
    pub strat_threshold: Option<usize>,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        ModelSpec {
            family,
            priors: PriorSet::default(),
            scale_link: ScaleLink::Exp,
            jones_transform: JonesTransform::Log,
            strat_threshold: None,
        }
    }

    pub fn strat(k: usize) -> Self {
        ModelSpec { strat_threshold: Some(k), ..Self::new(Family::StratBiv) }
    }
}

/// Se and Sp at a list of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    pub se: Vec<f64>,
    pub sp: Vec<f64>,
}

/// Anything that can turn parameter draws into accuracy estimates.
pub trait AccuracyModel: LogDensity {
    fn param_names(&self) -> Vec<String>;
    fn constrain(&self, u: &[f64]) -> Vec<f64>;
    fn n_tests(&self) -> usize {
        1
    }
    fn test_name(&self, _t: usize) -> String {
        String::from("test")
    }
    /// Threshold labels (1-based) at which accuracy is reported.
    fn thresholds(&self, test: usize) -> Vec<usize>;
    /// Starting point of one chain on the unconstrained scale.
    fn init(&self, seed: u64) -> Result<Vec<f64>>;
    /// Pooled Se/Sp for one constrained draw.
    fn summary_accuracy(&self, theta: &[f64], test: usize) -> Accuracy;
    /// Se/Sp of a new study drawn from the between-study law.
    fn predictive_accuracy(&self, theta: &[f64], test: usize, rng: &mut dyn RngCore) -> Accuracy;
}

#[derive(Debug, Clone)]
pub(crate) enum Cuts {
    Fixed(Vec<BlockId>),
    Random { c: Vec<BlockId>, phi: Vec<BlockId>, kappa: Vec<BlockId> },
}

#[derive(Debug, Clone)]
enum Index {
    Biv { loc: [BlockId; 2], mu: [BlockId; 2], sigma: [BlockId; 2], rho: BlockId, cuts: Cuts },
    Hsroc { beta: BlockId, gamma: BlockId, mu_b: BlockId, sd_b: BlockId, mu_g: BlockId, sd_g: BlockId, cuts: Cuts },
    Jones { loc: [BlockId; 2], lsig: [BlockId; 2], mu: [BlockId; 2], sd: [BlockId; 2], rho: BlockId, ls_mu: [BlockId; 2], ls_sd: [BlockId; 2] },
    Strat { loc: [BlockId; 2], mu: [BlockId; 2], sigma: [BlockId; 2], rho: BlockId },
}

/// A single-test model bound to its data.
#[derive(Debug)]
pub struct MaModel {
    pub spec: ModelSpec,
    pub data: MADataset,
    layout: ParamLayout,
    index: Index,
    alpha: Vec<f64>,
    /// Jones transformed threshold positions.
    g: Vec<f64>,
    /// Stratified model: (study index, single-threshold counts per group).
    stratum: Vec<(usize, [StudyCounts; 2])>,
    tape_hint: AtomicUsize,
}

impl Clone for MaModel {
    fn clone(&self) -> Self {
        MaModel {
            spec: self.spec.clone(),
            data: self.data.clone(),
            layout: self.layout.clone(),
            index: self.index.clone(),
            alpha: self.alpha.clone(),
            g: self.g.clone(),
            stratum: self.stratum.clone(),
            tape_hint: AtomicUsize::new(self.tape_hint.load(Ordering::Relaxed)),
        }
    }
}

fn add_cuts(l: &mut ParamLayout, family: Family, groups: &[&str], n_thr: usize, k: usize, s: usize) -> Cuts {
    if family.random_cutpoints() {
        let c = groups.iter().map(|g| l.add(&alloc::format!("C{g}"), BlockKind::Ordered(n_thr), s)).collect();
        let phi = groups.iter().map(|g| l.add(&alloc::format!("phi{g}"), BlockKind::Simplex(k), 1)).collect();
        let kappa = groups.iter().map(|g| l.add(&alloc::format!("kappa{g}"), BlockKind::Positive, 1)).collect();
        Cuts::Random { c, phi, kappa }
    } else {
        Cuts::Fixed(groups.iter().map(|g| l.add(&alloc::format!("C{g}"), BlockKind::Ordered(n_thr), 1)).collect())
    }
}

/// Median of a slice (mean of the middle two for even length).
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Draws a Dirichlet vector; components that underflow are left at zero.
pub fn sample_dirichlet(alpha: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let mut x: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map(|g| g.sample(rng)).unwrap_or(0.0))
        .collect();
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    } else {
        let n = x.len() as f64;
        x.iter_mut().for_each(|v| *v = 1.0 / n);
    }
    x
}

pub(crate) fn std_normal(rng: &mut dyn RngCore) -> f64 {
    StandardNormal.sample(rng)
}

/// Pair from a bivariate normal.
pub fn sample_bvn(mu: [f64; 2], sd: [f64; 2], rho: f64, rng: &mut dyn RngCore) -> [f64; 2] {
    let z0 = std_normal(rng);
    let z1 = std_normal(rng);
    [mu[0] + sd[0] * z0, mu[1] + sd[1] * (rho * z0 + libm::sqrt((1.0 - rho * rho).max(0.0)) * z1)]
}

/// Cutpoints of a new study drawn from the induced-Dirichlet with concentration `alpha`.
pub fn sample_cutpoints(alpha: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let p = sample_dirichlet(alpha, rng);
    let probs = OrdinalProbs::new(p).expect("dirichlet draw is a simplex");
    kernel::probs_to_cutpoints(&probs, 0.0).0.into_vec()
}

/// Pooled empirical survival `P(Y > k)` per threshold; thresholds nobody
/// reports are interpolated.
pub(crate) fn pooled_survival(groups: &[&StudyCounts], n_thr: usize) -> Result<Vec<f64>> {
    let mut num = vec![0.0; n_thr];
    let mut den = vec![0.0; n_thr];
    for g in groups {
        for (k, c) in g.observed() {
            num[k] += c as f64;
            den[k] += g.n_total as f64;
        }
    }
    let obs: Vec<usize> = (0..n_thr).filter(|&k| den[k] > 0.0).collect();
    if obs.is_empty() {
        bail!(Data, "no threshold is observed in any study");
    }
    let raw: Vec<Option<f64>> = (0..n_thr).map(|k| (den[k] > 0.0).then(|| num[k] / den[k])).collect();
    let mut out = vec![0.0; n_thr];
    for k in 0..n_thr {
        out[k] = match raw[k] {
            Some(v) => v,
            None => {
                let lo = (0..k).rev().find(|&j| raw[j].is_some());
                let hi = (k + 1..n_thr).find(|&j| raw[j].is_some());
                // ends anchored at survival 1 (before threshold 1) and 0 (after K-1)
                let (x0, y0) = lo.map_or((-1.0, 1.0), |j| (j as f64, raw[j].unwrap()));
                let (x1, y1) = hi.map_or((n_thr as f64, 0.0), |j| (j as f64, raw[j].unwrap()));
                y0 + (y1 - y0) * (k as f64 - x0) / (x1 - x0)
            }
        };
    }
    Ok(out)
}

/// Category probabilities from survival values, floored so every category
/// keeps some mass.
pub(crate) fn survival_to_probs(surv: &[f64], floor: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(surv.len() + 1);
    let mut prev = 1.0;
    for &s in surv {
        p.push((prev - s).max(floor));
        prev = s;
    }
    p.push(prev.max(floor));
    let tot: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= tot);
    p
}

/// Half-width of the uniform jitter added to the unconstrained start.
pub const INIT_JITTER: f64 = 0.5;

fn emp_probit(c: i64, n: i64) -> f64 {
    let s = (c as f64 + 0.5) / (n as f64 + 1.0);
    normal_quantile(s)
}

impl MaModel {
    pub fn new(spec: ModelSpec, data: MADataset) -> Result<Self> {
        let v = validate_counts(&data);
        if let Some(first) = v.first() {
            bail!(Data, "{first}");
        }
        if data.k < 2 {
            bail!(Data, "need at least two categories");
        }
        if data.studies.is_empty() {
            bail!(Data, "dataset has no studies");
        }
        spec.priors.validate(data.k)?;
        spec.jones_transform.validate()?;
        let k = data.k;
        let n_thr = k - 1;
        let s = data.n_studies();
        let mut l = ParamLayout::new();
        let mut stratum = Vec::new();
        let index = match spec.family {
            Family::OBivFC | Family::OBivRC => {
                let loc = [l.add("beta0", BlockKind::Free, s), l.add("beta1", BlockKind::Free, s)];
                let mu = [l.add("mu_beta0", BlockKind::Free, 1), l.add("mu_beta1", BlockKind::Free, 1)];
                let sigma = [l.add("sigma_beta0", BlockKind::Positive, 1), l.add("sigma_beta1", BlockKind::Positive, 1)];
                let rho = l.add("rho_beta", BlockKind::Correlation, 1);
                let cuts = add_cuts(&mut l, spec.family, &["0", "1"], n_thr, k, s);
                Index::Biv { loc, mu, sigma, rho, cuts }
            }
            Family::OHsrocFC | Family::OHsrocRC => {
                let beta = l.add("beta", BlockKind::Free, s);
                let gamma = l.add("gamma", BlockKind::Free, s);
                let mu_b = l.add("mu_beta", BlockKind::Free, 1);
                let sd_b = l.add("sigma_beta", BlockKind::Positive, 1);
                let mu_g = l.add("mu_gamma", BlockKind::Free, 1);
                let sd_g = l.add("sigma_gamma", BlockKind::Positive, 1);
                let cuts = add_cuts(&mut l, spec.family, &[""], n_thr, k, s);
                Index::Hsroc { beta, gamma, mu_b, sd_b, mu_g, sd_g, cuts }
            }
            Family::JonesFC => {
                let loc = [l.add("mu0", BlockKind::Free, s), l.add("mu1", BlockKind::Free, s)];
                let lsig = [l.add("logsigma0", BlockKind::Free, s), l.add("logsigma1", BlockKind::Free, s)];
                let mu = [l.add("mu_mean0", BlockKind::Free, 1), l.add("mu_mean1", BlockKind::Free, 1)];
                let sd = [l.add("mu_sd0", BlockKind::Positive, 1), l.add("mu_sd1", BlockKind::Positive, 1)];
                let rho = l.add("rho_mu", BlockKind::Correlation, 1);
                let ls_mu = [l.add("logsigma_mean0", BlockKind::Free, 1), l.add("logsigma_mean1", BlockKind::Free, 1)];
                let ls_sd = [l.add("logsigma_sd0", BlockKind::Positive, 1), l.add("logsigma_sd1", BlockKind::Positive, 1)];
                Index::Jones { loc, lsig, mu, sd, rho, ls_mu, ls_sd }
            }
            Family::StratBiv => {
                let Some(kk) = spec.strat_threshold else {
                    bail!(Config, "the stratified model needs a threshold");
                };
                if kk == 0 || kk > n_thr {
                    bail!(Config, "threshold {kk} outside 1..={n_thr}");
                }
                for (i, pair) in data.studies.iter().enumerate() {
                    if pair[0].is_observed(kk - 1) || pair[1].is_observed(kk - 1) {
                        let one = |g: &StudyCounts| StudyCounts::new(g.n_total, vec![g.cum[kk - 1]], g.group);
                        stratum.push((i, [one(&pair[0]), one(&pair[1])]));
                    }
                }
                if stratum.is_empty() {
                    bail!(Data, "empty stratum: no study reports threshold {kk}");
                }
                let m = stratum.len();
                let loc = [l.add("theta0", BlockKind::Free, m), l.add("theta1", BlockKind::Free, m)];
                let mu = [l.add("mu0", BlockKind::Free, 1), l.add("mu1", BlockKind::Free, 1)];
                let sigma = [l.add("sigma0", BlockKind::Positive, 1), l.add("sigma1", BlockKind::Positive, 1)];
                let rho = l.add("rho", BlockKind::Correlation, 1);
                Index::Strat { loc, mu, sigma, rho }
            }
        };
        let g = (1..=n_thr).map(|k| spec.jones_transform.g(k)).collect();
        Ok(MaModel {
            alpha: spec.priors.alpha(k),
            spec,
            data,
            layout: l,
            index,
            g,
            stratum,
            tape_hint: AtomicUsize::new(1024),
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn k(&self) -> usize {
        self.data.k
    }

    pub fn n_thresholds(&self) -> usize {
        self.data.k - 1
    }

    /// Number of studies entering the likelihood.
    pub fn stratum_size(&self) -> usize {
        self.stratum.len()
    }

    fn b(&self, id: BlockId) -> &crate::transform::Block {
        self.layout.block(id)
    }

    /// Full log posterior on the unconstrained scale.
    pub fn log_density<T: Real>(&self, u: &[T]) -> T {
        let mut th = Vec::new();
        let lj = self.layout.constrain(u, &mut th);
        self.shift_locations(&mut th, 1.0);
        lj + self.log_prior(&th) + self.log_likelihood(&th)
    }

    /// The bivariate families sample study locations and cutpoints relative
    /// to the group mean: `beta = mu + r` and `C = mu + c`. Only `C - beta`
    /// enters the likelihood, so in the raw coordinates the posterior has a
    /// long ridge along a joint shift. The map has unit Jacobian.
    fn shift_locations<T: Real>(&self, th: &mut [T], sign: f64) {
        let Index::Biv { loc, mu, cuts, .. } = &self.index else {
            return;
        };
        let s = self.data.n_studies();
        for d in 0..2 {
            let m = th[self.b(mu[d]).at(0, 0)] * sign;
            for i in self.b(loc[d]).range_all(s) {
                th[i] = th[i] + m;
            }
            let c = match cuts {
                Cuts::Fixed(c) => self.b(c[d]).range_all(1),
                Cuts::Random { c, .. } => self.b(c[d]).range_all(s),
            };
            for i in c {
                th[i] = th[i] + m;
            }
        }
    }

    /// Priors and between-study hierarchy on constrained values.
    pub fn log_prior<T: Real>(&self, th: &[T]) -> T {
        let p = &self.spec.priors;
        let zero = th[0].constant(0.0);
        let mut lp = zero;
        let s = self.data.n_studies();
        match &self.index {
            Index::Biv { loc, mu, sigma, rho, .. } | Index::Strat { loc, mu, sigma, rho } => {
                let m = self.b(loc[0]).count;
                let x0 = &th[self.b(loc[0]).range_all(m)];
                let x1 = &th[self.b(loc[1]).range_all(m)];
                let mus = [th[self.b(mu[0]).at(0, 0)], th[self.b(mu[1]).at(0, 0)]];
                let sds = [th[self.b(sigma[0]).at(0, 0)], th[self.b(sigma[1]).at(0, 0)]];
                let r = th[self.b(*rho).at(0, 0)];
                lp += bvn_lpdf(x0, x1, mus, sds, r);
                for d in 0..2 {
                    lp += p.mu_beta.lpdf(mus[d]) + p.sigma_beta[d].lpdf(sds[d]);
                }
                lp += correlation_lpdf(r, p.rho_shape);
                if let Index::Biv { cuts, .. } = &self.index {
                    lp += self.cut_prior(th, cuts, s);
                }
            }
            Index::Hsroc { beta, gamma, mu_b, sd_b, mu_g, sd_g, cuts } => {
                let (mb, sb) = (th[self.b(*mu_b).at(0, 0)], th[self.b(*sd_b).at(0, 0)]);
                let (mg, sg) = (th[self.b(*mu_g).at(0, 0)], th[self.b(*sd_g).at(0, 0)]);
                lp += normal_iid_lpdf(&th[self.b(*beta).range_all(s)], mb, sb);
                lp += normal_iid_lpdf(&th[self.b(*gamma).range_all(s)], mg, sg);
                lp += p.mu_beta.lpdf(mb) + p.sigma_beta[0].lpdf(sb) + p.mu_gamma.lpdf(mg) + p.sigma_gamma.lpdf(sg);
                lp += self.cut_prior(th, cuts, s);
            }
            Index::Jones { loc, lsig, mu, sd, rho, ls_mu, ls_sd } => {
                let x0 = &th[self.b(loc[0]).range_all(s)];
                let x1 = &th[self.b(loc[1]).range_all(s)];
                let mus = [th[self.b(mu[0]).at(0, 0)], th[self.b(mu[1]).at(0, 0)]];
                let sds = [th[self.b(sd[0]).at(0, 0)], th[self.b(sd[1]).at(0, 0)]];
                let r = th[self.b(*rho).at(0, 0)];
                lp += bvn_lpdf(x0, x1, mus, sds, r) + correlation_lpdf(r, p.rho_shape);
                for d in 0..2 {
                    lp += p.jones_location.lpdf(mus[d]) + p.jones_location_sd.lpdf(sds[d]);
                    let (lm, ls) = (th[self.b(ls_mu[d]).at(0, 0)], th[self.b(ls_sd[d]).at(0, 0)]);
                    lp += p.jones_log_scale.lpdf(lm) + p.jones_log_scale_sd.lpdf(ls);
                    lp += normal_iid_lpdf(&th[self.b(lsig[d]).range_all(s)], lm, ls);
                }
            }
        }
        lp
    }

    fn cut_prior<T: Real>(&self, th: &[T], cuts: &Cuts, s: usize) -> T {
        let zero = th[0].constant(0.0);
        let mut lp = zero;
        let alpha_c: Vec<T> = self.alpha.iter().map(|&a| zero.constant(a)).collect();
        match cuts {
            Cuts::Fixed(ids) => {
                for id in ids {
                    lp += induced_dirichlet_lpdf(&th[self.b(*id).range(0)], &alpha_c, 0.0);
                }
            }
            Cuts::Random { c, phi, kappa } => {
                for g in 0..c.len() {
                    let ph = &th[self.b(phi[g]).range(0)];
                    let kap = th[self.b(kappa[g]).at(0, 0)];
                    lp += dirichlet_lpdf(ph, &alpha_c);
                    let log_k = kap.ln();
                    // prior on log kappa, then the -log kappa correction; the
                    // exp transform adds +log kappa through the layout Jacobian
                    lp += self.spec.priors.kappa.lpdf(log_k) - log_k;
                    let alpha: Vec<T> = ph.iter().map(|&p| p * kap + ALPHA_FLOOR).collect();
                    for i in 0..s {
                        lp += induced_dirichlet_lpdf(&th[self.b(c[g]).range(i)], &alpha, 0.0);
                    }
                }
            }
        }
        lp
    }

    fn cut_slice<'a, T>(&self, th: &'a [T], cuts: &Cuts, g: usize, s: usize) -> &'a [T] {
        match cuts {
            Cuts::Fixed(ids) => &th[self.b(ids[g]).range(0)],
            Cuts::Random { c, .. } => &th[self.b(c[g]).range(s)],
        }
    }

    /// Sum of the factorized likelihood kernels over studies and groups.
    pub fn log_likelihood<T: Real>(&self, th: &[T]) -> T {
        let zero = th[0].constant(0.0);
        let one = zero.constant(1.0);
        let mut ll = zero;
        match &self.index {
            Index::Biv { loc, cuts, .. } => {
                for (s, pair) in self.data.studies.iter().enumerate() {
                    for d in 0..2 {
                        let c = self.cut_slice(th, cuts, d, s);
                        ll += loglik_loc_scale(&pair[d], th[self.b(loc[d]).at(s, 0)], one, c);
                    }
                }
            }
            Index::Hsroc { beta, gamma, cuts, .. } => {
                let link = self.spec.scale_link;
                for (s, pair) in self.data.studies.iter().enumerate() {
                    let (b, g) = (th[self.b(*beta).at(s, 0)], th[self.b(*gamma).at(s, 0)]);
                    let c = self.cut_slice(th, cuts, 0, s);
                    ll += loglik_loc_scale(&pair[0], -b, link.apply(-g), c);
                    ll += loglik_loc_scale(&pair[1], b, link.apply(g), c);
                }
            }
            Index::Jones { loc, lsig, .. } => {
                let gc: Vec<T> = self.g.iter().map(|&v| zero.constant(v)).collect();
                for (s, pair) in self.data.studies.iter().enumerate() {
                    for d in 0..2 {
                        let m = th[self.b(loc[d]).at(s, 0)];
                        let sc = th[self.b(lsig[d]).at(s, 0)].exp();
                        ll += loglik_loc_scale(&pair[d], m, sc, &gc);
                    }
                }
            }
            Index::Strat { loc, .. } => {
                let c = [zero];
                for (i, (_, pair)) in self.stratum.iter().enumerate() {
                    ll += loglik_loc_scale(&pair[0], -th[self.b(loc[0]).at(i, 0)], one, &c);
                    ll += loglik_loc_scale(&pair[1], th[self.b(loc[1]).at(i, 0)], one, &c);
                }
            }
        }
        ll
    }

    fn scalar(&self, th: &[f64], id: BlockId) -> f64 {
        th[self.b(id).at(0, 0)]
    }

    /// Population (summary) cutpoints: fixed values, or the per-draw median
    /// of study cutpoints for random cutpoints.
    pub fn summary_cutpoints(&self, th: &[f64], cuts_group: usize) -> Vec<f64> {
        let cuts = match &self.index {
            Index::Biv { cuts, .. } | Index::Hsroc { cuts, .. } => cuts,
            _ => return Vec::new(),
        };
        match cuts {
            Cuts::Fixed(ids) => th[self.b(ids[cuts_group]).range(0)].to_vec(),
            Cuts::Random { c, .. } => {
                let b = self.b(c[cuts_group]);
                (0..self.n_thresholds())
                    .map(|k| {
                        let mut v: Vec<f64> = (0..b.count).map(|s| th[b.at(s, k)]).collect();
                        median(&mut v)
                    })
                    .collect()
            }
        }
    }

    fn random_alpha(&self, th: &[f64], cuts: &Cuts, g: usize) -> Option<Vec<f64>> {
        match cuts {
            Cuts::Fixed(_) => None,
            Cuts::Random { phi, kappa, .. } => {
                let kap = self.scalar(th, kappa[g]);
                Some(th[self.b(phi[g]).range(0)].iter().map(|&p| ALPHA_FLOOR + p * kap).collect())
            }
        }
    }

    /// Draws study-level quantities for a new study: per group the location,
    /// scale and cutpoints.
    fn new_study(&self, th: &[f64], rng: &mut dyn RngCore) -> [(f64, f64, Vec<f64>); 2] {
        match &self.index {
            Index::Biv { mu, sigma, rho, cuts, .. } => {
                let b = sample_bvn(
                    [self.scalar(th, mu[0]), self.scalar(th, mu[1])],
                    [self.scalar(th, sigma[0]), self.scalar(th, sigma[1])],
                    self.scalar(th, *rho),
                    rng,
                );
                let mut out: [(f64, f64, Vec<f64>); 2] = Default::default();
                for d in 0..2 {
                    let c = match self.random_alpha(th, cuts, d) {
                        Some(a) => sample_cutpoints(&a, rng),
                        None => self.summary_cutpoints(th, d),
                    };
                    out[d] = (b[d], 1.0, c);
                }
                out
            }
            Index::Hsroc { mu_b, sd_b, mu_g, sd_g, cuts, .. } => {
                let b = self.scalar(th, *mu_b) + self.scalar(th, *sd_b) * std_normal(rng);
                let g = self.scalar(th, *mu_g) + self.scalar(th, *sd_g) * std_normal(rng);
                let c = match self.random_alpha(th, cuts, 0) {
                    Some(a) => sample_cutpoints(&a, rng),
                    None => self.summary_cutpoints(th, 0),
                };
                let link = self.spec.scale_link;
                [(-b, link.apply(-g), c.clone()), (b, link.apply(g), c)]
            }
            Index::Jones { mu, sd, rho, ls_mu, ls_sd, .. } => {
                let m = sample_bvn(
                    [self.scalar(th, mu[0]), self.scalar(th, mu[1])],
                    [self.scalar(th, sd[0]), self.scalar(th, sd[1])],
                    self.scalar(th, *rho),
                    rng,
                );
                let sc: [f64; 2] = core::array::from_fn(|d| {
                    libm::exp(self.scalar(th, ls_mu[d]) + self.scalar(th, ls_sd[d]) * std_normal(rng))
                });
                [(m[0], sc[0], self.g.clone()), (m[1], sc[1], self.g.clone())]
            }
            Index::Strat { mu, sigma, rho, .. } => {
                let t = sample_bvn(
                    [self.scalar(th, mu[0]), self.scalar(th, mu[1])],
                    [self.scalar(th, sigma[0]), self.scalar(th, sigma[1])],
                    self.scalar(th, *rho),
                    rng,
                );
                [(-t[0], 1.0, vec![0.0]), (t[1], 1.0, vec![0.0])]
            }
        }
    }

    /// Log predictive density of one held-out study for one posterior draw:
    /// log of the mean over `m` fresh draws of study effects of the full
    /// likelihood (binomial coefficients included).
    pub fn heldout_lpd(&self, th: &[f64], study: &[StudyCounts; 2], m: usize, rng: &mut dyn RngCore) -> f64 {
        let kk = self.spec.strat_threshold;
        let groups: [StudyCounts; 2] = match (self.spec.family, kk) {
            (Family::StratBiv, Some(k)) => {
                core::array::from_fn(|d| StudyCounts::new(study[d].n_total, vec![study[d].cum[k - 1]], d as u8))
            }
            _ => study.clone(),
        };
        let coef: f64 = groups.iter().map(kernel::log_binomial_coefficients).sum();
        let mut vals = Vec::with_capacity(m);
        let mut scratch = vec![0.0; self.n_thresholds()];
        for _ in 0..m {
            let eff = self.new_study(th, rng);
            let mut ll = coef;
            for d in 0..2 {
                let (loc, sc, ref c) = eff[d];
                scratch.iter_mut().for_each(|v| *v = 0.0);
                ll += kernel::loglik_z_grad(&groups[d], |k| (loc - c[k]) / sc, &mut scratch);
            }
            vals.push(ll);
        }
        special::log_mean_exp(&vals)
    }

    /// Se/Sp at every threshold for given per-group (location, scale, cutpoints).
    fn accuracy_from(&self, eff: &[(f64, f64, Vec<f64>); 2]) -> Accuracy {
        let (l0, s0, ref c0) = eff[0];
        let (l1, s1, ref c1) = eff[1];
        let sp = c0.iter().map(|&c| normal_cdf((c - l0) / s0)).collect();
        let se = c1.iter().map(|&c| normal_cdf((l1 - c) / s1)).collect();
        Accuracy { se, sp }
    }

    /// Deterministic starting point on the constrained scale, before jitter.
    pub fn base_init(&self) -> Result<Vec<f64>> {
        let n_thr = self.n_thresholds();
        let s = self.data.n_studies();
        let mut th = vec![0.0; self.layout.c_dim()];
        let floor = 1e-4;
        let group = |d: usize| -> Vec<&StudyCounts> { self.data.studies.iter().map(|p| &p[d]).collect() };
        let set_cuts = |th: &mut Vec<f64>, cuts: &Cuts, g: usize, surv: &[f64]| {
            let p = survival_to_probs(surv, floor);
            let c = kernel::probs_to_cutpoints(&OrdinalProbs::new(p.clone()).unwrap(), 0.0).0.into_vec();
            match cuts {
                Cuts::Fixed(ids) => th[self.b(ids[g]).range(0)].copy_from_slice(&c),
                Cuts::Random { c: cid, phi, kappa } => {
                    for i in 0..s {
                        th[self.b(cid[g]).range(i)].copy_from_slice(&c);
                    }
                    th[self.b(phi[g]).range(0)].copy_from_slice(&p);
                    th[self.b(kappa[g]).at(0, 0)] = libm::exp(3.0);
                }
            }
            c
        };
        // mean over reported thresholds of probit(S_k) + c_k
        let study_loc = |g: &StudyCounts, c: &[f64], scale: f64| -> Option<f64> {
            let v: Vec<f64> = g.observed().map(|(k, x)| scale * emp_probit(x, g.n_total) + c[k]).collect();
            (!v.is_empty() && g.n_total > 0).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let fill = |v: Vec<Option<f64>>| -> (Vec<f64>, f64) {
            let obs: Vec<f64> = v.iter().flatten().copied().collect();
            let m = if obs.is_empty() { 0.0 } else { obs.iter().sum::<f64>() / obs.len() as f64 };
            (v.into_iter().map(|x| x.unwrap_or(m)).collect(), m)
        };
        match &self.index {
            Index::Biv { loc, mu, sigma, rho, cuts } => {
                for d in 0..2 {
                    let surv = pooled_survival(&group(d), n_thr)?;
                    let c = set_cuts(&mut th, cuts, d, &surv);
                    let (v, m) = fill(self.data.studies.iter().map(|p| study_loc(&p[d], &c, 1.0)).collect());
                    th[self.b(loc[d]).range_all(s)].copy_from_slice(&v);
                    th[self.b(mu[d]).at(0, 0)] = m;
                    th[self.b(sigma[d]).at(0, 0)] = 0.2;
                }
                th[self.b(*rho).at(0, 0)] = 0.0;
            }
            Index::Hsroc { beta, mu_b, sd_b, mu_g, sd_g, cuts, .. } => {
                let mut all = group(0);
                all.extend(group(1));
                let surv = pooled_survival(&all, n_thr)?;
                let c = set_cuts(&mut th, cuts, 0, &surv);
                let est: Vec<Option<f64>> = self
                    .data
                    .studies
                    .iter()
                    .map(|p| {
                        let a = study_loc(&p[1], &c, 1.0);
                        let b = study_loc(&p[0], &c, 1.0).map(|v| -v);
                        match (a, b) {
                            (Some(x), Some(y)) => Some(0.5 * (x + y)),
                            (x, y) => x.or(y),
                        }
                    })
                    .collect();
                let (v, m) = fill(est);
                th[self.b(*beta).range_all(s)].copy_from_slice(&v);
                th[self.b(*mu_b).at(0, 0)] = m;
                th[self.b(*sd_b).at(0, 0)] = 0.2;
                th[self.b(*mu_g).at(0, 0)] = 0.0;
                th[self.b(*sd_g).at(0, 0)] = 0.2;
            }
            Index::Jones { loc, lsig, mu, sd, rho, ls_mu, ls_sd } => {
                for d in 0..2 {
                    let surv = pooled_survival(&group(d), n_thr)?;
                    // probit(S_k) = (mu - g_k) / sigma, least squares in g_k
                    let ys: Vec<f64> = surv.iter().map(|&v| normal_quantile(v.clamp(floor, 1.0 - floor))).collect();
                    let n = n_thr as f64;
                    let gm = self.g.iter().sum::<f64>() / n;
                    let ym = ys.iter().sum::<f64>() / n;
                    let sxy: f64 = self.g.iter().zip(&ys).map(|(g, y)| (g - gm) * (y - ym)).sum();
                    let sxx: f64 = self.g.iter().map(|g| (g - gm) * (g - gm)).sum();
                    let slope = if sxx > 0.0 { sxy / sxx } else { -1.0 };
                    let sigma = if slope < -1e-3 { -1.0 / slope } else { 1.0 };
                    let (v, m) = fill(self.data.studies.iter().map(|p| study_loc(&p[d], &self.g, sigma)).collect());
                    th[self.b(loc[d]).range_all(s)].copy_from_slice(&v);
                    for i in 0..s {
                        th[self.b(lsig[d]).at(i, 0)] = libm::log(sigma);
                    }
                    th[self.b(mu[d]).at(0, 0)] = m;
                    th[self.b(sd[d]).at(0, 0)] = 0.2;
                    th[self.b(ls_mu[d]).at(0, 0)] = libm::log(sigma);
                    th[self.b(ls_sd[d]).at(0, 0)] = 0.2;
                }
                th[self.b(*rho).at(0, 0)] = 0.0;
            }
            Index::Strat { loc, mu, sigma, rho } => {
                let m = self.stratum.len();
                for d in 0..2 {
                    let v: Vec<Option<f64>> = self
                        .stratum
                        .iter()
                        .map(|(_, p)| {
                            let g = &p[d];
                            (g.cum[0] != MISSING && g.n_total > 0).then(|| {
                                let z = emp_probit(g.cum[0], g.n_total);
                                if d == 0 { -z } else { z }
                            })
                        })
                        .collect();
                    let (v, mm) = fill(v);
                    th[self.b(loc[d]).range_all(m)].copy_from_slice(&v);
                    th[self.b(mu[d]).at(0, 0)] = mm;
                    th[self.b(sigma[d]).at(0, 0)] = 0.2;
                }
                th[self.b(*rho).at(0, 0)] = 0.0;
            }
        }
        Ok(th)
    }

    /// Starting point on the unconstrained scale: the deterministic base plus
    /// uniform jitter in `(-jitter, jitter)` drawn from `seed`.
    pub fn initialize(&self, seed: u64, jitter: f64) -> Result<Vec<f64>> {
        let mut th = self.base_init()?;
        self.shift_locations(&mut th, -1.0);
        let mut u = self.layout.unconstrain(&th)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if jitter > 0.0 {
            for v in u.iter_mut() {
                *v += rng.random_range(-jitter..jitter);
            }
        }
        Ok(u)
    }

    /// HSROC hyperparameters `(mu_beta, sigma_beta, mu_gamma, sigma_gamma)`.
    pub fn hsroc_hyper(&self, th: &[f64]) -> Option<[f64; 4]> {
        match &self.index {
            Index::Hsroc { mu_b, sd_b, mu_g, sd_g, .. } => Some([
                self.scalar(th, *mu_b),
                self.scalar(th, *sd_b),
                self.scalar(th, *mu_g),
                self.scalar(th, *sd_g),
            ]),
            _ => None,
        }
    }

    /// Bivariate heterogeneity `(sigma0, sigma1, rho)` for families that
    /// model it explicitly.
    pub fn bivariate_hyper(&self, th: &[f64]) -> Option<[f64; 3]> {
        match &self.index {
            Index::Biv { sigma, rho, .. } | Index::Strat { sigma, rho, .. } => {
                Some([self.scalar(th, sigma[0]), self.scalar(th, sigma[1]), self.scalar(th, *rho)])
            }
            Index::Jones { sd, rho, .. } => Some([self.scalar(th, sd[0]), self.scalar(th, sd[1]), self.scalar(th, *rho)]),
            _ => None,
        }
    }
}

impl LogDensity for MaModel {
    fn dim(&self) -> usize {
        self.layout.u_dim()
    }

    fn logp_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let cap = self.tape_hint.load(Ordering::Relaxed);
        let mut used = 0;
        let v = value_and_gradient(x, grad, cap, |u| {
            let out = self.log_density(u);
            used = u[0].tape().n_edges();
            out
        });
        if used > cap {
            self.tape_hint.store(used, Ordering::Relaxed);
        }
        v
    }

    fn logp(&self, x: &[f64]) -> f64 {
        self.log_density(x)
    }
}

impl AccuracyModel for MaModel {
    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let mut th = self.layout.constrain_f64(u);
        self.shift_locations(&mut th, 1.0);
        th
    }

    fn init(&self, seed: u64) -> Result<Vec<f64>> {
        self.initialize(seed, INIT_JITTER)
    }

    fn thresholds(&self, _test: usize) -> Vec<usize> {
        match self.spec.family {
            Family::StratBiv => vec![self.spec.strat_threshold.unwrap()],
            _ => (1..=self.n_thresholds()).collect(),
        }
    }

    fn summary_accuracy(&self, th: &[f64], _test: usize) -> Accuracy {
        let eff: [(f64, f64, Vec<f64>); 2] = match &self.index {
            Index::Biv { mu, .. } => [
                (self.scalar(th, mu[0]), 1.0, self.summary_cutpoints(th, 0)),
                (self.scalar(th, mu[1]), 1.0, self.summary_cutpoints(th, 1)),
            ],
            Index::Hsroc { mu_b, mu_g, .. } => {
                let (b, g) = (self.scalar(th, *mu_b), self.scalar(th, *mu_g));
                let c = self.summary_cutpoints(th, 0);
                let link = self.spec.scale_link;
                [(-b, link.apply(-g), c.clone()), (b, link.apply(g), c)]
            }
            Index::Jones { mu, ls_mu, .. } => [
                (self.scalar(th, mu[0]), libm::exp(self.scalar(th, ls_mu[0])), self.g.clone()),
                (self.scalar(th, mu[1]), libm::exp(self.scalar(th, ls_mu[1])), self.g.clone()),
            ],
            Index::Strat { mu, .. } => {
                [(-self.scalar(th, mu[0]), 1.0, vec![0.0]), (self.scalar(th, mu[1]), 1.0, vec![0.0])]
            }
        };
        self.accuracy_from(&eff)
    }

    fn predictive_accuracy(&self, th: &[f64], _test: usize, rng: &mut dyn RngCore) -> Accuracy {
        let eff = self.new_study(th, rng);
        self.accuracy_from(&eff)
    }
}

#[cfg(test)]
mod tests;
