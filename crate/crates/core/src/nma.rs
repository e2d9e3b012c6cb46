//! Network meta-analysis over several tests sharing studies, with
//! meta-regression, variance decomposition, pairwise comparisons and
//! baseline recomputation.
//!
//! Locations decompose as `beta[s,t] = (X b)[s,t] + eta[s] + delta[s,t]` per
//! disease group: `eta` is shared by every test a study evaluated, `delta`
//! is test specific with SD `tau[t]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ad::{value_and_gradient, Real};
use crate::data::{CovariateSet, NMADataset, StudyCounts};
use crate::density::{bvn_lpdf, correlation_lpdf, normal_iid_lpdf, HalfNormal};
use crate::error::{bail, Result};
use crate::kernel::{self, induced_dirichlet_lpdf, loglik_loc_scale};
use crate::mcmc::{LogDensity, PosteriorDraws};
use crate::model::{sample_bvn, std_normal, Accuracy, AccuracyModel, Family, JonesTransform, MaModel, ModelSpec, PriorSet, INIT_JITTER};
use crate::posterior::{accuracy_draws, accuracy_summary, auc_summary, AccuracySummary, AucSummary, Interval};
use crate::special::{self, normal_cdf};
use crate::transform::{BlockId, BlockKind, ParamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmaFamily {
    OBiv,
    Hsroc,
    Jones,
}

impl NmaFamily {
    pub fn name(self) -> &'static str {
        match self {
            NmaFamily::OBiv => "obiv_nma",
            NmaFamily::Hsroc => "ohsroc_nma",
            NmaFamily::Jones => "jones_nma",
        }
    }

    pub fn parse(s: &str) -> Option<NmaFamily> {
        [NmaFamily::OBiv, NmaFamily::Hsroc, NmaFamily::Jones].into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmaSpec {
    pub family: NmaFamily,
    /// One `tau` per disease group (and per location/scale for HSROC)
    /// instead of one per test.
    pub compound_symmetry: bool,
    pub priors: PriorSet,
    /// Prior on the test-specific SDs `tau`.
    pub tau: HalfNormal,
    pub jones_transform: JonesTransform,
}

impl NmaSpec {
    pub fn new(family: NmaFamily) -> Self {
        NmaSpec {
            family,
            compound_symmetry: false,
            priors: PriorSet::default(),
            tau: HalfNormal::new(0.5),
            jones_transform: JonesTransform::Log,
        }
    }
}

/// Baseline covariate vectors `x[d][t]` for summary estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineCase {
    pub name: String,
    pub x: [Vec<Vec<f64>>; 2],
}

/// Block handles of one location component (`beta` per group, or the HSROC
/// location or scale): coefficients per test, shared effects, deviations.
#[derive(Debug, Clone)]
struct Component {
    coef: Vec<BlockId>,
    eta: BlockId,
    sigma: BlockId,
    delta: Vec<BlockId>,
    tau: Vec<BlockId>,
}

#[derive(Debug, Clone)]
enum Index {
    Biv { comp: [Component; 2], rho: BlockId, cuts: [Vec<BlockId>; 2] },
    Hsroc { loc: Component, scale: Component, cuts: Vec<BlockId> },
    Jones { comp: [Component; 2], rho: BlockId, lsig: [Vec<BlockId>; 2], ls_mu: [Vec<BlockId>; 2], ls_sd: [Vec<BlockId>; 2] },
}

#[derive(Debug)]
pub struct NmaModel {
    pub spec: NmaSpec,
    pub data: NMADataset,
    pub covs: CovariateSet,
    layout: ParamLayout,
    index: Index,
    /// Included studies per test.
    inc: Vec<Vec<usize>>,
    /// Jones threshold positions per test.
    g: Vec<Vec<f64>>,
    tape_hint: AtomicUsize,
}

impl Clone for NmaModel {
    fn clone(&self) -> Self {
        NmaModel {
            spec: self.spec.clone(),
            data: self.data.clone(),
            covs: self.covs.clone(),
            layout: self.layout.clone(),
            index: self.index.clone(),
            inc: self.inc.clone(),
            g: self.g.clone(),
            tape_hint: AtomicUsize::new(self.tape_hint.load(Ordering::Relaxed)),
        }
    }
}

fn dot<T: Real>(x: &[f64], b: &[T], zero: T) -> T {
    let mut acc = zero;
    for (xi, bi) in x.iter().zip(b) {
        if *xi != 0.0 {
            acc += *bi * *xi;
        }
    }
    acc
}

fn dotf(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(a, c)| a * c).sum()
}

impl NmaModel {
    pub fn new(spec: NmaSpec, data: NMADataset, covs: CovariateSet) -> Result<Self> {
        data.validate()?;
        spec.jones_transform.validate()?;
        let n_t = data.n_tests();
        let s = data.n_studies();
        if n_t == 0 {
            bail!(Data, "network has no tests");
        }
        for d in 0..2 {
            if covs.designs[d].len() != n_t {
                bail!(Dimension, "group {d}: {} design matrices for {n_t} tests", covs.designs[d].len());
            }
            for (t, des) in covs.designs[d].iter().enumerate() {
                if des.x.len() != s || des.x.iter().any(|r| r.len() != des.n_cols()) || des.baseline.len() != des.n_cols() {
                    bail!(Dimension, "design for group {d}, test {} does not match the data", data.test_names[t]);
                }
                for st in 0..s {
                    let has = des.x[st].iter().any(|&v| v != 0.0);
                    if data.indicator[st][t] && !has {
                        bail!(Data, "study {st} evaluates test {} but has an all-zero design row", data.test_names[t]);
                    }
                }
            }
        }
        let inc: Vec<Vec<usize>> = (0..n_t).map(|t| data.included(t)).collect();
        if let Some(t) = inc.iter().position(|v| v.is_empty()) {
            bail!(Data, "test {} has no studies", data.test_names[t]);
        }
        for m in &data.tests {
            spec.priors.validate(m.k)?;
        }

        let mut l = ParamLayout::new();
        let cs = spec.compound_symmetry;
        let component = |l: &mut ParamLayout, name: &str, d: Option<usize>| -> Component {
            let grp = d.map_or(String::new(), |d| format!("{d}"));
            let coef = (0..n_t)
                .map(|t| l.add(&format!("{name}{grp}.t{}", t + 1), BlockKind::Free, covs.designs[d.unwrap_or(0)][t].n_cols()))
                .collect();
            let eta = l.add(&format!("eta_{name}{grp}"), BlockKind::Free, s);
            let sigma = l.add(&format!("sigma_{name}{grp}"), BlockKind::Positive, 1);
            let delta = (0..n_t).map(|t| l.add(&format!("delta_{name}{grp}.t{}", t + 1), BlockKind::Free, inc[t].len())).collect();
            let tau = if cs {
                vec![l.add(&format!("tau_{name}{grp}"), BlockKind::Positive, 1)]
            } else {
                (0..n_t).map(|t| l.add(&format!("tau_{name}{grp}.t{}", t + 1), BlockKind::Positive, 1)).collect()
            };
            Component { coef, eta, sigma, delta, tau }
        };
        let cuts = |l: &mut ParamLayout, name: &str| -> Vec<BlockId> {
            (0..n_t).map(|t| l.add(&format!("{name}.t{}", t + 1), BlockKind::Ordered(data.tests[t].k - 1), 1)).collect()
        };
        let index = match spec.family {
            NmaFamily::OBiv => {
                let comp = [component(&mut l, "beta", Some(0)), component(&mut l, "beta", Some(1))];
                let rho = l.add("rho_beta", BlockKind::Correlation, 1);
                let c = [cuts(&mut l, "C0"), cuts(&mut l, "C1")];
                Index::Biv { comp, rho, cuts: c }
            }
            NmaFamily::Hsroc => {
                let loc = component(&mut l, "beta", None);
                let scale = component(&mut l, "gamma", None);
                let c = cuts(&mut l, "C");
                Index::Hsroc { loc, scale, cuts: c }
            }
            NmaFamily::Jones => {
                let comp = [component(&mut l, "mu", Some(0)), component(&mut l, "mu", Some(1))];
                let rho = l.add("rho_mu", BlockKind::Correlation, 1);
                let per = |l: &mut ParamLayout, name: &str, kind: BlockKind, each: bool| -> Vec<BlockId> {
                    (0..n_t).map(|t| l.add(&format!("{name}.t{}", t + 1), kind, if each { inc[t].len() } else { 1 })).collect()
                };
                let lsig = [per(&mut l, "logsigma0", BlockKind::Free, true), per(&mut l, "logsigma1", BlockKind::Free, true)];
                let ls_mu = [per(&mut l, "logsigma_mean0", BlockKind::Free, false), per(&mut l, "logsigma_mean1", BlockKind::Free, false)];
                let ls_sd = [per(&mut l, "logsigma_sd0", BlockKind::Positive, false), per(&mut l, "logsigma_sd1", BlockKind::Positive, false)];
                Index::Jones { comp, rho, lsig, ls_mu, ls_sd }
            }
        };
        let g = data.tests.iter().map(|m| (1..m.k).map(|k| spec.jones_transform.g(k)).collect()).collect();
        Ok(NmaModel { spec, data, covs, layout: l, index, inc, g, tape_hint: AtomicUsize::new(4096) })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn n_studies(&self) -> usize {
        self.data.n_studies()
    }

    fn b(&self, id: BlockId) -> &crate::transform::Block {
        self.layout.block(id)
    }

    fn tau_id(&self, c: &Component, t: usize) -> BlockId {
        if self.spec.compound_symmetry {
            c.tau[0]
        } else {
            c.tau[t]
        }
    }

    /// Location of study `s` (global index) for test `t`; `i` is the study's
    /// position among the test's included studies.
    fn loc<T: Real>(&self, th: &[T], c: &Component, d: usize, t: usize, s: usize, i: usize) -> T {
        let zero = th[0].constant(0.0);
        let coef = &th[self.b(c.coef[t]).range_all(self.b(c.coef[t]).count)];
        dot(&self.covs.designs[d][t].x[s], coef, zero) + th[self.b(c.eta).at(s, 0)] + th[self.b(c.delta[t]).at(i, 0)]
    }

    fn coef_vals<'a>(&self, th: &'a [f64], c: &Component, t: usize) -> &'a [f64] {
        let b = self.b(c.coef[t]);
        &th[b.range_all(b.count)]
    }

    /// Cutpoints are sampled relative to the test's intercept, for the same
    /// reason as in the single-test bivariate model.
    fn shift_locations<T: Real>(&self, th: &mut [T], sign: f64) {
        let Index::Biv { comp, cuts, .. } = &self.index else {
            return;
        };
        for d in 0..2 {
            for t in 0..self.data.n_tests() {
                let m = th[self.b(comp[d].coef[t]).at(0, 0)] * sign;
                for i in self.b(cuts[d][t]).range(0) {
                    th[i] = th[i] + m;
                }
            }
        }
    }

    pub fn log_density<T: Real>(&self, u: &[T]) -> T {
        let mut th = Vec::new();
        let lj = self.layout.constrain(u, &mut th);
        self.shift_locations(&mut th, 1.0);
        lj + self.log_prior(&th) + self.log_likelihood(&th)
    }

    fn component_prior<T: Real>(&self, th: &[T], c: &Component, coef: &crate::density::Normal, sd: &HalfNormal, tau: &HalfNormal, eta_indep: bool) -> T {
        let zero = th[0].constant(0.0);
        let mut lp = zero;
        for t in 0..self.data.n_tests() {
            let b = self.b(c.coef[t]);
            for &v in &th[b.range_all(b.count)] {
                lp += coef.lpdf(v);
            }
            let dl = self.b(c.delta[t]);
            let tt = th[self.b(self.tau_id(c, t)).at(0, 0)];
            lp += normal_iid_lpdf(&th[dl.range_all(dl.count)], zero, tt);
        }
        for id in &c.tau {
            lp += tau.lpdf(th[self.b(*id).at(0, 0)]);
        }
        let sg = th[self.b(c.sigma).at(0, 0)];
        lp += sd.lpdf(sg);
        if eta_indep {
            lp += normal_iid_lpdf(&th[self.b(c.eta).range_all(self.n_studies())], zero, sg);
        }
        lp
    }

    pub fn log_prior<T: Real>(&self, th: &[T]) -> T {
        let p = &self.spec.priors;
        let zero = th[0].constant(0.0);
        let s = self.n_studies();
        let mut lp = zero;
        match &self.index {
            Index::Biv { comp, rho, cuts } => {
                for d in 0..2 {
                    lp += self.component_prior(th, &comp[d], &p.mu_beta, &p.sigma_beta[d], &self.spec.tau, false);
                }
                lp += self.eta_bvn(th, comp, *rho, s);
                lp += correlation_lpdf(th[self.b(*rho).at(0, 0)], p.rho_shape);
                for (t, m) in self.data.tests.iter().enumerate() {
                    let alpha: Vec<T> = p.alpha(m.k).iter().map(|&a| zero.constant(a)).collect();
                    for c in cuts {
                        lp += induced_dirichlet_lpdf(&th[self.b(c[t]).range(0)], &alpha, 0.0);
                    }
                }
            }
            Index::Hsroc { loc, scale, cuts } => {
                lp += self.component_prior(th, loc, &p.mu_beta, &p.sigma_beta[0], &self.spec.tau, true);
                lp += self.component_prior(th, scale, &p.mu_gamma, &p.sigma_gamma, &p.sigma_gamma, true);
                for (t, m) in self.data.tests.iter().enumerate() {
                    let alpha: Vec<T> = p.alpha(m.k).iter().map(|&a| zero.constant(a)).collect();
                    lp += induced_dirichlet_lpdf(&th[self.b(cuts[t]).range(0)], &alpha, 0.0);
                }
            }
            Index::Jones { comp, rho, lsig, ls_mu, ls_sd } => {
                for d in 0..2 {
                    lp += self.component_prior(th, &comp[d], &p.jones_location, &p.jones_location_sd, &self.spec.tau, false);
                    for t in 0..self.data.n_tests() {
                        let (m, sd) = (th[self.b(ls_mu[d][t]).at(0, 0)], th[self.b(ls_sd[d][t]).at(0, 0)]);
                        lp += p.jones_log_scale.lpdf(m) + p.jones_log_scale_sd.lpdf(sd);
                        let b = self.b(lsig[d][t]);
                        lp += normal_iid_lpdf(&th[b.range_all(b.count)], m, sd);
                    }
                }
                lp += self.eta_bvn(th, comp, *rho, s);
                lp += correlation_lpdf(th[self.b(*rho).at(0, 0)], p.rho_shape);
            }
        }
        lp
    }

    fn eta_bvn<T: Real>(&self, th: &[T], comp: &[Component; 2], rho: BlockId, s: usize) -> T {
        let zero = th[0].constant(0.0);
        let e0 = &th[self.b(comp[0].eta).range_all(s)];
        let e1 = &th[self.b(comp[1].eta).range_all(s)];
        let sd = [th[self.b(comp[0].sigma).at(0, 0)], th[self.b(comp[1].sigma).at(0, 0)]];
        bvn_lpdf(e0, e1, [zero, zero], sd, th[self.b(rho).at(0, 0)])
    }

    pub fn log_likelihood<T: Real>(&self, th: &[T]) -> T {
        let zero = th[0].constant(0.0);
        let one = zero.constant(1.0);
        let mut ll = zero;
        for (t, m) in self.data.tests.iter().enumerate() {
            for (i, &s) in self.inc[t].iter().enumerate() {
                let pair = &m.studies[s];
                match &self.index {
                    Index::Biv { comp, cuts, .. } => {
                        for d in 0..2 {
                            let loc = self.loc(th, &comp[d], d, t, s, i);
                            ll += loglik_loc_scale(&pair[d], loc, one, &th[self.b(cuts[d][t]).range(0)]);
                        }
                    }
                    Index::Hsroc { loc, scale, cuts } => {
                        let b = self.loc(th, loc, 0, t, s, i);
                        let g = self.loc(th, scale, 0, t, s, i);
                        let c = &th[self.b(cuts[t]).range(0)];
                        ll += loglik_loc_scale(&pair[0], -b, (-g).exp(), c);
                        ll += loglik_loc_scale(&pair[1], b, g.exp(), c);
                    }
                    Index::Jones { comp, lsig, .. } => {
                        let gc: Vec<T> = self.g[t].iter().map(|&v| zero.constant(v)).collect();
                        for d in 0..2 {
                            let loc = self.loc(th, &comp[d], d, t, s, i);
                            let sc = th[self.b(lsig[d][t]).at(i, 0)].exp();
                            ll += loglik_loc_scale(&pair[d], loc, sc, &gc);
                        }
                    }
                }
            }
        }
        ll
    }

    fn scalar(&self, th: &[f64], id: BlockId) -> f64 {
        th[self.b(id).at(0, 0)]
    }

    /// Se/Sp of test `t` at baseline covariates with study effects
    /// `(eta, delta)` per component added to the linear predictor.
    fn accuracy_at(&self, th: &[f64], t: usize, base: &[Vec<f64>; 2], extra: [f64; 2], log_scale: Option<[f64; 2]>) -> Accuracy {
        match &self.index {
            Index::Biv { comp, cuts, .. } => {
                let xb: [f64; 2] = core::array::from_fn(|d| dotf(&base[d], self.coef_vals(th, &comp[d], t)) + extra[d]);
                let c0 = &th[self.b(cuts[0][t]).range(0)];
                let c1 = &th[self.b(cuts[1][t]).range(0)];
                Accuracy {
                    sp: c0.iter().map(|&c| normal_cdf(c - xb[0])).collect(),
                    se: c1.iter().map(|&c| normal_cdf(xb[1] - c)).collect(),
                }
            }
            Index::Hsroc { loc, scale, cuts } => {
                let b = dotf(&base[0], self.coef_vals(th, loc, t)) + extra[0];
                let g = dotf(&base[0], self.coef_vals(th, scale, t)) + extra[1];
                let c = &th[self.b(cuts[t]).range(0)];
                Accuracy {
                    sp: c.iter().map(|&ck| normal_cdf((ck + b) / libm::exp(-g))).collect(),
                    se: c.iter().map(|&ck| normal_cdf((b - ck) / libm::exp(g))).collect(),
                }
            }
            Index::Jones { comp, ls_mu, .. } => {
                let xb: [f64; 2] = core::array::from_fn(|d| dotf(&base[d], self.coef_vals(th, &comp[d], t)) + extra[d]);
                let ls = log_scale.unwrap_or([self.scalar(th, ls_mu[0][t]), self.scalar(th, ls_mu[1][t])]);
                let g = &self.g[t];
                Accuracy {
                    sp: g.iter().map(|&gk| normal_cdf((gk - xb[0]) / libm::exp(ls[0]))).collect(),
                    se: g.iter().map(|&gk| normal_cdf((xb[1] - gk) / libm::exp(ls[1]))).collect(),
                }
            }
        }
    }

    fn baseline(&self, t: usize) -> [Vec<f64>; 2] {
        core::array::from_fn(|d| self.covs.designs[d][t].baseline.clone())
    }

    fn components(&self) -> [&Component; 2] {
        match &self.index {
            Index::Biv { comp, .. } | Index::Jones { comp, .. } => [&comp[0], &comp[1]],
            Index::Hsroc { loc, scale, .. } => [loc, scale],
        }
    }

    /// Shared study effects of a new study.
    fn new_eta(&self, th: &[f64], rng: &mut dyn RngCore) -> [f64; 2] {
        let [a, b] = self.components();
        let sd = [self.scalar(th, a.sigma), self.scalar(th, b.sigma)];
        match &self.index {
            Index::Biv { rho, .. } | Index::Jones { rho, .. } => sample_bvn([0.0, 0.0], sd, self.scalar(th, *rho), rng),
            Index::Hsroc { .. } => [sd[0] * std_normal(rng), sd[1] * std_normal(rng)],
        }
    }

    /// Test-specific deviations (and Jones log scales) of a new study.
    fn new_delta(&self, th: &[f64], t: usize, rng: &mut dyn RngCore) -> ([f64; 2], Option<[f64; 2]>) {
        let [a, b] = self.components();
        let dl = [
            self.scalar(th, self.tau_id(a, t)) * std_normal(rng),
            self.scalar(th, self.tau_id(b, t)) * std_normal(rng),
        ];
        let ls = match &self.index {
            Index::Jones { ls_mu, ls_sd, .. } => Some(core::array::from_fn(|d| {
                self.scalar(th, ls_mu[d][t]) + self.scalar(th, ls_sd[d][t]) * std_normal(rng)
            })),
            _ => None,
        };
        (dl, ls)
    }

    /// Log predictive density of study `s` of `full` (all of its tests) for
    /// one posterior draw of this model, averaging the likelihood over `m`
    /// fresh draws of the study's effects. Covariate rows come from `full`.
    pub fn heldout_lpd(&self, full: &NmaModel, th: &[f64], s: usize, m: usize, rng: &mut dyn RngCore) -> f64 {
        let tests: Vec<usize> = (0..full.data.n_tests()).filter(|&t| full.data.indicator[s][t]).collect();
        let coef: f64 = tests
            .iter()
            .flat_map(|&t| full.data.tests[t].studies[s].iter())
            .map(kernel::log_binomial_coefficients)
            .sum();
        let mut vals = Vec::with_capacity(m);
        for _ in 0..m {
            let eta = self.new_eta(th, rng);
            let mut ll = coef;
            for &t in &tests {
                let (dl, ls) = self.new_delta(th, t, rng);
                let row: [Vec<f64>; 2] = core::array::from_fn(|d| full.covs.designs[d][t].x[s].clone());
                let pair = &full.data.tests[t].studies[s];
                ll += self.study_loglik(th, t, &row, [eta[0] + dl[0], eta[1] + dl[1]], ls, pair);
            }
            vals.push(ll);
        }
        special::log_mean_exp(&vals)
    }

    fn study_loglik(&self, th: &[f64], t: usize, row: &[Vec<f64>; 2], extra: [f64; 2], ls: Option<[f64; 2]>, pair: &[StudyCounts; 2]) -> f64 {
        let mut scratch = vec![0.0; self.data.tests[t].k - 1];
        let mut run = |g: &StudyCounts, loc: f64, sc: f64, c: &[f64]| {
            scratch.iter_mut().for_each(|v| *v = 0.0);
            kernel::loglik_z_grad(g, |k| (loc - c[k]) / sc, &mut scratch)
        };
        match &self.index {
            Index::Biv { comp, cuts, .. } => {
                let mut ll = 0.0;
                for d in 0..2 {
                    let loc = dotf(&row[d], self.coef_vals(th, &comp[d], t)) + extra[d];
                    ll += run(&pair[d], loc, 1.0, &th[self.b(cuts[d][t]).range(0)]);
                }
                ll
            }
            Index::Hsroc { loc, scale, cuts } => {
                let b = dotf(&row[0], self.coef_vals(th, loc, t)) + extra[0];
                let g = dotf(&row[0], self.coef_vals(th, scale, t)) + extra[1];
                let c = &th[self.b(cuts[t]).range(0)];
                run(&pair[0], -b, libm::exp(-g), c) + run(&pair[1], b, libm::exp(g), c)
            }
            Index::Jones { comp, .. } => {
                let ls = ls.expect("jones log scales");
                let g = self.g[t].clone();
                let mut ll = 0.0;
                for d in 0..2 {
                    let loc = dotf(&row[d], self.coef_vals(th, &comp[d], t)) + extra[d];
                    ll += run(&pair[d], loc, libm::exp(ls[d]), &g);
                }
                ll
            }
        }
    }

    /// The model restricted to the given studies (covariate rows follow).
    pub fn subset(&self, idx: &[usize]) -> Result<NmaModel> {
        let data = NMADataset {
            test_names: self.data.test_names.clone(),
            tests: self.data.tests.iter().map(|m| m.subset(idx)).collect(),
            indicator: idx.iter().map(|&s| self.data.indicator[s].clone()).collect(),
        };
        let mut covs = self.covs.clone();
        for d in 0..2 {
            for des in covs.designs[d].iter_mut() {
                des.x = idx.iter().map(|&s| des.x[s].clone()).collect();
            }
        }
        NmaModel::new(self.spec.clone(), data, covs)
    }

    /// Copy with different baseline covariate vectors.
    pub fn with_baseline(&self, case: &BaselineCase) -> Result<NmaModel> {
        let mut m = self.clone();
        for d in 0..2 {
            if case.x[d].len() != self.data.n_tests() {
                bail!(Dimension, "scenario '{}': {} baseline vectors for {} tests", case.name, case.x[d].len(), self.data.n_tests());
            }
            for (t, x) in case.x[d].iter().enumerate() {
                let des = &mut m.covs.designs[d][t];
                if x.len() != des.n_cols() {
                    bail!(Dimension, "scenario '{}': baseline for group {d}, test {} has {} entries, design has {}", case.name, self.data.test_names[t], x.len(), des.n_cols());
                }
                des.baseline = x.clone();
            }
        }
        Ok(m)
    }

    /// Deterministic constrained start, from single-test fits' starting points.
    pub fn base_init(&self) -> Result<Vec<f64>> {
        let mut th = vec![0.0; self.layout.c_dim()];
        let fam = match self.spec.family {
            NmaFamily::OBiv => Family::OBivFC,
            NmaFamily::Hsroc => Family::OHsrocFC,
            NmaFamily::Jones => Family::JonesFC,
        };
        for t in 0..self.data.n_tests() {
            let mut ms = ModelSpec::new(fam);
            ms.priors = self.spec.priors.clone();
            ms.jones_transform = self.spec.jones_transform;
            let ma = MaModel::new(ms, self.data.tests[t].subset(&self.inc[t]))?;
            let mth = ma.base_init()?;
            let get = |name: &str, i: usize| -> f64 { mth[ma.layout().find(name).expect("single-test block").at(i, 0)] };
            let getv = |name: &str| -> Vec<f64> { mth[ma.layout().find(name).expect("single-test block").range(0)].to_vec() };
            let n = self.inc[t].len();
            let set_comp = |th: &mut Vec<f64>, c: &Component, mean: f64, locs: Vec<f64>| {
                th[self.b(c.coef[t]).at(0, 0)] = mean;
                for (i, v) in locs.into_iter().enumerate() {
                    th[self.b(c.delta[t]).at(i, 0)] = v - mean;
                }
                th[self.b(self.tau_id(c, t)).at(0, 0)] = 0.2;
                th[self.b(c.sigma).at(0, 0)] = 0.2;
            };
            match &self.index {
                Index::Biv { comp, cuts, .. } => {
                    for d in 0..2 {
                        let locs = (0..n).map(|i| get(&format!("beta{d}"), i)).collect();
                        set_comp(&mut th, &comp[d], get(&format!("mu_beta{d}"), 0), locs);
                        th[self.b(cuts[d][t]).range(0)].copy_from_slice(&getv(&format!("C{d}")));
                    }
                }
                Index::Hsroc { loc, scale, cuts } => {
                    let locs = (0..n).map(|i| get("beta", i)).collect();
                    set_comp(&mut th, loc, get("mu_beta", 0), locs);
                    set_comp(&mut th, scale, 0.0, vec![0.0; n]);
                    th[self.b(cuts[t]).range(0)].copy_from_slice(&getv("C"));
                }
                Index::Jones { comp, lsig, ls_mu, ls_sd, .. } => {
                    for d in 0..2 {
                        let locs = (0..n).map(|i| get(&format!("mu{d}"), i)).collect();
                        set_comp(&mut th, &comp[d], get(&format!("mu_mean{d}"), 0), locs);
                        let lm = get(&format!("logsigma_mean{d}"), 0);
                        for i in 0..n {
                            th[self.b(lsig[d][t]).at(i, 0)] = lm;
                        }
                        th[self.b(ls_mu[d][t]).at(0, 0)] = lm;
                        th[self.b(ls_sd[d][t]).at(0, 0)] = 0.2;
                    }
                }
            }
        }
        if let Index::Biv { rho, .. } | Index::Jones { rho, .. } = &self.index {
            th[self.b(*rho).at(0, 0)] = 0.0;
        }
        Ok(th)
    }

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

    /// Indices of the `tau` and `sigma` values feeding test `t`'s variance
    /// decomposition, per component.
    fn decomposition_ids(&self, t: usize) -> Vec<(String, usize, usize)> {
        let [a, b] = self.components();
        let names: [&str; 2] = match self.spec.family {
            NmaFamily::OBiv => ["beta0", "beta1"],
            NmaFamily::Hsroc => ["beta", "gamma"],
            NmaFamily::Jones => ["mu0", "mu1"],
        };
        [a, b]
            .iter()
            .zip(names)
            .map(|(c, n)| (String::from(n), self.b(c.sigma).at(0, 0), self.b(self.tau_id(c, t)).at(0, 0)))
            .collect()
    }
}

impl LogDensity for NmaModel {
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

impl AccuracyModel for NmaModel {
    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let mut th = self.layout.constrain_f64(u);
        self.shift_locations(&mut th, 1.0);
        th
    }

    fn n_tests(&self) -> usize {
        self.data.n_tests()
    }

    fn test_name(&self, t: usize) -> String {
        self.data.test_names[t].clone()
    }

    fn thresholds(&self, test: usize) -> Vec<usize> {
        (1..self.data.tests[test].k).collect()
    }

    fn init(&self, seed: u64) -> Result<Vec<f64>> {
        self.initialize(seed, INIT_JITTER)
    }

    fn summary_accuracy(&self, th: &[f64], test: usize) -> Accuracy {
        self.accuracy_at(th, test, &self.baseline(test), [0.0, 0.0], None)
    }

    fn predictive_accuracy(&self, th: &[f64], test: usize, rng: &mut dyn RngCore) -> Accuracy {
        let eta = self.new_eta(th, rng);
        let (dl, ls) = self.new_delta(th, test, rng);
        self.accuracy_at(th, test, &self.baseline(test), [eta[0] + dl[0], eta[1] + dl[1]], ls)
    }
}

/// Between-study variance split for one test and component.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub test: String,
    pub component: String,
    /// `sigma^2 + tau^2`.
    pub total_var: Interval,
    /// `tau^2 / (sigma^2 + tau^2)`.
    pub prop_test_specific: Interval,
}

pub fn variance_split(sigma: f64, tau: f64) -> (f64, f64) {
    let total = sigma * sigma + tau * tau;
    let prop = if total > 0.0 { tau * tau / total } else { 0.0 };
    (total, prop)
}

pub fn variance_decomposition(model: &NmaModel, draws: &PosteriorDraws) -> Result<Vec<VarianceRow>> {
    if draws.names != model.param_names() {
        bail!(Dimension, "draws do not belong to this model");
    }
    let mut out = Vec::new();
    for t in 0..model.data.n_tests() {
        for (name, si, ti) in model.decomposition_ids(t) {
            let (tot, prop): (Vec<f64>, Vec<f64>) = draws.iter_draws().map(|d| variance_split(d[si], d[ti])).unzip();
            out.push(VarianceRow {
                test: model.data.test_names[t].clone(),
                component: name,
                total_var: Interval::from_samples(tot),
                prop_test_specific: Interval::from_samples(prop),
            });
        }
    }
    Ok(out)
}

/// Difference `a - b` in summary Se/Sp at threshold labels `(k_a, k_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseRow {
    pub test_a: String,
    pub test_b: String,
    pub k_a: usize,
    pub k_b: usize,
    pub d_se: Interval,
    pub d_sp: Interval,
}

/// Per-draw differences between two tests, then quantiled.
pub fn pairwise_comparisons(
    model: &dyn AccuracyModel,
    draws: &PosteriorDraws,
    a: usize,
    b: usize,
    thresholds: &[(usize, usize)],
) -> Result<Vec<PairwiseRow>> {
    if a >= model.n_tests() || b >= model.n_tests() {
        bail!(Config, "test index out of range");
    }
    let (ta, tb) = (model.thresholds(a), model.thresholds(b));
    let acc_a = accuracy_draws(model, draws, a)?;
    let acc_b = if a == b { acc_a.clone() } else { accuracy_draws(model, draws, b)? };
    let mut out = Vec::with_capacity(thresholds.len());
    for &(ka, kb) in thresholds {
        let (Some(ia), Some(ib)) = (ta.iter().position(|&k| k == ka), tb.iter().position(|&k| k == kb)) else {
            bail!(Config, "threshold pair ({ka}, {kb}) is not valid for {} vs {}", model.test_name(a), model.test_name(b));
        };
        let dse = acc_a.iter().zip(&acc_b).map(|(x, y)| x.se[ia] - y.se[ib]).collect();
        let dsp = acc_a.iter().zip(&acc_b).map(|(x, y)| x.sp[ia] - y.sp[ib]).collect();
        out.push(PairwiseRow {
            test_a: model.test_name(a),
            test_b: model.test_name(b),
            k_a: ka,
            k_b: kb,
            d_se: Interval::from_samples(dse),
            d_sp: Interval::from_samples(dsp),
        });
    }
    Ok(out)
}

/// Summaries of every test under one baseline scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scenario: String,
    pub summaries: Vec<AccuracySummary>,
    pub auc: Vec<AucSummary>,
}

/// Re-derives summaries for new baseline covariates from stored draws,
/// without sampling again.
pub fn recompute_baseline(model: &NmaModel, draws: &PosteriorDraws, cases: &[BaselineCase], seed: u64) -> Result<Vec<BaselineResult>> {
    cases
        .iter()
        .map(|case| {
            let m = model.with_baseline(case)?;
            let n = m.data.n_tests();
            let summaries = (0..n).map(|t| accuracy_summary(&m, draws, t, seed)).collect::<Result<Vec<_>>>()?;
            let auc = (0..n).map(|t| auc_summary(&m, draws, t, seed)).collect::<Result<Vec<_>>>()?;
            Ok(BaselineResult { scenario: case.name.clone(), summaries, auc })
        })
        .collect()
}
