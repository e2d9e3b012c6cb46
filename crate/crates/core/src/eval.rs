//! K-fold cross-validation over studies, ELPD comparison and the four-group
//! performance classification used for simulation tables.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::mcmc::{ChainExecutor, SamplerConfig};
use crate::model::{AccuracyModel, MaModel};
use crate::nma::NmaModel;
use crate::posterior;
use crate::special;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldAssignment {
    /// 1-based fold of every study.
    pub fold_of_study: Vec<usize>,
    pub k_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    /// Studies of fold `f` (1-based), in increasing order.
    pub fn members(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_study.len()).filter(|&s| self.fold_of_study[s] == f).collect()
    }

    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.fold_of_study.len()).filter(|&s| self.fold_of_study[s] != f).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        (1..=self.k_folds).map(|f| self.fold_of_study.iter().filter(|&&x| x == f).count()).collect()
    }
}

/// Balanced random partition: a seeded shuffle dealt round-robin, so fold
/// sizes differ by at most one.
pub fn make_folds(n_studies: usize, k_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if k_folds < 2 || k_folds > n_studies {
        bail!(Config, "cannot split {n_studies} studies into {k_folds} folds");
    }
    let mut order: Vec<usize> = (0..n_studies).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of_study = vec![0; n_studies];
    for (pos, &s) in order.iter().enumerate() {
        fold_of_study[s] = pos % k_folds + 1;
    }
    Ok(FoldAssignment { fold_of_study, k_folds, seed })
}

/// A model that can be refit on a subset of studies and scored on the rest.
pub trait CrossValidate: AccuracyModel + Sized {
    fn n_units(&self) -> usize;
    fn train_on(&self, keep: &[usize]) -> Result<Self>;
    /// Log predictive density of study `s` of `self` under one draw `th` of
    /// the model trained without it.
    fn heldout(&self, trained: &Self, th: &[f64], s: usize, m: usize, rng: &mut ChaCha8Rng) -> f64;
}

impl CrossValidate for MaModel {
    fn n_units(&self) -> usize {
        self.data.n_studies()
    }

    fn train_on(&self, keep: &[usize]) -> Result<Self> {
        MaModel::new(self.spec.clone(), self.data.subset(keep))
    }

    fn heldout(&self, trained: &Self, th: &[f64], s: usize, m: usize, rng: &mut ChaCha8Rng) -> f64 {
        trained.heldout_lpd(th, &self.data.studies[s], m, rng)
    }
}

impl CrossValidate for NmaModel {
    fn n_units(&self) -> usize {
        self.n_studies()
    }

    fn train_on(&self, keep: &[usize]) -> Result<Self> {
        self.subset(keep)
    }

    fn heldout(&self, trained: &Self, th: &[f64], s: usize, m: usize, rng: &mut ChaCha8Rng) -> f64 {
        trained.heldout_lpd(self, th, s, m, rng)
    }
}

#[derive(Clone, Debug)]
pub struct KfoldConfig {
    pub sampler: SamplerConfig,
    /// Fresh study-effect draws per posterior draw.
    pub m_inner: usize,
    pub min_ess: f64,
}

impl Default for KfoldConfig {
    fn default() -> Self {
        KfoldConfig { sampler: SamplerConfig::default(), m_inner: 50, min_ess: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldReport {
    pub fold: usize,
    pub studies: Vec<usize>,
    pub ess_min: f64,
    pub discarded: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ElpdResult {
    pub model: String,
    /// `None` for studies in discarded folds.
    pub pointwise: Vec<Option<f64>>,
    pub folds: Vec<FoldReport>,
}

impl ElpdResult {
    pub fn retained(&self) -> Vec<usize> {
        (0..self.pointwise.len()).filter(|&s| self.pointwise[s].is_some()).collect()
    }

    pub fn elpd_total(&self) -> f64 {
        self.pointwise.iter().flatten().sum()
    }

    pub fn se_total(&self) -> f64 {
        let v: Vec<f64> = self.pointwise.iter().flatten().copied().collect();
        sum_se(&v)
    }

    pub fn discarded_folds(&self) -> Vec<usize> {
        self.folds.iter().filter(|f| f.discarded).map(|f| f.fold).collect()
    }
}

/// `sqrt(n * var)` with the sample variance; zero for fewer than two values.
fn sum_se(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    libm::sqrt(n as f64 * var)
}

/// Pointwise held-out scores of one trained fit: `log mean_draws exp(lpd)`
/// for each study in `held`.
pub fn score_heldout<M: CrossValidate>(full: &M, trained: &M, draws: &crate::mcmc::PosteriorDraws, held: &[usize], m: usize, seed: u64) -> Vec<f64> {
    held.iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let vals: Vec<f64> = draws.iter_draws().map(|th| full.heldout(trained, th, s, m, &mut rng)).collect();
            special::log_mean_exp(&vals)
        })
        .collect()
}

/// Fits the model once per fold on the complementary studies and scores the
/// held-out ones. Folds whose fit has minimum ESS below `cfg.min_ess` are
/// flagged and their studies left out of the totals.
pub fn run_kfold<M: CrossValidate>(name: &str, full: &M, folds: &FoldAssignment, cfg: &KfoldConfig, exec: &dyn ChainExecutor) -> Result<ElpdResult> {
    if folds.fold_of_study.len() != full.n_units() {
        bail!(Dimension, "fold assignment covers {} studies, data has {}", folds.fold_of_study.len(), full.n_units());
    }
    let mut pointwise = vec![None; full.n_units()];
    let mut reports = Vec::with_capacity(folds.k_folds);
    for f in 1..=folds.k_folds {
        let held = folds.members(f);
        let trained = full.train_on(&folds.complement(f)).map_err(|e| e.context(format!("fold {f}")))?;
        let fit = posterior::fit(&trained, exec, &cfg.sampler).map_err(|e| e.context(format!("fold {f}")))?;
        let ess_min = fit.diagnostics.min_ess().unwrap_or(f64::NAN);
        let discarded = !(ess_min >= cfg.min_ess);
        if !discarded {
            let scores = score_heldout(full, &trained, &fit.draws, &held, cfg.m_inner, cfg.sampler.seed ^ f as u64);
            for (&s, v) in held.iter().zip(scores) {
                pointwise[s] = Some(v);
            }
        }
        reports.push(FoldReport { fold: f, studies: held, ess_min, discarded });
    }
    Ok(ElpdResult { model: String::from(name), pointwise, folds: reports })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub rank: usize,
    pub model: String,
    pub elpd: f64,
    pub se: f64,
    /// Difference to the best model (zero for the best).
    pub delta: f64,
    pub se_delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub shared_studies: Vec<usize>,
    /// Some model had retained studies outside the shared set.
    pub restricted: bool,
}

/// Ranks models by ELPD over the studies retained by every model.
pub fn compare_elpd(results: &[ElpdResult]) -> Result<Comparison> {
    let Some(first) = results.first() else {
        bail!(Config, "nothing to compare");
    };
    let n = first.pointwise.len();
    if results.iter().any(|r| r.pointwise.len() != n) {
        bail!(Dimension, "results cover different numbers of studies");
    }
    let shared: Vec<usize> = (0..n).filter(|&s| results.iter().all(|r| r.pointwise[s].is_some())).collect();
    if shared.is_empty() {
        bail!(Numeric, "no study is retained by every model");
    }
    let restricted = results.iter().any(|r| r.retained().len() != shared.len());
    let vals: Vec<Vec<f64>> = results.iter().map(|r| shared.iter().map(|&s| r.pointwise[s].unwrap()).collect()).collect();
    let totals: Vec<f64> = vals.iter().map(|v| v.iter().sum()).collect();
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| totals[b].total_cmp(&totals[a]));
    let best = order[0];
    let rows = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let diff: Vec<f64> = vals[i].iter().zip(&vals[best]).map(|(a, b)| a - b).collect();
            ComparisonRow {
                rank: rank + 1,
                model: results[i].model.clone(),
                elpd: totals[i],
                se: sum_se(&vals[i]),
                delta: totals[i] - totals[best],
                se_delta: sum_se(&diff),
            }
        })
        .collect();
    Ok(Comparison { rows, shared_studies: shared, restricted })
}

/// Plain-text ranking table.
fn whole(x: f64) -> f64 {
    // avoid printing "-0"
    libm::round(x) + 0.0
}

pub fn format_comparison(c: &Comparison) -> String {
    let w = c.rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<4}  {:<w$}  {:>20}  {:>20}\n", "Rank", "Model", "ELPD (SE)", "dELPD (SE)");
    for r in &c.rows {
        let main = format!("{:.0} ({:.0})", whole(r.elpd), whole(r.se));
        let delta = if r.rank == 1 { String::from("--- [Best]") } else { format!("{:.0} ({:.0})", whole(r.delta), whole(r.se_delta)) };
        out += &format!("{:<4}  {:<w$}  {:>20}  {:>20}\n", r.rank, r.model, main, delta);
    }
    if c.restricted {
        out += &format!("compared on {} studies retained by every model\n", c.shared_studies.len());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PerfGroup {
    Best,
    StatOnly,
    PracticalOnly,
    Worse,
}

impl PerfGroup {
    pub fn name(self) -> &'static str {
        match self {
            PerfGroup::Best => "best",
            PerfGroup::StatOnly => "stat_only",
            PerfGroup::PracticalOnly => "practical_only",
            PerfGroup::Worse => "worse",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelPerf {
    pub rmse: f64,
    pub mcse: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyRule {
    /// Multiplier on the combined MCSE.
    pub z: f64,
    /// Relative RMSE difference counted as practically significant.
    pub practical: f64,
}

impl Default for ClassifyRule {
    fn default() -> Self {
        ClassifyRule { z: 2.0, practical: 0.10 }
    }
}

/// Groups each model against the minimum-RMSE leader.
pub fn classify_groups(models: &[ModelPerf], rule: ClassifyRule) -> Result<Vec<PerfGroup>> {
    if models.len() < 2 {
        bail!(Config, "classification needs at least two models");
    }
    let mut lead = 0;
    for (i, m) in models.iter().enumerate() {
        if m.rmse < models[lead].rmse {
            lead = i;
        }
    }
    let l = &models[lead];
    Ok(models
        .iter()
        .map(|m| {
            let diff = m.rmse - l.rmse;
            let stat = diff.abs() > rule.z * libm::sqrt(l.mcse * l.mcse + m.mcse * m.mcse);
            let rel = if diff == 0.0 { 0.0 } else { diff / l.rmse };
            match (stat, rel > rule.practical) {
                (false, false) => PerfGroup::Best,
                (true, false) => PerfGroup::StatOnly,
                (false, true) => PerfGroup::PracticalOnly,
                (true, true) => PerfGroup::Worse,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests;
