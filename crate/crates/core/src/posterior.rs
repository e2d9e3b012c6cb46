//! Derived quantities from posterior draws: summary and predictive Se/Sp,
//! heterogeneity on the bivariate scale, sROC points and AUC.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::mcmc::{diagnostics, sample, ChainExecutor, Diagnostics, PosteriorDraws, SamplerConfig};
use crate::model::{Accuracy, AccuracyModel, Family, MaModel, ScaleLink};
use crate::special::quantile_sorted;

/// Median with a central 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn from_samples(mut v: Vec<f64>) -> Interval {
        v.sort_by(f64::total_cmp);
        Interval { median: quantile_sorted(&v, 0.5), lo: quantile_sorted(&v, 0.025), hi: quantile_sorted(&v, 0.975) }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Constrained posterior draws with their convergence report.
#[derive(Debug, Clone)]
pub struct Fit {
    pub draws: PosteriorDraws,
    pub diagnostics: Diagnostics,
}

/// Maps every unconstrained draw through the model's constraining transform.
pub fn constrain_draws(model: &dyn AccuracyModel, raw: &PosteriorDraws) -> PosteriorDraws {
    let names = model.param_names();
    let mut values = Vec::with_capacity(raw.n_draws() * names.len());
    for d in raw.iter_draws() {
        values.extend(model.constrain(d));
    }
    raw.with_values(names, values)
}

/// Per-chain starting seeds derived from the sampler seed.
pub fn chain_init_seed(seed: u64, chain: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(chain as u64 + 1)
}

/// Samples the model and returns constrained draws and diagnostics.
pub fn fit(model: &dyn AccuracyModel, exec: &dyn ChainExecutor, cfg: &SamplerConfig) -> Result<Fit> {
    let inits = (0..cfg.n_chains).map(|c| model.init(chain_init_seed(cfg.seed, c))).collect::<Result<Vec<_>>>()?;
    let names = (0..model.dim()).map(|i| format!("u[{}]", i + 1)).collect();
    let raw = sample(exec, model, &inits, cfg, names)?;
    let draws = constrain_draws(model, &raw);
    let diagnostics = diagnostics(&draws);
    Ok(Fit { draws, diagnostics })
}

fn check_dim(model: &dyn AccuracyModel, draws: &PosteriorDraws) -> Result<()> {
    let names = model.param_names();
    if draws.names != names {
        bail!(Dimension, "draws carry {} parameters, model expects {}", draws.dim(), names.len());
    }
    if draws.n_draws() == 0 {
        bail!(Dimension, "no draws");
    }
    Ok(())
}

/// Summary Se/Sp of every draw.
pub fn accuracy_draws(model: &dyn AccuracyModel, draws: &PosteriorDraws, test: usize) -> Result<Vec<Accuracy>> {
    check_dim(model, draws)?;
    Ok(draws.iter_draws().map(|th| model.summary_accuracy(th, test)).collect())
}

/// Se/Sp of one new study per draw.
pub fn predictive_draws(
    model: &dyn AccuracyModel,
    draws: &PosteriorDraws,
    test: usize,
    seed: u64,
) -> Result<Vec<Accuracy>> {
    check_dim(model, draws)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(draws.iter_draws().map(|th| model.predictive_accuracy(th, test, &mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub threshold: usize,
    pub se: Interval,
    pub sp: Interval,
    /// 95% prediction bounds.
    pub se_pred: (f64, f64),
    pub sp_pred: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySummary {
    pub test: String,
    pub rows: Vec<ThresholdSummary>,
}

fn column(acc: &[Accuracy], j: usize, se: bool) -> Vec<f64> {
    acc.iter().map(|a| if se { a.se[j] } else { a.sp[j] }).collect()
}

/// Per-threshold medians and 95% credible intervals of summary Se/Sp.
pub fn summary_se_sp(model: &dyn AccuracyModel, draws: &PosteriorDraws, test: usize) -> Result<Vec<(Interval, Interval)>> {
    let acc = accuracy_draws(model, draws, test)?;
    let n = model.thresholds(test).len();
    Ok((0..n).map(|j| (Interval::from_samples(column(&acc, j, true)), Interval::from_samples(column(&acc, j, false)))).collect())
}

/// Per-threshold 95% prediction bounds `((se_lo, se_hi), (sp_lo, sp_hi))`.
pub fn prediction_interval(
    model: &dyn AccuracyModel,
    draws: &PosteriorDraws,
    test: usize,
    seed: u64,
) -> Result<Vec<((f64, f64), (f64, f64))>> {
    let acc = predictive_draws(model, draws, test, seed)?;
    let n = model.thresholds(test).len();
    Ok((0..n)
        .map(|j| {
            let a = Interval::from_samples(column(&acc, j, true));
            let b = Interval::from_samples(column(&acc, j, false));
            ((a.lo, a.hi), (b.lo, b.hi))
        })
        .collect())
}

pub fn accuracy_summary(
    model: &dyn AccuracyModel,
    draws: &PosteriorDraws,
    test: usize,
    seed: u64,
) -> Result<AccuracySummary> {
    let cred = summary_se_sp(model, draws, test)?;
    let pred = prediction_interval(model, draws, test, seed)?;
    let rows = model
        .thresholds(test)
        .into_iter()
        .zip(cred.into_iter().zip(pred))
        .map(|(k, ((se, sp), (se_pred, sp_pred)))| ThresholdSummary { threshold: k, se, sp, se_pred, sp_pred })
        .collect();
    Ok(AccuracySummary { test: model.test_name(test), rows })
}

/// Bivariate-scale image of HSROC hyperparameters (exp link).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateImage {
    pub sigma_pos: f64,
    pub sigma_neg: f64,
    /// `None` when both HSROC SDs are zero.
    pub rho: Option<f64>,
    /// The delta-method value fell outside [-1, 1] and was clamped.
    pub rho_clamped: bool,
    pub mu_pos: f64,
    pub mu_neg: f64,
    /// Multipliers taking HSROC cutpoints to the diseased and non-diseased
    /// bivariate cutpoints.
    pub cut_scale_pos: f64,
    pub cut_scale_neg: f64,
}

impl BivariateImage {
    pub fn map_cutpoints(&self, c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        (c.iter().map(|v| v * self.cut_scale_pos).collect(), c.iter().map(|v| v * self.cut_scale_neg).collect())
    }
}

/// Delta-method map from HSROC `(mu_beta, sigma_beta, mu_gamma, sigma_gamma)`
/// to bivariate location SDs, correlation and means.
pub fn hsroc_to_bivariate(mu_b: f64, sd_b: f64, mu_g: f64, sd_g: f64) -> BivariateImage {
    let core = sd_b * sd_b + mu_b * mu_b * sd_g * sd_g;
    let var_pos = libm::exp(-2.0 * mu_g) * core;
    let var_neg = libm::exp(2.0 * mu_g) * core;
    let (sigma_pos, sigma_neg) = (libm::sqrt(var_pos), libm::sqrt(var_neg));
    let denom = sigma_pos * sigma_neg;
    let (rho, rho_clamped) = if denom > 0.0 {
        let r = (sd_g * sd_g * mu_b * mu_b - sd_b * sd_b) / denom;
        (Some(r.clamp(-1.0, 1.0)), !(-1.0..=1.0).contains(&r))
    } else {
        (None, false)
    };
    BivariateImage {
        sigma_pos,
        sigma_neg,
        rho,
        rho_clamped,
        mu_pos: mu_b * libm::exp(-mu_g),
        mu_neg: -mu_b * libm::exp(mu_g),
        cut_scale_pos: libm::exp(-mu_g),
        cut_scale_neg: libm::exp(mu_g),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneityReport {
    pub family: Family,
    /// Non-diseased and diseased between-study SDs of the locations.
    pub sigma_neg: Interval,
    pub sigma_pos: Interval,
    pub rho: Option<Interval>,
    /// The bivariate quantities were mapped from HSROC hyperparameters.
    pub mapped: bool,
    /// `mu_beta, sigma_beta, mu_gamma, sigma_gamma` for HSROC fits.
    pub hsroc: Option<[Interval; 4]>,
    pub rho_clamped_draws: usize,
    pub rho_undefined_draws: usize,
}

pub fn heterogeneity(model: &MaModel, draws: &PosteriorDraws) -> Result<HeterogeneityReport> {
    check_dim(model, draws)?;
    let th: Vec<&[f64]> = draws.iter_draws().collect();
    if model.hsroc_hyper(th[0]).is_some() {
        if model.spec.scale_link != ScaleLink::Exp {
            bail!(Config, "the bivariate mapping needs the exp scale link");
        }
        let hyp: Vec<[f64; 4]> = th.iter().map(|t| model.hsroc_hyper(t).unwrap()).collect();
        let img: Vec<BivariateImage> = hyp.iter().map(|h| hsroc_to_bivariate(h[0], h[1], h[2], h[3])).collect();
        let rhos: Vec<f64> = img.iter().filter_map(|i| i.rho).collect();
        let hs = core::array::from_fn(|j| Interval::from_samples(hyp.iter().map(|h| h[j]).collect()));
        return Ok(HeterogeneityReport {
            family: model.family(),
            sigma_neg: Interval::from_samples(img.iter().map(|i| i.sigma_neg).collect()),
            sigma_pos: Interval::from_samples(img.iter().map(|i| i.sigma_pos).collect()),
            rho_undefined_draws: img.len() - rhos.len(),
            rho: (!rhos.is_empty()).then(|| Interval::from_samples(rhos)),
            mapped: true,
            hsroc: Some(hs),
            rho_clamped_draws: img.iter().filter(|i| i.rho_clamped).count(),
        });
    }
    let hyp: Vec<[f64; 3]> = th.iter().map(|t| model.bivariate_hyper(t).unwrap()).collect();
    Ok(HeterogeneityReport {
        family: model.family(),
        sigma_neg: Interval::from_samples(hyp.iter().map(|h| h[0]).collect()),
        sigma_pos: Interval::from_samples(hyp.iter().map(|h| h[1]).collect()),
        rho: Some(Interval::from_samples(hyp.iter().map(|h| h[2]).collect())),
        mapped: false,
        hsroc: None,
        rho_clamped_draws: 0,
        rho_undefined_draws: 0,
    })
}

/// ROC polyline through `(1 - Sp, Se)` with both corners added, sorted by
/// false positive rate; equal x values keep the largest Se.
pub fn sroc_points(se: &[f64], sp: &[f64]) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = se.iter().zip(sp).map(|(&s, &p)| (1.0 - p, s)).collect();
    pts.push((0.0, 0.0));
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    pts
}

/// Trapezoidal area under a polyline sorted by x.
pub fn trapezoid(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * 0.5 * (w[0].1 + w[1].1)).sum()
}

pub fn auc(se: &[f64], sp: &[f64]) -> f64 {
    trapezoid(&sroc_points(se, sp)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AucSummary {
    pub auc: Interval,
    /// AUC of a new study: median and 95% bounds.
    pub predictive: Interval,
}

pub fn auc_summary(model: &dyn AccuracyModel, draws: &PosteriorDraws, test: usize, seed: u64) -> Result<AucSummary> {
    if model.thresholds(test).is_empty() {
        bail!(Data, "no thresholds");
    }
    let acc = accuracy_draws(model, draws, test)?;
    let pred = predictive_draws(model, draws, test, seed)?;
    Ok(AucSummary {
        auc: Interval::from_samples(acc.iter().map(|a| auc(&a.se, &a.sp)).collect()),
        predictive: Interval::from_samples(pred.iter().map(|a| auc(&a.se, &a.sp)).collect()),
    })
}

/// Checks the per-draw ordering of Se (non-increasing) and Sp
/// (non-decreasing) over thresholds; returns the first offending draw.
pub fn monotonicity_violation(acc: &[Accuracy]) -> Option<usize> {
    acc.iter().position(|a| a.se.windows(2).any(|w| w[1] > w[0]) || a.sp.windows(2).any(|w| w[1] < w[0]))
}

/// Writes `(threshold, quantity, estimate, lo, hi, pred_lo, pred_hi)` rows.
pub fn summary_rows(s: &AccuracySummary) -> Vec<(usize, &'static str, f64, f64, f64, f64, f64)> {
    let mut out = vec![];
    for r in &s.rows {
        out.push((r.threshold, "Se", r.se.median, r.se.lo, r.se.hi, r.se_pred.0, r.se_pred.1));
        out.push((r.threshold, "Sp", r.sp.median, r.sp.lo, r.sp.hi, r.sp_pred.0, r.sp_pred.1));
    }
    out
}
