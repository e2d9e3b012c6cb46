//! JSON configuration files. Every file carries `schema_version` and unknown
//! keys are rejected.

use std::path::Path;

use ordmeta_core::density::{HalfNormal, Normal, StudentT};
use ordmeta_core::mcmc::{MetricKind, SamplerConfig};
use ordmeta_core::model::{Family, JonesTransform, ModelSpec, PriorSet, ScaleLink};
use ordmeta_core::nma::{NmaFamily, NmaSpec};
use ordmeta_core::sim::{SimConfig, SimScenario, TestProfile};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::read_text;

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(v: Option<u32>, what: &str) -> Result<()> {
    match v {
        Some(SCHEMA_VERSION) => Ok(()),
        Some(v) => Err(Error::Input(format!("{what}: unsupported schema_version {v}"))),
        None => Err(Error::Input(format!("{what}: missing schema_version"))),
    }
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Input(format!("{what}: {e}")))
}

/// Overrides on the default priors; `[mean, sd]` pairs for normals and a
/// single scale for half-normals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    pub mu_beta: Option<[f64; 2]>,
    pub sigma_beta: Option<[f64; 2]>,
    pub rho_shape: Option<f64>,
    pub dirichlet_alpha: Option<Vec<f64>>,
    /// `[df, location, scale]` of the Student-t on log kappa.
    pub log_kappa: Option<[f64; 3]>,
    pub mu_gamma: Option<[f64; 2]>,
    pub sigma_gamma: Option<f64>,
    pub jones_location: Option<[f64; 2]>,
    pub jones_location_sd: Option<f64>,
    pub jones_log_scale: Option<[f64; 2]>,
    pub jones_log_scale_sd: Option<f64>,
}

impl PriorConfig {
    pub fn load(path: &Path) -> Result<PriorConfig> {
        let what = path.display().to_string();
        let p: PriorConfig = parse(&read_text(path)?, &what)?;
        check_version(p.schema_version, &what)?;
        Ok(p)
    }

    pub fn apply(&self, p: &mut PriorSet) {
        let n = |v: [f64; 2]| Normal::new(v[0], v[1]);
        if let Some(v) = self.mu_beta {
            p.mu_beta = n(v);
        }
        if let Some(v) = self.sigma_beta {
            p.sigma_beta = [HalfNormal::new(v[0]), HalfNormal::new(v[1])];
        }
        if let Some(v) = self.rho_shape {
            p.rho_shape = v;
        }
        if let Some(v) = &self.dirichlet_alpha {
            p.dirichlet_alpha = Some(v.clone());
        }
        if let Some(v) = self.log_kappa {
            p.kappa = StudentT::new(v[0], v[1], v[2]);
        }
        if let Some(v) = self.mu_gamma {
            p.mu_gamma = n(v);
        }
        if let Some(v) = self.sigma_gamma {
            p.sigma_gamma = HalfNormal::new(v);
        }
        if let Some(v) = self.jones_location {
            p.jones_location = n(v);
        }
        if let Some(v) = self.jones_location_sd {
            p.jones_location_sd = HalfNormal::new(v);
        }
        if let Some(v) = self.jones_log_scale {
            p.jones_log_scale = n(v);
        }
        if let Some(v) = self.jones_log_scale_sd {
            p.jones_log_scale_sd = HalfNormal::new(v);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateConfig {
    /// Per-study covariate CSV; relative paths resolve against the config file.
    pub table: String,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub binary: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub center_scale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub schema_version: u32,
    pub family: String,
    #[serde(default)]
    pub priors: PriorConfig,
    /// `exp` or `softplus`.
    #[serde(default)]
    pub scale_link: Option<String>,
    /// Box-Cox lambda of the Jones threshold transform; log when absent.
    #[serde(default)]
    pub jones_box_cox: Option<f64>,
    #[serde(default)]
    pub strat_threshold: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub compound_symmetry: bool,
    /// Half-normal scale of the test-specific deviation SDs.
    #[serde(default)]
    pub tau_sd: Option<f64>,
    #[serde(default)]
    pub covariates: Option<CovariateConfig>,
}

/// A resolved model request.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Single(ModelSpec),
    Network(NmaSpec, Option<CovariateConfig>),
}

impl ModelChoice {
    pub fn name(&self) -> &'static str {
        match self {
            ModelChoice::Single(s) => s.family.name(),
            ModelChoice::Network(s, _) => s.family.name(),
        }
    }
}

impl ModelConfig {
    pub fn parse(text: &str, what: &str) -> Result<ModelConfig> {
        let c: ModelConfig = parse(text, what)?;
        check_version(Some(c.schema_version), what)?;
        Ok(c)
    }

    /// Reads a model file; a bare family name stands for its defaults.
    pub fn load(arg: &str) -> Result<(ModelConfig, Option<std::path::PathBuf>)> {
        let path = Path::new(arg);
        if path.extension().is_some_and(|e| e == "json") {
            let c = Self::parse(&read_text(path)?, arg)?;
            return Ok((c, path.parent().map(Path::to_path_buf)));
        }
        Ok((ModelConfig::family(arg), None))
    }

    pub fn family(name: &str) -> ModelConfig {
        ModelConfig {
            schema_version: SCHEMA_VERSION,
            family: name.to_string(),
            priors: PriorConfig::default(),
            scale_link: None,
            jones_box_cox: None,
            strat_threshold: None,
            seed: None,
            compound_symmetry: false,
            tau_sd: None,
            covariates: None,
        }
    }

    pub fn resolve(&self, extra_priors: Option<&PriorConfig>) -> Result<ModelChoice> {
        let mut priors = PriorSet::default();
        self.priors.apply(&mut priors);
        if let Some(p) = extra_priors {
            p.apply(&mut priors);
        }
        let jones = match self.jones_box_cox {
            None => JonesTransform::Log,
            Some(l) => JonesTransform::BoxCox(l),
        };
        jones.validate()?;
        if let Some(f) = Family::parse(&self.family) {
            if self.covariates.is_some() || self.compound_symmetry || self.tau_sd.is_some() {
                return Err(Error::Input(format!("{}: covariates, compound_symmetry and tau_sd need a network family", self.family)));
            }
            let scale_link = match self.scale_link.as_deref() {
                None | Some("exp") => ScaleLink::Exp,
                Some("softplus") => ScaleLink::Softplus,
                Some(o) => return Err(Error::Input(format!("unknown scale_link '{o}'"))),
            };
            if f == Family::StratBiv && self.strat_threshold.is_none() {
                return Err(Error::Input("strat_biv needs strat_threshold".into()));
            }
            return Ok(ModelChoice::Single(ModelSpec { family: f, priors, scale_link, jones_transform: jones, strat_threshold: self.strat_threshold }));
        }
        if let Some(f) = NmaFamily::parse(&self.family) {
            if self.scale_link.as_deref().is_some_and(|s| s != "exp") || self.strat_threshold.is_some() {
                return Err(Error::Input(format!("{}: scale_link and strat_threshold do not apply", self.family)));
            }
            let mut spec = NmaSpec::new(f);
            spec.priors = priors;
            spec.compound_symmetry = self.compound_symmetry;
            spec.jones_transform = jones;
            if let Some(t) = self.tau_sd {
                spec.tau = HalfNormal::new(t);
            }
            return Ok(ModelChoice::Network(spec, self.covariates.clone()));
        }
        Err(Error::Input(format!("unknown model family '{}'", self.family)))
    }
}

/// Sampler settings of a simulation file; CLI flags do not apply there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    #[serde(default = "d_chains")]
    pub chains: usize,
    #[serde(default = "d_warmup")]
    pub warmup: usize,
    #[serde(default = "d_iter")]
    pub iter: usize,
    #[serde(default = "d_delta")]
    pub adapt_delta: f64,
    #[serde(default = "d_depth")]
    pub max_treedepth: usize,
    #[serde(default)]
    pub dense_metric: bool,
}

fn d_chains() -> usize {
    4
}
fn d_warmup() -> usize {
    500
}
fn d_iter() -> usize {
    500
}
fn d_delta() -> f64 {
    0.8
}
fn d_depth() -> usize {
    10
}

impl Default for SamplerFile {
    fn default() -> Self {
        SamplerFile { chains: 4, warmup: 500, iter: 500, adapt_delta: 0.8, max_treedepth: 10, dense_metric: false }
    }
}

impl SamplerFile {
    pub fn to_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            n_warmup: self.warmup,
            n_iter: self.iter,
            target_accept: self.adapt_delta,
            max_treedepth: self.max_treedepth,
            seed,
            metric: if self.dense_metric { MetricKind::Dense } else { MetricKind::Diag },
            ..SamplerConfig::default()
        }
    }
}

/// A number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threshold {
    Value(f64),
    Named(InfTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::Value(v) => v,
            Threshold::Named(_) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// `gad2`, `hads` or `bai`.
    pub profile: String,
    pub dgm: String,
    pub n_studies: usize,
    pub models: Vec<String>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default)]
    pub miss_rate: Option<f64>,
    #[serde(default)]
    pub n_range: Option<[i64; 2]>,
    #[serde(default)]
    pub min_reporting: Option<usize>,
    /// Stop once the mean RMSE MCSE falls below this many percentage points.
    #[serde(default = "d_thr")]
    pub mcse_threshold_pct: Threshold,
    #[serde(default = "d_reps")]
    pub max_reps: usize,
    #[serde(default)]
    pub sampler: SamplerFile,
}

fn d_seed() -> u64 {
    1
}
fn d_thr() -> Threshold {
    Threshold::Value(0.125)
}
fn d_reps() -> usize {
    1000
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let what = path.display().to_string();
        let c: ScenarioConfig = parse(&read_text(path)?, &what)?;
        check_version(Some(c.schema_version), &what)?;
        Ok(c)
    }

    pub fn resolve(&self) -> Result<(SimScenario, Vec<ModelSpec>, SimConfig)> {
        let mut profile = TestProfile::preset(&self.profile).ok_or_else(|| Error::Input(format!("unknown profile '{}'", self.profile)))?;
        if let Some(m) = self.miss_rate {
            profile.miss_rate = m;
        }
        let dgm = Family::parse(&self.dgm).ok_or_else(|| Error::Input(format!("unknown DGM '{}'", self.dgm)))?;
        let mut scn = SimScenario::new(profile, dgm, self.n_studies, self.seed);
        if let Some([a, b]) = self.n_range {
            scn.n_range = (a, b);
        }
        if let Some(m) = self.min_reporting {
            scn.min_reporting = m;
        }
        scn.validate()?;
        if self.models.is_empty() {
            return Err(Error::Input("no models to fit".into()));
        }
        let models = self
            .models
            .iter()
            .map(|m| match Family::parse(m) {
                Some(Family::StratBiv) => Ok(ModelSpec::strat(1)),
                Some(f) => Ok(ModelSpec::new(f)),
                None => Err(Error::Input(format!("unknown model '{m}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let thr = self.mcse_threshold_pct.value();
        if !(thr > 0.0) {
            return Err(Error::Input("mcse_threshold_pct must be positive".into()));
        }
        let cfg = SimConfig { sampler: self.sampler.to_config(self.seed), mcse_threshold_pct: thr, max_reps: self.max_reps };
        cfg.sampler.validate()?;
        Ok((scn, models, cfg))
    }
}

/// Named baseline covariate vectors: `x[group][test]` per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineFile {
    pub schema_version: u32,
    pub scenarios: Vec<BaselineScenario>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineScenario {
    pub name: String,
    pub nd: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
}

impl BaselineFile {
    pub fn load(path: &Path) -> Result<BaselineFile> {
        let what = path.display().to_string();
        let c: BaselineFile = parse(&read_text(path)?, &what)?;
        check_version(Some(c.schema_version), &what)?;
        Ok(c)
    }
}
