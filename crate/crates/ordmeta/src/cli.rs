//! Command line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ordmeta_core::data::{prepare_covariates, CovariateSet};
use ordmeta_core::eval::{compare_elpd, format_comparison, make_folds, run_kfold, ElpdResult, FoldReport, KfoldConfig};
use ordmeta_core::mcmc::{MetricKind, PosteriorDraws, SamplerConfig};
use ordmeta_core::model::{AccuracyModel, MaModel};
use ordmeta_core::nma::{pairwise_comparisons, recompute_baseline, variance_decomposition, BaselineCase, NmaModel};
use ordmeta_core::posterior::{self, accuracy_summary, auc_summary, heterogeneity, AccuracySummary, Interval};
use ordmeta_core::sim::adaptive_loop;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{BaselineFile, CovariateConfig, ModelChoice, ModelConfig, PriorConfig, ScenarioConfig};
use crate::error::{io_err, Error, Result};
use crate::exec::{thread_count, Threaded};
use crate::io;
use crate::manifest::{config_hash, RunManifest};
use crate::plot::{render_forest, render_sroc, render_thresholds, SrocLayout};
use crate::report;

#[derive(Parser, Debug)]
#[command(name = "ordmeta", version, about = "Bayesian meta-analysis of ordinal diagnostic accuracy data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Dataset: single-test JSON/CSV or network JSON.
    #[arg(long)]
    pub data: PathBuf,
    /// Family name (e.g. obiv_fc, ohsroc_rc, obiv_nma) or a model JSON file.
    #[arg(long)]
    pub model: String,
    /// Prior overrides (JSON).
    #[arg(long)]
    pub priors: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    #[arg(long, default_value_t = 1000)]
    pub warmup: usize,
    #[arg(long, default_value_t = 1000)]
    pub iter: usize,
    /// Falls back to the model file's seed, then 1.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.8)]
    pub adapt_delta: f64,
    #[arg(long, default_value_t = 10)]
    pub max_treedepth: usize,
    /// Adapt a dense mass matrix.
    #[arg(long)]
    pub dense: bool,
}

impl SamplerArgs {
    fn config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_chains: self.chains,
            n_warmup: self.warmup,
            n_iter: self.iter,
            target_accept: self.adapt_delta,
            max_treedepth: self.max_treedepth,
            seed,
            metric: if self.dense { MetricKind::Dense } else { MetricKind::Diag },
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; falls back to ORDMETA_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a model and write draws, diagnostics, summaries and plots.
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a simulation scenario with the adaptive replication count.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// K-fold cross-validation over studies.
    Kfold {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Seed of the fold assignment; keep it fixed when comparing models.
        #[arg(long, default_value_t = 1)]
        fold_seed: u64,
        #[arg(long, default_value_t = 100.0)]
        min_ess: f64,
        /// Study-effect draws per posterior draw.
        #[arg(long, default_value_t = 50)]
        inner_draws: usize,
        /// Label stored in the results file.
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Rank models from stored K-fold results.
    Compare {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Differences in Se and Sp between two tests from stored draws.
    Pairwise {
        #[command(flatten)]
        model: ModelArgs,
        /// Binary draws written by `fit`.
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        test_a: String,
        #[arg(long)]
        test_b: String,
        /// Pairs like `2:3,4:4`; defaults to equal thresholds.
        #[arg(long)]
        thresholds: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Summaries at new baseline covariate values from stored draws.
    Baseline {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit { model, sampler, out } => cmd_fit(&model, &sampler, &out),
        Command::Simulate { config, out } => cmd_simulate(&config, &out),
        Command::Kfold { model, sampler, folds, fold_seed, min_ess, inner_draws, name, out } => {
            cmd_kfold(&model, &sampler, folds, fold_seed, min_ess, inner_draws, name, &out)
        }
        Command::Compare { files, out } => cmd_compare(&files, &out),
        Command::Pairwise { model, draws, test_a, test_b, thresholds, out } => {
            cmd_pairwise(&model, &draws, &test_a, &test_b, thresholds.as_deref(), &out)
        }
        Command::Baseline { model, draws, scenarios, seed, out } => cmd_baseline(&model, &draws, &scenarios, seed, &out),
    }
}

/// A model bound to its data.
pub enum Built {
    Single(MaModel),
    Network(NmaModel),
}

impl Built {
    pub fn model(&self) -> &dyn AccuracyModel {
        match self {
            Built::Single(m) => m,
            Built::Network(m) => m,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Built::Single(m) => m.spec.family.name(),
            Built::Network(m) => m.spec.family.name(),
        }
    }
}

pub struct Loaded {
    pub built: Built,
    pub config: ModelConfig,
    pub inputs: Vec<PathBuf>,
}

fn covariates(data: &ordmeta_core::data::NMADataset, c: &CovariateConfig, base: Option<&Path>) -> Result<CovariateSet> {
    let path = match base {
        Some(b) if Path::new(&c.table).is_relative() => b.join(&c.table),
        _ => PathBuf::from(&c.table),
    };
    let table = io::parse_covariate_csv(&io::read_text(&path)?)?;
    fn refs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    let per_test = (0..data.n_tests())
        .map(|t| {
            let inc: Vec<bool> = data.indicator.iter().map(|r| r[t]).collect();
            prepare_covariates(&table, &inc, &refs(&c.continuous), &refs(&c.binary), &refs(&c.categorical), c.center_scale)
        })
        .collect::<ordmeta_core::Result<Vec<_>>>()?;
    Ok(CovariateSet { designs: [per_test.clone(), per_test] })
}

pub fn load_model(args: &ModelArgs) -> Result<Loaded> {
    let (config, base) = ModelConfig::load(&args.model)?;
    let priors = args.priors.as_deref().map(PriorConfig::load).transpose()?;
    let mut inputs = vec![args.data.clone()];
    if let Some(p) = &args.priors {
        inputs.push(p.clone());
    }
    let built = match config.resolve(priors.as_ref())? {
        ModelChoice::Single(spec) => Built::Single(MaModel::new(spec, io::load_ma(&args.data, None)?)?),
        ModelChoice::Network(spec, cov) => {
            let data = io::load_nma(&args.data)?;
            let covs = match &cov {
                Some(c) => {
                    inputs.push(base.as_deref().map_or(PathBuf::from(&c.table), |b| b.join(&c.table)));
                    covariates(&data, c, base.as_deref())?
                }
                None => CovariateSet::intercept_only(&data),
            };
            Built::Network(NmaModel::new(spec, data, covs)?)
        }
    };
    Ok(Loaded { built, config, inputs })
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

struct Outputs<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        prepare_out(dir)?;
        Ok(Outputs { dir, written: Vec::new() })
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        io::write_text(&self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T], fmt: Format) -> Result<()> {
        match fmt {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
                }
                let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?).unwrap();
                self.text(&format!("{stem}.csv"), &body)
            }
            Format::Json => self.text(&format!("{stem}.json"), &(serde_json::to_string_pretty(rows).unwrap() + "\n")),
        }
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        self.text(name, &(serde_json::to_string_pretty(v).unwrap() + "\n"))
    }

    fn finish(mut self, mut m: RunManifest, start: Instant) -> Result<()> {
        m.wall_time_s = start.elapsed().as_secs_f64();
        self.written.push("manifest.json".into());
        m.outputs = self.written.clone();
        let body = serde_json::to_string_pretty(&m).unwrap() + "\n";
        io::write_text(&self.dir.join("manifest.json"), &body)
    }
}

fn hash(canonical: &Value, inputs: &[PathBuf]) -> Result<String> {
    let refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    config_hash(&canonical.to_string(), &refs).map_err(Error::from)
}

fn iv(i: Interval) -> Value {
    json!({ "median": i.median, "lo": i.lo, "hi": i.hi })
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    test: &'a str,
    threshold: usize,
    quantity: &'static str,
    estimate: f64,
    lo: f64,
    hi: f64,
    pred_lo: f64,
    pred_hi: f64,
}

fn summary_table(sums: &[AccuracySummary]) -> Vec<SummaryRow<'_>> {
    let mut out = Vec::new();
    for s in sums {
        for (k, q, est, lo, hi, plo, phi) in posterior::summary_rows(s) {
            out.push(SummaryRow { test: &s.test, threshold: k, quantity: q, estimate: est, lo, hi, pred_lo: plo, pred_hi: phi });
        }
    }
    out
}

#[derive(Serialize)]
struct DiagRow<'a> {
    param: &'a str,
    mean: f64,
    sd: f64,
    rhat: Option<f64>,
    ess_bulk: Option<f64>,
    ess_tail: Option<f64>,
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn cmd_fit(margs: &ModelArgs, sargs: &SamplerArgs, oargs: &OutArgs) -> Result<()> {
    let start = Instant::now();
    let loaded = load_model(margs)?;
    let seed = sargs.seed.or(loaded.config.seed).unwrap_or(1);
    let cfg = sargs.config(seed);
    let exec = Threaded::new(thread_count(oargs.threads).min(cfg.n_chains.max(1)));
    let model = loaded.built.model();
    let fit = posterior::fit(model, &exec, &cfg)?;
    let mut out = Outputs::new(&oargs.out)?;

    out.text("draws.csv", &io::draws_to_csv(&fit.draws))?;
    let mut bin = Vec::new();
    io::write_draws_binary(&fit.draws, &mut bin)?;
    fs::write(oargs.out.join("draws.ordm"), bin).map_err(|e| io_err(&oargs.out, e))?;
    out.written.push("draws.ordm".into());

    let diag = &fit.diagnostics;
    let rows: Vec<DiagRow> = fit
        .draws
        .names
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let v = fit.draws.pooled(p);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
            DiagRow { param: name, mean, sd, rhat: diag.rhat[p], ess_bulk: diag.ess_bulk[p], ess_tail: diag.ess_tail[p] }
        })
        .collect();
    out.table("diagnostics", &rows, oargs.format)?;
    out.json(
        "sampler.json",
        &json!({
            "chains": cfg.n_chains, "warmup": cfg.n_warmup, "iter": cfg.n_iter, "seed": seed,
            "divergences": diag.divergence_count,
            "divergence_warning": diag.divergence_warning,
            "treedepth_hits": diag.treedepth_hits,
            "max_rhat": diag.max_rhat(),
            "min_ess": diag.min_ess(),
            "stepsize": fit.draws.stepsize,
        }),
    )?;

    let n_tests = model.n_tests();
    let sums = (0..n_tests).map(|t| accuracy_summary(model, &fit.draws, t, seed)).collect::<ordmeta_core::Result<Vec<_>>>()?;
    out.table("summary", &summary_table(&sums), oargs.format)?;
    #[derive(Serialize)]
    struct AucRow {
        test: String,
        auc: f64,
        lo: f64,
        hi: f64,
        pred_median: f64,
        pred_lo: f64,
        pred_hi: f64,
    }
    let mut aucs = Vec::new();
    for t in 0..n_tests {
        let a = auc_summary(model, &fit.draws, t, seed)?;
        aucs.push(AucRow {
            test: model.test_name(t),
            auc: a.auc.median,
            lo: a.auc.lo,
            hi: a.auc.hi,
            pred_median: a.predictive.median,
            pred_lo: a.predictive.lo,
            pred_hi: a.predictive.hi,
        });
    }
    out.table("auc", &aucs, oargs.format)?;

    match &loaded.built {
        Built::Single(m) => {
            let h = heterogeneity(m, &fit.draws)?;
            out.json(
                "heterogeneity.json",
                &json!({
                    "family": h.family.name(),
                    "sigma_nd": iv(h.sigma_neg),
                    "sigma_d": iv(h.sigma_pos),
                    "rho": h.rho.map(iv),
                    "mapped_from_hsroc": h.mapped,
                    "hsroc": h.hsroc.map(|v| json!({
                        "mu_beta": iv(v[0]), "sigma_beta": iv(v[1]), "mu_gamma": iv(v[2]), "sigma_gamma": iv(v[3]),
                    })),
                    "rho_clamped_draws": h.rho_clamped_draws,
                    "rho_undefined_draws": h.rho_undefined_draws,
                }),
            )?;
        }
        Built::Network(m) => {
            #[derive(Serialize)]
            struct VarRow {
                test: String,
                component: String,
                total_var: f64,
                total_var_lo: f64,
                total_var_hi: f64,
                prop_test_specific: f64,
                prop_lo: f64,
                prop_hi: f64,
            }
            let rows: Vec<VarRow> = variance_decomposition(m, &fit.draws)?
                .into_iter()
                .map(|r| VarRow {
                    test: r.test,
                    component: r.component,
                    total_var: r.total_var.median,
                    total_var_lo: r.total_var.lo,
                    total_var_hi: r.total_var.hi,
                    prop_test_specific: r.prop_test_specific.median,
                    prop_lo: r.prop_test_specific.lo,
                    prop_hi: r.prop_test_specific.hi,
                })
                .collect();
            out.table("variance", &rows, oargs.format)?;
            out.text("sroc_grid.svg", &render_sroc(&sums, SrocLayout::Grid)?)?;
        }
    }
    out.text("sroc.svg", &render_sroc(&sums, SrocLayout::Single)?)?;
    for s in &sums {
        let name = if n_tests == 1 { "thresholds.svg".to_string() } else { format!("thresholds_{}.svg", sanitize(&s.test)) };
        out.text(&name, &render_thresholds(s)?)?;
    }

    println!(
        "{}: {} chains x {} draws, max R-hat {}, min ESS {}, {} divergences",
        loaded.built.name(),
        cfg.n_chains,
        cfg.n_iter,
        diag.max_rhat().map_or("n/a".into(), |r| format!("{r:.3}")),
        diag.min_ess().map_or("n/a".into(), |r| format!("{r:.0}")),
        diag.divergence_count
    );
    if diag.divergence_warning {
        eprintln!("warning: more than half of the transitions diverged");
    }
    let canonical = json!({ "command": "fit", "model": loaded.config, "sampler": format!("{cfg:?}") });
    out.finish(RunManifest::new("fit", hash(&canonical, &loaded.inputs)?, seed), start)
}

fn cmd_simulate(path: &Path, oargs: &OutArgs) -> Result<()> {
    let start = Instant::now();
    let sc = ScenarioConfig::load(path)?;
    let (scn, models, cfg) = sc.resolve()?;
    let exec = Threaded::new(thread_count(oargs.threads).min(cfg.sampler.n_chains.max(1)));
    let mut progress = |n: usize, accs: &[ordmeta_core::sim::MetricAccumulator]| {
        let stat = accs.iter().map(|a| a.stop_statistic()).fold(f64::NEG_INFINITY, f64::max);
        eprintln!("replication {n}: stop statistic {:.4} pp", 100.0 * stat);
    };
    let res = adaptive_loop(&scn, &models, &cfg, &exec, &mut progress)?;
    let mut out = Outputs::new(&oargs.out)?;
    let rows = report::sim_rows(&sc.dgm, sc.n_studies, &res.accumulators);
    out.table("results", &rows, oargs.format)?;
    let table = report::format_table(&sc.dgm, sc.n_studies, &res.accumulators);
    out.text("table.txt", &table)?;
    #[derive(Serialize)]
    struct TraceRow {
        rep: usize,
        stop_statistic_pp: f64,
    }
    let trace: Vec<TraceRow> = res.trace.iter().enumerate().map(|(i, &s)| TraceRow { rep: i + 1, stop_statistic_pp: 100.0 * s }).collect();
    out.table("trace", &trace, oargs.format)?;
    print!("{table}");
    println!("{} replications", res.n_reps);
    let canonical = serde_json::to_value(&sc).unwrap();
    out.finish(RunManifest::new("simulate", hash(&canonical, &[path.to_path_buf()])?, sc.seed), start)
}

/// Stored K-fold results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KfoldFile {
    pub schema_version: u32,
    pub model: String,
    pub k_folds: usize,
    pub fold_seed: u64,
    pub elpd_total: f64,
    pub se_total: f64,
    pub pointwise: Vec<Option<f64>>,
    pub folds: Vec<FoldReport>,
}

impl KfoldFile {
    pub fn from_result(r: &ElpdResult, k_folds: usize, fold_seed: u64) -> Self {
        KfoldFile {
            schema_version: crate::config::SCHEMA_VERSION,
            model: r.model.clone(),
            k_folds,
            fold_seed,
            elpd_total: r.elpd_total(),
            se_total: r.se_total(),
            pointwise: r.pointwise.clone(),
            folds: r.folds.clone(),
        }
    }

    pub fn into_result(self) -> ElpdResult {
        ElpdResult { model: self.model, pointwise: self.pointwise, folds: self.folds }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_kfold(
    margs: &ModelArgs,
    sargs: &SamplerArgs,
    k: usize,
    fold_seed: u64,
    min_ess: f64,
    inner: usize,
    name: Option<String>,
    oargs: &OutArgs,
) -> Result<()> {
    let start = Instant::now();
    let loaded = load_model(margs)?;
    let seed = sargs.seed.or(loaded.config.seed).unwrap_or(1);
    let cfg = KfoldConfig { sampler: sargs.config(seed), m_inner: inner, min_ess };
    let exec = Threaded::new(thread_count(oargs.threads).min(cfg.sampler.n_chains.max(1)));
    let name = name.unwrap_or_else(|| loaded.built.name().to_string());
    let res = match &loaded.built {
        Built::Single(m) => run_kfold(&name, m, &make_folds(m.data.n_studies(), k, fold_seed)?, &cfg, &exec)?,
        Built::Network(m) => run_kfold(&name, m, &make_folds(m.n_studies(), k, fold_seed)?, &cfg, &exec)?,
    };
    let mut out = Outputs::new(&oargs.out)?;
    let file = KfoldFile::from_result(&res, k, fold_seed);
    out.text(&format!("kfold_{}.json", sanitize(&name)), &(serde_json::to_string_pretty(&file).unwrap() + "\n"))?;
    for f in &res.folds {
        if f.discarded {
            eprintln!("warning: fold {} discarded (min ESS {:.0} < {min_ess})", f.fold, f.ess_min);
        }
    }
    println!("{name}: ELPD {:.1} (SE {:.1}) over {} studies", res.elpd_total(), res.se_total(), res.retained().len());
    let canonical = json!({ "command": "kfold", "model": loaded.config, "k": k, "fold_seed": fold_seed, "min_ess": min_ess, "inner": inner, "sampler": format!("{:?}", cfg.sampler) });
    out.finish(RunManifest::new("kfold", hash(&canonical, &loaded.inputs)?, seed), start)
}

fn cmd_compare(files: &[PathBuf], oargs: &OutArgs) -> Result<()> {
    let start = Instant::now();
    let mut results = Vec::new();
    for f in files {
        let kf: KfoldFile = serde_json::from_str(&io::read_text(f)?).map_err(|e| Error::Input(format!("{}: {e}", f.display())))?;
        if kf.schema_version != crate::config::SCHEMA_VERSION {
            return Err(Error::Input(format!("{}: unsupported schema_version", f.display())));
        }
        results.push(kf.into_result());
    }
    let cmp = compare_elpd(&results)?;
    let mut out = Outputs::new(&oargs.out)?;
    out.table("comparison", &cmp.rows, oargs.format)?;
    let table = format_comparison(&cmp);
    out.text("comparison.txt", &table)?;
    print!("{table}");
    let canonical = json!({ "command": "compare" });
    out.finish(RunManifest::new("compare", hash(&canonical, files)?, 0), start)
}

fn load_draws(path: &Path, model: &dyn AccuracyModel) -> Result<PosteriorDraws> {
    let f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let d = io::read_draws_binary(std::io::BufReader::new(f))?;
    if d.names != model.param_names() {
        return Err(Error::Input(format!("{}: draws do not match the model's parameters", path.display())));
    }
    Ok(d)
}

fn test_index(model: &dyn AccuracyModel, name: &str) -> Result<usize> {
    (0..model.n_tests())
        .find(|&t| model.test_name(t) == name)
        .or_else(|| name.parse::<usize>().ok().filter(|&i| (1..=model.n_tests()).contains(&i)).map(|i| i - 1))
        .ok_or_else(|| Error::Input(format!("unknown test '{name}'")))
}

fn parse_pairs(s: &str) -> Result<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (a, b) = p.split_once(':').ok_or_else(|| Error::Input(format!("threshold pair '{p}' needs the form a:b")))?;
            let n = |x: &str| x.trim().parse::<usize>().map_err(|_| Error::Input(format!("bad threshold '{x}'")));
            Ok((n(a)?, n(b)?))
        })
        .collect()
}

fn cmd_pairwise(margs: &ModelArgs, draws: &Path, ta: &str, tb: &str, pairs: Option<&str>, oargs: &OutArgs) -> Result<()> {
    let start = Instant::now();
    let loaded = load_model(margs)?;
    let model = loaded.built.model();
    let d = load_draws(draws, model)?;
    let (a, b) = (test_index(model, ta)?, test_index(model, tb)?);
    let pairs = match pairs {
        Some(p) => parse_pairs(p)?,
        None => {
            let tb_thr = model.thresholds(b);
            model.thresholds(a).into_iter().filter(|k| tb_thr.contains(k)).map(|k| (k, k)).collect()
        }
    };
    let rows = pairwise_comparisons(model, &d, a, b, &pairs)?;
    #[derive(Serialize)]
    struct Row<'a> {
        test_a: &'a str,
        k_a: usize,
        test_b: &'a str,
        k_b: usize,
        d_se: f64,
        d_se_lo: f64,
        d_se_hi: f64,
        d_sp: f64,
        d_sp_lo: f64,
        d_sp_hi: f64,
    }
    let table: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            test_a: &r.test_a,
            k_a: r.k_a,
            test_b: &r.test_b,
            k_b: r.k_b,
            d_se: r.d_se.median,
            d_se_lo: r.d_se.lo,
            d_se_hi: r.d_se.hi,
            d_sp: r.d_sp.median,
            d_sp_lo: r.d_sp.lo,
            d_sp_hi: r.d_sp.hi,
        })
        .collect();
    let mut out = Outputs::new(&oargs.out)?;
    out.table("pairwise", &table, oargs.format)?;
    out.text("forest.svg", &render_forest(&rows)?)?;
    let mut inputs = loaded.inputs.clone();
    inputs.push(draws.to_path_buf());
    let canonical = json!({ "command": "pairwise", "model": loaded.config, "a": a, "b": b, "pairs": pairs });
    out.finish(RunManifest::new("pairwise", hash(&canonical, &inputs)?, 0), start)
}

fn cmd_baseline(margs: &ModelArgs, draws: &Path, scen: &Path, seed: u64, oargs: &OutArgs) -> Result<()> {
    let start = Instant::now();
    let loaded = load_model(margs)?;
    let Built::Network(m) = &loaded.built else {
        return Err(Error::Input("baseline recomputation needs a network model".into()));
    };
    let d = load_draws(draws, m)?;
    let file = BaselineFile::load(scen)?;
    let cases: Vec<BaselineCase> = file.scenarios.iter().map(|s| BaselineCase { name: s.name.clone(), x: [s.nd.clone(), s.d.clone()] }).collect();
    let res = recompute_baseline(m, &d, &cases, seed)?;
    #[derive(Serialize)]
    struct Row<'a> {
        scenario: &'a str,
        #[serde(flatten)]
        row: SummaryRow<'a>,
    }
    #[derive(Serialize)]
    struct AucRow<'a> {
        scenario: &'a str,
        test: &'a str,
        auc: f64,
        lo: f64,
        hi: f64,
        pred_lo: f64,
        pred_hi: f64,
    }
    let mut rows = Vec::new();
    let mut aucs = Vec::new();
    for r in &res {
        for row in summary_table(&r.summaries) {
            rows.push(Row { scenario: &r.scenario, row });
        }
        for (s, a) in r.summaries.iter().zip(&r.auc) {
            aucs.push(AucRow { scenario: &r.scenario, test: &s.test, auc: a.auc.median, lo: a.auc.lo, hi: a.auc.hi, pred_lo: a.predictive.lo, pred_hi: a.predictive.hi });
        }
    }
    let mut out = Outputs::new(&oargs.out)?;
    if oargs.format == Format::Csv {
        // flattened structs do not go through the CSV serializer
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["scenario", "test", "threshold", "quantity", "estimate", "lo", "hi", "pred_lo", "pred_hi"]).unwrap();
        for r in &rows {
            let s = &r.row;
            w.write_record([
                r.scenario.to_string(),
                s.test.to_string(),
                s.threshold.to_string(),
                s.quantity.to_string(),
                s.estimate.to_string(),
                s.lo.to_string(),
                s.hi.to_string(),
                s.pred_lo.to_string(),
                s.pred_hi.to_string(),
            ])
            .unwrap();
        }
        out.text("baseline.csv", &String::from_utf8(w.into_inner().unwrap()).unwrap())?;
    } else {
        out.table("baseline", &rows, oargs.format)?;
    }
    out.table("baseline_auc", &aucs, oargs.format)?;
    let mut inputs = loaded.inputs.clone();
    inputs.extend([draws.to_path_buf(), scen.to_path_buf()]);
    let canonical = json!({ "command": "baseline", "model": loaded.config, "seed": seed });
    out.finish(RunManifest::new("baseline", hash(&canonical, &inputs)?, seed), start)
}
