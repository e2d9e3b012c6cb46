//! Cumulative ordinal count data and study-level covariates.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{bail, Result};

/// Sentinel for an unreported threshold.
pub const MISSING: i64 = -1;

/// One disease group of one study.
///
/// `cum[k - 1]` is the number of individuals scoring above threshold `k`
/// (that is, in categories `k + 1..=K`), or [`MISSING`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyCounts {
    pub n_total: i64,
    pub cum: Vec<i64>,
    /// 0 = non-diseased, 1 = diseased.
    pub group: u8,
}

impl StudyCounts {
    pub fn new(n_total: i64, cum: Vec<i64>, group: u8) -> Self {
        StudyCounts { n_total, cum, group }
    }

    /// A group with no individuals and nothing reported.
    pub fn absent(n_thresholds: usize, group: u8) -> Self {
        StudyCounts { n_total: 0, cum: vec![MISSING; n_thresholds], group }
    }

    pub fn is_absent(&self) -> bool {
        self.n_total == 0 && self.cum.iter().all(|&c| c == MISSING)
    }

    /// `(threshold index starting at 0, count)` for every reported threshold.
    pub fn observed(&self) -> impl Iterator<Item = (usize, i64)> + '_ {
        self.cum.iter().enumerate().filter(|(_, &c)| c != MISSING).map(|(k, &c)| (k, c))
    }

    pub fn is_observed(&self, k: usize) -> bool {
        self.cum[k] != MISSING
    }

    /// Individuals in each of the K categories; `None` if any threshold is missing.
    pub fn category_counts(&self) -> Option<Vec<i64>> {
        if self.cum.iter().any(|&c| c == MISSING) {
            return None;
        }
        let mut out = Vec::with_capacity(self.cum.len() + 1);
        let mut prev = self.n_total;
        for &c in &self.cum {
            out.push(prev - c);
            prev = c;
        }
        out.push(prev);
        Some(out)
    }

    pub fn from_categories(n: &[i64], group: u8) -> Self {
        let total: i64 = n.iter().sum();
        let mut cum = Vec::with_capacity(n.len() - 1);
        let mut acc = total;
        for &nj in &n[..n.len() - 1] {
            acc -= nj;
            cum.push(acc);
        }
        StudyCounts { n_total: total, cum, group }
    }
}

/// Single-test meta-analysis dataset; `studies[s][d]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MADataset {
    pub k: usize,
    pub studies: Vec<[StudyCounts; 2]>,
}

impl MADataset {
    pub fn n_studies(&self) -> usize {
        self.studies.len()
    }

    pub fn n_thresholds(&self) -> usize {
        self.k - 1
    }

    pub fn subset(&self, idx: &[usize]) -> MADataset {
        MADataset { k: self.k, studies: idx.iter().map(|&i| self.studies[i].clone()).collect() }
    }

    /// Studies reporting threshold `k` (0-based) in at least one group.
    pub fn reporting(&self, k: usize) -> usize {
        self.studies.iter().filter(|s| s[0].is_observed(k) || s[1].is_observed(k)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Length { study: usize, group: u8, len: usize },
    OutOfRange { study: usize, group: u8, k: usize, value: i64 },
    NonMonotone { study: usize, group: u8, k: usize },
    AllMissing { study: usize, group: u8 },
    NegativeTotal { study: usize, group: u8 },
    GroupLabel { study: usize, group: u8 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { study, group, len } => {
                write!(f, "study {study} group {group}: row length {len} != K-1")
            }
            Violation::OutOfRange { study, group, k, value } => {
                write!(f, "study {study} group {group}: count {value} out of range at k={k}")
            }
            Violation::NonMonotone { study, group, k } => {
                write!(f, "study {study} group {group}: non-monotone at k={k}")
            }
            Violation::AllMissing { study, group } => {
                write!(f, "study {study} group {group}: all thresholds missing")
            }
            Violation::NegativeTotal { study, group } => {
                write!(f, "study {study} group {group}: negative n_total")
            }
            Violation::GroupLabel { study, group } => {
                write!(f, "study {study}: unexpected group label {group}")
            }
        }
    }
}

/// Checks one group; thresholds are reported 1-based in violations.
pub fn validate_group(c: &StudyCounts, k_cat: usize, study: usize, out: &mut Vec<Violation>) {
    let group = c.group;
    if c.cum.len() + 1 != k_cat {
        out.push(Violation::Length { study, group, len: c.cum.len() });
        return;
    }
    if c.n_total < 0 {
        out.push(Violation::NegativeTotal { study, group });
        return;
    }
    if c.is_absent() {
        return;
    }
    let mut prev: Option<i64> = None;
    let mut any = false;
    for (k, &v) in c.cum.iter().enumerate() {
        if v == MISSING {
            continue;
        }
        any = true;
        if v < 0 || v > c.n_total {
            out.push(Violation::OutOfRange { study, group, k: k + 1, value: v });
            continue;
        }
        if let Some(p) = prev {
            if v > p {
                out.push(Violation::NonMonotone { study, group, k: k + 1 });
            }
        }
        prev = Some(v);
    }
    if !any && c.n_total > 0 {
        out.push(Violation::AllMissing { study, group });
    }
}

/// Report-only validation. An empty result means the dataset is valid.
pub fn validate_counts(data: &MADataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (s, pair) in data.studies.iter().enumerate() {
        for (d, g) in pair.iter().enumerate() {
            if g.group as usize != d {
                out.push(Violation::GroupLabel { study: s, group: g.group });
            }
            validate_group(g, data.k, s, &mut out);
        }
    }
    out
}

/// Network dataset: every test shares the global study index.
#[derive(Debug, Clone, PartialEq)]
pub struct NMADataset {
    pub test_names: Vec<String>,
    pub tests: Vec<MADataset>,
    /// `indicator[s][t]` is true when study `s` evaluated test `t`.
    pub indicator: Vec<Vec<bool>>,
}

impl NMADataset {
    pub fn n_tests(&self) -> usize {
        self.tests.len()
    }

    pub fn n_studies(&self) -> usize {
        self.indicator.len()
    }

    pub fn included(&self, t: usize) -> Vec<usize> {
        (0..self.n_studies()).filter(|&s| self.indicator[s][t]).collect()
    }

    /// Structural and count checks.
    pub fn validate(&self) -> Result<()> {
        if self.test_names.len() != self.tests.len() {
            bail!(Data, "{} test names for {} tests", self.test_names.len(), self.tests.len());
        }
        let n = self.n_studies();
        for (s, row) in self.indicator.iter().enumerate() {
            if row.len() != self.tests.len() {
                bail!(Data, "indicator row {s} has {} entries, expected {}", row.len(), self.tests.len());
            }
            if !row.iter().any(|&b| b) {
                bail!(Data, "study {s} evaluates no test");
            }
        }
        for (t, ma) in self.tests.iter().enumerate() {
            if ma.studies.len() != n {
                bail!(Data, "test {}: {} study rows for {} studies", self.test_names[t], ma.studies.len(), n);
            }
            for s in 0..n {
                let present = !(ma.studies[s][0].is_absent() && ma.studies[s][1].is_absent());
                if self.indicator[s][t] && !present {
                    bail!(Data, "test {}: indicator is 1 for study {s} but no data", self.test_names[t]);
                }
            }
            let mut v = Vec::new();
            for s in self.included(t) {
                for g in ma.studies[s].iter() {
                    validate_group(g, ma.k, s, &mut v);
                }
            }
            if let Some(first) = v.first() {
                bail!(Data, "test {}: {}", self.test_names[t], first);
            }
        }
        Ok(())
    }
}

/// A raw covariate cell.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Num(f64),
    Text(String),
    Missing,
}

impl RawValue {
    /// Interprets a text token; `NA`, `NaN`, `Inf` and `999` are missing.
    pub fn parse(token: &str) -> RawValue {
        let t = token.trim();
        if t.is_empty() {
            return RawValue::Missing;
        }
        match t {
            "NA" | "NaN" | "nan" | "Inf" | "-Inf" | "inf" | "-inf" => return RawValue::Missing,
            _ => {}
        }
        match t.parse::<f64>() {
            Ok(v) if v == 999.0 || !v.is_finite() => RawValue::Missing,
            Ok(v) => RawValue::Num(v),
            Err(_) => RawValue::Text(t.to_string()),
        }
    }

    fn level(&self) -> Option<String> {
        match self {
            RawValue::Num(v) => Some(format!("{v}")),
            RawValue::Text(s) => Some(s.clone()),
            RawValue::Missing => None,
        }
    }
}

/// Per-study covariate table, one row per study.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<RawValue>>,
}

impl RawTable {
    fn col(&self, name: &str) -> Result<usize> {
        match self.columns.iter().position(|c| c == name) {
            Some(i) => Ok(i),
            None => bail!(Data, "unknown covariate column '{name}'"),
        }
    }
}

/// Design matrix for one (group, test) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub column_names: Vec<String>,
    /// `x[s]`, all zeros for studies not included.
    pub x: Vec<Vec<f64>>,
    pub baseline: Vec<f64>,
}

impl Design {
    pub fn intercept_only(included: &[bool]) -> Design {
        Design {
            column_names: vec!["intercept".to_string()],
            x: included.iter().map(|&i| vec![if i { 1.0 } else { 0.0 }]).collect(),
            baseline: vec![1.0],
        }
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }
}

/// `designs[d][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet {
    pub designs: [Vec<Design>; 2],
}

impl CovariateSet {
    pub fn intercept_only(data: &NMADataset) -> CovariateSet {
        let per_test: Vec<Design> = (0..data.n_tests())
            .map(|t| {
                let inc: Vec<bool> = data.indicator.iter().map(|r| r[t]).collect();
                Design::intercept_only(&inc)
            })
            .collect();
        CovariateSet { designs: [per_test.clone(), per_test] }
    }
}

fn sorted_levels(values: &[Option<String>]) -> Vec<String> {
    let set: BTreeSet<String> = values.iter().flatten().cloned().collect();
    let mut levels: Vec<String> = set.into_iter().collect();
    if levels.iter().all(|l| l.parse::<f64>().is_ok()) {
        levels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap()
        });
    }
    levels
}

/// Builds an intercept-first design matrix.
///
/// Binary and categorical columns become dummies against their first level;
/// a missing categorical value becomes its own `[missing]` level. Continuous
/// columns may not be missing on included rows.
pub fn prepare_covariates(
    table: &RawTable,
    included: &[bool],
    continuous: &[&str],
    binary: &[&str],
    categorical: &[&str],
    center_scale: bool,
) -> Result<Design> {
    if table.rows.len() != included.len() {
        bail!(Dimension, "{} covariate rows for {} studies", table.rows.len(), included.len());
    }
    let n = included.len();
    let mut names = vec!["intercept".to_string()];
    let mut cols: Vec<Vec<f64>> = vec![included.iter().map(|&i| if i { 1.0 } else { 0.0 }).collect()];

    for &name in continuous {
        let c = table.col(name)?;
        let mut v = vec![0.0; n];
        for s in 0..n {
            if !included[s] {
                continue;
            }
            match table.rows[s][c] {
                RawValue::Num(x) => v[s] = x,
                RawValue::Missing => bail!(Data, "missing continuous covariate '{name}' for study {s}"),
                RawValue::Text(ref t) => bail!(Data, "non-numeric value '{t}' in continuous covariate '{name}'"),
            }
        }
        if center_scale {
            let m = included.iter().filter(|&&i| i).count() as f64;
            let mean = (0..n).filter(|&s| included[s]).map(|s| v[s]).sum::<f64>() / m;
            let var = (0..n).filter(|&s| included[s]).map(|s| { let e = v[s] - mean; e * e }).sum::<f64>()
                / (m - 1.0).max(1.0);
            let sd = libm::sqrt(var);
            for s in (0..n).filter(|&s| included[s]) {
                v[s] -= mean;
                if sd > 0.0 {
                    v[s] /= sd;
                }
            }
        }
        names.push(name.to_string());
        cols.push(v);
    }

    for &name in binary.iter().chain(categorical) {
        let c = table.col(name)?;
        let vals: Vec<Option<String>> =
            (0..n).map(|s| if included[s] { table.rows[s][c].level() } else { None }).collect();
        let has_missing = (0..n).any(|s| included[s] && vals[s].is_none());
        let levels = sorted_levels(&vals);
        if levels.is_empty() {
            bail!(Data, "covariate '{name}' has no observed levels");
        }
        for lvl in levels.iter().skip(1) {
            names.push(format!("{name}[{lvl}]"));
            cols.push((0..n).map(|s| (vals[s].as_deref() == Some(lvl.as_str())) as u8 as f64).collect());
        }
        if has_missing {
            names.push(format!("{name}[missing]"));
            cols.push((0..n).map(|s| (included[s] && vals[s].is_none()) as u8 as f64).collect());
        }
    }

    let p = cols.len();
    let x: Vec<Vec<f64>> = (0..n).map(|s| (0..p).map(|j| cols[j][s]).collect()).collect();
    let mut baseline = vec![0.0; p];
    baseline[0] = 1.0;
    Ok(Design { column_names: names, x, baseline })
}
