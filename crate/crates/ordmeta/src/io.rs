//! Dataset, covariate and draw file formats.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ordmeta_core::data::{validate_counts, MADataset, NMADataset, RawTable, RawValue, StudyCounts};
use ordmeta_core::mcmc::PosteriorDraws;
use ordmeta_core::posterior::{summary_rows, AccuracySummary};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Json,
    Csv,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Result<DataFormat> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("json") => Ok(DataFormat::Json),
            Some("csv") => Ok(DataFormat::Csv),
            _ => Err(Error::Input(format!("{}: cannot tell the format from the extension", path.display()))),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupJson {
    n: i64,
    cum: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyJson {
    nd: GroupJson,
    d: GroupJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaJson {
    #[serde(rename = "K")]
    k: usize,
    studies: Vec<StudyJson>,
}

fn check_valid(data: &MADataset, what: &str) -> Result<()> {
    let v = validate_counts(data);
    if v.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = v.iter().map(|x| format!("  {x}")).collect();
    Err(Error::Input(format!("{what}: {} invalid count rows\n{}", v.len(), lines.join("\n"))))
}

fn row_len_check(k: usize, cum: &[i64], where_: impl Fn() -> String) -> Result<()> {
    if cum.len() + 1 != k {
        return Err(Error::Input(format!("{}: row length {} != K - 1 = {}", where_(), cum.len(), k.saturating_sub(1))));
    }
    Ok(())
}

pub fn parse_ma_json(text: &str) -> Result<MADataset> {
    let raw: MaJson = serde_json::from_str(text).map_err(|e| Error::Input(format!("JSON: {e}")))?;
    if raw.k < 2 {
        return Err(Error::Input(format!("K = {} (need at least 2 categories)", raw.k)));
    }
    let mut studies = Vec::with_capacity(raw.studies.len());
    for (s, st) in raw.studies.into_iter().enumerate() {
        row_len_check(raw.k, &st.nd.cum, || format!("study {} (nd)", s + 1))?;
        row_len_check(raw.k, &st.d.cum, || format!("study {} (d)", s + 1))?;
        studies.push([StudyCounts::new(st.nd.n, st.nd.cum, 0), StudyCounts::new(st.d.n, st.d.cum, 1)]);
    }
    let data = MADataset { k: raw.k, studies };
    check_valid(&data, "dataset")?;
    Ok(data)
}

pub fn ma_to_json(data: &MADataset) -> String {
    let raw = MaJson {
        k: data.k,
        studies: data
            .studies
            .iter()
            .map(|[a, b]| StudyJson {
                nd: GroupJson { n: a.n_total, cum: a.cum.clone() },
                d: GroupJson { n: b.n_total, cum: b.cum.clone() },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("serializable") + "\n"
}

/// Header `study_id,group,n_total,c1,...`; one row per study and group.
pub fn parse_ma_csv(text: &str) -> Result<MADataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Input(format!("CSV: {e}")))?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() < 4 || cols[0] != "study_id" || cols[1] != "group" || cols[2] != "n_total" {
        return Err(Error::Input("CSV header must start with study_id,group,n_total,c1".into()));
    }
    let k = cols.len() - 2;
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, [Option<StudyCounts>; 2]> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<i64> {
            rec[i].parse::<i64>().map_err(|_| Error::Input(format!("line {line}, column {}: '{}' is not an integer", i + 1, &rec[i])))
        };
        let id = rec[0].to_string();
        let g = num(1)?;
        if g != 0 && g != 1 {
            return Err(Error::Input(format!("line {line}, column 2: group must be 0 or 1")));
        }
        let n = num(2)?;
        let cum = (3..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        let slot = groups.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            [None, None]
        });
        if slot[g as usize].is_some() {
            return Err(Error::Input(format!("line {line}: study '{id}' group {g} given twice")));
        }
        slot[g as usize] = Some(StudyCounts::new(n, cum, g as u8));
    }
    let mut studies = Vec::with_capacity(order.len());
    for id in &order {
        let [a, b] = groups.remove(id).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => studies.push([a, b]),
            _ => return Err(Error::Input(format!("study '{id}' needs one row for each group"))),
        }
    }
    let data = MADataset { k, studies };
    check_valid(&data, "dataset")?;
    Ok(data)
}

pub fn ma_to_csv(data: &MADataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["study_id".to_string(), "group".into(), "n_total".into()];
    head.extend((1..data.k).map(|k| format!("c{k}")));
    w.write_record(&head).unwrap();
    for (s, pair) in data.studies.iter().enumerate() {
        for g in pair {
            let mut row = vec![(s + 1).to_string(), g.group.to_string(), g.n_total.to_string()];
            row.extend(g.cum.iter().map(i64::to_string));
            w.write_record(&row).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn load_ma(path: &Path, format: Option<DataFormat>) -> Result<MADataset> {
    let text = read_text(path)?;
    let fmt = match format {
        Some(f) => f,
        None => DataFormat::from_path(path)?,
    };
    let r = match fmt {
        DataFormat::Json => parse_ma_json(&text),
        DataFormat::Csv => parse_ma_csv(&text),
    };
    r.map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestJson {
    name: String,
    #[serde(rename = "K")]
    k: usize,
    nd: Vec<Vec<i64>>,
    d: Vec<Vec<i64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NmaJson {
    tests: Vec<TestJson>,
    indicator: Vec<Vec<u8>>,
}

/// Rows are `[n_total, cum_1, ..., cum_{K-1}]` for every study of the global
/// index; rows of studies with indicator 0 are ignored.
pub fn parse_nma_json(text: &str) -> Result<NMADataset> {
    let raw: NmaJson = serde_json::from_str(text).map_err(|e| Error::Input(format!("JSON: {e}")))?;
    let n = raw.indicator.len();
    let mut indicator = Vec::with_capacity(n);
    for (s, row) in raw.indicator.iter().enumerate() {
        if row.len() != raw.tests.len() {
            return Err(Error::Input(format!("indicator row {} has {} entries for {} tests", s + 1, row.len(), raw.tests.len())));
        }
        if row.iter().any(|&v| v > 1) {
            return Err(Error::Input(format!("indicator row {} must hold 0 or 1", s + 1)));
        }
        indicator.push(row.iter().map(|&v| v == 1).collect::<Vec<bool>>());
    }
    let mut tests = Vec::with_capacity(raw.tests.len());
    for (t, tj) in raw.tests.iter().enumerate() {
        if tj.k < 2 {
            return Err(Error::Input(format!("test {}: K = {}", tj.name, tj.k)));
        }
        for (lab, rows) in [("nd", &tj.nd), ("d", &tj.d)] {
            if rows.len() != n {
                return Err(Error::Input(format!("test {}: {} {lab} rows for {n} studies", tj.name, rows.len())));
            }
        }
        let mut studies = Vec::with_capacity(n);
        for s in 0..n {
            let mut pair = [StudyCounts::absent(tj.k - 1, 0), StudyCounts::absent(tj.k - 1, 1)];
            if indicator[s][t] {
                for (g, rows) in [&tj.nd, &tj.d].into_iter().enumerate() {
                    let row = &rows[s];
                    if row.len() != tj.k {
                        return Err(Error::Input(format!("test {}: study {} row length {} != K = {}", tj.name, s + 1, row.len(), tj.k)));
                    }
                    if row.iter().all(|&v| v == -1) {
                        return Err(Error::Input(format!("test {}: indicator is 1 for study {} but its counts are absent", tj.name, s + 1)));
                    }
                    pair[g] = StudyCounts::new(row[0], row[1..].to_vec(), g as u8);
                }
            }
            studies.push(pair);
        }
        let ma = MADataset { k: tj.k, studies };
        check_valid(&ma.subset(&(0..n).filter(|&s| indicator[s][t]).collect::<Vec<_>>()), &format!("test {}", tj.name))?;
        tests.push(ma);
    }
    let data = NMADataset { test_names: raw.tests.iter().map(|t| t.name.clone()).collect(), tests, indicator };
    data.validate()?;
    Ok(data)
}

pub fn nma_to_json(data: &NMADataset) -> String {
    let rows = |ma: &MADataset, g: usize, t: usize| -> Vec<Vec<i64>> {
        ma.studies
            .iter()
            .enumerate()
            .map(|(s, p)| {
                if data.indicator[s][t] {
                    std::iter::once(p[g].n_total).chain(p[g].cum.iter().copied()).collect()
                } else {
                    vec![-1; ma.k]
                }
            })
            .collect()
    };
    let raw = NmaJson {
        tests: data
            .tests
            .iter()
            .enumerate()
            .map(|(t, ma)| TestJson { name: data.test_names[t].clone(), k: ma.k, nd: rows(ma, 0, t), d: rows(ma, 1, t) })
            .collect(),
        indicator: data.indicator.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect(),
    };
    serde_json::to_string_pretty(&raw).expect("serializable") + "\n"
}

pub fn load_nma(path: &Path) -> Result<NMADataset> {
    parse_nma_json(&read_text(path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Covariate CSV with a header, one row per study.
pub fn parse_covariate_csv(text: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let columns: Vec<String> = rdr.headers().map_err(|e| Error::Input(format!("CSV: {e}")))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("CSV: {e}")))?;
        rows.push(rec.iter().map(RawValue::parse).collect());
    }
    Ok(RawTable { columns, rows })
}

pub fn draws_to_csv(d: &PosteriorDraws) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["chain".to_string(), "iter".into(), "divergent".into()];
    head.extend(d.names.iter().cloned());
    w.write_record(&head).unwrap();
    for c in 0..d.n_chains {
        for i in 0..d.n_iter {
            let mut row = vec![(c + 1).to_string(), (i + 1).to_string(), (d.divergent[c][i] as u8).to_string()];
            row.extend(d.draw(c, i).iter().map(|v| format!("{v:e}")));
            w.write_record(&row).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

const MAGIC: &[u8; 4] = b"ORDM";
const VERSION: u32 = 1;

/// Binary draws: `ORDM`, then little-endian u32 version, chains, iterations
/// and parameter count, each name as u32 length plus UTF-8 bytes, one
/// divergence byte per draw, and finally the f64 values chain-major.
pub fn write_draws_binary(d: &PosteriorDraws, mut w: impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    for v in [VERSION, d.n_chains as u32, d.n_iter as u32, d.dim() as u32] {
        w.write_all(&v.to_le_bytes())?;
    }
    for n in &d.names {
        w.write_all(&(n.len() as u32).to_le_bytes())?;
        w.write_all(n.as_bytes())?;
    }
    for c in &d.divergent {
        w.write_all(&c.iter().map(|&b| b as u8).collect::<Vec<u8>>())?;
    }
    for v in &d.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_draws_binary(mut r: impl Read) -> Result<PosteriorDraws> {
    let bad = |m: &str| Error::Input(format!("draws file: {m}"));
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = buf.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut u32s = [0u32; 4];
    for v in u32s.iter_mut() {
        *v = u32::from_le_bytes(take(4)?.try_into().unwrap());
    }
    let [version, n_chains, n_iter, dim] = u32s.map(|v| v as usize);
    if version != VERSION as usize {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let mut names = Vec::with_capacity(dim);
    for _ in 0..dim {
        let len = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        names.push(String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("name is not UTF-8"))?);
    }
    let mut divergent = Vec::with_capacity(n_chains);
    for _ in 0..n_chains {
        divergent.push(take(n_iter)?.iter().map(|&b| b != 0).collect::<Vec<bool>>());
    }
    let n_vals = n_chains * n_iter * dim;
    let bytes = take(n_vals * 8)?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if pos != buf.len() {
        return Err(bad("trailing bytes"));
    }
    let zeros = |x| vec![vec![x; n_iter]; n_chains];
    Ok(PosteriorDraws {
        names,
        n_chains,
        n_iter,
        values,
        hit_max_treedepth: vec![vec![false; n_iter]; n_chains],
        divergent,
        treedepth: zeros(0),
        accept_stat: vec![vec![f64::NAN; n_iter]; n_chains],
        energy: vec![vec![f64::NAN; n_iter]; n_chains],
        n_leapfrog: zeros(0),
        stepsize: vec![f64::NAN; n_chains],
        inv_metric: vec![Vec::new(); n_chains],
        warmup_divergences: vec![0; n_chains],
    })
}

/// `test,threshold,quantity,estimate,lo,hi,pred_lo,pred_hi`.
pub fn summary_csv(summaries: &[AccuracySummary]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test", "threshold", "quantity", "estimate", "lo", "hi", "pred_lo", "pred_hi"]).unwrap();
    for s in summaries {
        for (k, q, est, lo, hi, plo, phi) in summary_rows(s) {
            let mut row = vec![s.test.clone(), k.to_string(), q.to_string()];
            row.extend([est, lo, hi, plo, phi].iter().map(|v| format!("{v:.6}")));
            w.write_record(&row).unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Reads back the rows written by [`summary_csv`], grouped by test in file
/// order.
pub fn parse_summary_csv(text: &str) -> Result<Vec<AccuracySummary>> {
    use ordmeta_core::posterior::{Interval, ThresholdSummary};
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<AccuracySummary> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Input(format!("CSV: {e}")))?;
        if rec.len() != 8 {
            return Err(Error::Input("summary rows need 8 columns".into()));
        }
        let f = |i: usize| rec[i].parse::<f64>().map_err(|_| Error::Input(format!("bad number '{}'", &rec[i])));
        let k: usize = rec[1].parse().map_err(|_| Error::Input(format!("bad threshold '{}'", &rec[1])))?;
        let iv = Interval { median: f(3)?, lo: f(4)?, hi: f(5)? };
        let pred = (f(6)?, f(7)?);
        if out.last().is_none_or(|s| s.test != rec[0]) {
            out.push(AccuracySummary { test: rec[0].to_string(), rows: Vec::new() });
        }
        let s = out.last_mut().unwrap();
        if s.rows.last().is_none_or(|r| r.threshold != k) {
            s.rows.push(ThresholdSummary { threshold: k, se: iv, sp: iv, se_pred: pred, sp_pred: pred });
        }
        let r = s.rows.last_mut().unwrap();
        match &rec[2] {
            "Se" => (r.se, r.se_pred) = (iv, pred),
            "Sp" => (r.sp, r.sp_pred) = (iv, pred),
            q => return Err(Error::Input(format!("unknown quantity '{q}'"))),
        }
    }
    Ok(out)
}
