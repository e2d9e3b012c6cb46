//! Simulation result rows and the plain-text results table.

use ordmeta_core::eval::{classify_groups, ClassifyRule, ModelPerf, PerfGroup};
use ordmeta_core::sim::{MetricAccumulator, QuantityMetrics};
use serde::Serialize;

/// One `(model, metric, quantity)` cell, in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub dgm: String,
    pub model: String,
    pub n_studies: usize,
    pub metric: String,
    pub quantity: String,
    pub value: f64,
    pub mcse: f64,
    pub n_sim: usize,
}

pub fn sim_rows(dgm: &str, n_studies: usize, accs: &[MetricAccumulator]) -> Vec<SimRow> {
    let mut out = Vec::new();
    for a in accs {
        for (q, m) in [("Se", a.se_metrics()), ("Sp", a.sp_metrics())] {
            let Some(m) = m else { continue };
            for (name, v) in [("rmse", m.rmse), ("bias", m.bias), ("abs_bias", m.abs_bias), ("coverage", m.coverage), ("width", m.width)] {
                out.push(SimRow {
                    dgm: dgm.to_string(),
                    model: a.model.clone(),
                    n_studies,
                    metric: name.to_string(),
                    quantity: q.to_string(),
                    value: 100.0 * v.value,
                    mcse: 100.0 * v.mcse,
                    n_sim: a.n_ok,
                });
            }
        }
    }
    out
}

/// Classification on the summed Se and Sp RMSE, with the mean of their MCSEs
/// as the uncertainty of the sum.
pub fn groups(accs: &[MetricAccumulator], rule: ClassifyRule) -> Option<Vec<PerfGroup>> {
    let perf: Option<Vec<ModelPerf>> = accs
        .iter()
        .map(|a| {
            let (se, sp) = (a.se_metrics()?, a.sp_metrics()?);
            Some(ModelPerf { rmse: 100.0 * (se.rmse.value + sp.rmse.value), mcse: 50.0 * (se.rmse.mcse + sp.rmse.mcse) })
        })
        .collect();
    classify_groups(&perf?, rule).ok()
}

fn cells(m: Option<QuantityMetrics>) -> [String; 4] {
    match m {
        Some(m) => [
            format!("{:.2} ({:.2})", 100.0 * m.rmse.value, 100.0 * m.rmse.mcse),
            format!("{:.2} ({:.2})", 100.0 * m.abs_bias.value, 100.0 * m.abs_bias.mcse),
            format!("{:.1}", 100.0 * m.coverage.value),
            format!("{:.1}", 100.0 * m.width.value),
        ],
        None => std::array::from_fn(|_| "-".to_string()),
    }
}

/// Columns DGM, Model, n, then RMSE, |Bias|, coverage and width for Se and
/// Sp (MCSE in parentheses). Models in the best group carry a `*`.
pub fn format_table(dgm: &str, n_studies: usize, accs: &[MetricAccumulator]) -> String {
    let g = groups(accs, ClassifyRule::default());
    let head = ["DGM", "Model", "n", "RMSE Se", "RMSE Sp", "|Bias| Se", "|Bias| Sp", "Cvg Se", "Cvg Sp", "Width Se", "Width Sp", "Group"];
    let mut rows: Vec<Vec<String>> = vec![head.iter().map(|s| s.to_string()).collect()];
    for (i, a) in accs.iter().enumerate() {
        let [r0, b0, c0, w0] = cells(a.se_metrics());
        let [r1, b1, c1, w1] = cells(a.sp_metrics());
        let grp = g.as_ref().map_or("-", |g| g[i].name());
        let star = if g.as_ref().is_some_and(|g| g[i] == PerfGroup::Best) { "*" } else { "" };
        rows.push(vec![dgm.to_string(), format!("{}{star}", a.model), n_studies.to_string(), r0, r1, b0, b1, c0, c1, w0, w1, grp.to_string()]);
    }
    let widths: Vec<usize> = (0..head.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap()).collect();
    let mut out = String::new();
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}
