use ordmeta::report::{format_table, groups, sim_rows};
use ordmeta_core::eval::{ClassifyRule, PerfGroup};
use ordmeta_core::posterior::Interval;
use ordmeta_core::sim::{MetricAccumulator, ModelRep, RepRow};

/// Accumulator whose every replication misses the truth by `err` at both
/// thresholds, alternating in sign.
fn acc(name: &str, err: f64, reps: usize) -> MetricAccumulator {
    let mut a = MetricAccumulator::new(name, 2);
    for r in 0..reps {
        let e = if r % 2 == 0 { err } else { -err };
        let iv = |m: f64| Interval { median: m + e, lo: m + e - 0.05, hi: m + e + 0.05 };
        let rows = (1..=2).map(|k| RepRow { threshold: k, se: iv(0.8), sp: iv(0.7), truth_se: 0.8, truth_sp: 0.7 }).collect();
        a.record(&ModelRep::Ok(rows));
    }
    a
}

#[test]
fn rows_are_in_percentage_points() {
    let rows = sim_rows("obiv_fc", 10, &[acc("m", 0.02, 10)]);
    assert_eq!(rows.len(), 2 * 5);
    let rmse = rows.iter().find(|r| r.metric == "rmse" && r.quantity == "Se").unwrap();
    assert!((rmse.value - 2.0).abs() < 1e-9);
    let bias = rows.iter().find(|r| r.metric == "bias" && r.quantity == "Sp").unwrap();
    assert!(bias.value.abs() < 1e-9);
    let cov = rows.iter().find(|r| r.metric == "coverage").unwrap();
    assert!((cov.value - 100.0).abs() < 1e-9);
    assert!(rows.iter().all(|r| r.n_sim == 10));
}

#[test]
fn table_marks_the_best_group() {
    let accs = [acc("good", 0.02, 40), acc("bad", 0.05, 40)];
    let g = groups(&accs, ClassifyRule::default()).unwrap();
    assert_eq!(g, vec![PerfGroup::Best, PerfGroup::Worse]);
    let t = format_table("obiv_fc", 10, &accs);
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("DGM") && lines[0].contains("|Bias| Se"));
    assert!(lines[1].contains("good*") && lines[1].ends_with("best"));
    assert!(!lines[2].contains('*') && lines[2].ends_with("worse"));
}

#[test]
fn failed_fits_leave_the_table_printable() {
    let mut a = MetricAccumulator::new("m", 2);
    a.record(&ModelRep::Failed("x".into()));
    let t = format_table("obiv_fc", 10, &[a]);
    assert!(t.lines().nth(1).unwrap().contains(" - "));
}
