use ordmeta::plot::*;
use ordmeta_core::nma::PairwiseRow;
use ordmeta_core::posterior::{AccuracySummary, Interval, ThresholdSummary};
use proptest::prelude::*;

fn summary(name: &str, n: usize) -> AccuracySummary {
    let rows = (1..=n)
        .map(|k| {
            let t = k as f64 / (n + 1) as f64;
            let iv = |m: f64| Interval { median: m, lo: (m - 0.08).max(0.0), hi: (m + 0.06).min(1.0) };
            ThresholdSummary {
                threshold: k,
                se: iv(0.95 - 0.6 * t),
                sp: iv(0.35 + 0.6 * t),
                se_pred: ((0.8 - 0.6 * t).max(0.0), (1.0 - 0.4 * t).min(1.0)),
                sp_pred: ((0.2 + 0.5 * t).max(0.0), (0.6 + 0.39 * t).min(1.0)),
            }
        })
        .collect();
    AccuracySummary { test: name.into(), rows }
}

#[test]
fn svg_output_is_deterministic() {
    let s = vec![summary("A", 5), summary("B & C", 9)];
    for layout in [SrocLayout::Single, SrocLayout::Grid] {
        let a = render_sroc(&s, layout).unwrap();
        assert_eq!(a, render_sroc(&s, layout).unwrap());
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert!(a.contains("B &amp; C"));
    }
    assert_eq!(render_thresholds(&s[0]).unwrap(), render_thresholds(&s[0]).unwrap());
}

#[test]
fn empty_input_is_an_error() {
    let e = AccuracySummary { test: "A".into(), rows: vec![] };
    assert!(render_sroc(&[e.clone()], SrocLayout::Single).unwrap_err().to_string().contains("no thresholds"));
    assert!(render_sroc(&[], SrocLayout::Grid).is_err());
    assert!(render_thresholds(&e).is_err());
    assert!(render_forest(&[]).is_err());
}

#[test]
fn forest_has_one_marker_per_row_and_panel() {
    let iv = |m: f64| Interval { median: m, lo: m - 0.05, hi: m + 0.05 };
    let rows: Vec<PairwiseRow> =
        (1..=4).map(|k| PairwiseRow { test_a: "A".into(), test_b: "B".into(), k_a: k, k_b: k, d_se: iv(0.01 * k as f64), d_sp: iv(-0.02) }).collect();
    let svg = render_forest(&rows).unwrap();
    assert_eq!(svg.matches("<circle").count(), 8);
}

#[test]
fn regions_cover_their_medians() {
    let s = summary("A", 7);
    let cred = credible_region(&s);
    let pred = prediction_region(&s);
    for p in median_points(&s) {
        assert!(contains(&cred, p));
    }
    for v in &cred {
        assert!(contains(&pred, *v), "{v:?}");
    }
}

proptest! {
    #[test]
    fn hull_contains_every_input_point(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 3..40)) {
        let h = convex_hull(pts.clone());
        prop_assume!(h.len() >= 3);
        for p in pts {
            prop_assert!(contains(&h, p));
        }
        prop_assert!(!contains(&h, (1.5, 1.5)));
    }
}
