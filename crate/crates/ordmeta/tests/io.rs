use ordmeta::io::*;
use ordmeta::Error;
use ordmeta_core::data::{MADataset, NMADataset, StudyCounts};
use ordmeta_core::mcmc::{ChainOutput, PosteriorDraws};
use ordmeta_core::posterior::{AccuracySummary, Interval, ThresholdSummary};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_group(k: usize, g: u8, rng: &mut ChaCha8Rng) -> StudyCounts {
    let n = rng.random_range(1..300i64);
    let mut cats = vec![0i64; k];
    for _ in 0..n {
        cats[rng.random_range(0..k)] += 1;
    }
    StudyCounts::from_categories(&cats, g)
}

fn random_ma(k: usize, s: usize, seed: u64) -> MADataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MADataset { k, studies: (0..s).map(|_| [random_group(k, 0, &mut rng), random_group(k, 1, &mut rng)]).collect() }
}

fn random_nma(ks: &[usize], s: usize, seed: u64) -> NMADataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indicator: Vec<Vec<bool>> = (0..s).map(|_| ks.iter().map(|_| rng.random_bool(0.7)).collect()).collect();
    for (t, row) in indicator.iter_mut().enumerate() {
        row[t % ks.len()] = true;
    }
    let tests = ks
        .iter()
        .enumerate()
        .map(|(t, &k)| MADataset {
            k,
            studies: (0..s)
                .map(|i| {
                    if indicator[i][t] {
                        [random_group(k, 0, &mut rng), random_group(k, 1, &mut rng)]
                    } else {
                        [StudyCounts::absent(k - 1, 0), StudyCounts::absent(k - 1, 1)]
                    }
                })
                .collect(),
        })
        .collect();
    NMADataset { test_names: (0..ks.len()).map(|t| format!("T{}", t + 1)).collect(), tests, indicator }
}

proptest! {
    #[test]
    fn single_test_formats_round_trip(k in 2usize..12, s in 1usize..15, seed in any::<u64>()) {
        let d = random_ma(k, s, seed);
        prop_assert_eq!(&parse_ma_json(&ma_to_json(&d)).unwrap(), &d);
        prop_assert_eq!(&parse_ma_csv(&ma_to_csv(&d)).unwrap(), &d);
    }
}

#[test]
fn four_test_network_round_trips() {
    let d = random_nma(&[7, 22, 22, 64], 30, 5);
    let text = nma_to_json(&d);
    let back = parse_nma_json(&text).unwrap();
    assert_eq!(back, d);
    assert_eq!(nma_to_json(&back), text);
    assert_eq!(back.tests.iter().map(|t| t.k).collect::<Vec<_>>(), vec![7, 22, 22, 64]);
}

#[test]
fn ragged_rows_are_reported() {
    let text = r#"{"K": 4, "studies": [{"nd": {"n": 10, "cum": [5, 3, 1]}, "d": {"n": 10, "cum": [8, 2]}}]}"#;
    let err = parse_ma_json(text).unwrap_err().to_string();
    assert!(err.contains("study 1 (d)") && err.contains("row length 2 != K - 1 = 3"), "{err}");
}

#[test]
fn increasing_cumulative_counts_are_rejected() {
    let text = r#"{"K": 3, "studies": [{"nd": {"n": 10, "cum": [3, 5]}, "d": {"n": 10, "cum": [8, 2]}}]}"#;
    assert!(matches!(parse_ma_json(text), Err(Error::Input(_))));
}

#[test]
fn csv_errors_name_line_and_column() {
    let text = "study_id,group,n_total,c1,c2\n1,0,10,5,2\n1,1,10,x,2\n";
    let err = parse_ma_csv(text).unwrap_err().to_string();
    assert!(err.contains("line 3") && err.contains("column 4"), "{err}");
    let missing = "study_id,group,n_total,c1\n1,0,10,5\n";
    assert!(parse_ma_csv(missing).unwrap_err().to_string().contains("one row for each group"));
}

#[test]
fn unknown_json_fields_are_rejected() {
    let text = r#"{"K": 2, "studies": [], "extra": 1}"#;
    assert!(parse_ma_json(text).is_err());
}

#[test]
fn indicator_must_match_counts() {
    let d = random_nma(&[3, 4], 5, 2);
    let mut v: serde_json::Value = serde_json::from_str(&nma_to_json(&d)).unwrap();
    // flip one absent entry to present: its rows are all -1
    let (s, t) = (0..5).flat_map(|s| (0..2).map(move |t| (s, t))).find(|&(s, t)| !d.indicator[s][t]).expect("some absent cell");
    v["indicator"][s][t] = 1.into();
    let err = parse_nma_json(&v.to_string()).unwrap_err().to_string();
    assert!(err.contains("counts are absent"), "{err}");

    let mut v: serde_json::Value = serde_json::from_str(&nma_to_json(&d)).unwrap();
    v["indicator"][0] = serde_json::json!([1]);
    assert!(parse_nma_json(&v.to_string()).unwrap_err().to_string().contains("indicator row 1"));

    let mut v: serde_json::Value = serde_json::from_str(&nma_to_json(&d)).unwrap();
    v["indicator"][0][0] = 2.into();
    assert!(parse_nma_json(&v.to_string()).is_err());
}

#[test]
fn rows_of_absent_studies_are_ignored() {
    let d = random_nma(&[3, 4], 6, 9);
    let mut v: serde_json::Value = serde_json::from_str(&nma_to_json(&d)).unwrap();
    let (s, t) = (0..6).flat_map(|s| (0..2).map(move |t| (s, t))).find(|&(s, t)| !d.indicator[s][t]).unwrap();
    let k = d.tests[t].k;
    v["tests"][t]["nd"][s] = serde_json::json!(vec![5; k]);
    assert_eq!(parse_nma_json(&v.to_string()).unwrap(), d);
}

fn toy_draws(chains: usize, iter: usize, dim: usize, seed: u64) -> PosteriorDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outs = (0..chains)
        .map(|_| ChainOutput {
            draws: (0..iter * dim).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect(),
            dim,
            divergent: (0..iter).map(|_| rng.random_bool(0.1)).collect(),
            treedepth: vec![3; iter],
            hit_max_treedepth: vec![false; iter],
            accept_stat: vec![0.9; iter],
            energy: vec![1.0; iter],
            n_leapfrog: vec![7; iter],
            stepsize: 0.3,
            inv_metric: vec![1.0; dim],
            warmup_divergences: 0,
        })
        .collect();
    PosteriorDraws::from_chains((0..dim).map(|p| format!("p[{p}]")).collect(), outs)
}

#[test]
fn binary_draws_round_trip_exactly() {
    let d = toy_draws(3, 17, 5, 4);
    let mut buf = Vec::new();
    write_draws_binary(&d, &mut buf).unwrap();
    assert_eq!(&buf[..4], b"ORDM");
    let back = read_draws_binary(&buf[..]).unwrap();
    assert_eq!(back.names, d.names);
    assert_eq!((back.n_chains, back.n_iter), (3, 17));
    assert_eq!(back.divergent, d.divergent);
    assert!(back.values.iter().zip(&d.values).all(|(a, b)| a.to_bits() == b.to_bits()));

    assert!(read_draws_binary(&buf[..buf.len() - 1]).unwrap_err().to_string().contains("truncated"));
    let mut extra = buf.clone();
    extra.push(0);
    assert!(read_draws_binary(&extra[..]).unwrap_err().to_string().contains("trailing"));
    let mut bad = buf;
    bad[0] = b'X';
    assert!(read_draws_binary(&bad[..]).is_err());
}

#[test]
fn draws_csv_has_one_row_per_draw() {
    let d = toy_draws(2, 4, 3, 1);
    let text = draws_to_csv(&d);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 8);
    assert_eq!(lines[0], "chain,iter,divergent,p[0],p[1],p[2]");
    let first: Vec<f64> = lines[1].split(',').skip(3).map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, d.draw(0, 0));
}

#[test]
fn summary_csv_round_trips_at_printed_precision() {
    let iv = |m: f64| Interval { median: m, lo: m - 0.1, hi: m + 0.05 };
    let s = vec![
        AccuracySummary {
            test: "A".into(),
            rows: (1..=3)
                .map(|k| ThresholdSummary { threshold: k, se: iv(0.9 - 0.1 * k as f64), sp: iv(0.5 + 0.1 * k as f64), se_pred: (0.2, 0.99), sp_pred: (0.3, 0.98) })
                .collect(),
        },
        AccuracySummary { test: "B".into(), rows: vec![ThresholdSummary { threshold: 2, se: iv(0.7), sp: iv(0.6), se_pred: (0.1, 0.9), sp_pred: (0.2, 0.8) }] },
    ];
    let text = summary_csv(&s);
    let back = parse_summary_csv(&text).unwrap();
    assert_eq!(summary_csv(&back), text);
    assert_eq!(back.len(), 2);
    assert!((back[0].rows[2].sp.median - 0.8).abs() < 1e-6);
}
