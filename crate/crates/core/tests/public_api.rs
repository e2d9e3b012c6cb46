use ordmeta_core::data::{MADataset, StudyCounts, MISSING};
use ordmeta_core::eval::make_folds;
use ordmeta_core::kernel::{conditional_probs, cutpoints_to_probs, factorized_loglik, probs_to_cutpoints, Cutpoints, OrdinalProbs};
use ordmeta_core::mcmc::{SamplerConfig, Serial};
use ordmeta_core::model::{Family, MaModel, ModelSpec};
use ordmeta_core::posterior::{auc, fit, summary_se_sp};
use proptest::prelude::*;

fn probs(raw: &[f64]) -> OrdinalProbs {
    let s: f64 = raw.iter().sum();
    OrdinalProbs::new(raw.iter().map(|v| v / s).collect()).unwrap()
}

proptest! {
    #[test]
    fn cutpoints_invert_probabilities(raw in prop::collection::vec(0.01f64..1.0, 2..9), anchor in -2.0f64..2.0) {
        let p = probs(&raw);
        let (c, clamped) = probs_to_cutpoints(&p, anchor);
        prop_assert!(!clamped);
        prop_assert!(c.as_slice().windows(2).all(|w| w[0] < w[1]));
        let back = cutpoints_to_probs(&c, anchor);
        for (a, b) in back.as_slice().iter().zip(p.as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn folds_are_balanced(n in 2usize..60, seed in any::<u64>()) {
        let k = 2 + (seed as usize) % (n - 1);
        let f = make_folds(n, k, seed).unwrap();
        let sizes = f.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(make_folds(n, k, seed).unwrap().fold_of_study, f.fold_of_study);
    }
}

#[test]
fn a_fully_unreported_group_contributes_nothing() {
    let c = Cutpoints::new(vec![-1.0, 0.0, 0.7]).unwrap();
    let pc = conditional_probs(&c, 0.3, 1.0).unwrap();
    // categories (10, 20, 15, 5): cum = (40, 20, 5)
    let full = StudyCounts::new(50, vec![40, 20, 5], 1);
    let none = StudyCounts::new(50, vec![MISSING; 3], 1);
    assert_eq!(factorized_loglik(&none, &pc).unwrap(), 0.0);
    assert!(factorized_loglik(&full, &pc).unwrap() < 0.0);
}

#[test]
fn auc_is_one_half_on_the_diagonal_and_grows_with_separation() {
    let sp = [0.2, 0.4, 0.6, 0.8];
    let se: Vec<f64> = sp.iter().map(|s| 1.0 - s).collect();
    assert_eq!(auc(&se, &sp), 0.5);
    let better: Vec<f64> = se.iter().map(|s| (s + 0.15_f64).min(1.0)).collect();
    assert!(auc(&better, &sp) > 0.5);
}

fn small_data() -> MADataset {
    let rows = [([60, 30, 12, 3], [55, 48, 35, 14]), ([80, 35, 10, 2], [40, 36, 28, 12]), ([70, 30, 15, 4], [60, 52, 40, 20]), ([90, 44, 20, 6], [45, 41, 30, 11])];
    let studies = rows
        .iter()
        .map(|(nd, d)| {
            let n0 = nd[0] * 2;
            let n1 = d[0] + 5;
            [StudyCounts::new(n0, nd.to_vec(), 0), StudyCounts::new(n1, d.to_vec(), 1)]
        })
        .collect();
    MADataset { k: 5, studies }
}

#[test]
fn fits_are_reproducible_and_summaries_lie_in_the_unit_interval() {
    let m = MaModel::new(ModelSpec::new(Family::OBivFC), small_data()).unwrap();
    let cfg = SamplerConfig { n_chains: 2, n_warmup: 150, n_iter: 100, seed: 3, ..SamplerConfig::default() };
    let a = fit(&m, &Serial, &cfg).unwrap();
    let b = fit(&m, &Serial, &cfg).unwrap();
    assert!(a.draws.values.iter().zip(&b.draws.values).all(|(x, y)| x.to_bits() == y.to_bits()));
    let s = summary_se_sp(&m, &a.draws, 0).unwrap();
    assert_eq!(s.len(), 4);
    for (se, sp) in &s {
        for iv in [se, sp] {
            assert!(0.0 < iv.lo && iv.lo <= iv.median && iv.median <= iv.hi && iv.hi < 1.0);
        }
    }
    // Se falls and Sp rises with the threshold
    assert!(s.windows(2).all(|w| w[0].0.median > w[1].0.median && w[0].1.median < w[1].1.median));
}
