use super::*;
use crate::mcmc::Serial;
use crate::model::{Family, ModelSpec};
use crate::sim::{generate_dataset, SimScenario, TestProfile};
use alloc::string::ToString;
use proptest::prelude::*;

#[test]
fn folds_are_balanced_and_seeded() {
    let f = make_folds(10, 5, 3).unwrap();
    assert_eq!(f.sizes(), vec![2; 5]);
    assert_eq!(f, make_folds(10, 5, 3).unwrap());
    assert_ne!(f, make_folds(10, 5, 4).unwrap());

    let mut sizes = make_folds(7, 5, 1).unwrap().sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(sizes, vec![2, 2, 1, 1, 1]);

    assert!(make_folds(4, 5, 0).is_err());
    assert!(make_folds(4, 1, 0).is_err());
}

proptest! {
    #[test]
    fn fold_sizes_partition_n(n in 2usize..200, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let f = make_folds(n, k, seed).unwrap();
        let sizes = f.sizes();
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        // balanced partition: every size is floor(n/k) or ceil(n/k)
        prop_assert!(sizes.iter().all(|&s| s == n / k || s == n.div_ceil(k)));
        for fold in 1..=k {
            let mut all = f.members(fold);
            all.extend(f.complement(fold));
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn classification_is_scale_invariant(
        rm in proptest::collection::vec(1.0f64..20.0, 2..6),
        mc in proptest::collection::vec(0.01f64..1.0, 6),
        c in 0.01f64..100.0,
    ) {
        let a: Vec<ModelPerf> = rm.iter().zip(&mc).map(|(&r, &m)| ModelPerf { rmse: r, mcse: m }).collect();
        let b: Vec<ModelPerf> = a.iter().map(|m| ModelPerf { rmse: m.rmse * c, mcse: m.mcse * c }).collect();
        let ga = classify_groups(&a, ClassifyRule::default()).unwrap();
        let gb = classify_groups(&b, ClassifyRule::default()).unwrap();
        // exact ties at the significance boundaries can flip under rounding
        let stable = a.iter().all(|m| {
            let l = a.iter().map(|x| x.rmse).fold(f64::INFINITY, f64::min);
            ((m.rmse - l) / l - 0.1).abs() > 1e-9
        });
        if stable {
            prop_assert_eq!(&ga, &gb);
        }
        let lead = (0..a.len()).min_by(|&i, &j| a[i].rmse.total_cmp(&a[j].rmse)).unwrap();
        prop_assert_eq!(ga[lead], PerfGroup::Best);
    }
}

#[test]
fn worked_classification_labels() {
    // Jones leads at 9.75; one MCSE is 0.125 at the stopping rule
    let perf = |r: f64| ModelPerf { rmse: r, mcse: 0.125 };
    let g = classify_groups(&[perf(9.75), perf(10.25), perf(11.76), perf(9.75)], ClassifyRule::default()).unwrap();
    assert_eq!(g, vec![PerfGroup::Best, PerfGroup::StatOnly, PerfGroup::Worse, PerfGroup::Best]);
    // the quoted percentages come from unrounded RMSEs
    assert!(((10.25 - 9.75) / 9.75 - 0.052f64).abs() < 1e-3);
    assert!(((11.76 - 9.75) / 9.75 - 0.206f64).abs() < 1e-3);

    let noisy = classify_groups(&[perf(10.0), ModelPerf { rmse: 11.5, mcse: 2.0 }], ClassifyRule::default()).unwrap();
    assert_eq!(noisy[1], PerfGroup::PracticalOnly);
    assert!(classify_groups(&[perf(1.0)], ClassifyRule::default()).is_err());
}

fn result(name: &str, pw: &[Option<f64>]) -> ElpdResult {
    ElpdResult { model: name.to_string(), pointwise: pw.to_vec(), folds: Vec::new() }
}

#[test]
fn comparison_against_itself_is_zero() {
    let a = result("A", &[Some(-3.0), Some(-4.5), Some(-2.0)]);
    let c = compare_elpd(&[a.clone(), a]).unwrap();
    for r in &c.rows {
        assert_eq!((r.delta, r.se_delta), (0.0, 0.0));
    }
    assert!(!c.restricted);
}

#[test]
fn comparison_restricts_to_shared_studies() {
    let a = result("A", &[Some(-3.0), None, Some(-2.0), Some(-1.0)]);
    let b = result("B", &[Some(-3.5), Some(-1.0), None, Some(-1.5)]);
    let c = compare_elpd(&[a, b]).unwrap();
    assert_eq!(c.shared_studies, vec![0, 3]);
    assert!(c.restricted);
    assert_eq!(c.rows[0].model, "A");
    assert_eq!(c.rows[0].elpd, -4.0);
    assert_eq!(c.rows[1].delta, -1.0);
    // both differences equal -0.5, so the spread is zero
    assert_eq!(c.rows[1].se_delta, 0.0);
    assert!(compare_elpd(&[result("A", &[Some(1.0), None]), result("B", &[None, Some(1.0)])]).is_err());
}

#[test]
fn four_model_ranking_and_standard_errors() {
    let pw = [
        [-1.0, -2.0, -3.0, -1.5],
        [-1.2, -1.9, -3.3, -1.0],
        [-0.9, -2.5, -2.0, -2.2],
        [-3.0, -3.0, -3.0, -3.0],
    ];
    let res: Vec<ElpdResult> =
        pw.iter().enumerate().map(|(i, v)| result(&format!("M{i}"), &v.iter().map(|&x| Some(x)).collect::<Vec<_>>())).collect();
    let c = compare_elpd(&res).unwrap();
    let mut manual: Vec<(f64, usize)> = pw.iter().enumerate().map(|(i, v)| (v.iter().sum::<f64>(), i)).collect();
    manual.sort_by(|a, b| b.0.total_cmp(&a.0));
    let names: Vec<String> = manual.iter().map(|(_, i)| format!("M{i}")).collect();
    assert_eq!(c.rows.iter().map(|r| r.model.clone()).collect::<Vec<_>>(), names);

    // M0 against the leader M1, by hand
    let d = [0.2, -0.1, 0.3, -0.5];
    let mean = -0.025;
    let var: f64 = d.iter().map(|x: &f64| (x - mean) * (x - mean)).sum::<f64>() / 3.0;
    let row = c.rows.iter().find(|r| r.model == "M0").unwrap();
    assert!((row.se_delta - libm::sqrt(4.0 * var)).abs() < 1e-12);
    assert!((row.delta + 0.1).abs() < 1e-12);

    let table = format_comparison(&c);
    assert!(table.lines().nth(1).unwrap().contains("[Best]"));
    assert_eq!(table.lines().count(), 5);
}

#[test]
fn totals_are_additive_and_order_free() {
    let a = result("A", &[Some(-3.0), None, Some(-2.0), Some(-1.25)]);
    assert_eq!(a.elpd_total(), -6.25);
    assert_eq!(a.retained(), vec![0, 2, 3]);
    let mut rev = a.clone();
    rev.pointwise.reverse();
    assert_eq!(a.elpd_total(), rev.elpd_total());
    assert!((a.se_total() - rev.se_total()).abs() < 1e-15);
}

fn small_data(n: usize, seed: u64) -> MaModel {
    let mut p = TestProfile::gad2();
    p.miss_rate = 0.2;
    let scn = SimScenario::new(p, Family::OBivFC, n, seed);
    let d = generate_dataset(&scn, scn.rep_seed(0)).unwrap();
    MaModel::new(ModelSpec::new(Family::OBivFC), d.data).unwrap()
}

fn quick() -> KfoldConfig {
    let sampler = SamplerConfig { n_chains: 2, n_warmup: 60, n_iter: 40, seed: 9, ..Default::default() };
    KfoldConfig { sampler, m_inner: 5, min_ess: 0.0 }
}

#[test]
fn kfold_scores_every_study_once() {
    let m = small_data(8, 2);
    let folds = make_folds(8, 4, 1).unwrap();
    let r = run_kfold("obiv_fc", &m, &folds, &quick(), &Serial).unwrap();
    assert_eq!(r.retained().len(), 8);
    assert!(r.pointwise.iter().flatten().all(|v| v.is_finite() && *v < 0.0));
    assert!((r.elpd_total() - r.pointwise.iter().flatten().sum::<f64>()).abs() < 1e-12);
    assert_eq!(r, run_kfold("obiv_fc", &m, &folds, &quick(), &Serial).unwrap());

    let strict = KfoldConfig { min_ess: 1e9, ..quick() };
    let r = run_kfold("obiv_fc", &m, &folds, &strict, &Serial).unwrap();
    assert!(r.retained().is_empty());
    assert_eq!(r.discarded_folds(), vec![1, 2, 3, 4]);
}

#[test]
fn discarding_a_fold_drops_its_studies() {
    let m = small_data(8, 5);
    let folds = make_folds(8, 4, 7).unwrap();
    let full = run_kfold("a", &m, &folds, &quick(), &Serial).unwrap();
    let mut cut = full.clone();
    for &s in &folds.members(2) {
        cut.pointwise[s] = None;
    }
    assert_eq!(cut.retained().len(), full.retained().len() - folds.sizes()[1]);
}

#[test]
fn duplicated_study_contributes_twice() {
    // scoring the same study twice under the same draws and stream gives
    // identical values, so its share of the total doubles
    let m = small_data(6, 3);
    let train = m.train_on(&[1, 2, 3, 4, 5]).unwrap();
    let fit = posterior::fit(&train, &Serial, &quick().sampler).unwrap();
    let one = score_heldout(&m, &train, &fit.draws, &[0], 5, 1);
    let two = score_heldout(&m, &train, &fit.draws, &[0, 0], 5, 1);
    assert_eq!(two, vec![one[0], one[0]]);
}

#[test]
fn mismatched_folds_are_rejected() {
    let m = small_data(6, 1);
    assert!(run_kfold("a", &m, &make_folds(5, 2, 0).unwrap(), &quick(), &Serial).is_err());
}
