use super::*;
use crate::ad::finite_diff_gradient;
use crate::kernel::{conditional_probs, factorized_loglik, Cutpoints};

fn random_data(k: usize, s: usize, seed: u64, miss: f64) -> MADataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let studies = (0..s)
        .map(|_| {
            core::array::from_fn(|d| {
                let n: Vec<i64> = (0..k).map(|_| rng.random_range(0..15)).collect();
                let mut g = StudyCounts::from_categories(&n, d as u8);
                let mut any = false;
                for c in g.cum.iter_mut() {
                    if rng.random::<f64>() < miss {
                        *c = MISSING;
                    } else {
                        any = true;
                    }
                }
                if !any {
                    g.cum[0] = n[1..].iter().sum();
                }
                g
            })
        })
        .collect();
    MADataset { k, studies }
}

fn spec_for(f: Family, k: usize) -> ModelSpec {
    if f == Family::StratBiv {
        ModelSpec::strat(k / 2)
    } else {
        ModelSpec::new(f)
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for f in Family::ALL {
        for k in [3, 7] {
            let m = MaModel::new(spec_for(f, k), random_data(k, 5, 17 + k as u64, 0.3)).unwrap();
            for rep in 0..20 {
                let u = m.initialize(1000 + rep, 1.0).unwrap();
                let mut g = vec![0.0; u.len()];
                let lp = m.logp_grad(&u, &mut g);
                assert!(lp.is_finite());
                assert!((lp - m.logp(&u)).abs() < 1e-9 * lp.abs().max(1.0));
                let fd = finite_diff_gradient(&u, 1e-5, |x| m.logp(x));
                for i in 0..u.len() {
                    let rel = (g[i] - fd[i]).abs() / fd[i].abs().max(1.0);
                    assert!(rel < 1e-5, "{} K={k} coord {i}: {} vs {}", f.name(), g[i], fd[i]);
                }
            }
        }
    }
}

#[test]
fn log_density_decomposes() {
    let m = MaModel::new(ModelSpec::new(Family::OBivRC), random_data(4, 4, 3, 0.2)).unwrap();
    let u = m.initialize(5, 0.5).unwrap();
    let mut raw = Vec::new();
    let lj = m.layout().constrain(&u, &mut raw);
    let th = m.constrain(&u);
    let want = lj + m.log_prior(&th) + m.log_likelihood(&th);
    assert!((m.log_density(&u) - want).abs() < 1e-10);
}

#[test]
fn bivariate_likelihood_matches_kernel() {
    let data = random_data(5, 4, 8, 0.4);
    let m = MaModel::new(ModelSpec::new(Family::OBivFC), data.clone()).unwrap();
    let th = m.constrain(&m.initialize(2, 0.7).unwrap());
    let names = m.param_names();
    let at = |n: &str| th[names.iter().position(|x| x == n).unwrap()];
    let mut want = 0.0;
    for (s, pair) in data.studies.iter().enumerate() {
        for d in 0..2 {
            let c: Vec<f64> = (1..=4).map(|j| at(&alloc::format!("C{d}[{j}]"))).collect();
            let b = at(&alloc::format!("beta{d}[{}]", s + 1));
            let pc = conditional_probs(&Cutpoints::new(c).unwrap(), b, 1.0).unwrap();
            want += factorized_loglik(&pair[d], &pc).unwrap();
        }
    }
    assert!((m.log_likelihood(&th) - want).abs() < 1e-9);
}

#[test]
fn hsroc_summary_accuracy() {
    let m = MaModel::new(ModelSpec::new(Family::OHsrocFC), random_data(3, 3, 1, 0.0)).unwrap();
    let names = m.param_names();
    let mut th = m.base_init().unwrap();
    let set = |th: &mut Vec<f64>, n: &str, v: f64| th[names.iter().position(|x| x == n).unwrap()] = v;
    set(&mut th, "mu_beta", 0.8);
    set(&mut th, "mu_gamma", 0.3);
    set(&mut th, "C[1]", -0.5);
    set(&mut th, "C[2]", 0.4);
    let a = m.summary_accuracy(&th, 0);
    for (j, c) in [-0.5f64, 0.4].iter().enumerate() {
        let se = normal_cdf((0.8 - c) / libm::exp(0.3));
        let sp = normal_cdf((c + 0.8) / libm::exp(-0.3));
        assert!((a.se[j] - se).abs() < 1e-14);
        assert!((a.sp[j] - sp).abs() < 1e-14);
    }
}

#[test]
fn stratified_model_keeps_reporting_studies() {
    let mut data = random_data(4, 5, 2, 0.0);
    data.studies[1][0].cum[1] = MISSING;
    data.studies[1][1].cum[1] = MISSING;
    data.studies[3][0].cum[1] = MISSING;
    let m = MaModel::new(ModelSpec::strat(2), data.clone()).unwrap();
    assert_eq!(m.stratum_size(), 4);
    assert_eq!(m.thresholds(0), vec![2]);
    data.studies.iter_mut().for_each(|p| p.iter_mut().for_each(|g| g.cum[1] = MISSING));
    assert!(MaModel::new(ModelSpec::strat(2), data).is_err());
}

#[test]
fn jones_log_threshold_positions() {
    assert!((JonesTransform::Log.g(1)).abs() < 1e-15);
    assert!((JonesTransform::Log.g(3) - libm::log(3.0)).abs() < 1e-15);
    assert!((JonesTransform::BoxCox(0.5).g(4) - 2.0).abs() < 1e-15);
    assert!(JonesTransform::BoxCox(0.3).validate().is_err());
}

#[test]
fn heldout_lpd_without_heterogeneity_is_the_full_likelihood() {
    let data = random_data(4, 3, 12, 0.3);
    let m = MaModel::new(ModelSpec::new(Family::OBivFC), data.clone()).unwrap();
    let names = m.param_names();
    let mut th = m.base_init().unwrap();
    for n in ["sigma_beta0", "sigma_beta1"] {
        th[names.iter().position(|x| x == n).unwrap()] = 1e-12;
    }
    let mu = [th[names.iter().position(|x| x == "mu_beta0").unwrap()], th[names.iter().position(|x| x == "mu_beta1").unwrap()]];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let study = &data.studies[0];
    let got = m.heldout_lpd(&th, study, 10, &mut rng);
    let mut want = 0.0;
    for d in 0..2 {
        let c = Cutpoints::new(m.summary_cutpoints(&th, d)).unwrap();
        let pc = conditional_probs(&c, mu[d], 1.0).unwrap();
        want += factorized_loglik(&study[d], &pc).unwrap() + kernel::log_binomial_coefficients(&study[d]);
    }
    assert!((got - want).abs() < 1e-8, "{got} vs {want}");
}

#[test]
fn random_cutpoint_summary_is_study_median() {
    let m = MaModel::new(ModelSpec::new(Family::OBivRC), random_data(3, 3, 4, 0.0)).unwrap();
    let names = m.param_names();
    let mut th = m.base_init().unwrap();
    for (s, v) in [(1, -1.0), (2, 0.5), (3, 0.1)] {
        th[names.iter().position(|x| x == &alloc::format!("C1[{s},1]")).unwrap()] = v;
    }
    assert!((m.summary_cutpoints(&th, 1)[0] - 0.1).abs() < 1e-15);
}

#[test]
fn predictive_is_wider_than_summary() {
    let m = MaModel::new(ModelSpec::new(Family::OBivFC), random_data(3, 4, 6, 0.0)).unwrap();
    let th = m.base_init().unwrap();
    let s = m.summary_accuracy(&th, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..4000).map(|_| m.predictive_accuracy(&th, 0, &mut rng).se[0]).collect();
    let mut sorted = draws.clone();
    let med = median(&mut sorted);
    assert!((med - s.se[0]).abs() < 0.02);
    assert!(sorted[100] < s.se[0] - 0.01 && sorted[3900] > s.se[0] + 0.01);
}

#[test]
fn bad_specs_are_rejected() {
    let data = random_data(3, 3, 1, 0.0);
    let mut spec = ModelSpec::new(Family::OBivFC);
    spec.priors.dirichlet_alpha = Some(vec![1.0; 2]);
    assert!(MaModel::new(spec, data.clone()).is_err());
    assert!(MaModel::new(ModelSpec::strat(5), data.clone()).is_err());
    let mut bad = data;
    bad.studies[0][0].cum = vec![3, 5];
    assert!(MaModel::new(ModelSpec::new(Family::OBivFC), bad).is_err());
}

#[test]
fn joint_location_shift_leaves_likelihood_unchanged() {
    let m = MaModel::new(ModelSpec::new(Family::OBivRC), random_data(4, 4, 9, 0.2)).unwrap();
    let th = m.constrain(&m.initialize(3, 0.5).unwrap());
    let names = m.param_names();
    let mut moved = th.clone();
    for (i, n) in names.iter().enumerate() {
        if n.starts_with("beta0") || n.starts_with("C0") || n == "mu_beta0" {
            moved[i] += 0.7;
        }
    }
    assert!((m.log_likelihood(&th) - m.log_likelihood(&moved)).abs() < 1e-9);
    let back = m.layout().unconstrain(&moved).unwrap();
    assert_eq!(m.layout().unconstrain(&th).unwrap().len(), back.len());
}
