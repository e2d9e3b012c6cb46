use ordmeta::config::*;
use ordmeta_core::model::{Family, PriorSet};
use ordmeta_core::nma::NmaFamily;
use std::fs;

#[test]
fn unknown_keys_are_rejected_everywhere() {
    let err = ModelConfig::parse(r#"{"schema_version": 1, "family": "obiv_fc", "famly": "x"}"#, "m.json").unwrap_err().to_string();
    assert!(err.contains("famly"), "{err}");
    assert!(ModelConfig::parse(r#"{"schema_version": 1, "family": "obiv_fc", "priors": {"mu_bta": [0, 1]}}"#, "m").is_err());
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    fs::write(&p, r#"{"schema_version": 1, "profile": "gad2", "dgm": "obiv_fc", "n_studies": 10, "models": ["obiv_fc"], "sampler": {"chain": 2}}"#).unwrap();
    assert!(ScenarioConfig::load(&p).is_err());
}

#[test]
fn schema_version_is_required_and_checked() {
    assert!(ModelConfig::parse(r#"{"family": "obiv_fc"}"#, "m").is_err());
    let err = ModelConfig::parse(r#"{"schema_version": 2, "family": "obiv_fc"}"#, "m").unwrap_err().to_string();
    assert!(err.contains("unsupported schema_version 2"));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    fs::write(&p, r#"{"mu_beta": [0, 2]}"#).unwrap();
    assert!(PriorConfig::load(&p).unwrap_err().to_string().contains("missing schema_version"));
}

#[test]
fn family_names_resolve() {
    let (c, base) = ModelConfig::load("ohsroc_rc").unwrap();
    assert!(base.is_none());
    match c.resolve(None).unwrap() {
        ModelChoice::Single(s) => assert_eq!(s.family, Family::OHsrocRC),
        _ => panic!("expected a single-test model"),
    }
    match ModelConfig::family("jones_nma").resolve(None).unwrap() {
        ModelChoice::Network(s, cov) => {
            assert_eq!(s.family, NmaFamily::Jones);
            assert!(cov.is_none());
        }
        _ => panic!("expected a network model"),
    }
    assert!(ModelConfig::family("nope").resolve(None).is_err());
    assert!(ModelConfig::family("strat_biv").resolve(None).is_err());
}

#[test]
fn single_test_families_refuse_network_options() {
    let c = ModelConfig::parse(r#"{"schema_version": 1, "family": "obiv_fc", "compound_symmetry": true}"#, "m").unwrap();
    assert!(c.resolve(None).is_err());
    let c = ModelConfig::parse(r#"{"schema_version": 1, "family": "jones", "jones_box_cox": 3.0}"#, "m").unwrap();
    assert!(c.resolve(None).is_err());
}

#[test]
fn prior_overrides_layer_in_order() {
    let file = ModelConfig::parse(r#"{"schema_version": 1, "family": "obiv_fc", "priors": {"mu_beta": [0, 2], "rho_shape": 3}}"#, "m").unwrap();
    let extra = PriorConfig { mu_beta: Some([1.0, 0.5]), ..Default::default() };
    let ModelChoice::Single(s) = file.resolve(Some(&extra)).unwrap() else { panic!() };
    let mut want = PriorSet::default();
    want.rho_shape = 3.0;
    extra.apply(&mut want);
    assert_eq!(s.priors, want);
}

#[test]
fn scenario_accepts_an_infinite_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.json");
    fs::write(&p, r#"{"schema_version": 1, "profile": "hads", "dgm": "obiv_rc", "n_studies": 20, "models": ["obiv_fc", "strat_biv"], "mcse_threshold_pct": "inf", "max_reps": 7}"#).unwrap();
    let c = ScenarioConfig::load(&p).unwrap();
    let (scn, models, cfg) = c.resolve().unwrap();
    assert_eq!(cfg.mcse_threshold_pct, f64::INFINITY);
    assert_eq!(cfg.max_reps, 7);
    assert_eq!(scn.dgm, Family::OBivRC);
    assert_eq!(models.len(), 2);
    assert_eq!(cfg.sampler.n_chains, 4);

    fs::write(&p, r#"{"schema_version": 1, "profile": "hads", "dgm": "obiv_rc", "n_studies": 20, "models": ["obiv_fc"], "mcse_threshold_pct": 0}"#).unwrap();
    assert!(ScenarioConfig::load(&p).unwrap().resolve().is_err());
    fs::write(&p, r#"{"schema_version": 1, "profile": "xyz", "dgm": "obiv_rc", "n_studies": 20, "models": ["obiv_fc"]}"#).unwrap();
    assert!(ScenarioConfig::load(&p).unwrap().resolve().is_err());
}
