use ordmeta::exec::{thread_count, Threaded};
use ordmeta_core::mcmc::{SamplerConfig, Serial};
use ordmeta_core::model::{Family, MaModel, ModelSpec};
use ordmeta_core::posterior::fit;
use ordmeta_core::sim::{generate_dataset, SimScenario, TestProfile};

#[test]
fn draws_do_not_depend_on_thread_count() {
    let scn = SimScenario::new(TestProfile::gad2(), Family::OBivFC, 8, 3);
    let data = generate_dataset(&scn, 11).unwrap().data;
    let m = MaModel::new(ModelSpec::new(Family::OBivFC), data).unwrap();
    let cfg = SamplerConfig { n_chains: 3, n_warmup: 100, n_iter: 50, seed: 9, ..SamplerConfig::default() };
    let a = fit(&m, &Serial, &cfg).unwrap().draws;
    for t in [1, 3] {
        let b = fit(&m, &Threaded::new(t), &cfg).unwrap().draws;
        assert_eq!(a.values, b.values);
        assert_eq!(a.divergent, b.divergent);
    }
}

#[test]
fn explicit_thread_flag_wins() {
    assert_eq!(thread_count(Some(3)), 3);
    assert!(thread_count(None) >= 1);
    assert_eq!(Threaded::new(0).threads(), 1);
}
