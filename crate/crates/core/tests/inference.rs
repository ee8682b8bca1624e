use epismc::epi::{simulate_deterministic, Compartment, ModelKind, Preset, Scenario};
use epismc::mcmc::{free_parameters, parameter_values, run_chain, ChainConfig, ProposalSpec};
use epismc::smc::{
    run_filter, ChainBinomialModel, FilterConfig, MeasurementSeries, ParticleEnsemble, ResampleMode,
    ScoreVariant,
};

fn measurements(sc: &Scenario, c: Compartment) -> MeasurementSeries {
    let (det, _) = simulate_deterministic(&sc.params, &sc.initial.to_real(), sc.steps).unwrap();
    MeasurementSeries::of_compartment(det[1..].iter().map(|s| s.get(c)).collect(), 100.0, c).unwrap()
}

#[test]
fn every_resampling_scheme_prefers_the_truth() {
    let sc = Preset::SirTable1.scenario();
    let ys = measurements(&sc, Compartment::I);
    let truth = ChainBinomialModel::new(sc.params.clone(), sc.initial, &ys).unwrap();
    let mut off = sc.params.clone();
    off.beta *= 2.0;
    off.alpha *= 2.0;
    let off = ChainBinomialModel::new(off, sc.initial, &ys).unwrap();
    for mode in ResampleMode::ALL {
        for score in [ScoreVariant::StepAverage, ScoreVariant::LogMarginal] {
            let mut wins = 0;
            for seed in 0..5 {
                let cfg = FilterConfig { n_particles: 100, seed, mode, score, ..FilterConfig::default() };
                let a = run_filter(&truth, ys.values(), &cfg).unwrap().score;
                let b = run_filter(&off, ys.values(), &cfg).unwrap().score;
                wins += usize::from(a > b);
            }
            assert!(wins >= 4, "{mode} {score}: {wins}/5");
        }
    }
}

#[test]
fn ledger_matches_stepwise_filtering() {
    let sc = Preset::SeirTable1.scenario();
    let ys = measurements(&sc, Compartment::I);
    let model = ChainBinomialModel::new(sc.params.clone(), sc.initial, &ys).unwrap();
    let cfg = FilterConfig { n_particles: 64, seed: 9, ..FilterConfig::default() };
    let run = run_filter(&model, ys.values(), &cfg).unwrap();

    let mut ens = ParticleEnsemble::new(&model, 64, 9).unwrap();
    for &y in ys.values() {
        ens.filter_step(&model, y, cfg.ess_threshold, cfg.mode).unwrap();
    }
    assert_eq!(ens.ledger(), run.ledger.as_slice());
    let total: f64 = run.ledger.iter().map(|r| r.log_weighted_likelihood).sum();
    assert!((total - run.log_marginal).abs() < 1e-9 * total.abs());
    let avg = run.ledger.iter().map(|r| r.log_mean_likelihood).sum::<f64>() / run.ledger.len() as f64;
    assert!((avg - run.step_average).abs() < 1e-12 * avg.abs());
}

#[test]
fn filtered_mean_follows_measurements() {
    let sc = Preset::SirTable1.scenario();
    let ys = measurements(&sc, Compartment::I);
    let model = ChainBinomialModel::new(sc.params.clone(), sc.initial, &ys).unwrap();
    let run = run_filter(&model, ys.values(), &FilterConfig { n_particles: 200, ..Default::default() }).unwrap();
    for (rec, y) in run.ledger.iter().zip(ys.values()) {
        assert!((rec.filtered_mean - y).abs() < 150.0, "t={}: {} vs {y}", rec.t, rec.filtered_mean);
    }
}

#[test]
fn short_chain_moves_towards_the_truth() {
    let sc = Preset::SirTable1.scenario();
    let ys = measurements(&sc, Compartment::I);
    let params = free_parameters(ModelKind::Sir);
    let truth = parameter_values(&sc.params, params);
    let theta0: Vec<f64> = truth.iter().map(|v| 2.0 * v).collect();
    let cfg = ChainConfig {
        n_particles: 50,
        iterations: 1500,
        spec: ProposalSpec::for_parameters(params, &theta0, 0.1).unwrap(),
        theta0,
        seed: 11,
        score: ScoreVariant::LogMarginal,
        ess_threshold: 0.5,
        mode: ResampleMode::Systematic,
        pin_filter_seed: false,
        hastings: true,
    };
    let chain = run_chain(&sc.params, &sc.initial, &ys, params, &cfg).unwrap();
    assert_eq!(chain.samples.len(), 1501);
    assert!(chain.scores.iter().all(|s| s.is_finite()));
    let tail = &chain.samples[750..];
    for (j, want) in truth.iter().enumerate() {
        let mean = tail.iter().map(|s| s[j]).sum::<f64>() / tail.len() as f64;
        assert!((mean - want).abs() / want < 0.3, "{}: {mean} vs {want}", params[j]);
    }
}
