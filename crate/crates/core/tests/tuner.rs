use forage_core::engine::TrialConfig;
use forage_core::layout::Distribution;
use forage_core::params::CpfaParams;
use forage_core::policy::PolicyKind;
use forage_core::rng::RngStreams;
use forage_core::tuner::{evaluate, ga_cost, ga_run, sample_genome, GaConfig};

fn desk(seed: u64) -> GaConfig {
    GaConfig {
        population: 6,
        generations: 5,
        trials_per_genome: 2,
        eval_duration_secs: 120.0,
        training: TrialConfig::new(4, 6.0, Distribution::Powerlaw, 64, PolicyKind::Cascade, 0),
        master_seed: seed,
        ..GaConfig::default()
    }
}

#[test]
fn cost_model_is_a_product() {
    assert_eq!(ga_cost(12.0, 10, 10, 30), 36_000.0);
    assert_eq!(ga_cost(12.0, 10, 10, 30) / 60.0, 600.0);
    assert_eq!(ga_cost(1.0, 0, 10, 30), 0.0);
}

#[test]
fn single_generation_single_genome_returns_the_sample() {
    let cfg = GaConfig {
        population: 1,
        generations: 1,
        ..desk(11)
    };
    let r = ga_run(&cfg).unwrap();
    let mut rng = RngStreams::new(11).stream("ga/operators");
    assert_eq!(r.best, sample_genome(&cfg, &mut rng));
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.initial_fitness, vec![r.best_fitness]);
}

#[test]
fn ga_is_deterministic() {
    let cfg = GaConfig {
        generations: 3,
        ..desk(5)
    };
    let a = ga_run(&cfg).unwrap();
    let b = ga_run(&GaConfig { parallel: false, ..cfg }).unwrap();
    assert_eq!(a, b);
}

#[test]
fn degenerate_genomes_evaluate_finite() {
    let cfg = desk(2);
    let f = evaluate(&CpfaParams::zeros(), &cfg);
    assert!(f.is_finite() && f >= 0.0);
    let zero = GaConfig {
        trials_per_genome: 1,
        eval_duration_secs: 0.0,
        ..cfg
    };
    assert_eq!(evaluate(&CpfaParams::default(), &zero), 0.0);
}

#[test]
fn best_so_far_never_drops() {
    for seed in 0..2 {
        let r = ga_run(&desk(seed)).unwrap();
        assert_eq!(r.history.len(), 5);
        for w in r.history.windows(2) {
            assert!(w[1].best_so_far >= w[0].best_so_far);
        }
        assert_eq!(r.history.last().unwrap().best_so_far, r.best_fitness);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
        // the elite carries over, so every generation's best is at least the previous one
        for w in r.history.windows(2) {
            assert!(w[1].best >= w[0].best);
        }
    }
}

#[test]
fn bad_configs_are_rejected() {
    assert!(ga_run(&GaConfig { population: 0, ..desk(0) }).is_err());
    assert!(ga_run(&GaConfig { elites: 7, ..desk(0) }).is_err());
    assert!(ga_run(&GaConfig { mutation_rate: 1.5, ..desk(0) }).is_err());
}
