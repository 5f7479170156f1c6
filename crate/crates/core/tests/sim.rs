use pfloc_core::pf::filter_rng;
use pfloc_core::rfmap::Point2;
use pfloc_core::sim::{
    default_ap_positions, generate_synthetic_map, position_error, run_batch, run_trial, simulate_measurement,
    RadioModel, ScenarioConfig, DEFAULT_ROBOT,
};

#[test]
fn closed_form_path_loss_in_generated_map() {
    let model = RadioModel {
        p0: -40.0,
        d0: 1.0,
        path_loss_exponent: 2.0,
        shadowing_sigma: 0.0,
    };
    // single AP at the origin; landmark (10, 0) sits 10 m away
    let map = generate_synthetic_map(10.0, 10.0, &[Point2::new(0.0, 0.0)], 5.0, &model).unwrap();
    let lm = map.landmark(map.nearest_landmark(Point2::new(10.0, 0.0))).unwrap();
    assert_eq!(lm.position, Point2::new(10.0, 0.0));
    assert!((lm.rss.values()[0] - -60.0).abs() < 1e-12);
}

#[test]
fn measurement_noise_is_centered() {
    let model = RadioModel::default();
    let aps = default_ap_positions(10.0, 10.0);
    let clean = model.fingerprint(&aps, DEFAULT_ROBOT);
    let sigma = 2.0;
    let n = 100_000;
    let mut rng = filter_rng(4242);
    let mut sums = vec![0.0; aps.len()];
    for _ in 0..n {
        let m = simulate_measurement(&model, &aps, DEFAULT_ROBOT, sigma, &mut rng);
        for (s, v) in sums.iter_mut().zip(m.values()) {
            *s += v;
        }
    }
    let se = sigma / (n as f64).sqrt();
    for (s, c) in sums.iter().zip(clean.values()) {
        assert!((s / n as f64 - c).abs() < 3.0 * se, "{} vs {c}", s / n as f64);
    }
}

#[test]
fn table_rows_reproduce() {
    let truth = Point2::new(2.4, 3.6);
    for (est, err) in [((2.110, 3.3734), 0.368), ((2.421, 3.5995), 0.0210), ((2.726, 0.8694), 2.7499)] {
        let got = position_error(Point2::new(est.0, est.1), truth);
        assert!((got - err).abs() <= 0.0005, "{est:?}: {got} vs {err}");
    }
}

#[test]
fn trials_are_deterministic_and_seed_isolated() {
    let mut s = ScenarioConfig::default_with_particles(300);
    s.iterations = 10;
    s.filter.seed = 900;
    assert_eq!(run_trial(&s, 0, 17).unwrap(), run_trial(&s, 0, 17).unwrap());

    s.trials = 3;
    let small = run_batch(&s).unwrap();
    s.trials = 6;
    let large = run_batch(&s).unwrap();
    assert_eq!(&large.results[..3], &small.results[..]);
    for r in &large.results {
        assert_eq!(*r, run_trial(&s, r.trial_index, 900 + r.trial_index as u64).unwrap());
    }
}

#[test]
fn batch_statistics_are_consistent() {
    let mut s = ScenarioConfig::default_with_particles(300);
    s.iterations = 20;
    s.trials = 7;
    let b = run_batch(&s).unwrap();
    assert_eq!(b.results.len(), 7);
    assert!(b.failures.is_empty());
    let mut sum = 0.0;
    for r in &b.results {
        assert_eq!(r.error_m, position_error(r.estimate, s.robot_position));
        assert!(r.error_m >= 0.0);
        assert_eq!(r.iterations_run, 20);
        sum += r.error_m;
    }
    assert!((b.mean_error_m - sum / 7.0).abs() <= 1e-12);
    assert!(b.min_error_m <= b.mean_error_m && b.mean_error_m <= b.max_error_m);
}

#[test]
fn thousand_particles_converge_on_default_scenario() {
    let s = ScenarioConfig::default_with_particles(1000);
    let b = run_batch(&s).unwrap();
    let good = b.results.iter().filter(|r| r.error_m < 0.5).count();
    assert!(good >= 9, "only {good}/10 trials under 0.5 m: {:?}", b.results);
}

#[test]
fn fixed_observation_mode_reuses_one_sample() {
    let mut s = ScenarioConfig::default_with_particles(300);
    s.iterations = 15;
    s.trials = 2;
    s.observation_noise_sigma = 2.0;
    s.fixed_observation = true;
    let fixed = run_batch(&s).unwrap();
    s.fixed_observation = false;
    let fresh = run_batch(&s).unwrap();
    assert_ne!(fixed.results, fresh.results);
    // noiseless observations make the two modes coincide
    s.observation_noise_sigma = 0.0;
    let a = run_batch(&s).unwrap();
    s.fixed_observation = true;
    assert_eq!(a, run_batch(&s).unwrap());
}
