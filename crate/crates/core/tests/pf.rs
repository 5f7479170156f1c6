use pfloc_core::pf::{
    filter_rng, likelihood, multinomial_indices, FilterConfig, OdometryDelta, Particle, ParticleSet,
};
use pfloc_core::rfmap::Point2;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn set_from_weights(weights: &[f64]) -> ParticleSet {
    let positions: Vec<Point2> = (0..weights.len()).map(|i| Point2::new(i as f64, -(i as f64))).collect();
    ParticleSet::from_parts(&positions, weights)
}

fn normalized(weights: &[f64]) -> ParticleSet {
    let mut s = set_from_weights(weights);
    s.normalize().unwrap();
    s
}

#[test]
fn uniform_init_obeys_law_of_large_numbers() {
    let config = FilterConfig {
        n_particles: 100_000,
        ..FilterConfig::default()
    };
    let set = ParticleSet::init_uniform(&config, 10.0, 10.0, &mut filter_rng(77)).unwrap();
    let n = set.len() as f64;
    let mx = set.positions().map(|p| p.x).sum::<f64>() / n;
    let my = set.positions().map(|p| p.y).sum::<f64>() / n;
    assert!((mx - 5.0).abs() < 0.05 && (my - 5.0).abs() < 0.05, "mean ({mx}, {my})");
    let vx = set.positions().map(|p| (p.x - mx).powi(2)).sum::<f64>() / n;
    let vy = set.positions().map(|p| (p.y - my).powi(2)).sum::<f64>() / n;
    let target = 100.0 / 12.0;
    assert!((vx / target - 1.0).abs() < 0.05, "var x {vx}");
    assert!((vy / target - 1.0).abs() < 0.05, "var y {vy}");
}

#[test]
fn jitter_is_bounded_and_centered() {
    let config = FilterConfig {
        n_particles: 1000,
        ..FilterConfig::default()
    };
    let mut rng = filter_rng(5);
    let mut set = ParticleSet::init_uniform(&config, 10.0, 10.0, &mut rng).unwrap();
    let (mut sum_x, mut sum_y, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..1000 {
        let before: Vec<Point2> = set.positions().collect();
        set.predict(OdometryDelta::STATIONARY, 0.05, &mut rng);
        for (a, b) in set.positions().zip(before) {
            let (dx, dy) = (a.x - b.x, a.y - b.y);
            // one ulp of slack for the subtraction at |coord| <= ~11
            assert!(dx.abs() <= 0.05 + 1e-14 && dy.abs() <= 0.05 + 1e-14);
            sum_x += dx;
            sum_y += dy;
            count += 1;
        }
    }
    assert_eq!(count, 1_000_000);
    assert!((sum_x / count as f64).abs() < 1e-3);
    assert!((sum_y / count as f64).abs() < 1e-3);
}

#[test]
fn multinomial_frequencies_match_categorical_law() {
    let weights = [0.5, 0.3, 0.2];
    let n = 100_000;
    let draws = multinomial_indices(&weights, n, &mut filter_rng(31337)).unwrap();
    let mut counts = [0usize; 3];
    for i in draws {
        counts[i] += 1;
    }
    let mut chi2 = 0.0;
    for (c, w) in counts.iter().zip(weights) {
        let freq = *c as f64 / n as f64;
        let se = (w * (1.0 - w) / n as f64).sqrt();
        assert!((freq - w).abs() < 3.0 * se, "freq {freq} vs {w}");
        let expected = w * n as f64;
        chi2 += (*c as f64 - expected).powi(2) / expected;
    }
    let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 {chi2}, p {p}");
}

#[test]
fn mean_copy_counts_track_weights() {
    // 999 particles in three position classes carrying 0.5 / 0.3 / 0.2 of the mass
    let weights = [0.5, 0.3, 0.2];
    let n_particles = 999;
    let per_class = (n_particles / 3) as f64;
    let template = ParticleSet::new(
        (0..n_particles)
            .map(|i| Particle {
                position: Point2::new((i % 3) as f64, 0.0),
                weight: weights[i % 3] / per_class,
            })
            .collect(),
    );
    assert!(template.is_normalized());
    let mut rng = filter_rng(8);
    let mut totals = [0usize; 3];
    let calls = 1000;
    for _ in 0..calls {
        let mut set = template.clone();
        set.resample_multinomial(&mut rng).unwrap();
        for p in set.positions() {
            totals[p.x as usize] += 1;
        }
    }
    for class in 0..3 {
        let expected = weights[class] * n_particles as f64;
        let mean = totals[class] as f64 / calls as f64;
        assert!((mean / expected - 1.0).abs() < 0.02, "class {class}: {mean} vs {expected}");
    }
}

#[test]
fn likelihood_is_monotone_in_residual() {
    let mut rng = filter_rng(99);
    for _ in 0..10_000 {
        let k = rng.random_range(1..=6);
        let sigma = rng.random_range(0.5..8.0);
        let obs: Vec<f64> = (0..k).map(|_| rng.random_range(-90.0..-30.0)).collect();
        let far: Vec<f64> = (0..k).map(|_| rng.random_range(-20.0..20.0)).collect();
        let near: Vec<f64> = far.iter().map(|r| r * rng.random_range(0.0..=1.0)).collect();
        let pred_far: Vec<f64> = obs.iter().zip(&far).map(|(o, r)| o - r).collect();
        let pred_near: Vec<f64> = obs.iter().zip(&near).map(|(o, r)| o - r).collect();
        assert!(likelihood(&obs, &pred_near, sigma) >= likelihood(&obs, &pred_far, sigma));
    }
}

fn positive_weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6f64..1e3, 1..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalization_sums_to_one_and_keeps_ratios(weights in positive_weights()) {
        let s = normalized(&weights);
        let sum: f64 = s.weights().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
        let w: Vec<f64> = s.weights().collect();
        for i in 1..w.len() {
            let expect = weights[i] / weights[0];
            prop_assert!((w[i] / w[0] / expect - 1.0).abs() < 1e-12);
        }
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert_eq!(s.len(), weights.len());
    }

    #[test]
    fn ess_bounds_and_direct_oracle(weights in positive_weights()) {
        let s = normalized(&weights);
        let ess = s.effective_sample_size().unwrap();
        let n = weights.len() as f64;
        prop_assert!((1.0..=n).contains(&ess));
        let total: f64 = weights.iter().sum();
        let direct = 1.0 / weights.iter().map(|w| (w / total).powi(2)).sum::<f64>();
        prop_assert!((ess - direct.clamp(1.0, n)).abs() <= 1e-12 * n);
    }

    #[test]
    fn ess_equals_n_iff_uniform(n in 2usize..300, value in 1e-3f64..10.0, bump in 1e-3f64..1.0, at in 0usize..300) {
        let uniform = normalized(&vec![value; n]);
        prop_assert!((uniform.effective_sample_size().unwrap() - n as f64).abs() <= 1e-9);
        let mut w = vec![value; n];
        w[at % n] *= 1.0 + bump;
        let skewed = normalized(&w);
        prop_assert!(skewed.effective_sample_size().unwrap() < n as f64 - 1e-9);
    }

    #[test]
    fn resampling_preserves_count_and_draws_from_input(weights in positive_weights(), seed in any::<u64>()) {
        let s = normalized(&weights);
        let mut r = s.clone();
        r.resample_multinomial(&mut filter_rng(seed)).unwrap();
        prop_assert_eq!(r.len(), s.len());
        prop_assert!(r.is_normalized());
        let expected_w = 1.0 / s.len() as f64;
        for p in r.particles() {
            prop_assert_eq!(p.weight, expected_w);
            prop_assert!(s.positions().any(|q| q == p.position));
        }
    }

    #[test]
    fn weight_scale_invariance(weights in positive_weights(), c in 1e-6f64..1e6, seed in any::<u64>()) {
        let a = normalized(&weights);
        let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
        let b = normalized(&scaled);
        for (x, y) in a.weights().zip(b.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert_eq!(a.should_resample(0.5).unwrap(), b.should_resample(0.5).unwrap());
        let wa: Vec<f64> = a.weights().collect();
        let wb: Vec<f64> = b.weights().collect();
        let ia = multinomial_indices(&wa, 500, &mut filter_rng(seed)).unwrap();
        let ib = multinomial_indices(&wb, 500, &mut filter_rng(seed)).unwrap();
        prop_assert_eq!(ia, ib);
    }

    #[test]
    fn likelihood_is_symmetric_and_peaks_at_zero_residual(
        r in prop::collection::vec(-100.0f64..0.0, 1..8),
        shift in prop::collection::vec(-20.0f64..20.0, 8),
        sigma in 0.5f64..10.0,
    ) {
        let r_hat: Vec<f64> = r.iter().zip(&shift).map(|(a, s)| a + s).collect();
        prop_assert_eq!(likelihood(&r, &r_hat, sigma), likelihood(&r_hat, &r, sigma));
        prop_assert!(likelihood(&r, &r, sigma) >= likelihood(&r, &r_hat, sigma));
    }
}

#[test]
fn estimate_matches_summation_oracle() {
    let mut rng = filter_rng(12);
    let positions: Vec<Point2> = (0..1000)
        .map(|_| Point2::new(rng.random_range(-1.0..11.0), rng.random_range(-1.0..11.0)))
        .collect();
    let set = ParticleSet::from_parts(&positions, &vec![1e-3; 1000]);
    let est = set.estimate().unwrap().position;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for p in &positions {
        sx += p.x;
        sy += p.y;
    }
    assert!((est.x - sx / 1000.0).abs() < 1e-12);
    assert!((est.y - sy / 1000.0).abs() < 1e-12);
}
