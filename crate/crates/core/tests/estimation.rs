//! Estimator modes, training determinism and noise-free bare/logical
//! equivalence.

use qvl_core::noise::NoiseConfig;
use qvl_core::rng::StreamPath;
use qvl_core::training::{estimate_expectation, train, ShotMode, ShotPolicy, ThetaInit, TrainConfig};
use qvl_core::trajectory::Architecture;

fn policy(shots: usize, mode: ShotMode) -> ShotPolicy {
    ShotPolicy { shots, mode, max_reruns: 100_000 }
}

#[test]
fn per_shot_agrees_with_exact_without_noise() {
    let arch = Architecture::logical(2).unwrap();
    let noise = NoiseConfig::none();
    let stream = StreamPath::root(21);
    for (input, theta) in [((0, 1), 0.9), ((1, 1), 2.3)] {
        let exact = estimate_expectation(input, theta, &arch, &noise, &policy(1, ShotMode::ExactPostSelected), &stream)
            .unwrap()
            .expectation;
        let n = 100_000;
        let sampled =
            estimate_expectation(input, theta, &arch, &noise, &policy(n, ShotMode::PerShotSampling), &stream).unwrap();
        let sigma = ((1.0 - exact * exact) / n as f64).sqrt();
        assert!((sampled.expectation - exact).abs() < 3.0 * sigma, "{} vs {exact}", sampled.expectation);
        assert_eq!(sampled.acceptance_rate, 1.0);
    }
}

#[test]
fn per_shot_agrees_with_exact_under_noise() {
    // Rerunning flagged shots samples the post-selected mixture, which the
    // exact mode computes by acceptance-weighted averaging. The exact
    // estimator has no readout noise, so its spread is below the sampler's.
    let arch = Architecture::logical(3).unwrap();
    let noise = NoiseConfig::gate(0.02, 1.0).with_seed(8);
    let n = 20_000;
    let a =
        estimate_expectation((1, 0), 1.3, &arch, &noise, &policy(n, ShotMode::PerShotSampling), &StreamPath::root(1))
            .unwrap();
    let b =
        estimate_expectation((1, 0), 1.3, &arch, &noise, &policy(n, ShotMode::ExactPostSelected), &StreamPath::root(2))
            .unwrap();
    let sigma = ((1.0 - b.expectation.powi(2)) / n as f64).sqrt() * 2f64.sqrt();
    assert!((a.expectation - b.expectation).abs() < 3.0 * sigma, "{} vs {}", a.expectation, b.expectation);
    let acc_sigma = (b.acceptance_rate * (1.0 - b.acceptance_rate) / n as f64).sqrt() * 2f64.sqrt();
    assert!((a.acceptance_rate - b.acceptance_rate).abs() < 4.0 * acc_sigma);
    assert!(a.acceptance_rate < 1.0);
}

#[test]
fn detection_never_lowers_acceptance_without_noise() {
    for rounds in 1..=5 {
        let arch = Architecture::logical(rounds).unwrap();
        for mode in [ShotMode::PerShotSampling, ShotMode::ExactPostSelected, ShotMode::PerExecution] {
            let e = estimate_expectation(
                (0, 0),
                0.4,
                &arch,
                &NoiseConfig::gate(0.0, 0.0),
                &policy(50, mode),
                &StreamPath::root(0),
            )
            .unwrap();
            assert_eq!(e.acceptance_rate, 1.0);
        }
    }
}

#[test]
fn training_is_reproducible() {
    let mut config = TrainConfig::new(
        Architecture::logical(2).unwrap(),
        NoiseConfig::environmental(0.01, 0.5).with_seed(3),
        policy(40, ShotMode::PerExecution),
    );
    config.iterations = 6;
    let (_, a) = train(&config, 7).unwrap();
    let (_, b) = train(&config, 7).unwrap();
    assert_eq!(a, b);
    let (_, c) = train(&config, 8).unwrap();
    assert_ne!(a.history, c.history);

    config.policy.mode = ShotMode::PerShotSampling;
    config.noise = NoiseConfig::gate(0.01, 1.0).with_seed(3);
    config.iterations = 3;
    assert_eq!(train(&config, 7).unwrap().1, train(&config, 7).unwrap().1);
}

#[test]
fn noiseless_logical_training_tracks_bare() {
    let exact = policy(1, ShotMode::ExactPostSelected);
    for seed in 0..3 {
        let bare = TrainConfig::new(Architecture::Bare, NoiseConfig::none(), exact);
        let (sb, rb) = train(&bare, seed).unwrap();
        for rounds in [0, 3] {
            let logical = TrainConfig::new(Architecture::logical(rounds).unwrap(), NoiseConfig::none(), exact);
            let (sl, rl) = train(&logical, seed).unwrap();
            assert!((sb.theta - sl.theta).abs() < 1e-9);
            for (x, y) in rb.history.iter().zip(&rl.history) {
                assert!((x.theta - y.theta).abs() < 1e-9 && (x.loss - y.loss).abs() < 1e-9);
                assert_eq!(x.train_accuracy, y.train_accuracy);
            }
        }
        assert_eq!(sb.accuracy_history.last(), Some(&1.0));
    }
}

#[test]
fn fixed_initial_angle_is_respected() {
    let mut config = TrainConfig::new(Architecture::Bare, NoiseConfig::none(), policy(1, ShotMode::ExactPostSelected));
    config.theta_init = ThetaInit::Fixed(0.25);
    config.iterations = 1;
    assert_eq!(train(&config, 0).unwrap().1.initial_theta, 0.25);
}
