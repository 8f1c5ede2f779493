use qcka::network_sim::{run_session, simulate_ledger, DriftModel, SessionOutcome, SessionPlan, RoundCount, SwitchingModel};
use qcka::noise_model::{OperationalNoise, RoundType};
use qcka::protocol::{make_schedule_exact, estimate_params};
use qcka::{rng, Topology};

fn within_sigmas(observed: f64, p: f64, trials: usize, k: f64) -> bool {
    (observed - p).abs() <= k * (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn sampled_rates_match_configuration() {
    let noise = OperationalNoise::new(0.05, vec![0.01, 0.02, 0.03]).unwrap();
    let mut r = rng::from_seed(11);
    let trials = 200_000;
    let mut flips = [0usize; 3];
    let mut odd = 0;
    for _ in 0..trials {
        let k = noise.sample_round(RoundType::Key, &mut r);
        for (f, b) in flips.iter_mut().zip(&k[1..]) {
            *f += usize::from(*b != k[0]);
        }
        let x = noise.sample_round(RoundType::Test, &mut r);
        odd += usize::from(x.iter().fold(false, |a, &b| a ^ b));
    }
    for (f, q) in flips.iter().zip(&noise.q_ab) {
        assert!(within_sigmas(*f as f64 / trials as f64, *q, trials, 4.0), "{f} vs {q}");
    }
    assert!(within_sigmas(odd as f64 / trials as f64, 0.05, trials, 4.0));
}

#[test]
fn session_qber_without_drift_matches_noise() {
    let t = Topology::calibrated(&[0.0, 10.0, 20.0]).unwrap();
    let noise = OperationalNoise::uniform(0.05, 0.0159, 3).unwrap();
    let plan = SessionPlan::exact(200_000, 0.1, 5);
    let s = run_session(&t, None, &DriftModel::disabled(), &noise, &plan).unwrap().into_session().unwrap();
    let l = &s.ledger;
    let key: Vec<usize> = l.schedule.key_indices();
    for bob in 1..4 {
        let d = key.iter().filter(|&&i| l.outcomes[0].get(i) != l.outcomes[bob].get(i)).count();
        assert!(within_sigmas(d as f64 / key.len() as f64, 0.0159, key.len(), 4.0));
    }
}

#[test]
fn drift_inflates_qber_by_the_ramp_mean() {
    let t = Topology::calibrated(&[0.0, 0.0, 0.0]).unwrap();
    let noise = OperationalNoise::uniform(0.05, 0.01, 3).unwrap();
    let drift = DriftModel { drift_rate: 0.02, correction_period_s: 1200.0, correction_dead_time_s: 30.0 };
    let mut plan = SessionPlan::exact(200_000, 0.5, 9);
    plan.duration_s = 12.0 * 1230.0;
    let s = run_session(&t, None, &drift, &noise, &plan).unwrap().into_session().unwrap();
    let l = &s.ledger;
    let key = l.schedule.key_indices();
    let d = key.iter().filter(|&&i| l.outcomes[0].get(i) != l.outcomes[1].get(i)).count();
    let expected = 0.01 + drift.mean_added_qber();
    assert!(within_sigmas(d as f64 / key.len() as f64, expected, key.len(), 4.0));
    assert!((s.measuring_time_s - 12.0 * 1200.0).abs() < 1e-6);
}

#[test]
fn sessions_are_reproducible() {
    let t = Topology::calibrated(&[5.0, 10.0, 20.0]).unwrap();
    let noise = OperationalNoise::uniform(0.05, 0.0159, 3).unwrap();
    let sw = SwitchingModel::new(2.0, 0.012).unwrap();
    let plan = SessionPlan { duration_s: 3600.0, p: 0.012, rounds: RoundCount::Poisson, exact_test_rounds: None, rate_override_hz: None, seed: 3 };
    let a = run_session(&t, Some(&sw), &DriftModel::default(), &noise, &plan).unwrap();
    let b = run_session(&t, Some(&sw), &DriftModel::default(), &noise, &plan).unwrap();
    assert_eq!(a, b);
    let c = run_session(&t, Some(&sw), &DriftModel::default(), &noise, &SessionPlan { seed: 4, ..plan }).unwrap();
    assert_ne!(a, c);
}

#[test]
fn long_run_round_count() {
    // 6.5 Hz for 177 h with passive switching and no feedback pauses.
    let t = Topology::calibrated(&[5.0, 10.0, 20.0]).unwrap();
    let plan = SessionPlan {
        duration_s: 177.0 * 3600.0,
        p: 0.012,
        rounds: RoundCount::Exact(1000),
        exact_test_rounds: None,
        rate_override_hz: Some(6.5),
        seed: 1,
    };
    let s = run_session(&t, None, &DriftModel::disabled(), &OperationalNoise::noiseless(3), &plan)
        .unwrap()
        .into_session()
        .unwrap();
    assert!((s.expected_rounds - 4.14e6).abs() / 4.14e6 < 0.01, "{}", s.expected_rounds);
    assert!(((4.09e6 + 5.01e4) - s.expected_rounds).abs() / s.expected_rounds < 0.01);
}

#[test]
fn empty_session_reports_expectation() {
    let t = Topology::calibrated(&[20.0, 10.0, 20.0]).unwrap();
    let plan = SessionPlan { duration_s: 1e-3, p: 0.5, rounds: RoundCount::Poisson, exact_test_rounds: None, rate_override_hz: None, seed: 2 };
    match run_session(&t, None, &DriftModel::disabled(), &OperationalNoise::noiseless(3), &plan).unwrap() {
        SessionOutcome::Empty { expected_rounds } => assert!(expected_rounds < 0.01),
        other => panic!("{other:?}"),
    }
}

#[test]
fn estimators_are_unbiased() {
    let noise = OperationalNoise::new(0.05, vec![0.01, 0.02, 0.03]).unwrap();
    let (sessions, rounds, m) = (200, 20_000, 1_000);
    let mut sum_x = 0.0;
    let mut sum_ab = [0.0; 3];
    for s in 0..sessions {
        let sch = make_schedule_exact(rounds, m, rng::derive_seed(s, "sch")).unwrap();
        let led = simulate_ledger(sch, &noise, &DriftModel::disabled(), 1.0, s).unwrap();
        let est = estimate_params(&led, rng::derive_seed(s, "pe")).unwrap();
        sum_x += est.q_x_m;
        for (acc, q) in sum_ab.iter_mut().zip(&est.q_ab_m) {
            *acc += q;
        }
    }
    let total = sessions as usize * m;
    assert!(within_sigmas(sum_x / sessions as f64, 0.05, total, 4.0));
    for (acc, q) in sum_ab.iter().zip(&noise.q_ab) {
        assert!(within_sigmas(acc / sessions as f64, *q, total, 4.0), "{acc} {q}");
    }
}
