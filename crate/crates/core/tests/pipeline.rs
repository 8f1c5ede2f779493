use std::path::Path;

use qcka::analysis::config::ExperimentConfig;
use qcka::analysis::pipeline::{run_pipeline, PipelineSettings, PipelineStatus, PostprocessSettings};
use qcka::analysis::studies::run_finite_key_sweep;
use qcka::network_sim::{run_session, simulate_ledger, DriftModel};
use qcka::noise_model::OperationalNoise;
use qcka::postprocess::{preshared_bits, CodeRate, RateTable, RateThreshold, SHORT_BLOCK};
use qcka::protocol::{make_schedule_exact, RoundLedger};
use qcka::{Error, SecurityBudget};

fn desk() -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml")).unwrap()
}

fn desk_ledger(cfg: &ExperimentConfig) -> RoundLedger {
    let s = run_session(
        &cfg.topology().unwrap(),
        cfg.session_switching().unwrap().as_ref(),
        &cfg.drift,
        &cfg.noise().unwrap(),
        &cfg.session_plan(),
    )
    .unwrap();
    s.into_session().unwrap().ledger
}

#[test]
fn desk_pipeline_distills_one_key_and_charges_every_leak() {
    let cfg = desk();
    let ledger = desk_ledger(&cfg);
    let settings = cfg.pipeline_settings().unwrap();
    let o = run_pipeline(&ledger, &settings).unwrap();
    assert_eq!(o.status, PipelineStatus::Key);
    let key = o.key.as_ref().unwrap();
    assert!(key.all_identical());
    assert_eq!(key.parties(), 4);
    let realized = o.realized.as_ref().unwrap();
    assert_eq!(key.length as u64, realized.secret_bits);
    assert!(realized.secret_bits <= o.bound.secret_bits);
    assert_eq!(o.channel.leaked_bits(), o.leakage_bits);
    let rec = o.reconciliation.as_ref().unwrap();
    assert_eq!(o.leakage_bits, rec.syndrome_bits + o.tag_bits as u64);
    assert_eq!(rec.syndrome_bits as usize, rec.blocks * rec.block_j / 3);
    // The only difference between bound and realized is the EC charge.
    let gap = o.bound.secret_bits as f64 - realized.secret_bits as f64;
    assert!((gap - (o.leakage_bits as f64 - o.bound.ec_bits)).abs() <= 2.0, "{gap}");
    assert_eq!(key.preshared_bits, preshared_bits(100_000, 0.25));
    assert!(!key.key_growing());

    let again = run_pipeline(&ledger, &settings).unwrap();
    assert_eq!(again.key, o.key);
    assert_eq!(again.channel, o.channel);
    assert_eq!(desk_ledger(&cfg), ledger);
}

fn ledger_at(qber: f64, rounds: usize, m: usize, seed: u64) -> RoundLedger {
    let noise = OperationalNoise::uniform(0.05, qber, 3).unwrap();
    simulate_ledger(make_schedule_exact(rounds, m, seed).unwrap(), &noise, &DriftModel::disabled(), 1.0, seed).unwrap()
}

fn settings(table: RateTable) -> PipelineSettings {
    PipelineSettings {
        budget: SecurityBudget::from_total(1e-2, 5e-6, 1e-5, 0.5, 4).unwrap(),
        post: PostprocessSettings { block_j: SHORT_BLOCK, max_iters: 50, rate_table: table },
        seed: 17,
    }
}

#[test]
fn too_noisy_for_any_code_aborts_without_key() {
    let o = run_pipeline(&ledger_at(0.06, 50_000, 10_000, 1), &settings(RateTable::default())).unwrap();
    assert_eq!(o.status, PipelineStatus::NoCode);
    assert!(o.key.is_none() && o.reconciliation.is_none());
    assert_eq!(o.leakage_bits, 0);
}

#[test]
fn decoding_failure_is_an_error() {
    let optimistic = RateTable { thresholds: vec![RateThreshold { rate: CodeRate::R4_5, max_qber: 0.49 }], margin: 0.0 };
    match run_pipeline(&ledger_at(0.08, 50_000, 10_000, 2), &settings(optimistic)) {
        Err(Error::EcFailure { party, .. }) => assert!((1..=3).contains(&party)),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_keeps_infeasible_points() {
    let noise = OperationalNoise::uniform(0.05, 0.0159, 3).unwrap();
    let post = PostprocessSettings { block_j: SHORT_BLOCK, ..Default::default() };
    let rows = run_finite_key_sweep(&[5_000, 20_000], &noise, 1e-2, &post, 3).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r.realized_bits, 0);
        assert!(r.realized_fraction <= r.bound_fraction.max(0.0));
        assert_ne!(r.status, "key");
    }
}
