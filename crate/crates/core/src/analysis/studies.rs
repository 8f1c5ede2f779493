//! Batch studies: key rate against network loss and finite-key scaling.

use serde::{Deserialize, Serialize};

use super::pipeline::{run_pipeline, PipelineSettings, PipelineStatus, PostprocessSettings};
use crate::error::{Error, Result};
use crate::keyrate::{akr, optimize_budget};
use crate::network_sim::{adjusted_rate, generation_rate, simulate_ledger, total_loss_db, DriftModel, SwitchingModel, Topology};
use crate::noise_model::OperationalNoise;
use crate::protocol::make_schedule_exact;
use crate::rng;

/// Bob link lengths (km) of the four characterised topologies.
pub const REFERENCE_BOBS_KM: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [0.0, 0.0, 20.0], [0.0, 10.0, 20.0], [20.0, 10.0, 20.0]];
/// Measured total loss per reference topology, dB.
pub const MEASURED_LOSS_DB: [f64; 4] = [0.0, 4.84, 7.57, 11.77];
/// Measured four-photon rate per reference topology, Hz.
pub const MEASURED_RATE_HZ: [f64; 4] = [40.89, 12.68, 6.31, 2.03];

pub fn reference_topologies() -> Vec<Topology> {
    REFERENCE_BOBS_KM.iter().map(|b| Topology::calibrated(b).expect("valid constant topology")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkrRow {
    pub topology: String,
    pub loss_db: f64,
    /// Rate predicted by the loss model.
    pub model_rate_hz: f64,
    /// Rate used for the key rate: measured when supplied, else the model.
    pub g_r_hz: f64,
    pub akr: f64,
    pub key_rate_hz: f64,
    /// `g_R` after the active-switching penalty.
    pub switched_rate_hz: f64,
    pub switched_key_rate_hz: f64,
}

/// `key_rate = AKR * g_R` per topology; `measured_rates_hz`, when given,
/// replaces the modelled `g_R` row by row.
pub fn run_akr_study(
    topologies: &[Topology],
    noise: &OperationalNoise,
    switching: &SwitchingModel,
    measured_rates_hz: Option<&[f64]>,
) -> Result<Vec<AkrRow>> {
    if let Some(m) = measured_rates_hz {
        if m.len() != topologies.len() {
            return Err(Error::LengthMismatch { expected: topologies.len(), actual: m.len() });
        }
    }
    let a = akr(noise.q_x, noise.qber())?;
    topologies
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let model = generation_rate(t);
            let g = measured_rates_hz.map_or(model, |m| m[i]);
            let switched = adjusted_rate(g, switching)?;
            Ok(AkrRow {
                topology: t.label(),
                loss_db: total_loss_db(t),
                model_rate_hz: model,
                g_r_hz: g,
                akr: a,
                key_rate_hz: a * g,
                switched_rate_hz: switched,
                switched_key_rate_hz: a * switched,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rounds: u64,
    pub p: f64,
    pub m: usize,
    pub n: usize,
    pub q_x_m: f64,
    pub qber_m: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    /// Finite-key bound (Shannon EC term) per round; may be negative.
    pub bound_fraction: f64,
    pub bound_bits: u64,
    /// Secret key per round after the realized leakage and `L h(p)`; 0 when no key.
    pub realized_fraction: f64,
    pub realized_bits: u64,
    pub code_rate: Option<String>,
    pub leakage_bits: u64,
    pub status: String,
}

/// For each `L`: optimise `p` and the budget for the configured noise,
/// simulate `L` rounds, run the full pipeline and record both the analytic
/// bound and the realized key.
pub fn run_finite_key_sweep(
    rounds: &[u64],
    noise: &OperationalNoise,
    eps_tot: f64,
    post: &PostprocessSettings,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let parties = noise.parties();
    let mut rows = Vec::with_capacity(rounds.len());
    for &l in rounds {
        let opt = optimize_budget(noise.q_x, noise.qber(), l, parties, eps_tot)?;
        let job_seed = rng::derive_seed(seed, &format!("sweep-{l}"));
        let m = ((opt.p * l as f64).round() as usize).clamp(1, (l as usize - 1) / 2);
        let schedule = make_schedule_exact(l as usize, m, rng::derive_seed(job_seed, "schedule"))?;
        let ledger = simulate_ledger(schedule, noise, &DriftModel::disabled(), 1.0, job_seed)?;
        let settings = PipelineSettings { budget: opt.budget.clone(), post: post.clone(), seed: job_seed };
        let mut row = SweepRow {
            rounds: l,
            p: ledger.schedule.p,
            m,
            n: l as usize - 2 * m,
            q_x_m: 0.0,
            qber_m: 0.0,
            eps_ec: opt.budget.eps_ec,
            eps_pa: opt.budget.eps_pa,
            bound_fraction: 0.0,
            bound_bits: 0,
            realized_fraction: 0.0,
            realized_bits: 0,
            code_rate: None,
            leakage_bits: 0,
            status: String::new(),
        };
        match run_pipeline(&ledger, &settings) {
            Ok(out) => {
                row.q_x_m = out.estimate.q_x_m;
                row.qber_m = out.estimate.qber_m;
                row.bound_fraction = out.bound.fraction;
                row.bound_bits = out.bound.net_bits;
                row.code_rate = out.reconciliation.as_ref().map(|r| r.rate.to_string());
                row.leakage_bits = out.leakage_bits;
                if let (PipelineStatus::Key, Some(real)) = (out.status, &out.realized) {
                    row.realized_bits = real.net_bits;
                    row.realized_fraction = real.net_bits as f64 / l as f64;
                }
                row.status = match out.status {
                    PipelineStatus::Key => "key",
                    PipelineStatus::NoCode => "no_code",
                    PipelineStatus::NoKey => "no_key",
                }
                .to_string();
            }
            Err(Error::EcFailure { .. }) | Err(Error::VerificationFailed) => row.status = "ec_failure".into(),
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn akr_rows_at_reference_noise() {
        let noise = OperationalNoise::uniform(0.05, 0.0159, 3).unwrap();
        let sw = SwitchingModel::new(2.0, 0.012).unwrap();
        let rows = run_akr_study(&reference_topologies(), &noise, &sw, Some(&MEASURED_RATE_HZ)).unwrap();
        assert_eq!(rows[0].model_rate_hz, 40.89);
        assert!(rows.iter().all(|r| (r.akr - 0.596).abs() < 1e-3));
        assert!((rows[3].key_rate_hz - 0.596 * 2.03).abs() < 0.01);
        assert!(rows.windows(2).all(|w| w[1].loss_db > w[0].loss_db));
        assert!(rows.iter().all(|r| r.switched_rate_hz < r.g_r_hz / (1.0 - 0.012)));
        assert!(run_akr_study(&reference_topologies(), &noise, &sw, Some(&[1.0])).is_err());
    }
}
