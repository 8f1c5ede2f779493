//! Star network: fibre loss, four-photon rate, basis-switching penalty,
//! polarisation drift, and whole measurement sessions.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{invalid, Result};
use crate::noise_model::{OperationalNoise, RoundType};
use crate::protocol::{default_party_names, make_schedule, make_schedule_exact, RoundLedger, Schedule};
use crate::rng;

/// Fibre attenuation fitted to the four measured (topology, loss) pairs.
pub const CALIBRATED_ATTEN_DB_PER_KM: f64 = 0.189_666_666_666_666_7;
/// Per-spool connector and splice loss from the same fit.
pub const CALIBRATED_COUPLING_DB: f64 = 0.833_333_333_333_333_3;
/// Four-photon coincidence rate with no added fibre.
pub const CALIBRATED_BASE_RATE_HZ: f64 = 40.89;

/// Server plus `N` users, one fibre link each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Link lengths in km, Alice first.
    pub fiber_km: Vec<f64>,
    pub atten_db_per_km: f64,
    /// Charged once for every link with non-zero fibre.
    pub coupling_loss_db: f64,
    pub base_rate_hz: f64,
}

impl Topology {
    pub fn new(fiber_km: Vec<f64>, atten_db_per_km: f64, coupling_loss_db: f64, base_rate_hz: f64) -> Result<Self> {
        let t = Self { fiber_km, atten_db_per_km, coupling_loss_db, base_rate_hz };
        t.validate()?;
        Ok(t)
    }

    /// Calibrated constants, Alice next to the server, Bobs at `bobs_km`.
    pub fn calibrated(bobs_km: &[f64]) -> Result<Self> {
        let mut fiber = vec![0.0];
        fiber.extend_from_slice(bobs_km);
        Self::new(fiber, CALIBRATED_ATTEN_DB_PER_KM, CALIBRATED_COUPLING_DB, CALIBRATED_BASE_RATE_HZ)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fiber_km.len() < 2 {
            return Err(invalid("topology needs at least two users"));
        }
        if self.fiber_km.iter().any(|&d| !(d >= 0.0)) {
            return Err(invalid("fibre lengths must be non-negative"));
        }
        if !(self.atten_db_per_km >= 0.0) || !(self.coupling_loss_db >= 0.0) {
            return Err(invalid("loss coefficients must be non-negative"));
        }
        if !(self.base_rate_hz > 0.0) {
            return Err(invalid(format!("base rate {} Hz must be positive", self.base_rate_hz)));
        }
        Ok(())
    }

    pub fn parties(&self) -> usize {
        self.fiber_km.len()
    }

    /// Brace-list label, Bobs only: `{0,10,20}`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.fiber_km[1..].iter().map(|d| format!("{d}")).collect();
        format!("{{{}}}", parts.join(","))
    }
}

pub fn total_loss_db(t: &Topology) -> f64 {
    t.fiber_km
        .iter()
        .map(|&d| if d > 0.0 { d * t.atten_db_per_km + t.coupling_loss_db } else { 0.0 })
        .sum()
}

/// Four-photon rate after the network loss: every user's photon must arrive.
pub fn generation_rate(t: &Topology) -> f64 {
    rate_at_loss(t.base_rate_hz, total_loss_db(t))
}

pub fn rate_at_loss(base_rate_hz: f64, loss_db: f64) -> f64 {
    base_rate_hz * 10f64.powf(-loss_db / 10.0)
}

/// Least-squares fit of `(atten_db_per_km, coupling_db)` to measured losses,
/// with the loss model of [`total_loss_db`].
pub fn fit_loss_constants(samples: &[(Vec<f64>, f64)]) -> Result<(f64, f64)> {
    let (mut s_kk, mut s_kc, mut s_cc, mut s_ky, mut s_cy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (fiber, loss) in samples {
        let km: f64 = fiber.iter().sum();
        let spools = fiber.iter().filter(|&&d| d > 0.0).count() as f64;
        s_kk += km * km;
        s_kc += km * spools;
        s_cc += spools * spools;
        s_ky += km * loss;
        s_cy += spools * loss;
    }
    let det = s_kk * s_cc - s_kc * s_kc;
    if det.abs() < 1e-12 * (s_kk * s_cc).max(1.0) {
        return Err(invalid("loss samples do not determine both constants"));
    }
    Ok(((s_ky * s_cc - s_cy * s_kc) / det, (s_kk * s_cy - s_kc * s_ky) / det))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchingModel {
    /// Time to rotate all measurement stages, seconds.
    pub tau_s: f64,
    /// Type-2 round probability.
    pub p_type2: f64,
}

impl SwitchingModel {
    pub fn new(tau_s: f64, p_type2: f64) -> Result<Self> {
        let s = Self { tau_s, p_type2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s >= 0.0) {
            return Err(invalid(format!("switching time {} s is negative", self.tau_s)));
        }
        if !(self.p_type2 > 0.0 && self.p_type2 < 1.0) {
            return Err(invalid(format!("p = {} outside (0, 1)", self.p_type2)));
        }
        Ok(())
    }
}

/// Lower bound on the rate with active switching, assuming every type-2
/// round needs its own switch: `1 / (tau_s p + (1 - p) / g_R)`.
pub fn adjusted_rate(g_r: f64, s: &SwitchingModel) -> Result<f64> {
    if !(g_r > 0.0) {
        return Err(invalid(format!("generation rate {g_r} Hz must be positive")));
    }
    s.validate()?;
    Ok(1.0 / (s.tau_s * s.p_type2 + (1.0 - s.p_type2) / g_r))
}

/// Linear QBER ramp from polarisation drift, reset by periodic feedback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriftModel {
    /// QBER added per hour on every Bob's link.
    pub drift_rate: f64,
    /// Time between corrections; 0 disables the feedback loop.
    pub correction_period_s: f64,
    /// Measurement time lost to each correction.
    pub correction_dead_time_s: f64,
}

impl Default for DriftModel {
    fn default() -> Self {
        Self { drift_rate: 0.0, correction_period_s: 20.0 * 60.0, correction_dead_time_s: 30.0 }
    }
}

impl DriftModel {
    pub fn disabled() -> Self {
        Self { drift_rate: 0.0, correction_period_s: 0.0, correction_dead_time_s: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drift_rate >= 0.0 && self.correction_period_s >= 0.0 && self.correction_dead_time_s >= 0.0) {
            return Err(invalid("drift parameters must be non-negative"));
        }
        Ok(())
    }

    /// Fraction of wall time spent measuring.
    pub fn duty_cycle(&self) -> f64 {
        if self.correction_period_s > 0.0 {
            self.correction_period_s / (self.correction_period_s + self.correction_dead_time_s)
        } else {
            1.0
        }
    }

    /// QBER added after `active_s` seconds of measurement.
    pub fn added_qber(&self, active_s: f64) -> f64 {
        let since = if self.correction_period_s > 0.0 { active_s % self.correction_period_s } else { active_s };
        self.drift_rate * since / 3600.0
    }

    /// Mean of the ramp over one correction period.
    pub fn mean_added_qber(&self) -> f64 {
        self.drift_rate * self.correction_period_s / 3600.0 / 2.0
    }
}

/// Round-count policy for a session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundCount {
    /// `L ~ Poisson(rate * measuring time)`.
    Poisson,
    /// Exactly this many rounds.
    Exact(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub duration_s: f64,
    /// Type-2 round probability of the schedule.
    pub p: f64,
    pub rounds: RoundCount,
    /// When set, the schedule has exactly this many type-2 rounds.
    pub exact_test_rounds: Option<usize>,
    /// Measured four-photon rate to use instead of the loss model.
    pub rate_override_hz: Option<f64>,
    pub seed: u64,
}

impl SessionPlan {
    pub fn exact(rounds: usize, p: f64, seed: u64) -> Self {
        Self { duration_s: 1.0, p, rounds: RoundCount::Exact(rounds), exact_test_rounds: None, rate_override_hz: None, seed }
    }
}

/// Sample every party's outcome for a fixed schedule spread evenly over
/// `measuring_s` seconds of measurement.
pub fn simulate_ledger(
    schedule: Schedule,
    noise: &OperationalNoise,
    drift: &DriftModel,
    measuring_s: f64,
    seed: u64,
) -> Result<RoundLedger> {
    noise.validate()?;
    drift.validate()?;
    let rounds = schedule.rounds;
    let parties = noise.parties();
    let mut rows = vec![BitString::zeros(rounds); parties];
    let mut phase = BitString::zeros(rounds);
    let mut r = rng::stream(seed, "outcomes");
    let mut buf = vec![false; parties];
    let mut current = noise.clone();
    let dt = measuring_s / rounds.max(1) as f64;
    for i in 0..rounds {
        if drift.drift_rate > 0.0 {
            let added = drift.added_qber((i as f64 + 0.5) * dt);
            for (q, base) in current.q_ab.iter_mut().zip(&noise.q_ab) {
                *q = (base + added).min(0.5);
            }
        }
        let kind = if schedule.is_test(i) { RoundType::Test } else { RoundType::Key };
        current.sample_round_into(kind, &mut r, &mut buf);
        for (row, &b) in rows.iter_mut().zip(&buf) {
            if b {
                row.set(i, true);
            }
        }
        let odd = match kind {
            RoundType::Test => buf.iter().fold(false, |acc, &b| acc ^ b),
            RoundType::Key => r.random::<f64>() < current.q_x,
        };
        if odd {
            phase.set(i, true);
        }
    }
    let mut ledger = RoundLedger::new(schedule, rows, default_party_names(parties))?;
    ledger.phase_errors = Some(phase);
    Ok(ledger)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub ledger: RoundLedger,
    pub rate_hz: f64,
    pub expected_rounds: f64,
    pub measuring_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionOutcome {
    /// No rounds were recorded; not an error.
    Empty { expected_rounds: f64 },
    Completed(Box<Session>),
}

impl SessionOutcome {
    pub fn into_session(self) -> Option<Session> {
        match self {
            SessionOutcome::Empty { .. } => None,
            SessionOutcome::Completed(s) => Some(*s),
        }
    }
}

/// Run one measurement session over the star network. `switching` is
/// `None` for passive basis choice, where the rate is `g_R` itself.
///
/// Rounds are spread evenly over the measuring time; each Bob's QBER is
/// inflated by the drift ramp at the round's position in its correction
/// cycle. The ledger carries the simulator-only phase-error bits.
pub fn run_session(
    topology: &Topology,
    switching: Option<&SwitchingModel>,
    drift: &DriftModel,
    noise: &OperationalNoise,
    plan: &SessionPlan,
) -> Result<SessionOutcome> {
    topology.validate()?;
    drift.validate()?;
    noise.validate()?;
    if noise.parties() != topology.parties() {
        return Err(invalid(format!(
            "noise describes {} parties, topology {}",
            noise.parties(),
            topology.parties()
        )));
    }
    if !(plan.duration_s > 0.0) {
        return Err(invalid("session duration must be positive"));
    }
    let g_r = plan.rate_override_hz.unwrap_or_else(|| generation_rate(topology));
    let rate = match switching {
        Some(s) => adjusted_rate(g_r, s)?,
        None => g_r,
    };
    let measuring = plan.duration_s * drift.duty_cycle();
    let expected = rate * measuring;
    let rounds = match plan.rounds {
        RoundCount::Exact(l) => l,
        RoundCount::Poisson if !(expected > 0.0) => 0,
        RoundCount::Poisson => {
            let dist = Poisson::new(expected).map_err(|e| invalid(format!("Poisson mean {expected}: {e}")))?;
            dist.sample(&mut rng::stream(plan.seed, "round-count")) as usize
        }
    };
    if rounds == 0 {
        return Ok(SessionOutcome::Empty { expected_rounds: expected });
    }

    let schedule_seed = rng::derive_seed(plan.seed, "schedule");
    let schedule = match plan.exact_test_rounds {
        Some(m) => make_schedule_exact(rounds, m, schedule_seed)?,
        None => make_schedule(rounds, plan.p, schedule_seed)?,
    };
    let ledger = simulate_ledger(schedule, noise, drift, measuring, plan.seed)?;
    Ok(SessionOutcome::Completed(Box::new(Session {
        ledger,
        rate_hz: rate,
        expected_rounds: expected,
        measuring_time_s: measuring,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fibre_means_zero_loss() {
        let t = Topology::calibrated(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(total_loss_db(&t), 0.0);
        assert_eq!(generation_rate(&t), 40.89);
    }

    #[test]
    fn calibrated_constants_reproduce_the_fit() {
        let samples = vec![
            (vec![0.0, 0.0, 0.0, 0.0], 0.0),
            (vec![0.0, 0.0, 0.0, 20.0], 4.84),
            (vec![0.0, 0.0, 10.0, 20.0], 7.57),
            (vec![0.0, 20.0, 10.0, 20.0], 11.77),
        ];
        let (a, c) = fit_loss_constants(&samples).unwrap();
        assert!((a - CALIBRATED_ATTEN_DB_PER_KM).abs() < 1e-12);
        assert!((c - CALIBRATED_COUPLING_DB).abs() < 1e-12);
        for (fiber, loss) in &samples {
            let t = Topology::calibrated(&fiber[1..]).unwrap();
            assert!((total_loss_db(&t) - loss).abs() < 0.65, "{} vs {loss}", total_loss_db(&t));
        }
        assert!(fit_loss_constants(&samples[..1]).is_err());
    }

    #[test]
    fn three_db_halves_the_rate() {
        assert!((rate_at_loss(10.0, 10.0 * 2f64.log10()) - 5.0).abs() < 1e-12);
        assert!((rate_at_loss(40.89, 4.84) - 13.416).abs() < 1e-3);
    }

    #[test]
    fn switching_examples() {
        let free = SwitchingModel::new(0.0, 0.1).unwrap();
        assert!((adjusted_rate(5.0, &free).unwrap() - 5.0 / 0.9).abs() < 1e-12);
        let tiny_p = SwitchingModel::new(2.0, 1e-9).unwrap();
        assert!((adjusted_rate(5.0, &tiny_p).unwrap() - 5.0).abs() < 1e-6);
        let s = SwitchingModel::new(2.0, 0.012).unwrap();
        assert!((adjusted_rate(2.03, &s).unwrap() - 1.0 / (0.024 + 0.988 / 2.03)).abs() < 1e-12);
        assert!((adjusted_rate(2.03, &s).unwrap() - 1.958).abs() < 1e-3);
        assert!(adjusted_rate(0.0, &s).is_err());
        assert!(SwitchingModel::new(-1.0, 0.1).is_err());
        assert!(SwitchingModel::new(1.0, 1.0).is_err());
    }

    #[test]
    fn drift_ramp_mean() {
        let d = DriftModel { drift_rate: 0.006, correction_period_s: 1200.0, correction_dead_time_s: 30.0 };
        let steps = 100_000;
        let mean: f64 =
            (0..steps).map(|i| d.added_qber((i as f64 + 0.5) * 1200.0 / steps as f64)).sum::<f64>() / steps as f64;
        assert!((mean - d.mean_added_qber()).abs() < 1e-9);
        assert!((d.mean_added_qber() - 0.006 * (1200.0 / 3600.0) / 2.0).abs() < 1e-15);
        assert!((d.duty_cycle() - 1200.0 / 1230.0).abs() < 1e-15);
        assert_eq!(DriftModel::disabled().duty_cycle(), 1.0);
    }

    #[test]
    fn empty_session_is_not_an_error() {
        let t = Topology::calibrated(&[0.0, 0.0, 0.0]).unwrap();
        let s = SwitchingModel::new(0.0, 0.1).unwrap();
        let plan = SessionPlan { duration_s: 1e-6, p: 0.5, rounds: RoundCount::Poisson, exact_test_rounds: None, rate_override_hz: None, seed: 1 };
        let out = run_session(&t, Some(&s), &DriftModel::disabled(), &OperationalNoise::noiseless(3), &plan).unwrap();
        assert!(matches!(out, SessionOutcome::Empty { .. }));
    }
}
