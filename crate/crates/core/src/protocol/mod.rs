//! N-BB84 round bookkeeping: schedules, parameter estimation and sifting.

mod arith;
pub mod channel;
pub mod ledger;
mod schedule;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use arith::{dequantize_probability, quantize_probability};
pub use channel::{Announcement, InProcessChannel, Transport};
pub use ledger::{default_party_names, RoundLedger};
pub use schedule::{
    compress_schedule, decompress_schedule, make_schedule, make_schedule_exact, Schedule, HEADER_BITS,
};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng;

/// Error rates observed on the disclosed rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    /// Alice-Bob_i disagreement fraction on the disclosed type-1 rounds.
    pub q_ab_m: Vec<f64>,
    /// Fraction of type-2 rounds with odd N-party parity.
    pub q_x_m: f64,
    pub qber_m: f64,
    pub m: usize,
    pub n: usize,
    pub rounds: usize,
    /// Sorted type-1 rounds whose outcomes were announced.
    pub disclosed_type1_indices: Vec<usize>,
}

/// Sifted key material, one row per party, all over the same rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RawKey {
    pub bits: Vec<BitString>,
    pub n: usize,
    /// Ledger rounds the key bits came from, in order.
    pub indices: Vec<usize>,
}

/// Announce all `m` type-2 rounds and a uniformly random `m`-subset of the
/// type-1 rounds, drawn from the public stream `pe_seed`.
pub fn estimate_params(ledger: &RoundLedger, pe_seed: u64) -> Result<ParamEstimate> {
    ledger.validate()?;
    let tests = ledger.schedule.test_indices();
    let keys = ledger.schedule.key_indices();
    let m = tests.len();
    if m == 0 {
        return Err(Error::InsufficientRounds("no type-2 rounds".into()));
    }
    if keys.len() < m {
        return Err(Error::InsufficientRounds(format!(
            "{} type-1 rounds cannot supply a sample of m = {m}",
            keys.len()
        )));
    }

    let mut r = rng::from_seed(pe_seed);
    let mut disclosed: Vec<usize> = index::sample(&mut r, keys.len(), m).into_iter().map(|k| keys[k]).collect();
    disclosed.sort_unstable();

    let alice = &ledger.outcomes[0];
    let q_ab_m: Vec<f64> = ledger.outcomes[1..]
        .iter()
        .map(|bob| disclosed.iter().filter(|&&i| alice.get(i) != bob.get(i)).count() as f64 / m as f64)
        .collect();
    let odd = tests
        .iter()
        .filter(|&&i| ledger.outcomes.iter().fold(false, |acc, row| acc ^ row.get(i)))
        .count();
    let qber_m = q_ab_m.iter().copied().fold(0.0, f64::max);

    Ok(ParamEstimate {
        q_ab_m,
        q_x_m: odd as f64 / m as f64,
        qber_m,
        m,
        n: ledger.rounds() - 2 * m,
        rounds: ledger.rounds(),
        disclosed_type1_indices: disclosed,
    })
}

fn raw_key_indices(ledger: &RoundLedger, est: &ParamEstimate) -> Result<Vec<usize>> {
    if est.rounds != ledger.rounds() || est.m != ledger.schedule.m() {
        return Err(Error::InvalidParameter("estimate was not produced from this ledger".into()));
    }
    let mut disclosed = BitString::zeros(ledger.rounds());
    for &i in &est.disclosed_type1_indices {
        disclosed.set(i, true);
    }
    let indices: Vec<usize> = (0..ledger.rounds())
        .filter(|&i| !ledger.schedule.is_test(i) && !disclosed.get(i))
        .collect();
    if indices.len() != est.n {
        return Err(Error::InvalidParameter(format!(
            "estimate claims n = {} but {} rounds remain",
            est.n,
            indices.len()
        )));
    }
    Ok(indices)
}

/// Keep the undisclosed type-1 outcomes, in round order, for every party.
pub fn sift(ledger: &RoundLedger, est: &ParamEstimate) -> Result<RawKey> {
    let indices = raw_key_indices(ledger, est)?;
    let bits = ledger.outcomes.iter().map(|row| row.select(&indices)).collect();
    Ok(RawKey { bits, n: indices.len(), indices })
}

/// Simulator-side `Q_X^n`: the phase-error fraction on the raw-key rounds,
/// available only when the ledger carries phase-error bits.
pub fn key_phase_error_rate(ledger: &RoundLedger, est: &ParamEstimate) -> Result<Option<f64>> {
    let Some(pe) = &ledger.phase_errors else {
        return Ok(None);
    };
    let indices = raw_key_indices(ledger, est)?;
    let errors = indices.iter().filter(|&&i| pe.get(i)).count();
    Ok(Some(errors as f64 / indices.len().max(1) as f64))
}
