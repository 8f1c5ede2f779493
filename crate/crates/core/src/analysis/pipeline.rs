//! Ledger to conference key: estimate, sift, reconcile, verify, amplify.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{finite_key_length, FiniteKey, Leakage, RateInputs, SecurityBudget};
use crate::postprocess::{
    correct_all, preshared_bits, privacy_amplify, select_code_rate, verify, CodeRate, ConferenceKey, HashKey,
    LdpcCode, RateTable, ToeplitzSeed, DEFAULT_BLOCK, DEFAULT_MAX_ITERS,
};
use crate::protocol::{
    compress_schedule, estimate_params, key_phase_error_rate, sift, Announcement, InProcessChannel, ParamEstimate,
    RoundLedger, Transport,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessSettings {
    pub block_j: usize,
    pub max_iters: usize,
    pub rate_table: RateTable,
}

impl Default for PostprocessSettings {
    fn default() -> Self {
        Self { block_j: DEFAULT_BLOCK, max_iters: DEFAULT_MAX_ITERS, rate_table: RateTable::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    pub budget: SecurityBudget,
    pub post: PostprocessSettings,
    /// Master seed of the public randomness (sampling, hash keys, seeds).
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    /// A common key was distilled.
    Key,
    /// No code rate tolerates the corrected QBER.
    NoCode,
    /// The finite-key length after realized leakage is not positive.
    NoKey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationSummary {
    pub rate: CodeRate,
    pub block_j: usize,
    pub construction_id: String,
    pub blocks: usize,
    pub pad_bits: usize,
    pub syndrome_bits: u64,
    pub corrected: Vec<usize>,
    pub max_iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub rounds: usize,
    pub m: usize,
    pub n: usize,
    pub p: f64,
    pub q_x_m: f64,
    pub q_ab_m: Vec<f64>,
    pub qber_m: f64,
    /// Simulator-only phase-error rate on the key rounds.
    pub q_x_n: Option<f64>,
}

impl EstimateSummary {
    fn new(est: &ParamEstimate, p: f64, q_x_n: Option<f64>) -> Self {
        Self {
            rounds: est.rounds,
            m: est.m,
            n: est.n,
            p,
            q_x_m: est.q_x_m,
            q_ab_m: est.q_ab_m.clone(),
            qber_m: est.qber_m,
            q_x_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub status: PipelineStatus,
    pub estimate: EstimateSummary,
    pub qber_corrected: f64,
    /// Finite-key length with the Shannon-limit EC term.
    pub bound: FiniteKey,
    /// Finite-key length charged with the bits actually disclosed.
    pub realized: Option<FiniteKey>,
    pub reconciliation: Option<ReconciliationSummary>,
    pub tag_bits: usize,
    pub leakage_bits: u64,
    pub schedule_compressed_bits: usize,
    pub channel: InProcessChannel,
    pub key: Option<ConferenceKey>,
}

/// Run the classical post-processing on a round ledger.
///
/// Reconciliation or verification failures are errors; running out of key
/// is reported through [`PipelineStatus`].
pub fn run_pipeline(ledger: &RoundLedger, s: &PipelineSettings) -> Result<PipelineOutcome> {
    let parties = ledger.parties();
    if s.budget.parties != parties {
        return Err(Error::InvalidParameter(format!(
            "budget is for {} parties, ledger has {parties}",
            s.budget.parties
        )));
    }
    let p = ledger.schedule.p;
    let mut channel = InProcessChannel::new();
    let announce = |ch: &mut InProcessChannel, from: &str, label: &str, bits: u64, leak: bool| {
        ch.broadcast(Announcement { from: from.into(), label: label.into(), bits, counts_as_leakage: leak })
    };

    let est = estimate_params(ledger, rng::derive_seed(s.seed, "pe-sample"))?;
    for name in &ledger.party_names {
        announce(&mut channel, name, "type-2 outcomes", est.m as u64, false);
        announce(&mut channel, name, "disclosed type-1 outcomes", est.m as u64, false);
    }
    let raw = sift(ledger, &est)?;
    let q_x_n = key_phase_error_rate(ledger, &est)?;
    let compressed = compress_schedule(&ledger.schedule).len();

    let inputs = RateInputs::new(ledger.rounds() as u64, est.m as u64, p, est.q_x_m, est.qber_m, parties)?;
    let bound = finite_key_length(&inputs, &s.budget)?;
    let qber_corrected = (est.qber_m + 2.0 * bound.xi_z).min(0.5 - f64::EPSILON);
    let summary = EstimateSummary::new(&est, p, q_x_n);
    let mut outcome = PipelineOutcome {
        status: PipelineStatus::NoCode,
        estimate: summary,
        qber_corrected,
        bound,
        realized: None,
        reconciliation: None,
        tag_bits: 0,
        leakage_bits: 0,
        schedule_compressed_bits: compressed,
        channel: InProcessChannel::new(),
        key: None,
    };
    let rate = match select_code_rate(qber_corrected, &s.post.rate_table) {
        Ok(r) => r,
        Err(Error::NoCode(_)) => {
            outcome.channel = channel;
            return Ok(outcome);
        }
        Err(e) => return Err(e),
    };
    let code = LdpcCode::construct(rate, s.post.block_j)?;
    let rec = correct_all(&raw.bits[0], &raw.bits[1..], &code, est.qber_m, s.post.max_iters)?;
    announce(&mut channel, &ledger.party_names[0], "syndrome", rec.leakage_bits(), true);

    let hk = HashKey::random(s.budget.eps_ec, &mut rng::stream(s.seed, "verify"))?;
    announce(&mut channel, &ledger.party_names[0], "verification hash point", 64, false);
    let v = verify(&rec.keys, &hk)?;
    announce(&mut channel, &ledger.party_names[0], "verification tag", v.tag_bits as u64, true);
    let leakage = rec.leakage_bits() + v.tag_bits as u64;

    let realized = finite_key_length(&inputs.with_leakage(Leakage::Realized(leakage)), &s.budget)?;
    outcome.reconciliation = Some(ReconciliationSummary {
        rate,
        block_j: code.block_j(),
        construction_id: code.construction_id().to_string(),
        blocks: rec.blocks,
        pad_bits: rec.pad_bits,
        syndrome_bits: rec.leakage_bits(),
        corrected: rec.corrected.clone(),
        max_iterations: rec.max_iterations.clone(),
    });
    outcome.tag_bits = v.tag_bits;
    outcome.leakage_bits = leakage;
    outcome.status = PipelineStatus::NoKey;
    let l_out = realized.secret_bits as usize;
    outcome.realized = Some(realized);
    if l_out > 0 && l_out <= raw.n {
        let seed = ToeplitzSeed::random(raw.n, l_out, &mut rng::stream(s.seed, "toeplitz"))?;
        announce(&mut channel, &ledger.party_names[0], "toeplitz seed", seed.diag_bits().len() as u64, false);
        let bits = rec.keys.iter().map(|k| privacy_amplify(k, &seed)).collect::<Result<Vec<_>>>()?;
        outcome.key = Some(ConferenceKey::new(bits, s.budget.eps_tot, preshared_bits(ledger.rounds() as u64, p))?);
        outcome.status = PipelineStatus::Key;
    }
    outcome.channel = channel;
    Ok(outcome)
}
