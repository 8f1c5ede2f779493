//! One-to-many reconciliation, verification, privacy amplification and the
//! pre-shared key deduction.

mod decoder;
mod ldpc;
pub mod packed;
mod toeplitz;
mod verify;

use serde::{Deserialize, Serialize};

pub use decoder::{channel_llr, decode, decode_llr, Decoded, DEFAULT_MAX_ITERS, KNOWN_LLR};
pub use ldpc::{gf2_rank, CodeRate, LdpcCode, DEFAULT_BLOCK, SHORT_BLOCK};
pub use toeplitz::{hash_bitsliced, hash_dense, hash_fft, privacy_amplify, ToeplitzSeed};
pub use verify::{gf64_mul, tag_bits, verify, HashKey, Verification};

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::keyrate::h;
use crate::rng;

/// Highest tolerated corrected QBER per rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateTable {
    pub thresholds: Vec<RateThreshold>,
    /// Extra headroom required below a threshold.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateThreshold {
    pub rate: CodeRate,
    pub max_qber: f64,
}

impl Default for RateTable {
    fn default() -> Self {
        Self {
            thresholds: vec![
                RateThreshold { rate: CodeRate::R4_5, max_qber: 0.012 },
                RateThreshold { rate: CodeRate::R3_4, max_qber: 0.020 },
                RateThreshold { rate: CodeRate::R2_3, max_qber: 0.035 },
            ],
            margin: 0.0,
        }
    }
}

/// Highest rate whose threshold covers `qber_corrected + margin`.
pub fn select_code_rate(qber_corrected: f64, table: &RateTable) -> Result<CodeRate> {
    if !(0.0..0.5).contains(&qber_corrected) {
        return Err(invalid(format!("corrected QBER {qber_corrected} outside [0, 0.5)")));
    }
    table
        .thresholds
        .iter()
        .filter(|t| qber_corrected + table.margin <= t.max_qber)
        .max_by(|a, b| a.rate.value().total_cmp(&b.rate.value()))
        .map(|t| t.rate)
        .ok_or(Error::NoCode(qber_corrected))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconciled {
    /// Alice's key followed by each Bob's corrected key, unpadded.
    pub keys: Vec<BitString>,
    pub blocks: usize,
    pub pad_bits: usize,
    /// The broadcast syndrome stream, `blocks * (j - k)` bits.
    pub syndrome: BitString,
    /// Errors corrected per Bob.
    pub corrected: Vec<usize>,
    /// Largest iteration count per Bob.
    pub max_iterations: Vec<usize>,
}

impl Reconciled {
    pub fn leakage_bits(&self) -> u64 {
        self.syndrome.len() as u64
    }
}

/// Alice broadcasts one syndrome stream; every Bob decodes it against his
/// own key. The last block is padded with public zeros that never enter the
/// key. `crossover` sets the decoder's channel model.
pub fn correct_all(
    alice: &BitString,
    bobs: &[BitString],
    code: &LdpcCode,
    crossover: f64,
    max_iters: usize,
) -> Result<Reconciled> {
    let n = alice.len();
    if n == 0 {
        return Err(invalid("empty key"));
    }
    if let Some(b) = bobs.iter().find(|b| b.len() != n) {
        return Err(Error::LengthMismatch { expected: n, actual: b.len() });
    }
    let j = code.block_j();
    let blocks = n.div_ceil(j);
    let padded = blocks * j;
    let llr = channel_llr(crossover)?;
    let alice_p = alice.resized(padded);
    let mut syndrome = BitString::with_capacity(blocks * code.checks());
    let mut alice_syn = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let s = code.syndrome(&alice_p.slice(b * j, (b + 1) * j))?;
        syndrome.extend_from(&s);
        alice_syn.push(s);
    }

    let mut keys = vec![alice.clone()];
    let mut corrected = Vec::with_capacity(bobs.len());
    let mut max_iterations = Vec::with_capacity(bobs.len());
    for (party, bob) in bobs.iter().enumerate() {
        let bob_p = bob.resized(padded);
        let mut out = BitString::with_capacity(padded);
        let (mut fixed, mut iters) = (0, 0);
        for (b, s) in alice_syn.iter().enumerate() {
            let block = bob_p.slice(b * j, (b + 1) * j);
            let priors: Vec<f64> = (0..j)
                .map(|i| {
                    if b * j + i >= n {
                        KNOWN_LLR
                    } else if block.get(i) {
                        -llr
                    } else {
                        llr
                    }
                })
                .collect();
            let d = decode_llr(code, &block, &priors, s, max_iters).map_err(|e| match e {
                Error::NotConverged { .. } => Error::EcFailure { party: party + 1, block: b },
                other => other,
            })?;
            fixed += d.flipped;
            iters = iters.max(d.iterations);
            out.extend_from(&d.block);
        }
        keys.push(out.slice(0, n));
        corrected.push(fixed);
        max_iterations.push(iters);
    }
    Ok(Reconciled { keys, blocks, pad_bits: padded - n, syndrome, corrected, max_iterations })
}

/// Bits consumed by the pre-shared schedule: `ceil(L h(p))`.
pub fn preshared_bits(rounds: u64, p: f64) -> u64 {
    (rounds as f64 * h(p)).ceil() as u64
}

/// `l - ceil(L h(p))`, the key-growing net output.
pub fn deduct_preshared(l: u64, rounds: u64, p: f64) -> Result<u64> {
    let need = preshared_bits(rounds, p);
    l.checked_sub(need).ok_or(Error::NotKeyGrowing { available: l, required: need })
}

/// The distilled conference key as held by every party.
#[derive(Debug, Clone, PartialEq)]
pub struct ConferenceKey {
    /// One copy per party, Alice first.
    pub bits: Vec<BitString>,
    pub length: usize,
    /// `eps_tot` the key was distilled under.
    pub security_label: f64,
    /// Pre-shared bits to be replenished from this key.
    pub preshared_bits: u64,
}

impl ConferenceKey {
    pub fn new(bits: Vec<BitString>, security_label: f64, preshared_bits: u64) -> Result<Self> {
        let Some(first) = bits.first() else { return Err(invalid("no parties")) };
        if bits.iter().any(|b| b != first) {
            return Err(Error::VerificationFailed);
        }
        Ok(Self { length: first.len(), bits, security_label, preshared_bits })
    }

    pub fn parties(&self) -> usize {
        self.bits.len()
    }

    pub fn all_identical(&self) -> bool {
        self.bits.windows(2).all(|w| w[0] == w[1])
    }

    /// Signed net output after replenishing the pre-shared key.
    pub fn net_bits(&self) -> i64 {
        self.length as i64 - self.preshared_bits as i64
    }

    pub fn key_growing(&self) -> bool {
        self.net_bits() > 0
    }
}

/// One Monte-Carlo point of a frame-error-rate scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FerPoint {
    pub rate: CodeRate,
    pub block_j: usize,
    pub qber: f64,
    pub blocks: usize,
    pub failures: usize,
    pub mean_iterations: f64,
}

/// Decode `blocks` random blocks through a BSC(`qber`).
pub fn measure_fer(code: &LdpcCode, qber: f64, blocks: usize, max_iters: usize, seed: u64) -> Result<FerPoint> {
    let rate = code.rate().ok_or_else(|| invalid("FER scans need a built-in rate"))?;
    let mut r = rng::stream(seed, "fer");
    let (mut failures, mut iters) = (0, 0usize);
    for _ in 0..blocks {
        let x = BitString::random(code.block_j(), &mut r);
        let y = x.xor(&BitString::bernoulli(code.block_j(), qber, &mut r))?;
        match decode(code, &y, &code.syndrome(&x)?, qber, max_iters) {
            Ok(d) if d.block == x => iters += d.iterations,
            Ok(d) => {
                failures += 1;
                iters += d.iterations;
            }
            Err(Error::NotConverged { iterations }) => {
                failures += 1;
                iters += iterations;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FerPoint {
        rate,
        block_j: code.block_j(),
        qber,
        blocks,
        failures,
        mean_iterations: iters as f64 / blocks.max(1) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_selection_defaults() {
        let t = RateTable::default();
        assert_eq!(select_code_rate(0.0, &t).unwrap(), CodeRate::R4_5);
        assert_eq!(select_code_rate(0.012, &t).unwrap(), CodeRate::R4_5);
        assert_eq!(select_code_rate(0.018, &t).unwrap(), CodeRate::R3_4);
        assert_eq!(select_code_rate(0.03, &t).unwrap(), CodeRate::R2_3);
        assert!(matches!(select_code_rate(0.10, &t), Err(Error::NoCode(_))));
        assert!(select_code_rate(0.6, &t).is_err());
        let tight = RateTable { margin: 0.005, ..RateTable::default() };
        assert_eq!(select_code_rate(0.012, &tight).unwrap(), CodeRate::R3_4);
    }

    #[test]
    fn identical_inputs_need_no_corrections() {
        let code = LdpcCode::construct(CodeRate::R3_4, SHORT_BLOCK).unwrap();
        let mut r = rng::from_seed(1);
        let key = BitString::random(10_000, &mut r);
        let rec = correct_all(&key, &[key.clone(), key.clone(), key.clone()], &code, 0.01, 50).unwrap();
        assert_eq!(rec.blocks, 2);
        assert_eq!(rec.pad_bits, 2 * SHORT_BLOCK - 10_000);
        assert!(rec.keys.iter().all(|k| *k == key));
        assert_eq!(rec.corrected, vec![0, 0, 0]);
        assert_eq!(rec.leakage_bits(), 2 * (SHORT_BLOCK as u64 / 4));
    }

    #[test]
    fn asymmetric_bobs_share_one_broadcast() {
        let code = LdpcCode::construct(CodeRate::R2_3, SHORT_BLOCK).unwrap();
        let mut r = rng::from_seed(2);
        let key = BitString::random(3 * SHORT_BLOCK, &mut r);
        let bobs: Vec<BitString> = [0.005, 0.010, 0.016]
            .iter()
            .map(|&q| key.xor(&BitString::bernoulli(key.len(), q, &mut r)).unwrap())
            .collect();
        let rec = correct_all(&key, &bobs, &code, 0.016, 50).unwrap();
        assert!(rec.keys.iter().all(|k| *k == key));
        assert_eq!(rec.leakage_bits(), 3 * (SHORT_BLOCK - code.k()) as u64);
        assert!(rec.corrected[0] < rec.corrected[2]);
    }

    #[test]
    fn hopeless_bob_is_an_ec_failure() {
        let code = LdpcCode::construct(CodeRate::R4_5, SHORT_BLOCK).unwrap();
        let mut r = rng::from_seed(3);
        let key = BitString::random(SHORT_BLOCK, &mut r);
        let bad = key.xor(&BitString::bernoulli(key.len(), 0.1, &mut r)).unwrap();
        let out = correct_all(&key, &[key.clone(), bad], &code, 0.01, 20);
        assert!(matches!(out, Err(Error::EcFailure { party: 2, block: 0 })));
    }

    #[test]
    fn preshared_arithmetic() {
        assert_eq!(preshared_bits(1_000_000, 0.0), 0);
        let d = preshared_bits(4_140_000, 0.012);
        assert!((d as f64 - 3.88e5).abs() / 3.88e5 < 0.01, "{d}");
        assert_eq!(deduct_preshared(d + 10, 4_140_000, 0.012).unwrap(), 10);
        assert!(matches!(deduct_preshared(d - 1, 4_140_000, 0.012), Err(Error::NotKeyGrowing { .. })));
    }

    #[test]
    fn conference_key_requires_agreement() {
        let k = BitString::parse("1011").unwrap();
        let ck = ConferenceKey::new(vec![k.clone(), k.clone(), k.clone()], 1e-8, 3).unwrap();
        assert_eq!(ck.net_bits(), 1);
        assert!(ck.key_growing());
        let other = BitString::parse("1010").unwrap();
        assert!(ConferenceKey::new(vec![k, other], 1e-8, 0).is_err());
    }
}
