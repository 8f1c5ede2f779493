use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::arith;
use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::rng;

const FORMAT_VERSION: u8 = 1;
/// version (8) + p as f64 (64) + CRC-32 of the flags (32).
pub const HEADER_BITS: usize = 8 + 64 + 32;

/// Which rounds are type-2 (X-basis) tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub rounds: usize,
    pub p: f64,
    /// Bit `i` set means round `i` is a type-2 round.
    #[serde(with = "crate::protocol::ledger::bits_as_string")]
    pub flags: BitString,
    /// Stream that generated the flags; unknown on the receiving side.
    pub seed: Option<u64>,
}

impl Schedule {
    pub fn from_flags(flags: BitString, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid(format!("p = {p} outside (0, 1)")));
        }
        Ok(Self { rounds: flags.len(), p, flags, seed: None })
    }

    /// Realised number of type-2 rounds.
    pub fn m(&self) -> usize {
        self.flags.count_ones()
    }

    pub fn is_test(&self, round: usize) -> bool {
        self.flags.get(round)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        (0..self.rounds).filter(|&i| self.flags.get(i)).collect()
    }

    pub fn key_indices(&self) -> Vec<usize> {
        (0..self.rounds).filter(|&i| !self.flags.get(i)).collect()
    }
}

/// I.i.d. Bernoulli(`p`) round types. A realisation without any type-2 round
/// is reported as [`Error::NoTestRounds`]; callers may retry with another
/// seed.
pub fn make_schedule(rounds: usize, p: f64, seed: u64) -> Result<Schedule> {
    if rounds == 0 {
        return Err(invalid("schedule needs at least one round"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("p = {p} outside (0, 1)")));
    }
    let mut r = rng::from_seed(seed);
    let mut flags = BitString::zeros(rounds);
    for i in 0..rounds {
        if r.random::<f64>() < p {
            flags.set(i, true);
        }
    }
    if flags.count_ones() == 0 {
        return Err(Error::NoTestRounds);
    }
    Ok(Schedule { rounds, p, flags, seed: Some(seed) })
}

/// Exactly `m` type-2 rounds at uniformly random positions; `p = m / L`.
pub fn make_schedule_exact(rounds: usize, m: usize, seed: u64) -> Result<Schedule> {
    if m == 0 || m >= rounds {
        return Err(invalid(format!("need 1 <= m < L, got m = {m}, L = {rounds}")));
    }
    let mut r = rng::from_seed(seed);
    let mut flags = BitString::zeros(rounds);
    for i in index::sample(&mut r, rounds, m) {
        flags.set(i, true);
    }
    Ok(Schedule { rounds, p: m as f64 / rounds as f64, flags, seed: Some(seed) })
}

/// Entropy-code the flags with a static Bernoulli(p) model. The stream is
/// self-describing apart from the round count.
pub fn compress_schedule(s: &Schedule) -> BitString {
    let mut out = BitString::with_capacity(HEADER_BITS + s.rounds / 8);
    push_word(&mut out, FORMAT_VERSION as u64, 8);
    push_word(&mut out, s.p.to_bits(), 64);
    push_word(&mut out, crc32fast::hash(&s.flags.to_bytes()) as u64, 32);
    let payload = arith::encode_bits(&s.flags, arith::quantize_probability(s.p));
    out.extend_from(&payload);
    out
}

pub fn decompress_schedule(bits: &BitString, rounds: usize) -> Result<Schedule> {
    if bits.len() < HEADER_BITS {
        return Err(Error::Corrupt(format!("schedule stream of {} bits has no header", bits.len())));
    }
    let version = read_word(bits, 0, 8) as u8;
    if version != FORMAT_VERSION {
        return Err(Error::Corrupt(format!("unknown schedule format version {version}")));
    }
    let p = f64::from_bits(read_word(bits, 8, 64));
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Corrupt(format!("schedule header carries p = {p}")));
    }
    let crc = read_word(bits, 72, 32) as u32;
    let payload = bits.slice(HEADER_BITS, bits.len());
    let flags = arith::decode_bits(&payload, rounds, arith::quantize_probability(p));
    if crc32fast::hash(&flags.to_bytes()) != crc {
        return Err(Error::Corrupt("schedule checksum mismatch".into()));
    }
    Ok(Schedule { rounds, p, flags, seed: None })
}

fn push_word(out: &mut BitString, value: u64, width: usize) {
    for i in 0..width {
        out.push((value >> i) & 1 == 1);
    }
}

fn read_word(bits: &BitString, start: usize, width: usize) -> u64 {
    (0..width).fold(0u64, |acc, i| acc | ((bits.get(start + i) as u64) << i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::entropy_h;

    #[test]
    fn fixed_seed_is_deterministic() {
        let a = make_schedule(10_000, 0.02, 77).unwrap();
        let b = make_schedule(10_000, 0.02, 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.flags, make_schedule(10_000, 0.02, 78).unwrap().flags);
    }

    #[test]
    fn tiny_p_is_almost_all_key_rounds() {
        let s = make_schedule(1_000_000, 1e-5, 1).unwrap();
        assert!((s.m() as f64 / 1e6) < 1e-4);
    }

    #[test]
    fn empty_test_set_is_flagged() {
        // 10 rounds at p = 1e-9 realise no type-2 round.
        assert!(matches!(make_schedule(10, 1e-9, 5), Err(Error::NoTestRounds)));
        assert!(make_schedule(0, 0.5, 5).is_err());
        assert!(make_schedule(10, 0.0, 5).is_err());
    }

    #[test]
    fn exact_mode_hits_m() {
        let s = make_schedule_exact(4_140_200, 50_100, 3).unwrap();
        assert_eq!(s.m(), 50_100);
        assert!(make_schedule_exact(10, 0, 3).is_err());
    }

    #[test]
    fn expected_test_count_at_reference_scale() {
        let s = make_schedule(4_140_000, 0.012, 21).unwrap();
        let mean = 4_140_000.0 * 0.012;
        let sd = (mean * 0.988_f64).sqrt();
        assert!((s.m() as f64 - mean).abs() < 4.0 * sd);
        assert!((mean - 5.01e4).abs() / 5.01e4 < 0.01);
    }

    #[test]
    fn all_zero_flags_compress_to_almost_nothing() {
        let s = Schedule::from_flags(BitString::zeros(1_000_000), 1e-4).unwrap();
        let c = compress_schedule(&s);
        // Header plus about L * log2(1 / (1 - p)) = 144 bits.
        assert!(c.len() < HEADER_BITS + 200, "{}", c.len());
        assert_eq!(decompress_schedule(&c, 1_000_000).unwrap().flags, s.flags);
    }

    #[test]
    fn compressed_length_near_entropy() {
        let s = make_schedule_exact(100_000, 1_200, 8).unwrap();
        let c = compress_schedule(&s);
        let target = 100_000.0 * entropy_h(0.012).unwrap();
        assert!((c.len() as f64 - target).abs() / target < 0.05, "{} vs {target}", c.len());
    }

    #[test]
    fn corruption_is_detected() {
        let s = make_schedule(20_000, 0.02, 4).unwrap();
        let c = compress_schedule(&s);
        for pos in [3, HEADER_BITS + 10, c.len() - 30] {
            let mut bad = c.clone();
            bad.flip(pos);
            assert!(decompress_schedule(&bad, 20_000).is_err(), "flip at {pos} undetected");
        }
        assert!(decompress_schedule(&c.slice(0, 50), 20_000).is_err());
    }
}
