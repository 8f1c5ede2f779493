//! Key verification by polynomial hashing over GF(2^64).
//!
//! The key is split into 64-bit words `w_1..w_d` and hashed as
//! `sum_i w_i r^(d - i + 2) + len * r` with a public random point `r`,
//! then truncated to `t = ceil(log2(1 / eps_ec))` bits.

use rand::Rng;

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};

/// Low word of the reduction polynomial `x^64 + x^4 + x^3 + x + 1`.
const POLY: u64 = 0b1_1011;

pub fn gf64_mul(a: u64, b: u64) -> u64 {
    let mut wide: u128 = 0;
    let mut x = a as u128;
    let mut y = b;
    while y != 0 {
        if y & 1 == 1 {
            wide ^= x;
        }
        x <<= 1;
        y >>= 1;
    }
    // Two folding rounds bring the 128-bit product below 2^64.
    for _ in 0..2 {
        let hi = (wide >> 64) as u64;
        let lo = wide as u64;
        wide = lo as u128 ^ clmul(hi, POLY);
    }
    wide as u64
}

fn clmul(a: u64, b: u64) -> u128 {
    let mut out = 0u128;
    for i in 0..64 {
        if (b >> i) & 1 == 1 {
            out ^= (a as u128) << i;
        }
    }
    out
}

/// Tag width for a target failure probability.
pub fn tag_bits(eps_ec: f64) -> Result<usize> {
    if !(eps_ec > 0.0 && eps_ec < 1.0) {
        return Err(invalid(format!("eps_EC = {eps_ec} outside (0, 1)")));
    }
    Ok(((1.0 / eps_ec).log2().ceil() as usize).clamp(1, 64))
}

/// Public hash key, drawn after error correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashKey {
    pub point: u64,
    pub bits: usize,
}

impl HashKey {
    pub fn random<R: Rng + ?Sized>(eps_ec: f64, rng: &mut R) -> Result<Self> {
        Ok(Self { point: rng.random(), bits: tag_bits(eps_ec)? })
    }

    pub fn tag(&self, key: &BitString) -> u64 {
        let mut acc = 0u64;
        for &w in key.words() {
            acc = gf64_mul(acc ^ w, self.point);
        }
        acc = gf64_mul(acc ^ key.len() as u64, self.point);
        if self.bits >= 64 {
            acc
        } else {
            acc & ((1u64 << self.bits) - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verification {
    pub tags: Vec<u64>,
    pub tag_bits: usize,
}

/// Compare every party's tag with Alice's (the first key).
pub fn verify(keys: &[BitString], hk: &HashKey) -> Result<Verification> {
    let Some(alice) = keys.first() else { return Err(invalid("no keys to verify")) };
    let tags: Vec<u64> = keys.iter().map(|k| hk.tag(k)).collect();
    let reference = hk.tag(alice);
    if tags.iter().any(|&t| t != reference) {
        return Err(Error::VerificationFailed);
    }
    Ok(Verification { tags, tag_bits: hk.bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn field_axioms_on_samples() {
        let mut r = rng::from_seed(1);
        for _ in 0..200 {
            let (a, b, c): (u64, u64, u64) = (r.random(), r.random(), r.random());
            assert_eq!(gf64_mul(a, b), gf64_mul(b, a));
            assert_eq!(gf64_mul(gf64_mul(a, b), c), gf64_mul(a, gf64_mul(b, c)));
            assert_eq!(gf64_mul(a, b ^ c), gf64_mul(a, b) ^ gf64_mul(a, c));
            assert_eq!(gf64_mul(a, 1), a);
        }
        // x^63 * x = x^64 = x^4 + x^3 + x + 1
        assert_eq!(gf64_mul(1 << 63, 2), POLY);
    }

    #[test]
    fn tag_width() {
        assert_eq!(tag_bits(1e-13).unwrap(), 44);
        assert_eq!(tag_bits(0.5).unwrap(), 1);
        assert!(tag_bits(0.0).is_err());
    }

    #[test]
    fn identical_keys_pass_and_a_flip_fails() {
        let mut r = rng::from_seed(2);
        let key = BitString::random(10_000, &mut r);
        let hk = HashKey::random(1e-13, &mut r).unwrap();
        assert!(verify(&[key.clone(), key.clone(), key.clone()], &hk).is_ok());
        let mut bad = key.clone();
        bad.flip(1234);
        assert!(matches!(verify(&[key.clone(), key, bad], &hk), Err(Error::VerificationFailed)));
    }

    #[test]
    fn length_is_bound_into_the_tag() {
        let hk = HashKey { point: 0x1234_5678_9abc_def1, bits: 64 };
        assert_ne!(hk.tag(&BitString::zeros(64)), hk.tag(&BitString::zeros(128)));
    }

    #[test]
    fn short_tags_collide_at_about_two_to_minus_t() {
        let mut r = rng::from_seed(3);
        let x = BitString::random(512, &mut r);
        let mut y = x.clone();
        y.flip(7);
        let trials = 40_000;
        let hits = (0..trials)
            .filter(|_| {
                let hk = HashKey { point: r.random(), bits: 4 };
                hk.tag(&x) == hk.tag(&y)
            })
            .count();
        let rate = hits as f64 / trials as f64;
        assert!((rate - 1.0 / 16.0).abs() < 0.01, "{rate}");
    }
}
