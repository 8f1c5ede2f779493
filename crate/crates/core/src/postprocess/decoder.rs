//! Sum-product syndrome decoding in the log-likelihood domain.

use super::ldpc::LdpcCode;
use crate::bits::BitString;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 50;
/// Magnitude used for bits known with certainty (public padding).
pub const KNOWN_LLR: f64 = 60.0;
const MIN_MAG: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub block: BitString,
    /// Iterations run; 0 when the input already matched the syndrome.
    pub iterations: usize,
    pub flipped: usize,
}

/// `phi(x) = -ln tanh(x / 2)`, its own inverse on `(0, inf)`.
#[inline]
fn phi(x: f64) -> f64 {
    let x = x.max(MIN_MAG);
    if x > 30.0 {
        2.0 * (-x).exp()
    } else {
        let e = x.exp();
        ((e + 1.0) / (e - 1.0)).ln()
    }
}

pub fn channel_llr(crossover: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&crossover) {
        return Err(invalid(format!("crossover {crossover} outside [0, 0.5)")));
    }
    let q = crossover.max(1e-9);
    Ok(((1.0 - q) / q).ln().min(KNOWN_LLR))
}

/// Recover Alice's block from Bob's copy over a BSC with the given crossover.
pub fn decode(
    code: &LdpcCode,
    received: &BitString,
    syndrome: &BitString,
    crossover: f64,
    max_iters: usize,
) -> Result<Decoded> {
    let llr = channel_llr(crossover)?;
    let priors: Vec<f64> = received.iter().map(|b| if b { -llr } else { llr }).collect();
    decode_llr(code, received, &priors, syndrome, max_iters)
}

/// As [`decode`], with explicit per-bit prior LLRs (positive favours 0).
pub fn decode_llr(
    code: &LdpcCode,
    received: &BitString,
    priors: &[f64],
    syndrome: &BitString,
    max_iters: usize,
) -> Result<Decoded> {
    let j = code.block_j();
    if received.len() != j || priors.len() != j {
        return Err(Error::LengthMismatch { expected: j, actual: received.len().min(priors.len()) });
    }
    if syndrome.len() != code.checks() {
        return Err(Error::LengthMismatch { expected: code.checks(), actual: syndrome.len() });
    }
    if code.syndrome(received)? == *syndrome {
        return Ok(Decoded { block: received.clone(), iterations: 0, flipped: 0 });
    }
    let row_ptr = code.row_ptr();
    let cols = code.cols();
    let mut c2v = vec![0.0f64; cols.len()];
    let mut v2c = vec![0.0f64; cols.len()];
    let mut v2c_neg = vec![false; cols.len()];
    let mut total = priors.to_vec();
    let mut hard = vec![false; j];
    let mut next = vec![0.0f64; j];

    for iter in 1..=max_iters {
        next.copy_from_slice(priors);
        for r in 0..code.checks() {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            let mut neg = syndrome.get(r);
            let mut sum = 0.0;
            for e in lo..hi {
                let t = total[cols[e] as usize] - c2v[e];
                neg ^= t < 0.0;
                let p = phi(t.abs());
                v2c[e] = p;
                v2c_neg[e] = t < 0.0;
                sum += p;
            }
            for e in lo..hi {
                let mag = phi((sum - v2c[e]).max(0.0));
                let out = if neg ^ v2c_neg[e] { -mag } else { mag };
                c2v[e] = out;
                next[cols[e] as usize] += out;
            }
        }
        std::mem::swap(&mut total, &mut next);
        for (h, &t) in hard.iter_mut().zip(&total) {
            *h = t < 0.0;
        }
        let satisfied = (0..code.checks()).all(|r| {
            let parity = cols[row_ptr[r]..row_ptr[r + 1]].iter().fold(false, |acc, &c| acc ^ hard[c as usize]);
            parity == syndrome.get(r)
        });
        if satisfied {
            let block = BitString::from_bools(&hard);
            let flipped = block.hamming_distance(received)?;
            return Ok(Decoded { block, iterations: iter, flipped });
        }
    }
    Err(Error::NotConverged { iterations: max_iters })
}
