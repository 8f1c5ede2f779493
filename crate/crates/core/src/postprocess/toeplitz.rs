//! Toeplitz-matrix universal hashing.
//!
//! `T[i][j] = diag[i - j + n - 1]` for `i < l`, `j < n`. With `xr` the
//! reversed input, output bit `i` is the parity of `diag[i..i + n] & xr`, so
//! the bit-sliced path slides a word-aligned window over the diagonal bits.
//! Large products go through an FFT convolution instead.

use std::sync::Arc;

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};

/// Above this many matrix entries the FFT path is used.
const FFT_THRESHOLD: u128 = 1 << 32;
const FFT_CHUNK: usize = 1 << 18;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    n_in: usize,
    l_out: usize,
    diag_bits: BitString,
}

impl ToeplitzSeed {
    pub fn new(n_in: usize, l_out: usize, diag_bits: BitString) -> Result<Self> {
        if l_out == 0 || l_out > n_in {
            return Err(invalid(format!("need 0 < l_out <= n_in, got l = {l_out}, n = {n_in}")));
        }
        if diag_bits.len() != n_in + l_out - 1 {
            return Err(Error::LengthMismatch { expected: n_in + l_out - 1, actual: diag_bits.len() });
        }
        Ok(Self { n_in, l_out, diag_bits })
    }

    pub fn random<R: Rng + ?Sized>(n_in: usize, l_out: usize, rng: &mut R) -> Result<Self> {
        if l_out == 0 || l_out > n_in {
            return Err(invalid(format!("need 0 < l_out <= n_in, got l = {l_out}, n = {n_in}")));
        }
        Self::new(n_in, l_out, BitString::random(n_in + l_out - 1, rng))
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn l_out(&self) -> usize {
        self.l_out
    }

    pub fn diag_bits(&self) -> &BitString {
        &self.diag_bits
    }

    /// Matrix entry `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.diag_bits.get(i + self.n_in - 1 - j)
    }
}

/// `T x`, choosing the bit-sliced or FFT path by size.
pub fn privacy_amplify(key: &BitString, seed: &ToeplitzSeed) -> Result<BitString> {
    if key.len() != seed.n_in {
        return Err(Error::LengthMismatch { expected: seed.n_in, actual: key.len() });
    }
    if (seed.n_in as u128) * (seed.l_out as u128) > FFT_THRESHOLD {
        Ok(hash_fft(key, seed, FFT_CHUNK))
    } else {
        Ok(hash_bitsliced(key, seed))
    }
}

pub fn hash_bitsliced(key: &BitString, seed: &ToeplitzSeed) -> BitString {
    let xr = key.reversed();
    let xw = xr.words();
    let d = seed.diag_bits.words();
    let mut out = BitString::zeros(seed.l_out);
    let nw = xw.len();
    // Window for output i = 64a + s starts at diag word a shifted by s.
    let mut shifted = vec![0u64; d.len()];
    for s in 0..64.min(seed.l_out) {
        for (w, slot) in shifted.iter_mut().enumerate() {
            let lo = d[w] >> s;
            let hi = if s == 0 { 0 } else { d.get(w + 1).map_or(0, |h| h << (64 - s)) };
            *slot = lo | hi;
        }
        let mut i = s;
        while i < seed.l_out {
            let a = i >> 6;
            let mut acc = 0u64;
            for (k, &x) in xw.iter().enumerate().take(nw) {
                acc ^= shifted.get(a + k).copied().unwrap_or(0) & x;
            }
            if acc.count_ones() & 1 == 1 {
                out.set(i, true);
            }
            i += 64;
        }
    }
    out
}

/// FFT convolution over blocks of `chunk` inputs and outputs.
pub fn hash_fft(key: &BitString, seed: &ToeplitzSeed, chunk: usize) -> BitString {
    let (n, l) = (seed.n_in, seed.l_out);
    let chunk = chunk.max(1);
    let size = (3 * chunk).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(size);
    let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(size);
    let mut out = BitString::zeros(l);
    let mut xa = vec![Complex::new(0.0, 0.0); size];
    let mut da = vec![Complex::new(0.0, 0.0); size];
    let mut parity = vec![false; chunk];
    for i0 in (0..l).step_by(chunk) {
        let ic = chunk.min(l - i0);
        parity[..ic].iter_mut().for_each(|p| *p = false);
        for j0 in (0..n).step_by(chunk) {
            let jc = chunk.min(n - j0);
            // y_i += sum_j diag[i - j + n - 1] x_j. With u = j - j0 and
            // v = i - i0 the diagonal index is base + (v - u), base = i0 - j0 + n - 1.
            // Store diag[base - (jc - 1) + t] at t so the product sits at v + jc - 1.
            let base = (i0 + n - 1 - j0) as isize - (jc as isize - 1);
            let span = ic + jc - 1;
            xa.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            da.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for u in 0..jc {
                if key.get(j0 + u) {
                    xa[u].re = 1.0;
                }
            }
            for t in 0..span {
                let idx = base + t as isize;
                if idx >= 0 && (idx as usize) < seed.diag_bits.len() && seed.diag_bits.get(idx as usize) {
                    da[t].re = 1.0;
                }
            }
            fwd.process(&mut xa);
            fwd.process(&mut da);
            for (a, b) in xa.iter_mut().zip(&da) {
                *a *= b;
            }
            inv.process(&mut xa);
            let scale = 1.0 / size as f64;
            for (v, p) in parity[..ic].iter_mut().enumerate() {
                let c = (xa[v + jc - 1].re * scale).round() as i64;
                *p ^= c & 1 == 1;
            }
        }
        for (v, &p) in parity[..ic].iter().enumerate() {
            if p {
                out.set(i0 + v, true);
            }
        }
    }
    out
}

/// Dense reference multiply.
pub fn hash_dense(key: &BitString, seed: &ToeplitzSeed) -> BitString {
    (0..seed.l_out)
        .map(|i| (0..seed.n_in).fold(false, |acc, j| acc ^ (seed.entry(i, j) & key.get(j))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn hand_checked_two_by_four() {
        let seed = ToeplitzSeed::new(4, 2, BitString::parse("10110").unwrap()).unwrap();
        // Rows of T: diag[3 - j] = 1101, diag[4 - j] = 0110.
        let row0: String = (0..4).map(|j| if seed.entry(0, j) { '1' } else { '0' }).collect();
        let row1: String = (0..4).map(|j| if seed.entry(1, j) { '1' } else { '0' }).collect();
        assert_eq!(row0, "1101");
        assert_eq!(row1, "0110");
        for v in 0..16u8 {
            let x = BitString::from_bytes(&[v], 4).unwrap();
            let expect = hash_dense(&x, &seed);
            assert_eq!(hash_bitsliced(&x, &seed), expect);
            assert_eq!(hash_fft(&x, &seed, 2), expect);
        }
    }

    #[test]
    fn paths_agree_at_medium_size() {
        let mut r = rng::from_seed(7);
        for (n, l, chunk) in [(1000, 300, 128), (777, 777, 100), (4096, 65, 1000), (130, 129, 7)] {
            let seed = ToeplitzSeed::random(n, l, &mut r).unwrap();
            let x = BitString::random(n, &mut r);
            let a = hash_bitsliced(&x, &seed);
            assert_eq!(a, hash_fft(&x, &seed, chunk), "n={n} l={l}");
            if n * l < 400_000 {
                assert_eq!(a, hash_dense(&x, &seed));
            }
        }
    }

    #[test]
    fn seed_validation() {
        assert!(ToeplitzSeed::new(4, 5, BitString::zeros(8)).is_err());
        assert!(ToeplitzSeed::new(4, 2, BitString::zeros(4)).is_err());
        assert!(ToeplitzSeed::new(4, 0, BitString::zeros(3)).is_err());
        let s = ToeplitzSeed::new(4, 2, BitString::zeros(5)).unwrap();
        assert!(privacy_amplify(&BitString::zeros(5), &s).is_err());
    }
}
