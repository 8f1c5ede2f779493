//! Packed bit strings over 64-bit words.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64` (LSB first). Bits past
//! `len` in the last word are always zero; every mutating method keeps that
//! invariant so word-level parity and popcounts never need masking.

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self { words: Vec::with_capacity(bits.div_ceil(64)), len: 0 }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.words[i >> 6] |= 1 << (i & 63);
            }
        }
        s
    }

    /// Parse a string of `'0'`/`'1'` characters.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                other => return Err(Error::Corrupt(format!("invalid bit character {other:?}"))),
            }
        }
        Ok(s)
    }

    pub fn from_words(mut words: Vec<u64>, len: usize) -> Result<Self> {
        let need = len.div_ceil(64);
        if words.len() < need {
            return Err(Error::LengthMismatch { expected: need, actual: words.len() });
        }
        words.truncate(need);
        let mut s = Self { words, len };
        s.clear_tail();
        Ok(s)
    }

    /// Unpack `len` bits from LSB-first packed bytes.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        let need = len.div_ceil(8);
        if bytes.len() < need {
            return Err(Error::LengthMismatch { expected: need, actual: bytes.len() });
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bytes[..need].iter().enumerate() {
            words[i >> 3] |= (b as u64) << ((i & 7) * 8);
        }
        let mut s = Self { words, len };
        s.clear_tail();
        Ok(s)
    }

    /// Pack into LSB-first bytes (`ceil(len / 8)` of them).
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push((self.words[i >> 3] >> ((i & 7) * 8)) as u8);
        }
        out
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..len.div_ceil(64)).map(|_| rng.random::<u64>()).collect();
        let mut s = Self { words, len };
        s.clear_tail();
        s
    }

    /// Independent Bernoulli(`p`) bits.
    pub fn bernoulli<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            if rng.random::<f64>() < p {
                s.set(i, true);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1 << (i & 63);
    }

    pub fn push(&mut self, value: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        if value {
            self.words[self.len >> 6] |= 1 << (self.len & 63);
        }
        self.len += 1;
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Copy of bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len, "slice {start}..{end} out of {}", self.len);
        let mut out = BitString::zeros(end - start);
        let shift = start & 63;
        let base = start >> 6;
        for w in 0..out.words.len() {
            let lo = self.words.get(base + w).copied().unwrap_or(0);
            let word = if shift == 0 {
                lo
            } else {
                let hi = self.words.get(base + w + 1).copied().unwrap_or(0);
                (lo >> shift) | (hi << (64 - shift))
            };
            out.words[w] = word;
        }
        out.clear_tail();
        out
    }

    /// Zero-extend (or truncate) to `len` bits.
    pub fn resized(&self, len: usize) -> BitString {
        if len <= self.len {
            return self.slice(0, len);
        }
        let mut out = self.clone();
        out.words.resize(len.div_ceil(64), 0);
        out.len = len;
        out
    }

    pub fn reversed(&self) -> BitString {
        let mut out = BitString::zeros(self.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(self.len - 1 - i, true);
            }
        }
        out
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// XOR of all bits.
    pub fn parity(&self) -> bool {
        self.words.iter().fold(0u64, |acc, w| acc ^ w).count_ones() & 1 == 1
    }

    pub fn xor_assign(&mut self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch { expected: self.len, actual: other.len });
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        let mut out = self.clone();
        out.xor_assign(other)?;
        Ok(out)
    }

    pub fn hamming_distance(&self, other: &BitString) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch { expected: self.len, actual: other.len });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Bits at the given positions, in order.
    pub fn select(&self, indices: &[usize]) -> BitString {
        let mut out = BitString::zeros(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            if self.get(i) {
                out.set(k, true);
            }
        }
        out
    }

    fn clear_tail(&mut self) {
        let rem = self.len & 63;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}
