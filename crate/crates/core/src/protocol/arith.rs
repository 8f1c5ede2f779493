//! Binary arithmetic coder with a static probability model.
//!
//! Integer implementation with 32-bit interval bounds and pending
//! ("follow") bits for the straddling case. Probabilities are quantised to
//! 16 bits.

use crate::bits::BitString;

const PRECISION: u32 = 32;
const TOP: u64 = (1 << PRECISION) - 1;
const HALF: u64 = 1 << (PRECISION - 1);
const QUARTER: u64 = 1 << (PRECISION - 2);
const PROB_BITS: u32 = 16;
const PROB_ONE: u64 = 1 << PROB_BITS;

/// Quantise `P(bit = 1)` to the coder's 16-bit scale, keeping both symbols
/// codable.
pub fn quantize_probability(p: f64) -> u16 {
    let q = (p * PROB_ONE as f64).round() as i64;
    q.clamp(1, PROB_ONE as i64 - 1) as u16
}

pub fn dequantize_probability(q: u16) -> f64 {
    q as f64 / PROB_ONE as f64
}

struct Interval {
    low: u64,
    high: u64,
}

impl Interval {
    fn new() -> Self {
        Self { low: 0, high: TOP }
    }

    /// Split point: symbol 0 owns `[low, split]`, symbol 1 `(split, high]`.
    #[inline]
    fn split(&self, p_one: u16) -> u64 {
        let range = self.high - self.low + 1;
        let p_zero = PROB_ONE - p_one as u64;
        self.low + ((range * p_zero) >> PROB_BITS) - 1
    }
}

pub struct Encoder {
    iv: Interval,
    pending: u64,
    out: BitString,
    p_one: u16,
}

impl Encoder {
    pub fn new(p_one: u16) -> Self {
        Self { iv: Interval::new(), pending: 0, out: BitString::new(), p_one }
    }

    fn emit(&mut self, bit: bool) {
        self.out.push(bit);
        for _ in 0..self.pending {
            self.out.push(!bit);
        }
        self.pending = 0;
    }

    pub fn encode(&mut self, bit: bool) {
        let split = self.iv.split(self.p_one);
        if bit {
            self.iv.low = split + 1;
        } else {
            self.iv.high = split;
        }
        loop {
            if self.iv.high < HALF {
                self.emit(false);
            } else if self.iv.low >= HALF {
                self.emit(true);
                self.iv.low -= HALF;
                self.iv.high -= HALF;
            } else if self.iv.low >= QUARTER && self.iv.high < HALF + QUARTER {
                self.pending += 1;
                self.iv.low -= QUARTER;
                self.iv.high -= QUARTER;
            } else {
                break;
            }
            self.iv.low <<= 1;
            self.iv.high = (self.iv.high << 1) | 1;
        }
    }

    pub fn finish(mut self) -> BitString {
        self.pending += 1;
        if self.iv.low < QUARTER {
            self.emit(false);
        } else {
            self.emit(true);
        }
        self.out
    }
}

pub struct Decoder<'a> {
    iv: Interval,
    value: u64,
    input: &'a BitString,
    pos: usize,
    p_one: u16,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a BitString, p_one: u16) -> Self {
        let mut d = Self { iv: Interval::new(), value: 0, input, pos: 0, p_one };
        for _ in 0..PRECISION {
            d.value = (d.value << 1) | d.next_bit();
        }
        d
    }

    /// Bits past the end of the stream read as zero.
    fn next_bit(&mut self) -> u64 {
        let b = if self.pos < self.input.len() { self.input.get(self.pos) as u64 } else { 0 };
        self.pos += 1;
        b
    }

    pub fn decode(&mut self) -> bool {
        let split = self.iv.split(self.p_one);
        let bit = self.value > split;
        if bit {
            self.iv.low = split + 1;
        } else {
            self.iv.high = split;
        }
        loop {
            if self.iv.high < HALF {
            } else if self.iv.low >= HALF {
                self.iv.low -= HALF;
                self.iv.high -= HALF;
                self.value -= HALF;
            } else if self.iv.low >= QUARTER && self.iv.high < HALF + QUARTER {
                self.iv.low -= QUARTER;
                self.iv.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.iv.low <<= 1;
            self.iv.high = (self.iv.high << 1) | 1;
            self.value = (self.value << 1) | self.next_bit();
        }
        bit
    }
}

pub fn encode_bits(bits: &BitString, p_one: u16) -> BitString {
    let mut enc = Encoder::new(p_one);
    for b in bits.iter() {
        enc.encode(b);
    }
    enc.finish()
}

pub fn decode_bits(code: &BitString, count: usize, p_one: u16) -> BitString {
    let mut dec = Decoder::new(code, p_one);
    (0..count).map(|_| dec.decode()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn quantisation_keeps_both_symbols() {
        assert_eq!(quantize_probability(0.0), 1);
        assert_eq!(quantize_probability(1.0), u16::MAX);
        assert!((dequantize_probability(quantize_probability(0.012)) - 0.012).abs() < 1e-5);
    }

    #[test]
    fn code_length_tracks_information_content() {
        let mut r = rng::from_seed(9);
        let p = 0.05;
        let bits = BitString::bernoulli(50_000, p, &mut r);
        let q = quantize_probability(p);
        let code = encode_bits(&bits, q);
        let pq = dequantize_probability(q);
        let ones = bits.count_ones() as f64;
        let ideal = -(ones * pq.log2() + (bits.len() as f64 - ones) * (1.0 - pq).log2());
        assert!((code.len() as f64 - ideal).abs() < 4.0, "{} vs {ideal}", code.len());
        assert_eq!(decode_bits(&code, bits.len(), q), bits);
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(any::<bool>(), 0..2000), p in 0.001f64..0.999) {
            let s = BitString::from_bools(&bits);
            let q = quantize_probability(p);
            let code = encode_bits(&s, q);
            prop_assert_eq!(decode_bits(&code, s.len(), q), s);
        }
    }
}
