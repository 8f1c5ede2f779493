//! One-time-pad encryption with a conference key and a usage ledger that
//! never hands out the same key bit twice.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyUse {
    pub offset: usize,
    pub bits: usize,
    pub label: String,
}

/// Key usage ledger; persisted next to the key as JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageLedger {
    /// First unused key bit; only ever moves forward.
    pub cursor: usize,
    pub uses: Vec<KeyUse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyStore {
    key: BitString,
    usage: UsageLedger,
}

impl KeyStore {
    pub fn new(key: BitString) -> Self {
        Self { key, usage: UsageLedger::default() }
    }

    pub fn with_usage(key: BitString, usage: UsageLedger) -> Result<Self> {
        if usage.cursor > key.len() {
            return Err(Error::KeyUsage(format!("ledger cursor {} beyond {}-bit key", usage.cursor, key.len())));
        }
        Ok(Self { key, usage })
    }

    pub fn usage(&self) -> &UsageLedger {
        &self.usage
    }

    pub fn key_len(&self) -> usize {
        self.key.len()
    }

    pub fn remaining(&self) -> usize {
        self.key.len() - self.usage.cursor
    }

    /// Mark `bits` bits starting at `offset` spent and return them.
    pub fn take(&mut self, offset: usize, bits: usize, label: &str) -> Result<BitString> {
        if offset < self.usage.cursor {
            return Err(Error::KeyUsage(format!(
                "offset {offset} overlaps spent key material (cursor at {})",
                self.usage.cursor
            )));
        }
        let end = offset
            .checked_add(bits)
            .filter(|&e| e <= self.key.len())
            .ok_or_else(|| {
                Error::KeyUsage(format!("{bits} bits from offset {offset} exceed the {}-bit key", self.key.len()))
            })?;
        self.usage.cursor = end;
        self.usage.uses.push(KeyUse { offset, bits, label: label.to_string() });
        Ok(self.key.slice(offset, end))
    }
}

/// Ciphertext file: magic `QCKC`, `offset u64`, `len u64`, then the bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub offset: usize,
    pub data: Vec<u8>,
}

const CT_MAGIC: &[u8; 4] = b"QCKC";

impl Ciphertext {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.data.len());
        out.extend_from_slice(CT_MAGIC);
        out.extend_from_slice(&(self.offset as u64).to_le_bytes());
        out.extend_from_slice(&(self.data.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..4] != CT_MAGIC {
            return Err(Error::Corrupt("not a ciphertext file".into()));
        }
        let offset = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
        let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        if bytes.len() - 20 != len {
            return Err(Error::Corrupt(format!("ciphertext holds {} bytes, header says {len}", bytes.len() - 20)));
        }
        Ok(Self { offset, data: bytes[20..].to_vec() })
    }
}

fn xor_stream(data: &[u8], pad: &BitString) -> Vec<u8> {
    data.iter().zip(pad.to_bytes()).map(|(a, b)| a ^ b).collect()
}

/// Encrypt at `offset`, or at the ledger cursor when `None`.
pub fn otp_encrypt(message: &[u8], store: &mut KeyStore, offset: Option<usize>) -> Result<Ciphertext> {
    let offset = offset.unwrap_or(store.usage.cursor);
    let pad = store.take(offset, 8 * message.len(), "encrypt")?;
    Ok(Ciphertext { offset, data: xor_stream(message, &pad) })
}

/// Decrypt with the receiver's own copy of the key.
pub fn otp_decrypt(ct: &Ciphertext, store: &mut KeyStore) -> Result<Vec<u8>> {
    let pad = store.take(ct.offset, 8 * ct.data.len(), "decrypt")?;
    Ok(xor_stream(&ct.data, &pad))
}

/// Deterministic binary PPM (P6) test image.
pub fn placeholder_image(width: usize, height: usize) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    for y in 0..height {
        for x in 0..width {
            let r = (255 * x / width.max(1)) as u8;
            let g = (255 * y / height.max(1)) as u8;
            let b = if ((x / 16) + (y / 16)) % 2 == 0 { 200 } else { 40 };
            out.extend_from_slice(&[r, g, b]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn stores(bits: usize) -> (KeyStore, KeyStore) {
        let key = BitString::random(bits, &mut rng::from_seed(1));
        (KeyStore::new(key.clone()), KeyStore::new(key))
    }

    #[test]
    fn round_trip_random_payloads() {
        let (mut a, mut b) = stores(100_000);
        let mut r = rng::from_seed(2);
        for len in [0, 1, 17, 1000] {
            let msg: Vec<u8> = (0..len).map(|_| r.random()).collect();
            let ct = otp_encrypt(&msg, &mut a, None).unwrap();
            let back = Ciphertext::from_bytes(&ct.to_bytes()).unwrap();
            assert_eq!(otp_decrypt(&back, &mut b).unwrap(), msg);
        }
        assert_eq!(a.usage().cursor, 8 * 1018);
        assert_eq!(a.usage(), &UsageLedger { cursor: 8 * 1018, uses: a.usage().uses.clone() });
    }

    #[test]
    fn reuse_and_overdraw_are_refused() {
        let (mut a, _) = stores(800);
        otp_encrypt(&[1, 2, 3], &mut a, Some(0)).unwrap();
        assert!(matches!(otp_encrypt(&[4], &mut a, Some(16)), Err(Error::KeyUsage(_))));
        assert!(matches!(otp_encrypt(&[0; 98], &mut a, None), Err(Error::KeyUsage(_))));
        assert_eq!(a.remaining(), 800 - 24);
        otp_encrypt(&[0; 97], &mut a, None).unwrap();
        assert_eq!(a.remaining(), 0);
    }

    #[test]
    fn demo_image_fits_the_key_budget() {
        let img = placeholder_image(211, 211);
        assert_eq!(img.len(), 15 + 211 * 211 * 3);
        assert!(8 * 211 * 211 * 3 <= 1_150_000);
        assert!((8.0 * 211.0 * 211.0 * 3.0 - 1.068e6_f64).abs() / 1.068e6 < 1e-3);
    }
}
