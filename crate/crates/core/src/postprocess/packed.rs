//! Packed binary files for keys and syndrome streams.
//!
//! Layout, little-endian: magic `QCKB`, `version u8`, `kind u8`
//! (1 key, 2 syndrome), `block_j u32` and `checks u32` (zero for keys),
//! `eps f64` (security label; 0 when unused), `bits u64`, then
//! `ceil(bits / 8)` payload bytes, LSB first.

use std::io::{Read, Write};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"QCKB";
const VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackedKind {
    Key,
    Syndrome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedBits {
    pub kind: PackedKind,
    pub block_j: u32,
    pub checks: u32,
    pub eps: f64,
    pub bits: BitString,
}

impl PackedBits {
    pub fn key(bits: BitString, eps: f64) -> Self {
        Self { kind: PackedKind::Key, block_j: 0, checks: 0, eps, bits }
    }

    pub fn syndrome(bits: BitString, block_j: usize, checks: usize) -> Self {
        Self { kind: PackedKind::Syndrome, block_j: block_j as u32, checks: checks as u32, eps: 0.0, bits }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        let kind = match self.kind {
            PackedKind::Key => 1u8,
            PackedKind::Syndrome => 2u8,
        };
        w.write_all(&[VERSION, kind])?;
        w.write_all(&self.block_j.to_le_bytes())?;
        w.write_all(&self.checks.to_le_bytes())?;
        w.write_all(&self.eps.to_le_bytes())?;
        w.write_all(&(self.bits.len() as u64).to_le_bytes())?;
        w.write_all(&self.bits.to_bytes())?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 4 + 2 + 4 + 4 + 8 + 8];
        r.read_exact(&mut head).map_err(|_| Error::Corrupt("packed file header truncated".into()))?;
        if &head[..4] != MAGIC {
            return Err(Error::Corrupt("not a packed bit file (bad magic)".into()));
        }
        if head[4] != VERSION {
            return Err(Error::Corrupt(format!("unsupported packed version {}", head[4])));
        }
        let kind = match head[5] {
            1 => PackedKind::Key,
            2 => PackedKind::Syndrome,
            k => return Err(Error::Corrupt(format!("unknown packed kind {k}"))),
        };
        let u32_at = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes"));
        let block_j = u32_at(6);
        let checks = u32_at(10);
        let eps = f64::from_le_bytes(head[14..22].try_into().expect("8 bytes"));
        let len = usize::try_from(u64::from_le_bytes(head[22..30].try_into().expect("8 bytes")))
            .map_err(|_| Error::Corrupt("bit count overflows".into()))?;
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)?;
        if payload.len() != len.div_ceil(8) {
            return Err(Error::Corrupt(format!("payload of {} bytes, expected {}", payload.len(), len.div_ceil(8))));
        }
        Ok(Self { kind, block_j, checks, eps, bits: BitString::from_bytes(&payload, len)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn round_trips() {
        let mut r = rng::from_seed(5);
        for p in [
            PackedBits::key(BitString::random(1001, &mut r), 1.8e-8),
            PackedBits::syndrome(BitString::random(3 * 1620, &mut r), 6480, 1620),
        ] {
            let mut buf = Vec::new();
            p.write(&mut buf).unwrap();
            assert_eq!(PackedBits::read(&buf[..]).unwrap(), p);
            assert!(PackedBits::read(&buf[..buf.len() - 1]).is_err());
        }
        assert!(PackedBits::read(&b"XXXX"[..]).is_err());
    }
}
