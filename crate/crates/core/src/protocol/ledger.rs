//! Round ledger and its on-disk forms.
//!
//! Binary layout (all integers little-endian): the magic `QCKL`, then a
//! sequence of records, each a `u32` byte length followed by the payload.
//!
//! 1. header: `version u16, parties u16, rounds u64, p f64, seed u64,
//!    flags u8` (bit 0: phase-error record present, bit 1: seed present),
//!    then per party a `u16` name length and UTF-8 name;
//! 2. the type-2 flags, `ceil(L/8)` bytes, LSB first;
//! 3. one record per party with its `L` outcome bits, packed the same way;
//! 4. optionally the simulator-only phase-error bits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::schedule::Schedule;
use crate::bits::BitString;
use crate::error::{invalid, Error, Result};

pub const MAGIC: &[u8; 4] = b"QCKL";
pub const VERSION: u16 = 1;

/// Every round's type and every party's outcome bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub schedule: Schedule,
    pub party_names: Vec<String>,
    /// One `L`-bit row per party, Alice first.
    #[serde(with = "bit_rows")]
    pub outcomes: Vec<BitString>,
    /// Simulator-only: for every round, whether an X measurement would have
    /// shown odd parity. Never used by the protocol itself.
    #[serde(with = "opt_bits", default, skip_serializing_if = "Option::is_none")]
    pub phase_errors: Option<BitString>,
}

pub fn default_party_names(parties: usize) -> Vec<String> {
    std::iter::once("Alice".to_string())
        .chain((1..parties).map(|i| format!("Bob{i}")))
        .collect()
}

impl RoundLedger {
    pub fn new(schedule: Schedule, outcomes: Vec<BitString>, party_names: Vec<String>) -> Result<Self> {
        let l = Self { schedule, party_names, outcomes, phase_errors: None };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outcomes.len() < 3 {
            return Err(invalid(format!(
                "a conference needs at least 3 parties, got {}",
                self.outcomes.len()
            )));
        }
        if self.party_names.len() != self.outcomes.len() {
            return Err(Error::LengthMismatch {
                expected: self.outcomes.len(),
                actual: self.party_names.len(),
            });
        }
        if self.schedule.flags.len() != self.schedule.rounds {
            return Err(Error::LengthMismatch {
                expected: self.schedule.rounds,
                actual: self.schedule.flags.len(),
            });
        }
        for row in self.outcomes.iter().chain(self.phase_errors.iter()) {
            if row.len() != self.schedule.rounds {
                return Err(Error::LengthMismatch { expected: self.schedule.rounds, actual: row.len() });
            }
        }
        Ok(())
    }

    pub fn rounds(&self) -> usize {
        self.schedule.rounds
    }

    pub fn parties(&self) -> usize {
        self.outcomes.len()
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        w.write_all(MAGIC)?;
        let mut header = Vec::new();
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&(self.parties() as u16).to_le_bytes());
        header.extend_from_slice(&(self.rounds() as u64).to_le_bytes());
        header.extend_from_slice(&self.schedule.p.to_le_bytes());
        header.extend_from_slice(&self.schedule.seed.unwrap_or(0).to_le_bytes());
        let flags = self.phase_errors.is_some() as u8 | ((self.schedule.seed.is_some() as u8) << 1);
        header.push(flags);
        for name in &self.party_names {
            let bytes = name.as_bytes();
            let len = u16::try_from(bytes.len()).map_err(|_| invalid("party name too long"))?;
            header.extend_from_slice(&len.to_le_bytes());
            header.extend_from_slice(bytes);
        }
        write_record(&mut w, &header)?;
        write_record(&mut w, &self.schedule.flags.to_bytes())?;
        for row in &self.outcomes {
            write_record(&mut w, &row.to_bytes())?;
        }
        if let Some(pe) = &self.phase_errors {
            write_record(&mut w, &pe.to_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|_| Error::Corrupt("truncated ledger".into()))?;
        if &magic != MAGIC {
            return Err(Error::Corrupt("not a round ledger (bad magic)".into()));
        }
        let header = read_record(&mut r)?;
        let mut cur = Cursor { buf: &header, pos: 0 };
        let version = u16::from_le_bytes(cur.take()?);
        if version != VERSION {
            return Err(Error::Corrupt(format!("unsupported ledger version {version}")));
        }
        let parties = u16::from_le_bytes(cur.take()?) as usize;
        let rounds = usize::try_from(u64::from_le_bytes(cur.take()?))
            .map_err(|_| Error::Corrupt("round count overflows".into()))?;
        let p = f64::from_le_bytes(cur.take()?);
        let seed = u64::from_le_bytes(cur.take()?);
        let [flags] = cur.take::<1>()?;
        let mut party_names = Vec::with_capacity(parties);
        for _ in 0..parties {
            let len = u16::from_le_bytes(cur.take()?) as usize;
            let bytes = cur.slice(len)?;
            party_names.push(
                String::from_utf8(bytes.to_vec()).map_err(|_| Error::Corrupt("party name is not UTF-8".into()))?,
            );
        }
        let read_bits = |r: &mut R| -> Result<BitString> {
            let rec = read_record(r)?;
            if rec.len() != rounds.div_ceil(8) {
                return Err(Error::Corrupt(format!(
                    "bit record of {} bytes, expected {}",
                    rec.len(),
                    rounds.div_ceil(8)
                )));
            }
            BitString::from_bytes(&rec, rounds)
        };
        let type_flags = read_bits(&mut r)?;
        let mut outcomes = Vec::with_capacity(parties);
        for _ in 0..parties {
            outcomes.push(read_bits(&mut r)?);
        }
        let phase_errors = if flags & 1 == 1 { Some(read_bits(&mut r)?) } else { None };
        let schedule = Schedule {
            rounds,
            p,
            flags: type_flags,
            seed: (flags & 2 == 2).then_some(seed),
        };
        let ledger = Self { schedule, party_names, outcomes, phase_errors };
        ledger.validate().map_err(|e| Error::Corrupt(e.to_string()))?;
        Ok(ledger)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let l: Self = serde_json::from_str(text).map_err(|e| Error::Corrupt(e.to_string()))?;
        l.validate()?;
        Ok(l)
    }
}

fn write_record<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len()).map_err(|_| invalid("record exceeds 4 GiB"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(payload)?;
    Ok(())
}

fn read_record<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len).map_err(|_| Error::Corrupt("truncated record length".into()))?;
    let len = u32::from_le_bytes(len) as usize;
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(Error::Corrupt(format!("record truncated at {} of {len} bytes", buf.len())));
    }
    Ok(buf)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn slice(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.buf.len() {
            return Err(Error::Corrupt("ledger header truncated".into()));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.slice(N)?.try_into().expect("length checked"))
    }
}

/// Serde helpers storing bit strings as `"0101..."` text.
pub mod bits_as_string {
    use super::BitString;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &BitString, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&b.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BitString, D::Error> {
        let text = String::deserialize(d)?;
        BitString::parse(&text).map_err(serde::de::Error::custom)
    }
}

mod bit_rows {
    use super::BitString;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(rows: &[BitString], s: S) -> Result<S::Ok, S::Error> {
        rows.iter().map(|r| r.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BitString>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| BitString::parse(t).map_err(serde::de::Error::custom))
            .collect()
    }
}

mod opt_bits {
    use super::BitString;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &Option<BitString>, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Some(b) => s.serialize_some(&b.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BitString>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| BitString::parse(&t).map_err(serde::de::Error::custom))
            .transpose()
    }
}
