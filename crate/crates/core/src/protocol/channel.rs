//! Public classical channel.
//!
//! Parties exchange announcements through a [`Transport`]. The in-process
//! implementation just records every message, which doubles as the
//! disclosure ledger reported at the end of a run. Authentication is assumed
//! and not modelled.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Announcement {
    pub from: String,
    pub label: String,
    pub bits: u64,
    /// Whether these bits are subtracted from the key as leakage.
    pub counts_as_leakage: bool,
}

pub trait Transport {
    fn broadcast(&mut self, msg: Announcement);
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InProcessChannel {
    pub log: Vec<Announcement>,
}

impl InProcessChannel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_bits(&self) -> u64 {
        self.log.iter().map(|a| a.bits).sum()
    }

    /// Bits that must be charged against the key.
    pub fn leaked_bits(&self) -> u64 {
        self.log.iter().filter(|a| a.counts_as_leakage).map(|a| a.bits).sum()
    }
}

impl Transport for InProcessChannel {
    fn broadcast(&mut self, msg: Announcement) {
        self.log.push(msg);
    }
}
