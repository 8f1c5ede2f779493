//! Noise descriptions and the operational error model.
//!
//! Everything the protocol can observe about a noisy GHZ source reduces to
//! two kinds of error rate: the Z-basis disagreement `Q_AB_i` between Alice
//! and each Bob, and the X-basis odd-parity rate `Q_X`. Each noise process
//! acts on these through a "shrink factor" on the corresponding Pauli
//! expectation, `1 - 2q`, so serial noise composes multiplicatively.
//!
//! Depolarising links use `D(rho) = (1 - 3p/4) rho + (p/4)(X rho X + Y rho Y + Z rho Z)`,
//! which shrinks every single-qubit Pauli expectation by `1 - p`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, invalid, Error, Result};

/// Per-link depolarising strengths, Alice first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepolarizingParams {
    alice: f64,
    bobs: Vec<f64>,
}

impl DepolarizingParams {
    pub fn new(alice: f64, bobs: Vec<f64>) -> Result<Self> {
        check_probability("p_A", alice)?;
        if bobs.is_empty() {
            return Err(invalid("need at least one Bob"));
        }
        for (i, &p) in bobs.iter().enumerate() {
            check_probability(&format!("p_B{}", i + 1), p)?;
        }
        Ok(Self { alice, bobs })
    }

    /// Noiseless links for `bobs` Bobs.
    pub fn identity(bobs: usize) -> Self {
        Self { alice: 0.0, bobs: vec![0.0; bobs] }
    }

    pub fn alice(&self) -> f64 {
        self.alice
    }

    pub fn bobs(&self) -> &[f64] {
        &self.bobs
    }

    pub fn parties(&self) -> usize {
        self.bobs.len() + 1
    }

    fn validate(&self) -> Result<()> {
        Self::new(self.alice, self.bobs.clone()).map(|_| ())
    }

    /// Shrink factor of the N-party X-parity expectation.
    fn x_shrink(&self) -> f64 {
        self.bobs.iter().fold(1.0 - self.alice, |acc, p| acc * (1.0 - p))
    }

    fn z_shrink(&self, bob: usize) -> f64 {
        (1.0 - self.alice) * (1.0 - self.bobs[bob])
    }
}

/// Expected `Q_X` of a GHZ state sent through depolarising links:
/// `(1 - prod_i (1 - p_i)) / 2` over all N links.
pub fn expected_qx_depol(d: &DepolarizingParams) -> Result<f64> {
    d.validate()?;
    Ok((1.0 - d.x_shrink()) / 2.0)
}

/// Expected `Q_AB_i`, which only involves Alice's and Bob `i`'s links.
pub fn expected_qber_depol(d: &DepolarizingParams, bob: usize) -> Result<f64> {
    d.validate()?;
    if bob >= d.bobs.len() {
        return Err(Error::IndexOutOfRange { index: bob, len: d.bobs.len() });
    }
    Ok((1.0 - d.z_shrink(bob)) / 2.0)
}

/// `Q_X` of the mixture `t |GHZ><GHZ| + (1 - t)(|0..0><0..0| + |1..1><1..1|)/2`.
pub fn qx_from_visibility(t: f64) -> Result<f64> {
    check_probability("interference success t", t)?;
    Ok((1.0 - t) / 2.0)
}

/// Source imperfections: imperfect interference plus the linear pump-power
/// trend of multi-pair emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceNoise {
    pub t_interference: f64,
    /// `Q_X` growth per mW of pump power.
    pub qx_slope: f64,
    /// QBER growth per mW of pump power.
    pub qber_slope: f64,
    /// `Q_X` at zero power.
    pub qx_intercept: f64,
    pub pump_power_mw: f64,
    pub bobs: usize,
}

impl Default for SourceNoise {
    /// Zero-power `Q_X` of 0.05 (visibility 0.9) and a QBER trend reaching
    /// 0.0159 at the 100 mW operating point.
    fn default() -> Self {
        Self {
            t_interference: 0.9,
            qx_slope: 0.0,
            qber_slope: 0.0159 / 100.0,
            qx_intercept: 0.05,
            pump_power_mw: 100.0,
            bobs: 3,
        }
    }
}

impl SourceNoise {
    /// Source whose zero-power `Q_X` is set by the interference visibility.
    pub fn from_visibility(t: f64, qx_slope: f64, qber_slope: f64, pump_power_mw: f64, bobs: usize) -> Result<Self> {
        let s = Self {
            t_interference: t,
            qx_slope,
            qber_slope,
            qx_intercept: qx_from_visibility(t)?,
            pump_power_mw,
            bobs,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("t_interference", self.t_interference)?;
        if self.qx_slope < 0.0 || self.qber_slope < 0.0 {
            return Err(invalid("power-trend slopes must be non-negative"));
        }
        if !(0.0..=0.5).contains(&self.qx_intercept) {
            return Err(invalid(format!("qx_intercept = {} outside [0, 0.5]", self.qx_intercept)));
        }
        if !(self.pump_power_mw >= 0.0) {
            return Err(invalid(format!("pump power {} mW is negative", self.pump_power_mw)));
        }
        if self.bobs == 0 {
            return Err(invalid("need at least one Bob"));
        }
        Ok(())
    }
}

/// The error rates the protocol measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalNoise {
    pub q_x: f64,
    pub q_ab: Vec<f64>,
}

impl OperationalNoise {
    pub fn new(q_x: f64, q_ab: Vec<f64>) -> Result<Self> {
        let n = Self { q_x, q_ab };
        n.validate()?;
        Ok(n)
    }

    /// Same QBER on every Bob's link.
    pub fn uniform(q_x: f64, qber: f64, bobs: usize) -> Result<Self> {
        Self::new(q_x, vec![qber; bobs])
    }

    pub fn noiseless(bobs: usize) -> Self {
        Self { q_x: 0.0, q_ab: vec![0.0; bobs] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_ab.is_empty() {
            return Err(invalid("need at least one Bob"));
        }
        if !(0.0..=0.5).contains(&self.q_x) {
            return Err(invalid(format!("Q_X = {} outside [0, 0.5]", self.q_x)));
        }
        for (i, q) in self.q_ab.iter().enumerate() {
            if !(0.0..=0.5).contains(q) {
                return Err(invalid(format!("Q_AB{} = {q} outside [0, 0.5]", i + 1)));
            }
        }
        Ok(())
    }

    pub fn bobs(&self) -> usize {
        self.q_ab.len()
    }

    pub fn parties(&self) -> usize {
        self.q_ab.len() + 1
    }

    /// Worst Alice-Bob disagreement rate.
    pub fn qber(&self) -> f64 {
        self.q_ab.iter().copied().fold(0.0, f64::max)
    }
}

/// Affine pump-power model, clamped into `[0, 0.5]`.
pub fn noise_from_power(s: &SourceNoise) -> Result<OperationalNoise> {
    s.validate()?;
    let q_x = (s.qx_intercept + s.qx_slope * s.pump_power_mw).clamp(0.0, 0.5);
    let qber = (s.qber_slope * s.pump_power_mw).clamp(0.0, 0.5);
    OperationalNoise::uniform(q_x, qber, s.bobs)
}

/// Serial composition of source imperfection and link depolarisation:
/// `1 - 2 q_out = (1 - 2 q_src) * shrink`.
pub fn compose_noise(source: &OperationalNoise, links: &DepolarizingParams) -> Result<OperationalNoise> {
    source.validate()?;
    links.validate()?;
    if source.bobs() != links.bobs.len() {
        return Err(Error::LengthMismatch { expected: source.bobs(), actual: links.bobs.len() });
    }
    let q_x = (1.0 - (1.0 - 2.0 * source.q_x) * links.x_shrink()) / 2.0;
    let q_ab = source
        .q_ab
        .iter()
        .enumerate()
        .map(|(i, q)| (1.0 - (1.0 - 2.0 * q) * links.z_shrink(i)) / 2.0)
        .collect();
    OperationalNoise::new(q_x, q_ab)
}

/// Measurement basis of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundType {
    /// Type-1: everyone measures Z; contributes to the raw key.
    Key,
    /// Type-2: everyone measures X; tests the N-party parity.
    Test,
}

impl OperationalNoise {
    /// Sample one round of outcomes into `out` (one bit per party, Alice
    /// first).
    ///
    /// Z rounds: Alice's bit is uniform, Bob `i` flips it with probability
    /// `Q_AB_i`. X rounds: outcomes are uniform subject to their parity being
    /// odd with probability `Q_X` (outcome bit 1 stands for `|->`).
    pub fn sample_round_into<R: Rng + ?Sized>(&self, kind: RoundType, rng: &mut R, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.parties());
        match kind {
            RoundType::Key => {
                let a: bool = rng.random();
                out[0] = a;
                for (slot, &q) in out[1..].iter_mut().zip(&self.q_ab) {
                    *slot = a ^ (rng.random::<f64>() < q);
                }
            }
            RoundType::Test => {
                let odd = rng.random::<f64>() < self.q_x;
                let last = out.len() - 1;
                let mut parity = false;
                for slot in &mut out[..last] {
                    *slot = rng.random();
                    parity ^= *slot;
                }
                out[last] = parity ^ odd;
            }
        }
    }

    pub fn sample_round<R: Rng + ?Sized>(&self, kind: RoundType, rng: &mut R) -> Vec<bool> {
        let mut out = vec![false; self.parties()];
        self.sample_round_into(kind, rng, &mut out);
        out
    }
}
