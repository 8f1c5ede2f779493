//! Simulation and post-processing for N-party quantum conference key
//! agreement over GHZ states (the N-BB84 protocol).
//!
//! The crate is organised the way a session flows:
//!
//! * [`noise_model`] maps physical noise descriptions onto the two error
//!   rates the protocol observes (`Q_X` and the per-Bob `Q_AB_i`) and samples
//!   round outcomes with exactly those statistics.
//! * [`network_sim`] turns a star topology into a four-photon rate, applies
//!   the basis-switching penalty and polarisation drift, and produces a
//!   [`protocol::RoundLedger`].
//! * [`protocol`] holds the round schedule (and its entropy-coded form),
//!   parameter estimation and sifting.
//! * [`postprocess`] performs one-to-many LDPC syndrome reconciliation,
//!   verification hashing, Toeplitz privacy amplification and the
//!   pre-shared key deduction.
//! * [`keyrate`] contains the asymptotic and finite-key rate formulas and the
//!   security-budget optimizer.
//! * [`analysis`] wires everything into batch studies, the end-to-end
//!   pipeline, one-time-pad encryption and experiment configuration.

pub mod analysis;
pub mod bits;
pub mod error;
pub mod keyrate;
pub mod network_sim;
pub mod noise_model;
pub mod postprocess;
pub mod protocol;
pub mod rng;

pub use bits::BitString;
pub use error::{Error, Result};
pub use keyrate::{FiniteKey, Leakage, RateInputs, SecurityBudget};
pub use network_sim::{DriftModel, SwitchingModel, Topology};
pub use noise_model::{DepolarizingParams, OperationalNoise, RoundType, SourceNoise};
pub use postprocess::{CodeRate, ConferenceKey, LdpcCode, ToeplitzSeed};
pub use protocol::{ParamEstimate, RawKey, RoundLedger, Schedule};
