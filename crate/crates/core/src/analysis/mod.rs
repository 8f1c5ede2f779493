//! End-to-end pipeline, batch studies, one-time-pad use of the key,
//! experiment configuration and report artifacts.

pub mod config;
pub mod otp;
pub mod pipeline;
pub mod power_fit;
pub mod report;
pub mod studies;
pub mod surface;

pub use config::ExperimentConfig;
pub use otp::{otp_decrypt, otp_encrypt, placeholder_image, Ciphertext, KeyStore, UsageLedger};
pub use pipeline::{run_pipeline, PipelineOutcome, PipelineSettings, PipelineStatus, PostprocessSettings};
pub use power_fit::{fit_power_trend, PowerFit, PowerSample};
pub use report::{Report, Timing};
pub use studies::{run_akr_study, run_finite_key_sweep, AkrRow, SweepRow};
pub use surface::{surface_gradient, surface_value, topology_noise_surface, Surface};
