//! TOML experiment configuration. The schema is published as
//! `docs/config.schema.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pipeline::{PipelineSettings, PostprocessSettings};
use crate::error::{Error, Result};
use crate::keyrate::SecurityBudget;
use crate::network_sim::{
    DriftModel, RoundCount, SessionPlan, SwitchingModel, Topology, CALIBRATED_ATTEN_DB_PER_KM,
    CALIBRATED_BASE_RATE_HZ, CALIBRATED_COUPLING_DB,
};
use crate::noise_model::{compose_noise, noise_from_power, DepolarizingParams, OperationalNoise, SourceNoise};
use crate::postprocess::RateTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub topology: TopologyConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub switching: SwitchingConfig,
    #[serde(default)]
    pub drift: DriftModel,
    pub protocol: ProtocolConfig,
    pub budget: BudgetConfig,
    #[serde(default)]
    pub postprocess: PostprocessConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub surface: SurfaceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub bobs_km: Vec<f64>,
    #[serde(default)]
    pub alice_km: f64,
    #[serde(default = "default_atten")]
    pub atten_db_per_km: f64,
    #[serde(default = "default_coupling")]
    pub coupling_loss_db: f64,
    #[serde(default = "default_base_rate")]
    pub base_rate_hz: f64,
    /// Measured four-photon rate overriding the loss model.
    #[serde(default)]
    pub rate_override_hz: Option<f64>,
}

fn default_atten() -> f64 {
    CALIBRATED_ATTEN_DB_PER_KM
}
fn default_coupling() -> f64 {
    CALIBRATED_COUPLING_DB
}
fn default_base_rate() -> f64 {
    CALIBRATED_BASE_RATE_HZ
}

/// Either explicit operational rates or a source model, optionally followed
/// by depolarizing links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub q_x: Option<f64>,
    #[serde(default)]
    pub q_ab: Option<Vec<f64>>,
    #[serde(default)]
    pub source: Option<SourceNoise>,
    #[serde(default)]
    pub links: Option<DepolarizingParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[serde(default)]
pub struct SwitchingConfig {
    /// Active basis switching; when false the basis choice is passive and
    /// costs no rate.
    pub active: bool,
    pub tau_s: f64,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        Self { active: true, tau_s: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub p: f64,
    /// Exact round count; otherwise Poisson over `duration_s`.
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub exact_test_rounds: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub eps_tot: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    /// Share of `eps_PE^2` given to the `N - 1` Z-basis comparisons.
    #[serde(default = "half")]
    pub z_share: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostprocessConfig {
    pub block_j: usize,
    pub max_iters: usize,
    pub margin: f64,
    /// TOML file with measured `[[thresholds]]`, relative to the config.
    pub thresholds_file: Option<PathBuf>,
    #[serde(skip)]
    pub rate_table: Option<RateTable>,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        let d = PostprocessSettings::default();
        Self { block_j: d.block_j, max_iters: d.max_iters, margin: 0.0, thresholds_file: None, rate_table: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub rounds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { rounds: vec![20_000, 50_000, 100_000, 200_000, 500_000] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceConfig {
    pub c: f64,
    pub grid_step: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self { c: 1.5, grid_step: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), gnuplot: false }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl ExperimentConfig {
    /// Parse and validate; relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(config_err)?;
        if let Some(rel) = &cfg.postprocess.thresholds_file {
            let path = base_dir.join(rel);
            let body = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("thresholds file {}: {e}", path.display())))?;
            let table: RateTable = toml::from_str(&body).map_err(config_err)?;
            cfg.postprocess.rate_table = Some(table);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.topology().map_err(config_err)?;
        let noise = self.noise().map_err(config_err)?;
        if noise.parties() != t.parties() {
            return Err(Error::Config(format!(
                "noise describes {} parties but the topology has {}",
                noise.parties(),
                t.parties()
            )));
        }
        if noise.parties() < 3 {
            return Err(Error::Config("a conference needs at least 3 parties".into()));
        }
        self.switching().map_err(config_err)?;
        self.drift.validate().map_err(config_err)?;
        match (self.protocol.rounds, self.protocol.duration_s) {
            (None, None) => return Err(Error::Config("protocol needs `rounds` or `duration_s`".into())),
            (_, Some(d)) if !(d > 0.0) => return Err(Error::Config("duration_s must be positive".into())),
            (Some(0), _) => return Err(Error::Config("rounds must be positive".into())),
            _ => {}
        }
        self.budget().map_err(config_err)?;
        if self.postprocess.block_j == 0 || self.postprocess.block_j % 180 != 0 {
            return Err(Error::Config(format!("block_j = {} is not a multiple of 180", self.postprocess.block_j)));
        }
        if self.postprocess.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !(self.postprocess.margin >= 0.0) {
            return Err(Error::Config("margin must be non-negative".into()));
        }
        if self.sweep.rounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep rounds must be strictly ascending".into()));
        }
        if !(0.0..=3.0).contains(&self.surface.c) || !(self.surface.grid_step > 0.0 && self.surface.grid_step <= 1.0) {
            return Err(Error::Config("surface needs c in [0, 3] and grid_step in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn topology(&self) -> Result<Topology> {
        let t = &self.topology;
        let mut fiber = vec![t.alice_km];
        fiber.extend_from_slice(&t.bobs_km);
        Topology::new(fiber, t.atten_db_per_km, t.coupling_loss_db, t.base_rate_hz)
    }

    pub fn noise(&self) -> Result<OperationalNoise> {
        let n = &self.noise;
        let base = match (&n.source, n.q_x, &n.q_ab) {
            (Some(src), None, None) => noise_from_power(src)?,
            (None, Some(q_x), Some(q_ab)) => OperationalNoise::new(q_x, q_ab.clone())?,
            _ => return Err(Error::Config("noise needs either `source` or both `q_x` and `q_ab`".into())),
        };
        match &n.links {
            Some(links) => compose_noise(&base, &DepolarizingParams::new(links.alice(), links.bobs().to_vec())?),
            None => Ok(base),
        }
    }

    /// Switching penalty model; also used by the AKR study when passive.
    pub fn switching(&self) -> Result<SwitchingModel> {
        SwitchingModel::new(self.switching.tau_s, self.protocol.p)
    }

    /// Model applied to the session rate; `None` when switching is passive.
    pub fn session_switching(&self) -> Result<Option<SwitchingModel>> {
        Ok(if self.switching.active { Some(self.switching()?) } else { None })
    }

    pub fn budget(&self) -> Result<SecurityBudget> {
        let b = &self.budget;
        SecurityBudget::from_total(b.eps_tot, b.eps_ec, b.eps_pa, b.z_share, self.topology.bobs_km.len() + 1)
    }

    pub fn session_plan(&self) -> SessionPlan {
        let rounds = match self.protocol.rounds {
            Some(l) => RoundCount::Exact(l),
            None => RoundCount::Poisson,
        };
        SessionPlan {
            p: self.protocol.p,
            duration_s: self.protocol.duration_s.unwrap_or(1.0),
            rounds,
            exact_test_rounds: self.protocol.exact_test_rounds,
            rate_override_hz: self.topology.rate_override_hz,
            seed: self.seed,
        }
    }

    pub fn rate_table(&self) -> RateTable {
        let mut t = self.postprocess.rate_table.clone().unwrap_or_default();
        t.margin = self.postprocess.margin;
        t
    }

    pub fn pipeline_settings(&self) -> Result<PipelineSettings> {
        Ok(PipelineSettings {
            budget: self.budget()?,
            post: PostprocessSettings {
                block_j: self.postprocess.block_j,
                max_iters: self.postprocess.max_iters,
                rate_table: self.rate_table(),
            },
            seed: crate::rng::derive_seed(self.seed, "postprocess"),
        })
    }

    /// CRC-32 of the canonical JSON form, as 8 hex digits.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).unwrap_or_default();
        format!("{:08x}", crc32fast::hash(json.as_bytes()))
    }
}
