//! Multi-robot mapping runs: scan ingestion, per-step sensing and exchange,
//! the central reference, metrics and artifacts.

mod engine;
pub mod raster;
pub mod scan_log;
pub mod world;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::{GpError, GpPrior, KernelParams};
use crate::protocol::{Expiration, ProtocolError};
use crate::tsdf::TsdfParams;

pub use engine::{audit_exactly_once, audit_no_echo, MetricsRecord, Simulation, StepReport, TraceEvent};
pub use raster::{compute_rmse, predict_points, rasterize_map, write_map_csv, write_map_pgm, MapRaster, Rmse};
pub use scan_log::{read_scan_log, split_stream, write_scan_log, LogFormat, ScanLogError};
pub use world::{synth_world, RobotPath, SynthOutput, SynthSpec, World, WorldKind};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("ingestion: {0}")]
    Ingestion(String),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ScanLogError> for SimError {
    fn from(e: ScanLogError) -> Self {
        match e {
            ScanLogError::Io(e) => SimError::Io(e),
            other => SimError::Ingestion(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpirationKind {
    /// Drop a batch once its recipient list is full.
    #[default]
    List,
    /// Drop a batch at its connectivity-window horizon; needs `window`.
    Timer,
}

fn default_max_leaf_size() -> usize {
    50
}

fn default_eval_every() -> usize {
    1
}

/// Parameters of one run. Read from a single JSON document; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Team size.
    pub n: usize,
    /// Communication range, meters (inclusive).
    pub comm_range: f64,
    pub tsdf: TsdfParams,
    pub kernel: KernelParams,
    #[serde(default = "default_max_leaf_size")]
    pub max_leaf_size: usize,
    /// Number of simulated steps.
    pub steps: usize,
    /// Connectivity window `B`, when known.
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub expiration: ExpirationKind,
    /// Predict from neighboring leaves within `3 l` as well.
    #[serde(default)]
    pub halo: bool,
    #[serde(default)]
    pub seed: u64,
    /// Spacing of the evaluation grid, meters; defaults to the lattice spacing.
    #[serde(default)]
    pub eval_resolution: Option<f64>,
    /// Metrics every this many steps; 0 evaluates only after the last step.
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Report predictive variance of noisy observations.
    #[serde(default)]
    pub observation_noise: bool,
    /// Built-in synthetic scenario used when no scan log is given.
    #[serde(default)]
    pub synth: Option<SynthSpec>,
}

impl SimConfig {
    /// Indoor profile: `h = 0.5`, `g = 0.1`, `c = 1`, `l = 0.1`,
    /// `sigma = 0.1`, 50 entries per leaf, 20 m range.
    pub fn radish(n: usize, steps: usize) -> Self {
        Self {
            n,
            comm_range: 20.0,
            tsdf: TsdfParams::new(0.5, 0.1),
            kernel: KernelParams::new(1.0, 0.1, 0.1),
            max_leaf_size: 50,
            steps,
            window: None,
            expiration: ExpirationKind::List,
            halo: false,
            seed: 0,
            eval_resolution: None,
            eval_every: 1,
            observation_noise: false,
            synth: None,
        }
    }

    /// Campus-scale profile: `h = 5`, `g = 0.25`, `l = 0.2`, 100 m range.
    pub fn nclt(n: usize, steps: usize) -> Self {
        Self {
            comm_range: 100.0,
            tsdf: TsdfParams::new(5.0, 0.25),
            kernel: KernelParams::new(1.0, 0.2, 0.1),
            ..Self::radish(n, steps)
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if !(self.comm_range.is_finite() && self.comm_range >= 0.0) {
            return bad(format!("comm_range must be >= 0, got {}", self.comm_range));
        }
        self.tsdf.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.prior().validate().map_err(|e| SimError::Config(e.to_string()))?;
        if self.max_leaf_size == 0 {
            return bad("max_leaf_size must be at least 1".into());
        }
        if self.window == Some(0) {
            return bad("window must be at least 1".into());
        }
        if self.expiration == ExpirationKind::Timer && self.window.is_none() {
            return Err(SimError::Protocol(ProtocolError::ConfigMissing));
        }
        if let Some(r) = self.eval_resolution {
            if !(r.is_finite() && r > 0.0) {
                return bad(format!("eval_resolution must be > 0, got {r}"));
            }
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    /// Constant prior mean `h`: unobserved space is taken as free.
    pub fn prior(&self) -> GpPrior {
        GpPrior::new(self.tsdf.truncation, self.kernel).with_observation_noise(self.observation_noise)
    }

    pub fn halo_radius(&self) -> Option<f64> {
        self.halo.then_some(3.0 * self.kernel.length_scale)
    }

    pub fn eval_resolution(&self) -> f64 {
        self.eval_resolution.unwrap_or(self.tsdf.grid_spacing)
    }

    pub fn expiration_mode(&self) -> Expiration {
        match (self.expiration, self.window) {
            (ExpirationKind::Timer, Some(window)) => Expiration::Timer { window },
            _ => Expiration::RecipientList,
        }
    }
}
