//! Run configuration: built-in defaults, overlaid by an optional TOML file,
//! overlaid by command-line flags.
//!
//! ```toml
//! seed = 7
//! omega = 8
//! noise_sigma = 0.0
//! k_max = 5
//! jobs = 4
//! weights = "0.8,0.2,0.6,0.4"
//! out = "out"
//! inflation_radius = 0.0
//!
//! [camera]
//! fov_x_deg = 90.0
//!
//! [grounder]
//! backend = "remote"
//! endpoint = "http://localhost:8080"
//! timeout_s = 60
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use navground_core::metrics::Weights;
use navground_core::pipeline::ObserveConfig;
use navground_core::world::CameraModel;
use serde::Deserialize;

use crate::error::CliError;
use crate::remote::TOKEN_ENV;

pub const DEFAULT_K_MAX: usize = 5;
pub const DEFAULT_TIMEOUT_S: f64 = 60.0;

/// Which grounder answers dialogue turns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    /// Exact constraint evaluation.
    Scripted,
    /// Scripted, but drops one candidate on each ambiguous step.
    Perturbed,
    /// Remote vision-language model over HTTP.
    Remote,
    /// Offline replay of a recorded transcript.
    Canned,
}

/// Fully resolved grounder selection.
#[derive(Debug, Clone, PartialEq)]
pub enum GrounderConfig {
    Scripted,
    Perturbed,
    Remote { endpoint: String, token_env: String, timeout: Duration },
    Canned { transcript: PathBuf },
}

impl GrounderConfig {
    pub fn kind(&self) -> BackendKind {
        match self {
            GrounderConfig::Scripted => BackendKind::Scripted,
            GrounderConfig::Perturbed => BackendKind::Perturbed,
            GrounderConfig::Remote { .. } => BackendKind::Remote,
            GrounderConfig::Canned { .. } => BackendKind::Canned,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraOverrides {
    pub fov_x_deg: Option<f64>,
    pub fov_y_deg: Option<f64>,
    pub width_px: Option<u32>,
    pub height_px: Option<u32>,
    pub mount_height: Option<f64>,
}

impl CameraOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: &CameraModel) -> CameraModel {
        CameraModel {
            fov_x: self.fov_x_deg.map_or(base.fov_x, f64::to_radians),
            fov_y: self.fov_y_deg.map_or(base.fov_y, f64::to_radians),
            width_px: self.width_px.unwrap_or(base.width_px),
            height_px: self.height_px.unwrap_or(base.height_px),
            mount_height: self.mount_height.unwrap_or(base.mount_height),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrounderSection {
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub transcript: Option<PathBuf>,
    pub token_env: Option<String>,
    pub timeout_s: Option<f64>,
    pub max_turns: Option<usize>,
}

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub omega: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub k_max: Option<usize>,
    pub jobs: Option<usize>,
    pub weights: Option<String>,
    pub out: Option<PathBuf>,
    pub inflation_radius: Option<f64>,
    #[serde(default)]
    pub camera: CameraOverrides,
    #[serde(default)]
    pub grounder: GrounderSection,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Flag values that override the file. `None` leaves the file or default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub omega: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub k_max: Option<usize>,
    pub jobs: Option<usize>,
    pub weights: Option<String>,
    pub out: Option<PathBuf>,
    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub transcript: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub omega: usize,
    pub noise_sigma: f64,
    pub k_max: usize,
    pub jobs: usize,
    pub weights: Weights,
    pub out: PathBuf,
    /// Obstacle inflation before planning, meters.
    pub inflation_radius: f64,
    pub camera: CameraOverrides,
    pub grounder: GrounderConfig,
    /// Cap on user turns in one remote conversation.
    pub max_turns: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            omega: 8,
            noise_sigma: 0.0,
            k_max: DEFAULT_K_MAX,
            jobs: 1,
            weights: Weights::default(),
            out: PathBuf::from("out"),
            inflation_radius: 0.0,
            camera: CameraOverrides::default(),
            grounder: GrounderConfig::Scripted,
            max_turns: DEFAULT_K_MAX,
        }
    }
}

impl Config {
    pub fn observe_config(&self) -> ObserveConfig {
        ObserveConfig { omega: self.omega, noise_sigma: self.noise_sigma, ..ObserveConfig::default() }
    }

    pub fn resolve(file: ConfigFile, flags: Overrides) -> Result<Self, CliError> {
        let d = Config::default();
        let omega = flags.omega.or(file.omega).unwrap_or(d.omega);
        if omega == 0 {
            return Err(CliError::config("omega must be at least 1"));
        }
        let noise_sigma = flags.noise_sigma.or(file.noise_sigma).unwrap_or(d.noise_sigma);
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(CliError::config(format!("noise sigma must be a non-negative number, got {noise_sigma}")));
        }
        let k_max = flags.k_max.or(file.k_max).unwrap_or(d.k_max);
        if k_max == 0 {
            return Err(CliError::config("k_max must be at least 1"));
        }
        let jobs = flags.jobs.or(file.jobs).unwrap_or(d.jobs);
        if jobs == 0 {
            return Err(CliError::config("jobs must be at least 1"));
        }
        let weights = match flags.weights.or(file.weights) {
            Some(s) => Weights::from_str(&s).map_err(CliError::config)?,
            None => d.weights,
        };
        let inflation_radius = file.inflation_radius.unwrap_or(d.inflation_radius);
        if !(inflation_radius.is_finite() && inflation_radius >= 0.0) {
            return Err(CliError::config("inflation_radius must be a non-negative number"));
        }
        let g = file.grounder;
        let backend = flags.backend.or(g.backend).unwrap_or(BackendKind::Scripted);
        let endpoint = flags.endpoint.or(g.endpoint);
        let transcript = flags.transcript.or(g.transcript);
        let grounder = match backend {
            BackendKind::Scripted => GrounderConfig::Scripted,
            BackendKind::Perturbed => GrounderConfig::Perturbed,
            BackendKind::Remote => {
                let endpoint = endpoint.ok_or_else(|| CliError::config("the remote grounder needs an endpoint (--endpoint)"))?;
                let timeout_s = g.timeout_s.unwrap_or(DEFAULT_TIMEOUT_S);
                if !(timeout_s.is_finite() && timeout_s > 0.0) {
                    return Err(CliError::config("timeout_s must be positive"));
                }
                GrounderConfig::Remote {
                    endpoint,
                    token_env: g.token_env.unwrap_or_else(|| TOKEN_ENV.to_string()),
                    timeout: Duration::from_secs_f64(timeout_s),
                }
            }
            BackendKind::Canned => GrounderConfig::Canned {
                transcript: transcript.ok_or_else(|| CliError::config("the canned grounder needs a transcript (--transcript)"))?,
            },
        };
        let max_turns = g.max_turns.unwrap_or(k_max).max(1);
        Ok(Self {
            seed: flags.seed.or(file.seed).unwrap_or(d.seed),
            omega,
            noise_sigma,
            k_max,
            jobs,
            weights,
            out: flags.out.or(file.out).unwrap_or(d.out),
            inflation_radius,
            camera: file.camera,
            grounder,
            max_turns,
        })
    }
}
