//! Rating oracles: a live chat-completions client and a deterministic
//! synthetic rater, behind one trait.

pub mod live;
mod parse;
pub mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use live::{LiveBackend, API_TOKEN_ENV};
pub use parse::{parse_rating, ParseStatus, RatingResponse};
pub use synthetic::{synthetic_rate, SyntheticBackend, SyntheticParams};

use crate::corpus::Headline;
use crate::error::{Error, Result};
use crate::persona::PromptBuilder;

/// Temperatures used by the replication grid.
pub const PRESET_TEMPERATURES: [f64; 2] = [0.2, 0.7];

pub trait RatingBackend: Send + Sync {
    /// Rates one headline under `prompt`. `repeat` distinguishes repeated
    /// ratings of the same pair.
    fn rate_headline(&self, prompt: &str, headline: &Headline, repeat: u32) -> Result<RatingResponse>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Synthetic,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::Live => "live",
            BackendKind::Synthetic => "synthetic",
        })
    }
}

fn default_retry_limit() -> u32 {
    3
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_max_in_flight() -> usize {
    4
}
fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub backend_kind: BackendKind,
    pub model_name: String,
    pub temperature: f64,
    /// Synthetic backend only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Live backend only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<usize>,
    #[serde(default = "default_backoff_ms")]
    pub retry_backoff_ms: u64,
    /// Overrides the default synthetic rating model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticParams>,
}

impl BackendConfig {
    pub fn new(kind: BackendKind, model_name: &str, temperature: f64) -> Self {
        BackendConfig {
            backend_kind: kind,
            model_name: model_name.to_string(),
            temperature,
            seed: None,
            endpoint_url: None,
            retry_limit: default_retry_limit(),
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_max_in_flight(),
            requests_per_minute: None,
            retry_backoff_ms: default_backoff_ms(),
            synthetic: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_name.trim().is_empty() {
            return Err(Error::Config("backend model_name is empty".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if let Some(p) = &self.synthetic {
            p.validate()?;
        }
        Ok(())
    }

    /// True when the temperature is one of the replication-grid settings.
    pub fn is_preset_temperature(&self) -> bool {
        PRESET_TEMPERATURES.contains(&self.temperature)
    }
}

/// Instantiates the backend a config describes. Live backends read their
/// token from [`API_TOKEN_ENV`]; synthetic ones need `seed` (or `default_seed`).
pub fn connect(
    config: &BackendConfig,
    builder: &PromptBuilder,
    default_seed: u64,
) -> Result<Box<dyn RatingBackend>> {
    config.validate()?;
    match config.backend_kind {
        BackendKind::Synthetic => Ok(Box::new(SyntheticBackend::new(
            config.synthetic.clone().unwrap_or_default(),
            config.seed.unwrap_or(default_seed),
            &config.model_name,
            config.temperature,
            builder,
        )?)),
        BackendKind::Live => Ok(Box::new(LiveBackend::from_env(config)?)),
    }
}
