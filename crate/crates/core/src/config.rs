//! Engine configuration: TOML file, then environment overrides.

use std::path::{Path, PathBuf};

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mission::Timing;
use crate::time::{iso_duration, parse_duration};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid value for {key}: {reason}")]
    Value { key: String, reason: String },
}

/// Durations are ISO-8601 strings (`PT4H`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(with = "iso_duration")]
    pub default_ideation: TimeDelta,
    #[serde(with = "iso_duration")]
    pub reminder_lead: TimeDelta,
    #[serde(with = "iso_duration")]
    pub max_sleep: TimeDelta,
    #[serde(with = "iso_duration")]
    pub retry_base: TimeDelta,
    #[serde(with = "iso_duration")]
    pub retry_cap: TimeDelta,
    /// Account the engine posts as; mentions of it are stripped from ideas.
    pub bot_handle: String,
    /// Optional template file replacing the built-in message templates.
    pub templates: Option<PathBuf>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            default_ideation: TimeDelta::hours(4),
            reminder_lead: TimeDelta::hours(1),
            max_sleep: TimeDelta::seconds(30),
            retry_base: TimeDelta::seconds(1),
            retry_cap: TimeDelta::minutes(5),
            bot_handle: "@wedo".into(),
            templates: None,
        }
    }
}

const ENV_PREFIX: &str = "WEDO_";

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies `WEDO_DEFAULT_IDEATION`, `WEDO_REMINDER_LEAD`, ... from `vars`.
    pub fn with_env<I>(mut self, vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let duration = |v: &str| {
                parse_duration(v).map_err(|e| ConfigError::Value {
                    key: key.clone(),
                    reason: e.to_string(),
                })
            };
            match name {
                "DEFAULT_IDEATION" => self.default_ideation = duration(&value)?,
                "REMINDER_LEAD" => self.reminder_lead = duration(&value)?,
                "MAX_SLEEP" => self.max_sleep = duration(&value)?,
                "RETRY_BASE" => self.retry_base = duration(&value)?,
                "RETRY_CAP" => self.retry_cap = duration(&value)?,
                "BOT_HANDLE" => self.bot_handle = value,
                "TEMPLATES" => self.templates = Some(PathBuf::from(value)),
                _ => {}
            }
        }
        Ok(self)
    }

    pub fn timing(&self) -> Timing {
        Timing {
            default_ideation: self.default_ideation,
            reminder_lead: self.reminder_lead,
        }
    }

    /// Exponential backoff for the `attempt`-th retry (1-based).
    pub fn retry_delay(&self, attempt: u32) -> TimeDelta {
        let factor = 1i32.checked_shl(attempt.saturating_sub(1)).unwrap_or(i32::MAX);
        self.retry_base
            .checked_mul(factor)
            .unwrap_or(self.retry_cap)
            .min(self.retry_cap)
    }
}
