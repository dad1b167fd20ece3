use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::mock::MockBehavior;
use crate::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    #[default]
    Low,
    Medium,
    High,
}

impl ReasoningEffort {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    #[default]
    Mock,
    Replay,
    Record,
}

impl Mode {
    pub fn uses_network(&self) -> bool {
        matches!(self, Mode::Live | Mode::Record)
    }
}

impl FromStr for Mode {
    type Err = GatewayError;
    fn from_str(s: &str) -> Result<Self, GatewayError> {
        match s {
            "live" => Ok(Mode::Live),
            "mock" => Ok(Mode::Mock),
            "replay" => Ok(Mode::Replay),
            "record" => Ok(Mode::Record),
            other => Err(GatewayError::Config(format!("unknown gateway mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Live => "live",
            Mode::Mock => "mock",
            Mode::Replay => "replay",
            Mode::Record => "record",
        };
        f.write_str(s)
    }
}

/// Request shape sent to the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    /// `POST {base_url}/chat/completions`
    #[default]
    Chat,
    /// `POST {base_url}/responses`
    Responses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub reasoning_effort: ReasoningEffort,
    pub max_output_tokens: u32,
    pub timeout_secs: f64,
    pub mode: Mode,
    /// Simulated seconds a robot waits at each decision point.
    pub injected_latency_secs: Option<f64>,
    pub api_style: ApiStyle,
    /// Trim and uppercase actions before whitelist matching.
    pub lenient: bool,
    /// Responder for `mode = mock`.
    pub mock_behavior: MockBehavior,
    /// Cassette to read (replay) or append to (record).
    pub cassette: Option<PathBuf>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-5-mini".into(),
            api_key_env: Some("OPENAI_API_KEY".into()),
            reasoning_effort: ReasoningEffort::Low,
            max_output_tokens: 1024,
            timeout_secs: 30.0,
            mode: Mode::Mock,
            injected_latency_secs: None,
            api_style: ApiStyle::Chat,
            lenient: false,
            mock_behavior: MockBehavior::Scripted,
            cassette: None,
        }
    }
}

impl GatewayConfig {
    pub fn mock(behavior: MockBehavior) -> Self {
        Self {
            mode: Mode::Mock,
            mock_behavior: behavior,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return Err(GatewayError::Config(format!("timeout must be positive, got {}", self.timeout_secs)));
        }
        if self.max_output_tokens == 0 {
            return Err(GatewayError::Config("max_output_tokens must be positive".into()));
        }
        if let Some(l) = self.injected_latency_secs {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(GatewayError::Config(format!("invalid injected latency {l}")));
            }
        }
        if matches!(self.mode, Mode::Replay | Mode::Record) && self.cassette.is_none() {
            return Err(GatewayError::Config(format!("{} mode needs a cassette path", self.mode)));
        }
        if self.mode.uses_network() && self.base_url.is_empty() {
            return Err(GatewayError::Config("live mode needs a base_url".into()));
        }
        if let MockBehavior::EchoCassette { path } = &self.mock_behavior {
            if self.mode == Mode::Mock && path.as_os_str().is_empty() {
                return Err(GatewayError::Config("echo_cassette needs a cassette path".into()));
            }
        }
        Ok(())
    }

    /// Reads the API key from the configured environment variable. Only
    /// network modes require it to be present.
    pub fn api_key(&self) -> Result<Option<String>, GatewayError> {
        let Some(var) = &self.api_key_env else {
            return Ok(None);
        };
        match std::env::var(var) {
            Ok(k) if !k.is_empty() => Ok(Some(k)),
            _ if self.mode.uses_network() => Err(GatewayError::Credential(format!(
                "environment variable {var} is not set"
            ))),
            _ => Ok(None),
        }
    }
}
