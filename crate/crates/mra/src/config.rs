//! Service configuration read from `MRA_*` environment variables.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use mra_core::http::RemoteEndpoint;
use mra_core::language::SupportedLanguages;
use mra_core::pipeline::PipelineConfig;
use mra_core::translator::MAX_MOCK_LATENCY;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "mra-data";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} is required")]
    Missing(&'static str),
    #[error("{var}={value:?} is invalid: {reason}")]
    Invalid {
        var: &'static str,
        value: String,
        reason: String,
    },
}

impl ConfigError {
    /// The variable at fault.
    pub fn var(&self) -> &'static str {
        match self {
            ConfigError::Missing(var) | ConfigError::Invalid { var, .. } => var,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TranslatorConfig {
    Mock { latency: Duration },
    Remote(RemoteEndpoint),
}

#[derive(Debug, Clone)]
pub enum AnnotatorConfig {
    Local,
    Remote(RemoteEndpoint),
}

#[derive(Debug, Clone)]
pub struct Config {
    pub bind: SocketAddr,
    pub lexicon: PathBuf,
    pub annotator: AnnotatorConfig,
    pub translator: TranslatorConfig,
    pub languages: SupportedLanguages,
    pub pipeline: PipelineConfig,
    pub data_dir: PathBuf,
    pub ui_dir: Option<PathBuf>,
}

struct Vars(HashMap<String, String>);

impl Vars {
    /// Unset and blank variables are treated alike.
    fn get(&self, var: &'static str) -> Option<&str> {
        self.0.get(var).map(|v| v.trim()).filter(|v| !v.is_empty())
    }

    fn require(&self, var: &'static str) -> Result<&str, ConfigError> {
        self.get(var).ok_or(ConfigError::Missing(var))
    }

    fn parse<T: std::str::FromStr>(&self, var: &'static str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(var) {
            None => Ok(default),
            Some(raw) => raw.parse().map_err(|e: T::Err| invalid(var, raw, e)),
        }
    }

    /// Non-negative, finite number of `unit`s.
    fn duration(&self, var: &'static str, default: Duration, unit: f64) -> Result<Duration, ConfigError> {
        let Some(raw) = self.get(var) else {
            return Ok(default);
        };
        let n: f64 = raw.parse().map_err(|e| invalid(var, raw, e))?;
        if !n.is_finite() || n < 0.0 {
            return Err(invalid(var, raw, "must be a non-negative number"));
        }
        Duration::try_from_secs_f64(n * unit).map_err(|e| invalid(var, raw, e))
    }

    fn endpoint(
        &self,
        url_var: &'static str,
        key_var: &'static str,
    ) -> Result<RemoteEndpoint, ConfigError> {
        let url = self.require(url_var)?;
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(invalid(url_var, url, "must be an http(s) URL"));
        }
        let key = self.require(key_var)?;
        Ok(RemoteEndpoint::new(url, Some(key.to_owned())))
    }
}

fn invalid(var: &'static str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        var,
        value: value.to_owned(),
        reason: reason.to_string(),
    }
}

impl Config {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_vars(std::env::vars())
    }

    pub fn from_vars<I, K, V>(vars: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let vars = Vars(vars.into_iter().map(|(k, v)| (k.into(), v.into())).collect());
        let defaults = PipelineConfig::default();

        let bind = vars.parse("MRA_BIND", DEFAULT_BIND.parse().expect("default bind parses"))?;
        let lexicon = PathBuf::from(vars.require("MRA_LEXICON")?);

        let annotator = match vars.get("MRA_ANNOTATOR").unwrap_or("local") {
            "local" => AnnotatorConfig::Local,
            "remote" => AnnotatorConfig::Remote(vars.endpoint("MRA_ANNOTATOR_URL", "MRA_ANNOTATOR_KEY")?),
            other => return Err(invalid("MRA_ANNOTATOR", other, "expected local or remote")),
        };

        let translator = match vars.get("MRA_TRANSLATOR").unwrap_or("mock") {
            "mock" => {
                let latency = vars.duration("MRA_MOCK_LATENCY_SECS", Duration::ZERO, 1.0)?;
                if latency > MAX_MOCK_LATENCY {
                    let raw = vars.get("MRA_MOCK_LATENCY_SECS").unwrap_or_default();
                    return Err(invalid("MRA_MOCK_LATENCY_SECS", raw, "must be at most 120"));
                }
                TranslatorConfig::Mock { latency }
            }
            "remote" => TranslatorConfig::Remote(vars.endpoint("MRA_TRANSLATION_URL", "MRA_TRANSLATION_KEY")?),
            other => return Err(invalid("MRA_TRANSLATOR", other, "expected mock or remote")),
        };

        let languages = match vars.get("MRA_LANGS") {
            None => SupportedLanguages::default(),
            Some(raw) => SupportedLanguages::parse_list(raw).map_err(|e| invalid("MRA_LANGS", raw, e))?,
        };

        let workers: usize = vars.parse("MRA_WORKERS", defaults.workers)?;
        if workers == 0 {
            return Err(invalid("MRA_WORKERS", "0", "must be at least 1"));
        }
        let poll_interval = vars.duration("MRA_POLL_SECS", defaults.poll_interval, 1.0)?;
        let stall_timeout = vars.duration("MRA_STALL_MINS", defaults.stall_timeout, 60.0)?;
        let pipeline = PipelineConfig {
            workers,
            poll_interval,
            stall_timeout,
            // Sweep often enough to honor short stall timeouts.
            sweep_interval: defaults.sweep_interval.min(stall_timeout / 2).max(Duration::from_millis(100)),
            ..defaults
        };

        Ok(Config {
            bind,
            lexicon,
            annotator,
            translator,
            languages,
            pipeline,
            data_dir: PathBuf::from(vars.get("MRA_DATA_DIR").unwrap_or(DEFAULT_DATA_DIR)),
            ui_dir: vars.get("MRA_UI_DIR").map(PathBuf::from),
        })
    }
}
