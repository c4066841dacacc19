//! Engine configuration file (TOML).
//!
//! ```toml
//! tau = 0.5
//! blocklist = "blocklist.tsv"
//!
//! [catalog]
//! agents = "agents.jsonl"
//! clusters = "clusters.tsv"
//!
//! [scorer]
//! backend = "baseline"        # or "subprocess" / "http"
//! model = "model.json"
//! batch_size = 64
//! timeout_secs = 30
//!
//! [server]
//! bind = "127.0.0.1:8080"
//! snapshot = "snapshot"
//! ```
//!
//! Relative paths resolve against the config file's directory.
//! `SDI_BIND` and `SDI_SNAPSHOT` override the server settings.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::catalog::{load_catalog, Catalog, CatalogError};
use crate::classifier::scorer::{DEFAULT_BATCH_SIZE, DEFAULT_TIMEOUT};
use crate::classifier::{BaselineModel, ClassifierError, HttpScorer, Scorer, ScorerError, SubprocessScorer};
use crate::evidence::{EvidenceError, SpanBlocklist};

pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const ENV_BIND: &str = "SDI_BIND";
pub const ENV_SNAPSHOT: &str = "SDI_SNAPSHOT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(String),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogConfig {
    pub agents: PathBuf,
    #[serde(default)]
    pub clusters: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum ScorerBackend {
    Baseline { model: PathBuf },
    Subprocess { command: Vec<String> },
    Http { url: String },
}

fn default_batch() -> usize {
    DEFAULT_BATCH_SIZE
}

fn default_timeout() -> f64 {
    DEFAULT_TIMEOUT.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ScorerConfig {
    #[serde(flatten)]
    pub backend: ScorerBackend,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl ScorerConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn open(&self) -> Result<Box<dyn Scorer + Send>, ConfigError> {
        Ok(match &self.backend {
            ScorerBackend::Baseline { model } => Box::new(BaselineModel::load(model)?),
            ScorerBackend::Subprocess { command } => {
                let (program, args) =
                    command.split_first().ok_or_else(|| ConfigError::Invalid("empty scorer command".into()))?;
                Box::new(SubprocessScorer::spawn(program, args, self.batch_size, self.timeout())?)
            }
            ScorerBackend::Http { url } => Box::new(HttpScorer::new(url.clone(), self.batch_size, self.timeout())),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: Option<String>,
    pub snapshot: Option<PathBuf>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Blocklist file; the built-in list is used when absent.
    #[serde(default)]
    pub blocklist: Option<PathBuf>,
    pub catalog: Option<CatalogConfig>,
    pub scorer: Option<ScorerConfig>,
    #[serde(default)]
    pub server: ServerConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self { tau: DEFAULT_TAU, blocklist: None, catalog: None, scorer: None, server: ServerConfig::default() }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(b) = cfg.blocklist.as_mut() {
            resolve(base, b);
        }
        if let Some(c) = cfg.catalog.as_mut() {
            resolve(base, &mut c.agents);
            if let Some(cl) = c.clusters.as_mut() {
                resolve(base, cl);
            }
        }
        if let Some(ScorerConfig { backend: ScorerBackend::Baseline { model }, .. }) = cfg.scorer.as_mut() {
            resolve(base, model);
        }
        if let Some(s) = cfg.server.snapshot.as_mut() {
            resolve(base, s);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(ConfigError::Invalid(format!("tau {} outside [0, 1]", self.tau)));
        }
        if let Some(s) = &self.scorer {
            if s.batch_size == 0 {
                return Err(ConfigError::Invalid("scorer.batch_size must be positive".into()));
            }
            if !(s.timeout_secs.is_finite() && s.timeout_secs > 0.0) {
                return Err(ConfigError::Invalid("scorer.timeout_secs must be positive".into()));
            }
            if let ScorerBackend::Subprocess { command } = &s.backend {
                if command.is_empty() {
                    return Err(ConfigError::Invalid("scorer.command is empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Applies `SDI_BIND` / `SDI_SNAPSHOT` from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(bind) = lookup(ENV_BIND).filter(|v| !v.is_empty()) {
            self.server.bind = Some(bind);
        }
        if let Some(snap) = lookup(ENV_SNAPSHOT).filter(|v| !v.is_empty()) {
            self.server.snapshot = Some(PathBuf::from(snap));
        }
    }

    pub fn bind(&self) -> &str {
        self.server.bind.as_deref().unwrap_or(DEFAULT_BIND)
    }

    pub fn load_blocklist(&self) -> Result<SpanBlocklist, ConfigError> {
        Ok(match &self.blocklist {
            Some(p) => SpanBlocklist::load(p)?,
            None => SpanBlocklist::builtin(),
        })
    }

    pub fn load_catalog(&self) -> Result<Catalog, ConfigError> {
        let c = self.catalog.as_ref().ok_or_else(|| ConfigError::Invalid("no [catalog] section".into()))?;
        Ok(load_catalog(&c.agents, c.clusters.as_deref())?)
    }
}
