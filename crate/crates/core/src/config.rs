//! Engine configuration: TOML file, then environment overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::disambiguation::{
    BaselineOptions, BaselineResolver, Lexicon, MockResolver, RemoteResolver, Resolver, ResolverMode, TaskType,
    DEFAULT_RESOLVER_TIMEOUT_MS,
};
use crate::scene::DEFAULT_FUZZY_THRESHOLD;
use crate::targeting::AngleConfig;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResolverConfig {
    pub mode: ResolverMode,
    pub endpoint: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig { mode: ResolverMode::Baseline, endpoint: None, model: "gpt-4o".into(), timeout_ms: DEFAULT_RESOLVER_TIMEOUT_MS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub static_dir: Option<PathBuf>,
    pub session_ttl_secs: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: DEFAULT_BIND.into(), static_dir: None, session_ttl_secs: 1800 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub angles: AngleConfig,
    pub resolver: ResolverConfig,
    pub server: ServerConfig,
    pub fuzzy_threshold: f64,
    /// Extra verb phrases, e.g. `"fetch me" = "Fetch"`.
    pub lexicon: BTreeMap<String, TaskType>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            angles: AngleConfig::default(),
            resolver: ResolverConfig::default(),
            server: ServerConfig::default(),
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
            lexicon: BTreeMap::new(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| path.display().to_string())
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.angles.validate()?;
        if !(0.0..=1.0).contains(&self.fuzzy_threshold) {
            bail!("fuzzy_threshold must lie in [0, 1]");
        }
        if self.resolver.timeout_ms == 0 {
            bail!("resolver.timeout_ms must be positive");
        }
        Ok(())
    }

    /// Apply `INTENBOT_*` variables from `lookup` (normally `std::env::var`).
    pub fn apply_env_with(&mut self, lookup: impl Fn(&str) -> Option<String>) -> anyhow::Result<()> {
        if let Some(mode) = lookup("INTENBOT_LLM_MODE") {
            self.resolver.mode = mode.parse().map_err(anyhow::Error::msg)?;
        }
        if let Some(endpoint) = lookup("INTENBOT_LLM_ENDPOINT") {
            self.resolver.endpoint = Some(endpoint);
        }
        if let Some(ms) = lookup("INTENBOT_LLM_TIMEOUT_MS") {
            self.resolver.timeout_ms = ms.trim().parse().with_context(|| format!("INTENBOT_LLM_TIMEOUT_MS={ms:?}"))?;
        }
        if let Some(bind) = lookup("INTENBOT_BIND") {
            self.server.bind = bind;
        }
        self.validate()
    }

    pub fn apply_env(&mut self) -> anyhow::Result<()> {
        self.apply_env_with(|k| std::env::var(k).ok().filter(|v| !v.is_empty()))
    }

    pub fn baseline_options(&self) -> BaselineOptions {
        let mut lexicon = Lexicon::default();
        lexicon.extend(&self.lexicon);
        BaselineOptions { lexicon, fuzzy_threshold: self.fuzzy_threshold }
    }

    pub fn build_resolver(&self, mode: ResolverMode) -> anyhow::Result<Arc<dyn Resolver>> {
        let options = self.baseline_options();
        Ok(match mode {
            ResolverMode::Baseline => Arc::new(BaselineResolver { options }),
            ResolverMode::Mock => Arc::new(MockResolver::default()),
            ResolverMode::Remote => {
                let Some(endpoint) = self.resolver.endpoint.clone() else {
                    bail!("remote resolver needs INTENBOT_LLM_ENDPOINT or resolver.endpoint");
                };
                let mut remote = RemoteResolver::new(endpoint, self.resolver.timeout_ms);
                remote.model = self.resolver.model.clone();
                remote.api_key = std::env::var("INTENBOT_LLM_API_KEY").ok().filter(|k| !k.is_empty());
                remote.options = options;
                Arc::new(remote)
            }
        })
    }
}
