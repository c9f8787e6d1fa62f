//! `lemmaforge.toml` settings. Command-line flags win over environment
//! variables, which win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::repl::PoolConfig;

pub const CONFIG_FILE: &str = "lemmaforge.toml";
pub const REPL_ENV: &str = "LEMMAFORGE_REPL";
pub const PROJECT_ENV: &str = "LEMMAFORGE_LEAN_PROJECT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(
        "no Lean REPL configured: pass --repl, set {REPL_ENV}, or set repl_path in {CONFIG_FILE}"
    )]
    NoRepl,
    #[error("pool_size must be at least 1")]
    EmptyPool,
    #[error("model `{0}` is not configured under [models] in {CONFIG_FILE}")]
    UnknownModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Timeouts {
    pub verify_s: f64,
    pub import_s: f64,
    pub decompose_s: f64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Self {
            verify_s: 120.0,
            import_s: 600.0,
            decompose_s: 60.0,
        }
    }
}

/// One chat-completions endpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelEntry {
    pub endpoint: String,
    /// Model name sent to the endpoint; defaults to the table key.
    pub model: Option<String>,
    pub timeout_s: Option<f64>,
    pub decoding: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub repl_path: Option<PathBuf>,
    pub repl_args: Vec<String>,
    pub lean_project_root: Option<PathBuf>,
    pub lean_version: String,
    pub pool_size: usize,
    pub memory_cap_mb: Option<u64>,
    pub timeouts: Timeouts,
    pub runs_dir: PathBuf,
    pub datasets_dir: PathBuf,
    pub models: BTreeMap<String, ModelEntry>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            repl_path: None,
            repl_args: Vec::new(),
            lean_project_root: None,
            lean_version: String::new(),
            pool_size: crate::repl::pool::default_pool_size(),
            memory_cap_mb: None,
            timeouts: Timeouts::default(),
            runs_dir: PathBuf::from("runs"),
            datasets_dir: PathBuf::from("datasets"),
            models: BTreeMap::new(),
        }
    }
}

/// Values that may come from flags or the environment.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub repl_path: Option<PathBuf>,
    pub lean_project_root: Option<PathBuf>,
    pub pool_size: Option<usize>,
}

impl GlobalConfig {
    /// Reads `path`; a missing file yields defaults unless it was named
    /// explicitly.
    pub fn load(path: &Path, explicit: bool) -> Result<Self, ConfigError> {
        match std::fs::read_to_string(path) {
            Ok(text) => toml::from_str(&text).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && !explicit => Ok(Self::default()),
            Err(source) => Err(ConfigError::Read {
                path: path.to_path_buf(),
                source,
            }),
        }
    }

    /// Applies flag or environment values over the file values.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = &o.repl_path {
            self.repl_path = Some(p.clone());
        }
        if let Some(p) = &o.lean_project_root {
            self.lean_project_root = Some(p.clone());
        }
        if let Some(n) = o.pool_size {
            self.pool_size = n;
        }
    }

    pub fn pool_config(&self) -> Result<PoolConfig, ConfigError> {
        let repl = self.repl_path.clone().ok_or(ConfigError::NoRepl)?;
        if self.pool_size == 0 {
            return Err(ConfigError::EmptyPool);
        }
        let mut pc = PoolConfig::new(repl);
        pc.repl_args = self.repl_args.clone();
        pc.project_root = self.lean_project_root.clone();
        pc.size = self.pool_size;
        pc.memory_cap_mb = self.memory_cap_mb;
        pc.import_timeout = Duration::from_secs_f64(self.timeouts.import_s);
        Ok(pc)
    }

    pub fn verify_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeouts.verify_s)
    }

    pub fn decompose_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeouts.decompose_s)
    }

    pub fn model(&self, name: &str) -> Result<&ModelEntry, ConfigError> {
        self.models
            .get(name)
            .ok_or_else(|| ConfigError::UnknownModel(name.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CONFIG_FILE);
        std::fs::write(
            &path,
            "repl_path = \"/opt/repl\"\npool_size = 3\n[timeouts]\nverify_s = 5\n\
             [models.m]\nendpoint = \"http://x/v1/chat/completions\"\ndecoding = { temperature = 0.2 }\n",
        )
        .unwrap();
        let mut c = GlobalConfig::load(&path, true).unwrap();
        assert_eq!(c.pool_size, 3);
        assert_eq!(c.verify_timeout(), Duration::from_secs(5));
        assert_eq!(
            c.model("m").unwrap().decoding["temperature"],
            serde_json::json!(0.2)
        );
        c.apply(&Overrides {
            repl_path: Some("/flag/repl".into()),
            pool_size: Some(1),
            ..Default::default()
        });
        assert_eq!(
            c.pool_config().unwrap().repl_path,
            PathBuf::from("/flag/repl")
        );
        assert_eq!(c.pool_size, 1);
    }

    #[test]
    fn missing_file_and_typos() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(CONFIG_FILE);
        assert!(GlobalConfig::load(&path, false)
            .unwrap()
            .repl_path
            .is_none());
        assert!(GlobalConfig::load(&path, true).is_err());
        std::fs::write(&path, "repl_pth = \"x\"\n").unwrap();
        assert!(matches!(
            GlobalConfig::load(&path, false),
            Err(ConfigError::Parse { .. })
        ));
        assert!(matches!(
            GlobalConfig::default().pool_config(),
            Err(ConfigError::NoRepl)
        ));
    }
}
