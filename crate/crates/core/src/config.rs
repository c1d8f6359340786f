//! Scan configuration: every tunable threshold, loadable from a flat TOML
//! file and fingerprinted into reports.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::DEFAULT_DIRECTION_THRESHOLD;
use crate::dispatch::{DEFAULT_OUTBOUND_WINDOW, TEMPLATE_SET_VERSION};
use crate::features::ExtractionConfig;
use crate::keccak::keccak256;
use crate::sigdb::{KeywordRules, UpgradeFunctionDb, DEFAULT_RELATED_WORDS, DEFAULT_RULES_VERSION};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    /// Instructions searched downstream of a pushed selector for an external call.
    pub outbound_window: usize,
    /// Share of inbound calls that must come from one caller kind.
    pub direction_threshold: f64,
    /// Storage slots 0..n sampled, in addition to the admin and implementation slots.
    pub sample_slots: u64,
    pub related_words: Vec<String>,
    pub related_words_version: String,
    pub rpc_max_attempts: u32,
    pub rpc_initial_backoff_ms: u64,
    pub rpc_max_in_flight: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            outbound_window: DEFAULT_OUTBOUND_WINDOW,
            direction_threshold: DEFAULT_DIRECTION_THRESHOLD,
            sample_slots: 32,
            related_words: DEFAULT_RELATED_WORDS.iter().map(|w| w.to_string()).collect(),
            related_words_version: DEFAULT_RULES_VERSION.to_string(),
            rpc_max_attempts: 5,
            rpc_initial_backoff_ms: 200,
            rpc_max_in_flight: 8,
        }
    }
}

impl ScanConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
        let cfg: ScanConfig = toml::from_str(&text).map_err(|source| ConfigError::Toml { path: p, source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.direction_threshold) {
            return Err(ConfigError::Invalid(format!(
                "direction_threshold must be in [0, 1), got {}",
                self.direction_threshold
            )));
        }
        if self.rpc_max_attempts == 0 || self.rpc_max_in_flight == 0 {
            return Err(ConfigError::Invalid("rpc_max_attempts and rpc_max_in_flight must be positive".into()));
        }
        Ok(())
    }

    pub fn extraction(&self) -> ExtractionConfig {
        ExtractionConfig { outbound_window: self.outbound_window }
    }

    pub fn keyword_rules(&self) -> KeywordRules {
        KeywordRules {
            related_words: self.related_words.clone(),
            version: self.related_words_version.clone(),
            ..KeywordRules::default()
        }
    }

    /// Everything that can change a scan's results, as one document.
    pub fn fingerprint_inputs(&self, db: &UpgradeFunctionDb) -> serde_json::Value {
        serde_json::json!({
            "config": self,
            "db_version": db.version(),
            "related_words_version": db.rules_version(),
            "template_set_version": TEMPLATE_SET_VERSION,
        })
    }

    /// First 16 bytes of keccak-256 over [`Self::fingerprint_inputs`].
    pub fn fingerprint(&self, db: &UpgradeFunctionDb) -> String {
        let doc = serde_json::to_vec(&self.fingerprint_inputs(db)).expect("config serializes");
        hex::encode(&keccak256(&doc)[..16])
    }
}
