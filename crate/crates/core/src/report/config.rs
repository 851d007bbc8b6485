//! Experiment configuration, read from a sectioned TOML file.
//!
//! ```toml
//! [input]
//! path = "data/cohort.csv"        # relative to the config file
//! qc_valid_flags = ["OK", "PASS", "VALID"]
//!
//! [protocol]
//! k = 5
//! seed = 42
//!
//! [run]
//! models = ["LR", "RF"]
//! groups = ["F3"]
//! ```
//!
//! Every section and key is optional; omitted keys take the defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::curation::{CurationConfig, GroupTag};
use crate::evaluation::Protocol;
use crate::ingest::{QcFlags, Schema};
use crate::models::ModelKind;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub qc_valid_flags: Vec<String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: None,
            qc_valid_flags: QcFlags::default().iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub models: Vec<ModelKind>,
    pub groups: Vec<GroupTag>,
    /// Worker threads for the grid; unset uses the global pool. Results do
    /// not depend on it.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            groups: GroupTag::ALL.to_vec(),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub input: InputConfig,
    pub schema: Schema,
    pub curation: CurationConfig,
    pub protocol: Protocol,
    pub run: RunConfig,
    pub synth: SynthConfig,
    /// Directory relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = fs::read_to_string(path).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: PathBuf) -> Result<Self, ReportError> {
        let mut config: Self = toml::from_str(text).map_err(|e| ReportError::Config(e.to_string()))?;
        config.base_dir = base_dir;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let cfg = |e: String| ReportError::Config(e);
        self.protocol.validate().map_err(|e| cfg(e.to_string()))?;
        self.curation.validate().map_err(|e| cfg(e.to_string()))?;
        self.synth.validate().map_err(|e| cfg(e.to_string()))?;
        QcFlags::new(&self.input.qc_valid_flags).map_err(|e| cfg(format!("input.qc_valid_flags: {e}")))?;
        if self.run.models.is_empty() {
            return Err(cfg("run.models is empty".into()));
        }
        if self.run.groups.is_empty() {
            return Err(cfg("run.groups is empty".into()));
        }
        if self.run.threads == Some(0) {
            return Err(cfg("run.threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn qc_flags(&self) -> QcFlags {
        QcFlags::new(&self.input.qc_valid_flags).expect("validated")
    }

    pub fn input_path(&self) -> Result<PathBuf, ReportError> {
        let path = self
            .input
            .path
            .as_ref()
            .ok_or_else(|| ReportError::Config("input.path is required".into()))?;
        Ok(if path.is_absolute() {
            path.clone()
        } else {
            self.base_dir.join(path)
        })
    }

    /// Models in table order, without duplicates.
    pub fn models(&self) -> Vec<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .filter(|m| self.run.models.contains(m))
            .collect()
    }

    pub fn groups(&self) -> Vec<GroupTag> {
        GroupTag::ALL
            .into_iter()
            .filter(|g| self.run.groups.contains(g))
            .collect()
    }

    /// SHA-256 of the canonical JSON form of the effective config.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_protocol_constants() {
        let c = ExperimentConfig::from_toml("", PathBuf::new()).unwrap();
        assert_eq!(c.protocol, Protocol::default());
        assert_eq!((c.protocol.k, c.protocol.seed, c.protocol.resamples), (5, 42, 1000));
        assert_eq!((c.protocol.threshold, c.protocol.alpha), (0.5, 0.05));
        assert_eq!(c.models().len(), 5);
        assert_eq!(c.groups().len(), 3);
    }

    #[test]
    fn sections_parse_and_round_trip() {
        let text = r#"
[input]
path = "cohort.csv"

[run]
models = ["RF", "XGB"]
groups = ["F2"]

[curation]
max_missing_fraction = 0.2
blocklist = ["lab_result_code"]
"#;
        let c = ExperimentConfig::from_toml(text, PathBuf::from("/data")).unwrap();
        assert_eq!(c.models(), vec![ModelKind::Rf, ModelKind::Gbt]);
        assert_eq!(c.groups(), vec![GroupTag::F2]);
        assert_eq!(c.input_path().unwrap(), PathBuf::from("/data/cohort.csv"));
        let back = ExperimentConfig::from_toml(&c.to_toml(), PathBuf::from("/data")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[protocol]\nk = 1",
            "[synth]\nprevalence = 1.5",
            "[run]\nmodels = []",
            "[run]\nmodels = [\"SVM\"]",
            "[nonsense]\nx = 1",
            "[input]\nqc_valid_flags = []",
        ] {
            assert!(matches!(
                ExperimentConfig::from_toml(text, PathBuf::new()),
                Err(ReportError::Config(_))
            ), "{text}");
        }
    }
}
