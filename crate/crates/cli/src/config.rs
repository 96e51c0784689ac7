//! The `predex.toml` file. Every key is optional and every key has a flag
//! that overrides it.
//!
//! ```toml
//! [score]
//! model = "gaussian"
//! targets = ["temperature"]
//!
//! [explain]
//! strategy = "influence"      # or "bayes"
//! strictness = 0.5            # in (0, 1]
//! bins = 20
//! max_explanations = 5
//! max_iterations = 50
//! workers = 4
//! targets = ["temperature"]
//! higher_is_anomalous = true
//!
//! [serve]
//! host = "127.0.0.1"
//! port = 8080
//! data_dir = "sessions"
//! ```

use std::path::{Path, PathBuf};

use predex::Strategy;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub score: ScoreSection,
    pub explain: ExplainSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreSection {
    pub model: Option<String>,
    pub targets: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    pub strategy: Option<Strategy>,
    pub strictness: Option<f64>,
    pub bins: Option<usize>,
    pub max_explanations: Option<usize>,
    pub max_iterations: Option<usize>,
    pub workers: Option<usize>,
    pub targets: Option<Vec<String>>,
    pub higher_is_anomalous: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub data_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<FileConfig, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }

    pub fn load(path: &Path) -> Result<FileConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        FileConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
