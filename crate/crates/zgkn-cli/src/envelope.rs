//! Result envelope written by every subcommand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const ARTIFACT_VERSION: &str = concat!("zgkn/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub artifact_version: String,
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// Always null so that identical configs give identical bytes.
    pub started: Option<String>,
    pub finished: Option<String>,
    pub payload: Value,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<Value>,
}

impl ResultEnvelope {
    pub fn new(command: &str, config: &RunConfig, payload: Value) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.into(),
            command: command.into(),
            config_hash: config.hash(),
            config: config.clone(),
            started: None,
            finished: None,
            payload,
            diagnostics: Diagnostics { warnings: config.warnings(), error: None },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("envelope serializes") + "\n"
    }

    /// Load and check that the stored hash matches the stored config.
    pub fn load_checked(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let env: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if env.config.hash() != env.config_hash {
            return Err(CliError::Config(format!("{}: config hash does not match its config", path.display())));
        }
        Ok(env)
    }
}

/// Write via a sibling temporary file so that a failed run leaves nothing behind.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, contents).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
