//! Zone configuration file.
//!
//! A TOML document with a schema version, the receiver limits table and the
//! zone list. Key names are stable:
//!
//! ```toml
//! schema_version = 1
//!
//! [limits]
//! school = 45.0
//! office = 45.0
//! hospital = 25.0
//!
//! [[zones]]
//! id = "hospital"
//! kind = "hospital"
//! start = 1600.0
//! end = 1800.0
//! frequency_mhz = 433.93
//! limit = 25.0
//! honk_free = true
//! emergency = false
//! repeat_period = 0.1
//!
//! [zones.schedule]
//! open = "00:00"
//! close = "00:00"
//! always_on = true
//! ```

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::zone::{LimitsTable, ZoneConfig, ZoneController};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] io::Error),
    #[error("config schema: {0}")]
    Schema(String),
    #[error("config schema version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    schema_version: u32,
    limits: LimitsTable,
    #[serde(default)]
    zones: Vec<ZoneConfig>,
}

pub fn to_text(zones: &ZoneController) -> String {
    let doc = ConfigDoc {
        schema_version: SCHEMA_VERSION,
        limits: zones.limits().clone(),
        zones: zones.zones().to_vec(),
    };
    toml::to_string(&doc).expect("zone config serializes")
}

pub fn from_text(text: &str) -> Result<ZoneController, ConfigError> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: Option<u32>,
    }
    let version: Version = toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    match version.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(found) => {
            return Err(ConfigError::Version {
                found,
                expected: SCHEMA_VERSION,
            })
        }
        None => return Err(ConfigError::Schema("missing schema_version".to_string())),
    }
    let doc: ConfigDoc = toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    ZoneController::new(doc.zones, doc.limits).map_err(|e| ConfigError::Schema(e.to_string()))
}

/// Write atomically: a sibling temp file is renamed over `path`.
pub fn persist(zones: &ZoneController, path: &Path) -> Result<(), ConfigError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, to_text(zones))?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ZoneController, ConfigError> {
    from_text(&fs::read_to_string(path)?)
}
