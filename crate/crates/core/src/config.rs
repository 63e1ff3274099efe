//! Combined pipeline configuration with file loading and `key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::labeler::AggregationConfig;
use crate::raster::RasterConfig;
use crate::refine::RefineConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub raster: RasterConfig,
    pub aggregation: AggregationConfig,
    pub refine: RefineConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.raster.validate()?;
        self.aggregation.validate()?;
        self.refine.validate()
    }

    /// Applies one `section.field=value` override. The value is read as JSON
    /// when it parses, else as a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut node = &mut tree;
        for part in key.trim().split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        }
        if node.is_object() {
            return Err(Error::Config(format!(
                "config key `{key}` names a section, not a field"
            )));
        }
        let raw = raw.trim();
        *node = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let updated: PipelineConfig =
            serde_json::from_value(tree).map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}
