//! TOML configuration shared by all CLI commands. Every section is
//! optional and defaults to the library defaults; unknown keys are
//! rejected so typos fail loudly.

use crate::filters::FilterConfig;
use crate::mcl::LocalizationConfig;
use crate::ndt::MapConfig;
use crate::sim::SessionSpec;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub mapping_seeds: Vec<u64>,
    pub localization_seeds: Vec<u64>,
    pub map_types: Vec<String>,
    pub methods: Vec<String>,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            mapping_seeds: vec![1, 2],
            localization_seeds: vec![101, 102, 103, 104, 105, 106, 107],
            map_types: vec!["baseline".into(), "static".into()],
            methods: vec![
                "baseline".into(),
                "filtered".into(),
                "static".into(),
                "combined".into(),
            ],
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.mapping_seeds.is_empty() || self.localization_seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "experiment needs at least one mapping and one localization seed".into(),
            ));
        }
        for t in &self.map_types {
            if t != "baseline" && t != "static" {
                return Err(Error::UnknownMapType(t.clone()));
            }
        }
        for m in &self.methods {
            crate::filters::Method::from_name(m)?;
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.mapping_seeds.len()
            * self.map_types.len()
            * self.localization_seeds.len()
            * self.methods.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FullConfig {
    pub session: SessionSpec,
    pub map: MapConfig,
    pub localization: LocalizationConfig,
    pub filter: FilterConfig,
    pub experiment: ExperimentPlan,
}

impl FullConfig {
    pub fn load(path: &Path) -> Result<FullConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: FullConfig = toml::from_str(&text)?;
        cfg.session.validate()?;
        cfg.experiment.validate()?;
        Ok(cfg)
    }
}
