//! File formats: instance JSON, realization fixtures, and output schemas.
//!
//! The instance wire format is `{"agents": n, "horizon": T, "ads":
//! [{"owner": i, "value": v, "ctr": mu}]}`; field names are part of the
//! CLI contract. Realizations serialize as row-major 0/1 matrices.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clickmech_core::{AdInstance, AdSpec, ClickRealization};
use serde::{Deserialize, Serialize};

/// Schema version stamped into every JSON output.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdFile {
    pub owner: usize,
    pub value: f64,
    pub ctr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub agents: usize,
    pub horizon: usize,
    pub ads: Vec<AdFile>,
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<AdInstance> {
        let ads = self
            .ads
            .iter()
            .map(|a| AdSpec {
                owner: a.owner,
                value_per_click: a.value,
                ctr: a.ctr,
            })
            .collect();
        AdInstance::new(self.agents, self.horizon, ads)
            .map_err(|e| anyhow::anyhow!("invalid instance: {e}"))
    }

    pub fn from_instance(instance: &AdInstance) -> Self {
        InstanceFile {
            agents: instance.num_agents(),
            horizon: instance.horizon(),
            ads: instance
                .ads()
                .iter()
                .map(|a| AdFile {
                    owner: a.owner,
                    value: a.value_per_click,
                    ctr: a.ctr,
                })
                .collect(),
        }
    }
}

pub fn load_instance(path: &Path) -> Result<AdInstance> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance file {}", path.display()))?;
    let file: InstanceFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing instance file {}", path.display()))?;
    file.to_instance()
}

/// Row-major 0/1 click table, the regression-fixture format.
pub fn realization_to_rows(realization: &ClickRealization) -> Vec<Vec<u8>> {
    realization.to_rows()
}

pub fn realization_from_rows(rows: &[Vec<u8>], num_ads: usize) -> Result<ClickRealization> {
    ClickRealization::from_rows(rows, num_ads)
        .map_err(|e| anyhow::anyhow!("invalid realization: {e}"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
