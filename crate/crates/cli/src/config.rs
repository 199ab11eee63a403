//! Experiment configuration: flag defaults, config-file overrides, and the
//! provenance hash stamped into every output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clickmech_core::{RuleKind, RuleParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Effective configuration of one experiment run.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub instance_path: PathBuf,
    pub rule: String,
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
    pub checks: Vec<String>,
    pub output_dir: PathBuf,
    pub explore_rounds: usize,
    pub dummy_ctr: f64,
    /// Worker threads for trial fan-out; 0 picks the available parallelism.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            bail!("delta must lie strictly inside (0, 1), got {}", self.delta);
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if RuleKind::parse(&self.rule).is_err() {
            bail!(
                "unknown rule {:?}; expected one of rand, sampled-sp, all, all-single, greedy",
                self.rule
            );
        }
        Ok(())
    }

    pub fn rule_kind(&self) -> RuleKind {
        RuleKind::parse(&self.rule).expect("validated rule name")
    }

    pub fn rule_params(&self) -> RuleParams {
        RuleParams {
            explore_rounds: self.explore_rounds,
            dummy_ctr: self.dummy_ctr,
        }
    }

    /// Hex digest over the semantic fields (everything that can change the
    /// numbers; output location and thread count are excluded so reruns and
    /// parallel runs of the same experiment hash identically).
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "instance_path": self.instance_path,
            "rule": self.rule,
            "delta": self.delta,
            "trials": self.trials,
            "seed": self.seed,
            "checks": self.checks,
            "explore_rounds": self.explore_rounds,
            "dummy_ctr": self.dummy_ctr,
        })
        .to_string();
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Partial configuration loaded from a file. Any present field replaces
/// the flag value: the config file overrides flags.
#[derive(Clone, Debug, Default, Deserialize)]
pub struct ConfigFile {
    pub instance_path: Option<PathBuf>,
    pub rule: Option<String>,
    pub delta: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub checks: Option<Vec<String>>,
    pub output_dir: Option<PathBuf>,
    pub explore_rounds: Option<usize>,
    pub dummy_ctr: Option<f64>,
    pub threads: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config file {}", path.display()))
    }

    pub fn apply(self, base: &mut ExperimentConfig) {
        if let Some(v) = self.instance_path {
            base.instance_path = v;
        }
        if let Some(v) = self.rule {
            base.rule = v;
        }
        if let Some(v) = self.delta {
            base.delta = v;
        }
        if let Some(v) = self.trials {
            base.trials = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.checks {
            base.checks = v;
        }
        if let Some(v) = self.output_dir {
            base.output_dir = v;
        }
        if let Some(v) = self.explore_rounds {
            base.explore_rounds = v;
        }
        if let Some(v) = self.dummy_ctr {
            base.dummy_ctr = v;
        }
        if let Some(v) = self.threads {
            base.threads = v;
        }
    }
}
