//! Parameter sweeps: welfare of the transformed mechanism against the
//! closed-form baselines, one CSV row per swept value.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clickmech_core::numeric::{RunningStats, Z99};
use clickmech_core::verify::{moments, threshold_check, welfare_report, Scenario};
use clickmech_core::{run_mechanism, AdInstance, AdSpec, RuleKind, TrialStreams};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::formats::SCHEMA_VERSION;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    Delta,
    Sigma,
    Horizon,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "delta" => Ok(SweepParameter::Delta),
            "sigma" => Ok(SweepParameter::Sigma),
            "horizon" => Ok(SweepParameter::Horizon),
            other => bail!("unknown sweep parameter {other:?}; expected delta, sigma, or horizon"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Delta => "delta",
            SweepParameter::Sigma => "sigma",
            SweepParameter::Horizon => "horizon",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub delta: f64,
    pub sigma: Option<f64>,
    pub exploit_gap: f64,
    pub mdelta_welfare_mean: f64,
    pub mdelta_welfare_ci99: f64,
    pub rand_welfare: f64,
    pub sampled_sp_welfare: f64,
    pub predicted_improvement: bool,
    pub beats_rand_outside_ci: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub parameter: String,
    pub values: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

/// The explore/exploit rule under the transform: the two-agent rule when
/// the instance has several agents, the dummy-augmented one otherwise.
fn mechanism_rule_kind(instance: &AdInstance) -> RuleKind {
    if instance.num_agents() >= 2 {
        RuleKind::All
    } else {
        RuleKind::AllSingle
    }
}

/// Rebuilds the instance for one swept value: sigma sweeps move ad 0's
/// value per click, horizon sweeps replace T, delta sweeps leave it alone.
fn instance_for_value(
    base: &AdInstance,
    parameter: SweepParameter,
    value: f64,
) -> Result<AdInstance> {
    match parameter {
        SweepParameter::Delta => Ok(base.clone()),
        SweepParameter::Sigma => {
            let mut ads: Vec<AdSpec> = base.ads().to_vec();
            if !(0.0..=1.0).contains(&value) {
                bail!("sigma sweep moves ad 0's value per click; {value} outside [0, 1]");
            }
            ads[0].value_per_click = value;
            AdInstance::new(base.num_agents(), base.horizon(), ads)
                .map_err(|e| anyhow::anyhow!("{e}"))
        }
        SweepParameter::Horizon => {
            let horizon = value as usize;
            if horizon < 2 || (value - horizon as f64).abs() > 0.0 {
                bail!("horizon sweep needs integer values >= 2, got {value}");
            }
            base.with_horizon(horizon).map_err(|e| anyhow::anyhow!("{e}"))
        }
    }
}

pub fn run_sweep(
    config: &ExperimentConfig,
    base_instance: &AdInstance,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<SweepSummary> {
    let mut rows = Vec::with_capacity(values.len());
    for (idx, &value) in values.iter().enumerate() {
        let instance = instance_for_value(base_instance, parameter, value)?;
        let delta = if parameter == SweepParameter::Delta {
            if !(value > 0.0 && value < 1.0) {
                bail!("delta sweep values must lie in (0, 1), got {value}");
            }
            value
        } else {
            config.delta
        };
        let bids = instance.truthful_bids();
        let kind = mechanism_rule_kind(&instance);
        let rule = kind.build(&instance, &config.rule_params())?;

        let mut welfare = RunningStats::new();
        for trial in 0..config.trials {
            let run = run_mechanism(
                &rule,
                &bids,
                delta,
                &instance,
                &TrialStreams::new(config.seed.wrapping_add(idx as u64), trial),
            )
            .map_err(|e| anyhow::anyhow!("{e}"))?;
            welfare.push(run.welfare());
        }

        let stats = moments(&bids, &instance);
        let rand_welfare = instance.horizon() as f64 * stats.m1;
        let sampled = welfare_report(RuleKind::SampledSp, &bids, &instance, config.explore_rounds)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .total;
        let exploit_gap = welfare_report(kind, &bids, &instance, config.explore_rounds)
            .map_err(|e| anyhow::anyhow!("{e}"))?
            .exploit_gap;

        let max_product = bids
            .iter()
            .zip(instance.ctrs())
            .map(|(b, mu)| b * mu)
            .fold(0.0f64, f64::max);
        let predicted = if max_product > 0.0 {
            let scenario = if instance.num_agents() >= 2 {
                Scenario::MultiAgent
            } else {
                Scenario::SingleAgent
            };
            threshold_check(&bids, &instance, scenario, 0.5 * max_product)
                .map(|v| v.improvement_predicted)
                .unwrap_or(false)
        } else {
            false
        };
        let ci = welfare.ci_halfwidth(Z99);
        rows.push(SweepRow {
            parameter: parameter.name().to_string(),
            value,
            delta,
            sigma: stats.sigma,
            exploit_gap,
            mdelta_welfare_mean: welfare.mean(),
            mdelta_welfare_ci99: ci,
            rand_welfare,
            sampled_sp_welfare: sampled,
            predicted_improvement: predicted,
            beats_rand_outside_ci: welfare.mean() - ci > rand_welfare,
        });
    }
    Ok(SweepSummary {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        parameter: parameter.name().to_string(),
        values: values.to_vec(),
        rows,
    })
}

pub fn write_sweep_csv(path: &Path, summary: &SweepSummary) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    writer.write_record([
        "parameter",
        "value",
        "delta",
        "sigma",
        "exploit_gap",
        "mdelta_welfare_mean",
        "mdelta_welfare_ci99",
        "rand_welfare",
        "sampled_sp_welfare",
        "predicted_improvement",
        "beats_rand_outside_ci",
        "seed",
        "config_hash",
    ])?;
    for row in &summary.rows {
        writer.write_record([
            row.parameter.clone(),
            format!("{}", row.value),
            format!("{}", row.delta),
            row.sigma.map_or_else(|| "degenerate".into(), |s| format!("{s}")),
            format!("{}", row.exploit_gap),
            format!("{}", row.mdelta_welfare_mean),
            format!("{}", row.mdelta_welfare_ci99),
            format!("{}", row.rand_welfare),
            format!("{}", row.sampled_sp_welfare),
            u8::from(row.predicted_improvement).to_string(),
            u8::from(row.beats_rand_outside_ci).to_string(),
            summary.seed.to_string(),
            summary.config_hash.clone(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
