//! Trial fan-out and aggregation.
//!
//! Trials are keyed by index, so they can be chunked across a worker pool
//! and merged back in index order; results are bit-identical regardless of
//! thread count or scheduling.

use std::path::Path;
use std::thread;

use anyhow::{Context, Result};
use clickmech_core::numeric::{RunningStats, Z99};
use clickmech_core::{
    run_mechanism_on, sample_realization, simulate, AdInstance, BidVector, BuiltRule,
    TrialStreams,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::formats::SCHEMA_VERSION;

/// One mechanism trial, as written to the per-trial CSV.
#[derive(Clone, Debug)]
pub struct TrialRow {
    pub trial: u64,
    pub chi: Vec<f64>,
    pub payments: Vec<f64>,
    pub welfare: f64,
    /// Whether the transformed run's action trace matched the coupled
    /// untransformed run.
    pub matched: bool,
}

/// Runs `trials` coupled mechanism trials of the transformed rule.
pub fn run_trials(
    rule: &BuiltRule,
    bids: &BidVector,
    instance: &AdInstance,
    delta: f64,
    trials: u64,
    seed: u64,
    threads: usize,
) -> Result<Vec<TrialRow>> {
    let workers = if threads == 0 {
        thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        threads
    };
    let workers = workers.min(trials.max(1) as usize).max(1);
    let chunk = trials.div_ceil(workers as u64);

    let run_range = |lo: u64, hi: u64| -> Result<Vec<TrialRow>> {
        let mut rows = Vec::with_capacity((hi - lo) as usize);
        for trial in lo..hi {
            let streams = TrialStreams::new(seed, trial);
            let realization = sample_realization(instance, streams.environment);
            let baseline = simulate(rule, bids, &realization, streams.rule)
                .map_err(|e| anyhow::anyhow!("baseline run failed: {e}"))?;
            let run = run_mechanism_on(
                rule,
                bids,
                delta,
                instance,
                &realization,
                streams.rule,
                streams.resample,
            )
            .map_err(|e| anyhow::anyhow!("mechanism run failed: {e}"))?;
            rows.push(TrialRow {
                trial,
                chi: run.draw.chi.clone(),
                payments: run.payments.clone(),
                welfare: run.welfare(),
                matched: run.record.actions == baseline.actions,
            });
        }
        Ok(rows)
    };

    if workers == 1 {
        return run_range(0, trials);
    }
    let mut merged: Vec<Vec<TrialRow>> = Vec::with_capacity(workers);
    thread::scope(|scope| -> Result<()> {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers as u64 {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(trials);
            if lo >= hi {
                break;
            }
            handles.push(scope.spawn(move || run_range(lo, hi)));
        }
        for handle in handles {
            merged.push(handle.join().expect("worker panicked")?);
        }
        Ok(())
    })?;
    Ok(merged.into_iter().flatten().collect())
}

/// Aggregate summary of a trial batch.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub rule: String,
    pub delta: f64,
    pub trials: u64,
    pub mean_welfare: f64,
    pub welfare_ci99: f64,
    pub mean_payments: Vec<f64>,
    pub payment_ci99: Vec<f64>,
    pub mean_chi: Vec<f64>,
    pub match_frequency: f64,
    pub match_ci99: f64,
}

pub fn summarize(config: &ExperimentConfig, rows: &[TrialRow]) -> SimulationSummary {
    let n_agents = rows.first().map_or(0, |r| r.payments.len());
    let mut welfare = RunningStats::new();
    let mut matches = RunningStats::new();
    let mut payments = vec![RunningStats::new(); n_agents];
    let mut chi = vec![RunningStats::new(); n_agents];
    for row in rows {
        welfare.push(row.welfare);
        matches.push(row.matched as u8 as f64);
        for i in 0..n_agents {
            payments[i].push(row.payments[i]);
            chi[i].push(row.chi[i]);
        }
    }
    SimulationSummary {
        schema_version: SCHEMA_VERSION,
        config_hash: config.hash(),
        seed: config.seed,
        rule: config.rule.clone(),
        delta: config.delta,
        trials: rows.len() as u64,
        mean_welfare: welfare.mean(),
        welfare_ci99: welfare.ci_halfwidth(Z99),
        mean_payments: payments.iter().map(RunningStats::mean).collect(),
        payment_ci99: payments.iter().map(|s| s.ci_halfwidth(Z99)).collect(),
        mean_chi: chi.iter().map(RunningStats::mean).collect(),
        match_frequency: matches.mean(),
        match_ci99: matches.ci_halfwidth(Z99),
    }
}

/// Writes the per-trial CSV: trial, chi_i.., payment_i.., welfare, matched,
/// plus seed and config hash on every row for provenance.
pub fn write_trials_csv(
    path: &Path,
    rows: &[TrialRow],
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let n_agents = rows.first().map_or(0, |r| r.payments.len());
    let mut header = vec!["trial".to_string()];
    for i in 1..=n_agents {
        header.push(format!("chi_{i}"));
    }
    for i in 1..=n_agents {
        header.push(format!("payment_{i}"));
    }
    header.extend(["welfare".into(), "matched".into(), "seed".into(), "config_hash".into()]);
    writer.write_record(&header)?;
    for row in rows {
        let mut record = vec![row.trial.to_string()];
        record.extend(row.chi.iter().map(|x| format!("{x}")));
        record.extend(row.payments.iter().map(|x| format!("{x}")));
        record.push(format!("{}", row.welfare));
        record.push(u8::from(row.matched).to_string());
        record.push(seed.to_string());
        record.push(config_hash.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}
