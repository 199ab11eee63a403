//! `clickmech`: batch experiments for pay-per-click auction mechanisms.
//!
//! Subcommands: `simulate` (Monte Carlo trials of the transformed
//! mechanism), `verify` (named oracle checks with expected verdicts),
//! `sweep` (welfare vs one parameter), and `demo-negative` (the standard
//! per-realization monotonicity counterexample). A config file passed with
//! `--config` overrides the corresponding flags.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use clickmech::{
    config::{ConfigFile, ExperimentConfig},
    formats::{load_instance, write_json},
    report::{run_checks, write_witness_csv},
    runner::{run_trials, summarize, write_trials_csv},
    sweep::{run_sweep, write_sweep_csv, SweepParameter},
};
use clickmech_core::verify::find_wmon_violation;
use clickmech_core::{AdInstance, AdSpec};

#[derive(Parser)]
#[command(
    name = "clickmech",
    about = "Simulate and verify truthful pay-per-click auction mechanisms",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Instance JSON file ({"agents", "horizon", "ads": [{owner, value, ctr}]}).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Allocation rule: rand | sampled-sp | all | all-single | greedy.
    #[arg(long, default_value = "all")]
    rule: String,
    /// Rescale parameter of the payment transform, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Monte Carlo trials.
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    /// Experiment seed; all randomness derives from (seed, trial, purpose).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exploration rounds of the explore/exploit rules.
    #[arg(long, default_value_t = 1)]
    explore_rounds: usize,
    /// Dummy-ad CTR of the single-agent construction (behaviorally inert).
    #[arg(long, default_value_t = 0.5)]
    dummy_ctr: f64,
    /// Worker threads (0 = auto).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// JSON config file; present fields override the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo trials of the transformed mechanism; writes
    /// trials.csv and summary.json.
    Simulate(CommonOpts),
    /// Run verification checks; writes report.json and exits nonzero on
    /// any unexpected verdict.
    Verify {
        #[command(flatten)]
        common: CommonOpts,
        /// Comma-separated checks: cmon,wmon,payments,welfare,hessian,affine,homogeneity,thresholds.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
    },
    /// Sweep one parameter and compare against the baselines; writes
    /// sweep.csv and sweep_summary.json.
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Parameter to sweep: delta | sigma | horizon.
        #[arg(long)]
        parameter: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Run the per-realization monotonicity counterexample end to end and
    /// print the witness.
    DemoNegative {
        /// Bid grid for the search.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0])]
        grid: Vec<f64>,
    },
}

fn effective_config(common: &CommonOpts, checks: Vec<String>) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig {
        instance_path: common.instance.clone().unwrap_or_default(),
        rule: common.rule.clone(),
        delta: common.delta,
        trials: common.trials,
        seed: common.seed,
        checks,
        output_dir: common.out_dir.clone(),
        explore_rounds: common.explore_rounds,
        dummy_ctr: common.dummy_ctr,
        threads: common.threads,
    };
    if let Some(path) = &common.config {
        ConfigFile::load(path)?.apply(&mut config);
    }
    if config.instance_path.as_os_str().is_empty() {
        anyhow::bail!("an instance file is required (--instance or the config file)");
    }
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(common: CommonOpts) -> Result<ExitCode> {
    let config = effective_config(&common, Vec::new())?;
    let instance = load_instance(&config.instance_path)?;
    let rule = config
        .rule_kind()
        .build(&instance, &config.rule_params())
        .map_err(|e| anyhow::anyhow!("building rule {}: {e}", config.rule))?;
    let bids = instance.truthful_bids();
    let rows = run_trials(
        &rule,
        &bids,
        &instance,
        config.delta,
        config.trials,
        config.seed,
        config.threads,
    )?;
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("creating {}", config.output_dir.display()))?;
    let hash = config.hash();
    write_trials_csv(&config.output_dir.join("trials.csv"), &rows, config.seed, &hash)?;
    let summary = summarize(&config, &rows);
    write_json(&config.output_dir.join("summary.json"), &summary)?;
    println!(
        "simulate: {} trials of {} at delta {} -> mean welfare {:.6} (ci99 {:.2e}), match frequency {:.4}",
        summary.trials,
        summary.rule,
        summary.delta,
        summary.mean_welfare,
        summary.welfare_ci99,
        summary.match_frequency
    );
    println!("wrote {}", config.output_dir.join("trials.csv").display());
    println!("wrote {}", config.output_dir.join("summary.json").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(common: CommonOpts, checks: Vec<String>) -> Result<ExitCode> {
    if checks.is_empty() {
        anyhow::bail!("verify needs at least one check (--checks)");
    }
    let config = effective_config(&common, checks)?;
    let instance = load_instance(&config.instance_path)?;
    let report = run_checks(&config, &instance)?;
    fs::create_dir_all(&config.output_dir)?;
    write_json(&config.output_dir.join("report.json"), &report)?;
    write_witness_csv(&report, &config.output_dir)?;
    for check in &report.checks {
        println!(
            "[{}] {}: verdict {} (expected {})",
            if check.ok { "ok" } else { "UNEXPECTED" },
            check.check,
            check.verdict,
            check.expected
        );
    }
    println!("wrote {}", config.output_dir.join("report.json").display());
    Ok(if report.all_expected {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn cmd_sweep(common: CommonOpts, parameter: String, values: Vec<f64>) -> Result<ExitCode> {
    if values.is_empty() {
        anyhow::bail!("sweep needs at least one value (--values)");
    }
    let parameter = SweepParameter::parse(&parameter)?;
    let config = effective_config(&common, Vec::new())?;
    let instance = load_instance(&config.instance_path)?;
    let summary = run_sweep(&config, &instance, parameter, &values)?;
    fs::create_dir_all(&config.output_dir)?;
    write_sweep_csv(&config.output_dir.join("sweep.csv"), &summary)?;
    write_json(&config.output_dir.join("sweep_summary.json"), &summary)?;
    for row in &summary.rows {
        println!(
            "{} = {:<8} welfare {:.6} (ci99 {:.2e})  rand {:.6}  sampled-sp {:.6}  predicted {}  beats-rand {}",
            row.parameter,
            row.value,
            row.mdelta_welfare_mean,
            row.mdelta_welfare_ci99,
            row.rand_welfare,
            row.sampled_sp_welfare,
            row.predicted_improvement,
            row.beats_rand_outside_ci
        );
    }
    println!("wrote {}", config.output_dir.join("sweep.csv").display());
    Ok(ExitCode::SUCCESS)
}

/// The standard counterexample: two ads, two rounds, the deterministic
/// greedy commit rule, bid grid {0, 1, 2}.
fn cmd_demo_negative(grid: Vec<f64>) -> Result<ExitCode> {
    let instance = AdInstance::new(
        1,
        2,
        vec![
            AdSpec {
                owner: 0,
                value_per_click: 0.5,
                ctr: 0.5,
            },
            AdSpec {
                owner: 0,
                value_per_click: 0.5,
                ctr: 0.5,
            },
        ],
    )
    .expect("built-in instance is valid");
    let rule = clickmech_core::rules::GreedyRule::new(0, &instance)
        .expect("greedy with no exploration fits two rounds");
    let witness = find_wmon_violation(&rule, &instance, &grid, 1e-9)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    match witness {
        Some(w) => {
            println!("per-realization weak-monotonicity violation found:");
            println!("  bids        {:?} -> {:?}", w.bids_a, w.bids_b);
            println!("  realization {:?} (rows = rounds)", w.realization.to_rows());
            println!("  directional product {:.6} < 0", w.value);
            println!("the greedy commit rule never skips and depends on bids, so some click");
            println!("realization must order its allocations against the bid change; no");
            println!("truthful payment rule can be attached to it per realization.");
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no violation on grid {grid:?}; widen the grid");
            Ok(ExitCode::FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(common) => cmd_simulate(common),
        Command::Verify { common, checks } => cmd_verify(common, checks),
        Command::Sweep {
            common,
            parameter,
            values,
        } => cmd_sweep(common, parameter, values),
        Command::DemoNegative { grid } => cmd_demo_negative(grid),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
