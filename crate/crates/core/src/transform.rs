//! The single-call payment transform.
//!
//! Given any allocation rule, the transformed mechanism draws one rescale
//! coefficient per agent (`1` with probability `1 - delta`, otherwise
//! `gamma^(1/(1-delta))` for uniform `gamma`), calls the rule once on the
//! rescaled bids, and settles payments after the last round from the
//! observed clicks alone: an agent whose coefficient stayed at `1` pays
//! their reported value of the realized outcome, and an agent who was
//! rescaled is paid `(1/delta - 1)` times that value. The random payments
//! have the normalized truthful expectation whenever the rule is
//! cycle-monotone, and no counterfactual run is ever needed.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{agent_value, rescale_bids, AdInstance, BidVector, RescaleCoefficients};
use crate::env::{sample_realization, simulate, AllocationRule, ClickRealization, RunRecord, SimError};
use crate::numeric::RunningStats;
use crate::rng::{StreamKey, TrialStreams};

#[derive(Clone, Debug, PartialEq)]
pub enum TransformError {
    /// delta must lie strictly inside (0, 1).
    InvalidDelta { delta: f64 },
    Sim(SimError),
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::InvalidDelta { delta } => {
                write!(f, "delta {delta} outside the open interval (0, 1)")
            }
            TransformError::Sim(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TransformError {}

impl From<SimError> for TransformError {
    fn from(e: SimError) -> Self {
        TransformError::Sim(e)
    }
}

/// Per-agent rescale coefficients drawn for one mechanism run.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaleDraw {
    /// chi_i in (0, 1].
    pub chi: Vec<f64>,
    /// Whether chi_i hit the full-bid branch (chi_i = 1).
    pub is_full: Vec<bool>,
}

impl RescaleDraw {
    pub fn all_full(&self) -> bool {
        self.is_full.iter().all(|&f| f)
    }
}

/// Draws the per-agent coefficients: `chi = 1` with probability
/// `1 - delta`, else `gamma^(1/(1-delta))` with `gamma` uniform on (0, 1].
/// A zero `gamma` (measure-zero draw) is redrawn to keep chi positive.
pub fn draw_rescale(
    delta: f64,
    num_agents: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RescaleDraw, TransformError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TransformError::InvalidDelta { delta });
    }
    let mut chi = Vec::with_capacity(num_agents);
    let mut is_full = Vec::with_capacity(num_agents);
    let exponent = 1.0 / (1.0 - delta);
    for _ in 0..num_agents {
        if rng.random::<f64>() < 1.0 - delta {
            chi.push(1.0);
            is_full.push(true);
        } else {
            let gamma = loop {
                let g: f64 = rng.random();
                if g > 0.0 {
                    break g;
                }
            };
            chi.push(libm::pow(gamma, exponent));
            is_full.push(false);
        }
    }
    Ok(RescaleDraw { chi, is_full })
}

/// One execution of the transformed mechanism.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismRun {
    pub record: RunRecord,
    pub draw: RescaleDraw,
    /// Settled payments, one per agent. Computed only from the realized
    /// clicks and the agent's own reported values.
    pub payments: Vec<f64>,
    /// b_i(o): each agent's reported value of the realized click vector.
    pub reported_outcome_value: Vec<f64>,
    /// v_i(o): the same outcome valued at the instance's private values.
    pub true_outcome_value: Vec<f64>,
}

impl MechanismRun {
    /// Quasi-linear utilities at the true values.
    pub fn utilities(&self) -> Vec<f64> {
        self.true_outcome_value
            .iter()
            .zip(&self.payments)
            .map(|(v, p)| v - p)
            .collect()
    }

    /// Realized welfare at the true values.
    pub fn welfare(&self) -> f64 {
        self.true_outcome_value.iter().sum()
    }
}

/// Runs the transformed mechanism once against a fixed realization.
pub fn run_mechanism_on(
    rule: &dyn AllocationRule,
    bids: &BidVector,
    delta: f64,
    instance: &AdInstance,
    realization: &ClickRealization,
    rule_stream: StreamKey,
    resample_stream: StreamKey,
) -> Result<MechanismRun, TransformError> {
    let mut resample_rng = resample_stream.rng();
    let draw = draw_rescale(delta, instance.num_agents(), &mut resample_rng)?;
    let lambda = RescaleCoefficients::new(draw.chi.clone(), instance)
        .expect("chi lies in (0, 1] by construction");
    let modified = rescale_bids(bids, &lambda, instance);
    let record = simulate(rule, &modified, realization, rule_stream)?;

    let n = instance.num_agents();
    let rescaled_pay_factor = 1.0 - 1.0 / delta;
    let mut payments = Vec::with_capacity(n);
    let mut reported = Vec::with_capacity(n);
    let mut truthful = Vec::with_capacity(n);
    let values = instance.values();
    for i in 0..n {
        let b_io = agent_value(instance, bids, i, &record.realized_clicks);
        let v_io = agent_value(instance, &values, i, &record.realized_clicks);
        let factor = if draw.is_full[i] {
            1.0
        } else {
            rescaled_pay_factor
        };
        payments.push(b_io * factor);
        reported.push(b_io);
        truthful.push(v_io);
    }
    Ok(MechanismRun {
        record,
        draw,
        payments,
        reported_outcome_value: reported,
        true_outcome_value: truthful,
    })
}

/// Runs the transformed mechanism once, sampling the click realization
/// from the trial's environment stream.
pub fn run_mechanism(
    rule: &dyn AllocationRule,
    bids: &BidVector,
    delta: f64,
    instance: &AdInstance,
    streams: &TrialStreams,
) -> Result<MechanismRun, TransformError> {
    let realization = sample_realization(instance, streams.environment);
    run_mechanism_on(
        rule,
        bids,
        delta,
        instance,
        &realization,
        streams.rule,
        streams.resample,
    )
}

/// Coupled estimate of how often the transformed run's action trace equals
/// the untransformed run's, over `trials` trial-indexed stream triples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchEstimate {
    pub matches: u64,
    pub trials: u64,
    pub frequency: f64,
    pub std_err: f64,
}

impl MatchEstimate {
    pub fn ci_halfwidth(&self, z: f64) -> f64 {
        z * self.std_err
    }
}

/// Shares environment and rule streams between the plain run and the
/// mechanism run of each trial, so the two traces differ only through the
/// rescaled bids. Whenever every agent draws chi = 1 the traces are
/// identical, which lower-bounds the frequency by (1 - delta)^n.
pub fn match_probability_estimate(
    rule: &dyn AllocationRule,
    bids: &BidVector,
    delta: f64,
    instance: &AdInstance,
    trials: u64,
    seed: u64,
) -> Result<MatchEstimate, TransformError> {
    let mut stats = RunningStats::new();
    let mut matches = 0u64;
    for trial in 0..trials {
        let streams = TrialStreams::new(seed, trial);
        let realization = sample_realization(instance, streams.environment);
        let baseline = simulate(rule, bids, &realization, streams.rule)?;
        let mech = run_mechanism_on(
            rule,
            bids,
            delta,
            instance,
            &realization,
            streams.rule,
            streams.resample,
        )?;
        let matched = mech.record.actions == baseline.actions;
        if matched {
            matches += 1;
        }
        stats.push(matched as u8 as f64);
    }
    Ok(MatchEstimate {
        matches,
        trials,
        frequency: matches as f64 / trials as f64,
        std_err: stats.std_err(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use crate::rng::StreamPurpose;
    use crate::rules::{AllParams, AllRule, RandRule};
    use approx::assert_abs_diff_eq;

    fn two_agent_instance() -> AdInstance {
        AdInstance::new(
            2,
            3,
            alloc::vec![
                AdSpec {
                    owner: 0,
                    value_per_click: 0.9,
                    ctr: 0.7,
                },
                AdSpec {
                    owner: 1,
                    value_per_click: 0.4,
                    ctr: 0.5,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_delta() {
        let mut rng = StreamKey::new(0, 0, StreamPurpose::Resample).rng();
        for delta in [0.0, 1.0, -0.3, 1.5] {
            assert_eq!(
                draw_rescale(delta, 2, &mut rng).unwrap_err(),
                TransformError::InvalidDelta { delta }
            );
        }
    }

    #[test]
    fn full_probability_tracks_delta() {
        // Pr[chi = 1] = 1 - delta; 0.99 +/- 0.003 at delta = 0.01
        let mut rng = StreamKey::new(7, 0, StreamPurpose::Resample).rng();
        let n = 100_000;
        let mut full = 0u64;
        for _ in 0..n {
            let draw = draw_rescale(0.01, 1, &mut rng).unwrap();
            full += draw.is_full[0] as u64;
        }
        let freq = full as f64 / n as f64;
        assert!((freq - 0.99).abs() < 0.003, "frequency {freq}");
    }

    #[test]
    fn rescaled_branch_mean_and_cdf() {
        // E[chi | chi < 1] = (1-delta)/(2-delta) = 1/3 at delta = 0.5,
        // and Pr[chi <= c | chi < 1] = c^(1-delta) = 0.5 at c = 0.25
        let delta = 0.5;
        let mut rng = StreamKey::new(8, 0, StreamPurpose::Resample).rng();
        let mut stats = RunningStats::new();
        let mut below = 0u64;
        let mut partial = 0u64;
        for _ in 0..1_000_000 {
            let draw = draw_rescale(delta, 1, &mut rng).unwrap();
            if !draw.is_full[0] {
                partial += 1;
                stats.push(draw.chi[0]);
                assert!(draw.chi[0] > 0.0 && draw.chi[0] < 1.0);
                if draw.chi[0] <= 0.25 {
                    below += 1;
                }
            }
        }
        assert_abs_diff_eq!(stats.mean(), 1.0 / 3.0, epsilon = 0.01);
        let cdf = below as f64 / partial as f64;
        assert_abs_diff_eq!(cdf, 0.5, epsilon = 0.01);
    }

    #[test]
    fn zero_bidder_pays_nothing_and_truthful_ir_holds() {
        let inst = two_agent_instance();
        let mut ads = inst.ads().to_vec();
        ads[1].value_per_click = 0.0;
        let inst = AdInstance::new(2, 3, ads).unwrap();
        let bids = inst.truthful_bids();
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        for trial in 0..500 {
            let run =
                run_mechanism(&rule, &bids, 0.25, &inst, &TrialStreams::new(99, trial)).unwrap();
            assert_eq!(run.payments[1], 0.0, "zero type pays exactly zero");
            for u in run.utilities() {
                assert!(u >= 0.0, "per-run IR violated: {u}");
            }
            // payment bounds from the two payment branches
            for i in 0..2 {
                let cap = run.reported_outcome_value[i];
                let floor = -cap * (1.0 / 0.25 - 1.0);
                assert!(run.payments[i] <= cap + 1e-12);
                assert!(run.payments[i] >= floor - 1e-12);
            }
        }
    }

    #[test]
    fn truthful_utility_has_the_two_branch_values() {
        // chi_i = 1 pays the full outcome value (utility exactly 0);
        // chi_i < 1 refunds it into utility v_i(o) / delta
        let inst = two_agent_instance();
        let bids = inst.truthful_bids();
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let delta = 0.25;
        for trial in 0..500 {
            let run =
                run_mechanism(&rule, &bids, delta, &inst, &TrialStreams::new(31, trial)).unwrap();
            for i in 0..2 {
                let u = run.true_outcome_value[i] - run.payments[i];
                if run.draw.is_full[i] {
                    assert_eq!(u, 0.0);
                } else {
                    let expected = run.true_outcome_value[i] / delta;
                    assert!((u - expected).abs() <= 1e-12 * expected.max(1.0));
                }
            }
        }
    }

    #[test]
    fn bid_independent_rule_always_matches() {
        let inst = two_agent_instance();
        let bids = inst.truthful_bids();
        let est =
            match_probability_estimate(&RandRule, &bids, 0.4, &inst, 2_000, 123).unwrap();
        assert_eq!(est.matches, est.trials);
        assert_abs_diff_eq!(est.frequency, 1.0);
    }

    #[test]
    fn toy_linear_allocation_payment_mean() {
        // single-parameter desk check: A(x) = x, b = 1, delta = 0.5 gives
        // E[payment] = (1-delta)/(2-delta) = 1/3
        let delta = 0.5;
        let mut rng = StreamKey::new(21, 0, StreamPurpose::Resample).rng();
        let mut stats = RunningStats::new();
        for _ in 0..1_000_000 {
            let draw = draw_rescale(delta, 1, &mut rng).unwrap();
            let allocation = draw.chi[0]; // A(chi * 1) = chi
            let factor = if draw.is_full[0] {
                1.0
            } else {
                1.0 - 1.0 / delta
            };
            stats.push(allocation * factor);
        }
        assert_abs_diff_eq!(stats.mean(), 1.0 / 3.0, epsilon = 0.005);
    }
}
