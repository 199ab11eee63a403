//! Moment analytics, closed-form welfare decompositions, and the skew
//! thresholds that predict when the transformed explore/exploit mechanism
//! beats the baselines.

use alloc::vec::Vec;

use super::VerifyError;
use crate::domain::AdInstance;
use crate::rules::{sampled_sp_closed_form_welfare, RuleKind};

/// Power-mean statistics of the per-ad value-times-CTR profile.
///
/// `m1` is the plain mean of `b_j * mu_j`, `m2_sq` the mean of its squares.
/// The skew `sigma = m2_sq / m1^2` lies in [1, m] and measures divergence
/// from a uniform profile; it is `None` when every product is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentStats {
    pub m1: f64,
    pub m2_sq: f64,
    pub sigma: Option<f64>,
}

impl MomentStats {
    pub fn is_degenerate(&self) -> bool {
        self.sigma.is_none()
    }

    /// The per-exploit-round welfare edge of the explore/exploit rule over
    /// uniform random.
    pub fn welfare_gap(&self) -> f64 {
        self.m2_sq - self.m1 * self.m1
    }
}

pub fn moments(bids: &[f64], instance: &AdInstance) -> MomentStats {
    let m = instance.num_ads() as f64;
    let products: Vec<f64> = bids
        .iter()
        .zip(instance.ctrs())
        .map(|(&b, mu)| b * mu)
        .collect();
    let m1 = products.iter().sum::<f64>() / m;
    let m2_sq = products.iter().map(|p| p * p).sum::<f64>() / m;
    let sigma = if m1 > 0.0 { Some(m2_sq / (m1 * m1)) } else { None };
    MomentStats { m1, m2_sq, sigma }
}

/// Closed-form welfare decomposition of a named rule on an instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WelfareReport {
    pub rule: RuleKind,
    pub explore_rounds: usize,
    /// Total expected welfare collected during exploration.
    pub exploration_welfare: f64,
    /// Expected welfare per exploitation round.
    pub exploit_per_round: f64,
    pub total: f64,
    /// Per-round welfare of uniform random on the same instance.
    pub rand_per_round: f64,
    /// `exploit_per_round - rand_per_round`.
    pub exploit_gap: f64,
}

/// Exact expected welfare by phase, from the closed forms. Supported for
/// rand, all, all-single, and sampled-sp.
pub fn welfare_report(
    rule: RuleKind,
    bids: &[f64],
    instance: &AdInstance,
    explore_rounds: usize,
) -> Result<WelfareReport, VerifyError> {
    let stats = moments(bids, instance);
    let t = instance.horizon() as f64;
    let t0 = explore_rounds as f64;
    match rule {
        RuleKind::Rand => Ok(WelfareReport {
            rule,
            explore_rounds: 0,
            exploration_welfare: 0.0,
            exploit_per_round: stats.m1,
            total: t * stats.m1,
            rand_per_round: stats.m1,
            exploit_gap: 0.0,
        }),
        RuleKind::All => {
            if instance.num_agents() < 2 {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "explore/exploit closed form needs two or more agents",
                });
            }
            let w0 = stats.m1 + stats.welfare_gap();
            Ok(WelfareReport {
                rule,
                explore_rounds,
                exploration_welfare: t0 * stats.m1,
                exploit_per_round: w0,
                total: t0 * stats.m1 + (t - t0) * w0,
                rand_per_round: stats.m1,
                exploit_gap: stats.welfare_gap(),
            })
        }
        RuleKind::AllSingle => {
            if instance.num_agents() != 1 {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "single-agent closed form needs exactly one agent",
                });
            }
            // moments over m ads but diluted by the dummy slot (m + 1)
            let slots = (instance.num_ads() + 1) as f64;
            let products: Vec<f64> = bids
                .iter()
                .zip(instance.ctrs())
                .map(|(&b, mu)| b * mu)
                .collect();
            let m1s = products.iter().sum::<f64>() / slots;
            let m2s = products.iter().map(|p| p * p).sum::<f64>() / slots;
            let w0 = m1s + m2s - m1s * m1s;
            // each exploration round shows a real ad with m/(m+1) share
            let explore_rate = m1s;
            Ok(WelfareReport {
                rule,
                explore_rounds,
                exploration_welfare: t0 * explore_rate,
                exploit_per_round: w0,
                total: t0 * explore_rate + (t - t0) * w0,
                rand_per_round: stats.m1,
                exploit_gap: w0 - stats.m1,
            })
        }
        RuleKind::SampledSp => {
            let total = sampled_sp_closed_form_welfare(bids, instance, explore_rounds);
            // exploration shows a uniformly selected ad of each selection;
            // averaged over selections that is per-agent-uniform welfare
            let mut explore_rate = 0.0;
            for agent in 0..instance.num_agents() {
                let own = instance.agent_ads(agent);
                let avg: f64 = own
                    .iter()
                    .map(|&j| bids[j] * instance.ads()[j].ctr)
                    .sum::<f64>()
                    / own.len() as f64;
                explore_rate += avg / instance.num_agents() as f64;
            }
            let exploit_per_round = (total - t0 * explore_rate) / (t - t0);
            Ok(WelfareReport {
                rule,
                explore_rounds,
                exploration_welfare: t0 * explore_rate,
                exploit_per_round,
                total,
                rand_per_round: stats.m1,
                exploit_gap: exploit_per_round - stats.m1,
            })
        }
        RuleKind::Greedy => Err(VerifyError::UnsupportedRule { rule: "greedy" }),
    }
}

/// Which baseline a threshold verdict compares against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Rand,
    SampledSp,
}

/// Structural scenario for [`threshold_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Two or more agents; improvement over rand is predicted whenever the
    /// profile is skewed at all (sigma > 1).
    MultiAgent,
    /// A single agent with m ads; improvement needs
    /// sigma > 1 + (m+1)/(m eps) + (m+1)/(eps (T-1)).
    SingleAgent,
    /// One agent holds k > m/2 ads and every other agent's profile is
    /// zero; improvement over the sampled reduction needs
    /// sigma > 1 + m(m-k)/(k eps).
    DominantAgent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdVerdict {
    pub scenario: Scenario,
    pub baseline: Baseline,
    pub sigma: Option<f64>,
    pub threshold: f64,
    /// True when sigma clears the threshold, i.e. a suitable delta makes
    /// the transformed mechanism strictly beat the baseline.
    pub improvement_predicted: bool,
}

/// Evaluates the skew threshold for a scenario. `epsilon` is the assumed
/// strict lower bound on `max_j b_j mu_j`; the check fails with
/// `ScenarioMismatch` when the instance does not actually satisfy it or
/// the agent structure does not match.
pub fn threshold_check(
    bids: &[f64],
    instance: &AdInstance,
    scenario: Scenario,
    epsilon: f64,
) -> Result<ThresholdVerdict, VerifyError> {
    if !(epsilon > 0.0) {
        return Err(VerifyError::ScenarioMismatch {
            reason: "epsilon must be positive",
        });
    }
    let max_product = bids
        .iter()
        .zip(instance.ctrs())
        .map(|(&b, mu)| b * mu)
        .fold(0.0f64, f64::max);
    if max_product <= epsilon {
        return Err(VerifyError::ScenarioMismatch {
            reason: "no ad has value-times-ctr above epsilon",
        });
    }
    let stats = moments(bids, instance);
    let m = instance.num_ads() as f64;
    let t = instance.horizon() as f64;

    let (baseline, threshold) = match scenario {
        Scenario::MultiAgent => {
            if instance.num_agents() < 2 {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "multi-agent scenario on a single-agent instance",
                });
            }
            (Baseline::Rand, 1.0)
        }
        Scenario::SingleAgent => {
            if instance.num_agents() != 1 {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "single-agent scenario on a multi-agent instance",
                });
            }
            if instance.horizon() < 2 {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "single-agent threshold needs at least two rounds",
                });
            }
            (
                Baseline::Rand,
                1.0 + (m + 1.0) / (m * epsilon) + (m + 1.0) / (epsilon * (t - 1.0)),
            )
        }
        Scenario::DominantAgent => {
            let dominant = (0..instance.num_agents())
                .find(|&i| 2 * instance.agent_ads(i).len() > instance.num_ads());
            let Some(agent) = dominant else {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "no agent owns more than half the ads",
                });
            };
            let others_zero = (0..instance.num_ads())
                .filter(|&j| instance.owner(j) != agent)
                .all(|j| bids[j] == 0.0);
            if !others_zero {
                return Err(VerifyError::ScenarioMismatch {
                    reason: "dominant-agent threshold assumes zero profiles elsewhere",
                });
            }
            let k = instance.agent_ads(agent).len() as f64;
            (Baseline::SampledSp, 1.0 + m * (m - k) / (k * epsilon))
        }
    };

    let improvement_predicted = stats.sigma.is_some_and(|s| s > threshold);
    Ok(ThresholdVerdict {
        scenario,
        baseline,
        sigma: stats.sigma,
        threshold,
        improvement_predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use approx::assert_abs_diff_eq;

    fn instance(owners: &[usize], values: &[f64], ctrs: &[f64], horizon: usize) -> AdInstance {
        let n = owners.iter().max().unwrap() + 1;
        let ads = owners
            .iter()
            .zip(values.iter().zip(ctrs))
            .map(|(&owner, (&v, &c))| AdSpec {
                owner,
                value_per_click: v,
                ctr: c,
            })
            .collect();
        AdInstance::new(n, horizon, ads).unwrap()
    }

    #[test]
    fn uniform_profile_has_unit_skew() {
        let inst = instance(&[0, 1], &[0.5, 0.25], &[0.5, 1.0], 4);
        let stats = moments(&inst.values(), &inst);
        assert_abs_diff_eq!(stats.sigma.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.welfare_gap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_good_ad_has_maximal_skew() {
        let inst = instance(&[0, 1], &[1.0, 0.0], &[1.0, 0.5], 4);
        let stats = moments(&inst.values(), &inst);
        assert_abs_diff_eq!(stats.sigma.unwrap(), 2.0, epsilon = 1e-12);
        // m1 = 0.5, m2^2 = 0.5, gap = 0.25
        assert_abs_diff_eq!(stats.m1, 0.5);
        assert_abs_diff_eq!(stats.m2_sq, 0.5);
        assert_abs_diff_eq!(stats.welfare_gap(), 0.25);
    }

    #[test]
    fn all_zero_profile_is_degenerate() {
        let inst = instance(&[0, 1], &[0.0, 0.0], &[0.5, 0.5], 4);
        let stats = moments(&inst.values(), &inst);
        assert!(stats.is_degenerate());
    }

    #[test]
    fn skew_stays_within_range() {
        let profiles: [&[f64]; 3] = [&[0.3, 0.3, 0.3], &[1.0, 0.1, 0.1], &[0.9, 0.0, 0.0]];
        for values in profiles {
            let inst = instance(&[0, 0, 1], values, &[0.7, 0.6, 0.5], 4);
            let stats = moments(&inst.values(), &inst);
            let sigma = stats.sigma.unwrap();
            assert!((1.0 - 1e-12..=3.0 + 1e-12).contains(&sigma), "sigma {sigma}");
        }
    }

    #[test]
    fn welfare_report_matches_moment_identity() {
        let inst = instance(&[0, 1], &[1.0, 0.0], &[1.0, 0.5], 4);
        let report = welfare_report(RuleKind::All, &inst.values(), &inst, 1).unwrap();
        assert_abs_diff_eq!(report.exploit_gap, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(report.exploration_welfare, 0.5, epsilon = 1e-15);
        // uniform instance has zero gap
        let uni = instance(&[0, 1], &[0.5, 0.25], &[0.5, 1.0], 4);
        let report = welfare_report(RuleKind::All, &uni.values(), &uni, 1).unwrap();
        assert_abs_diff_eq!(report.exploit_gap, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_agent_report_hits_known_values() {
        // m = 2, unit bids and CTRs: exploit 8/9, exploration 2/3 per round
        let inst = instance(&[0, 0], &[1.0, 1.0], &[1.0, 1.0], 2);
        let report = welfare_report(RuleKind::AllSingle, &inst.values(), &inst, 1).unwrap();
        assert_abs_diff_eq!(report.exploit_per_round, 8.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.exploration_welfare, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(report.total, 14.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn threshold_single_agent_worked_example() {
        // m = 2, eps = 0.9, T = 101: threshold = 1 + 3/1.8 + 3/90 = 2.7
        let inst = instance(&[0, 0], &[0.9, 0.1], &[1.0, 0.1], 101);
        let verdict = threshold_check(&inst.values(), &inst, Scenario::SingleAgent, 0.89).unwrap();
        let expected = 1.0 + 3.0 / (2.0 * 0.89) + 3.0 / (0.89 * 100.0);
        assert_abs_diff_eq!(verdict.threshold, expected, epsilon = 1e-12);
        // sigma of this profile is below the threshold, so no guarantee
        assert!(!verdict.improvement_predicted);
    }

    #[test]
    fn threshold_multi_agent_predicts_on_any_skew() {
        let inst = instance(&[0, 1], &[1.0, 0.0], &[1.0, 0.5], 4);
        let verdict = threshold_check(&inst.values(), &inst, Scenario::MultiAgent, 0.5).unwrap();
        assert!(verdict.improvement_predicted);
        assert_eq!(verdict.baseline, Baseline::Rand);
        // uniform profile: sigma = 1 never clears the strict threshold
        let uni = instance(&[0, 1], &[0.5, 0.25], &[0.5, 1.0], 4);
        let verdict = threshold_check(&uni.values(), &uni, Scenario::MultiAgent, 0.2).unwrap();
        assert!(!verdict.improvement_predicted);
    }

    #[test]
    fn threshold_scenario_mismatches() {
        let single = instance(&[0, 0], &[0.9, 0.1], &[1.0, 0.1], 4);
        assert!(threshold_check(&single.values(), &single, Scenario::MultiAgent, 0.5).is_err());
        let multi = instance(&[0, 1], &[1.0, 0.0], &[1.0, 0.5], 4);
        assert!(threshold_check(&multi.values(), &multi, Scenario::SingleAgent, 0.5).is_err());
        // epsilon above every product
        assert!(threshold_check(&multi.values(), &multi, Scenario::MultiAgent, 1.5).is_err());
        // dominant agent with a nonzero other profile
        let dom = instance(&[0, 0, 1], &[1.0, 0.0, 0.3], &[0.9, 0.5, 0.5], 4);
        assert!(threshold_check(&dom.values(), &dom, Scenario::DominantAgent, 0.5).is_err());
        // and a valid dominant structure passes
        let dom_ok = instance(&[0, 0, 1], &[1.0, 0.0, 0.0], &[0.9, 0.5, 0.5], 4);
        let verdict =
            threshold_check(&dom_ok.values(), &dom_ok, Scenario::DominantAgent, 0.5).unwrap();
        assert_eq!(verdict.baseline, Baseline::SampledSp);
        assert_abs_diff_eq!(verdict.threshold, 1.0 + 3.0 * 1.0 / (2.0 * 0.5), epsilon = 1e-12);
    }
}
