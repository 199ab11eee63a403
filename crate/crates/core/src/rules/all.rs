//! The explore-then-weighted-exploit allocation rule.
//!
//! Exploration shows a uniformly random ad for `explore_rounds` rounds and
//! counts clicks `n_j`. Each exploitation round then shows ad j with
//! probability `b_j * n_j / explore_rounds` and spreads the leftover mass
//! uniformly over all ads. The show probabilities are deliberately linear
//! in both bids and observed clicks; that linearity is what the
//! monotonicity certification leans on.
//!
//! The single-agent variant augments the instance with one dummy ad (zero
//! bid, fixed CTR); showing the dummy is a skip of the real round.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{require_unit_bids, RuleError};
use crate::domain::{AdInstance, ClickVector};
use crate::enumerate::{EnumerableRule, HistoryStep};
use crate::env::{AllocationRule, OnlineEnv, RoundAction, SimError};

/// Tuning for the explore/exploit rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllParams {
    /// Number of exploration rounds; must leave at least one exploitation
    /// round. One round already suffices for the expectation guarantees,
    /// at the price of high variance.
    pub explore_rounds: usize,
}

impl Default for AllParams {
    fn default() -> Self {
        AllParams { explore_rounds: 1 }
    }
}

/// Click counts per ad collected during exploration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationStats {
    clicks: Vec<u32>,
    explore_rounds: usize,
}

impl ExplorationStats {
    pub fn new(num_slots: usize, explore_rounds: usize) -> Self {
        ExplorationStats {
            clicks: vec![0; num_slots],
            explore_rounds,
        }
    }

    pub fn record_click(&mut self, slot: usize) {
        self.clicks[slot] += 1;
        debug_assert!(
            self.clicks.iter().map(|&c| c as usize).sum::<usize>() <= self.explore_rounds,
            "one ad per round bounds total exploration clicks"
        );
    }

    pub fn clicks(&self) -> &[u32] {
        &self.clicks
    }

    pub fn explore_rounds(&self) -> usize {
        self.explore_rounds
    }
}

/// The exploitation-round distribution: per-slot pick probabilities plus
/// the residual mass that falls back to a uniform choice.
#[derive(Clone, Debug, PartialEq)]
pub struct ExploitDistribution {
    per_slot: Vec<f64>,
    residual: f64,
}

impl ExploitDistribution {
    /// `bids[s] * clicks[s] / explore_rounds` per slot; the residual is
    /// whatever mass remains. Valid whenever bids lie in [0, 1] and at most
    /// one ad was shown per exploration round.
    pub fn from_stats(bids: &[f64], stats: &ExplorationStats) -> Self {
        debug_assert_eq!(bids.len(), stats.clicks().len());
        let t0 = stats.explore_rounds() as f64;
        let per_slot: Vec<f64> = bids
            .iter()
            .zip(stats.clicks())
            .map(|(&b, &n)| b * n as f64 / t0)
            .collect();
        let mass: f64 = per_slot.iter().sum();
        debug_assert!(mass <= 1.0 + 1e-12, "weighted mass {mass} exceeds one");
        ExploitDistribution {
            per_slot,
            residual: 1.0 - mass,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.per_slot.len()
    }

    pub fn per_slot(&self) -> &[f64] {
        &self.per_slot
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Total probability of picking `slot`, weighted pick plus the uniform
    /// share of the residual.
    pub fn slot_probability(&self, slot: usize) -> f64 {
        self.per_slot[slot] + self.residual / self.num_slots() as f64
    }

    /// Samples a slot from one uniform draw plus a uniform fallback index.
    /// Taking the fallback as a separate argument keeps the number of RNG
    /// draws per round fixed, so coupled runs stay stream-aligned.
    pub fn sample(&self, u: f64, fallback: usize) -> usize {
        let mut acc = 0.0;
        for (slot, &p) in self.per_slot.iter().enumerate() {
            acc += p;
            if u < acc {
                return slot;
            }
        }
        fallback
    }
}

/// Explore-then-weighted-exploit rule for two or more agents.
#[derive(Clone, Copy, Debug)]
pub struct AllRule {
    params: AllParams,
}

impl AllRule {
    pub fn new(params: AllParams, instance: &AdInstance) -> Result<Self, RuleError> {
        if instance.num_agents() < 2 {
            return Err(RuleError::NeedsTwoAgents {
                agents: instance.num_agents(),
            });
        }
        validate_explore_rounds(params.explore_rounds, instance.horizon())?;
        Ok(AllRule { params })
    }

    pub fn params(&self) -> &AllParams {
        &self.params
    }

    pub fn explore_rounds(&self) -> usize {
        self.params.explore_rounds
    }
}

fn validate_explore_rounds(explore_rounds: usize, horizon: usize) -> Result<(), RuleError> {
    if explore_rounds == 0 || explore_rounds >= horizon {
        return Err(RuleError::InvalidExploreRounds {
            explore_rounds,
            horizon,
        });
    }
    Ok(())
}

impl AllocationRule for AllRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        require_unit_bids(bids)?;
        let m = env.num_ads();
        let t0 = self.params.explore_rounds;
        let mut stats = ExplorationStats::new(m, t0);
        for _ in 0..t0 {
            let ad = rng.random_range(0..m);
            if env.act(RoundAction::Show(ad))? == Some(true) {
                stats.record_click(ad);
            }
        }
        let dist = ExploitDistribution::from_stats(bids, &stats);
        while !env.finished() {
            let u: f64 = rng.random();
            let fallback = rng.random_range(0..m);
            env.act(RoundAction::Show(dist.sample(u, fallback)))?;
        }
        Ok(())
    }
}

/// Exploration clicks per slot reconstructed from the first
/// `explore_rounds` history steps.
fn exploration_clicks_from_history(
    history: &[HistoryStep],
    num_slots: usize,
    explore_rounds: usize,
    slot_of: impl Fn(RoundAction) -> Option<usize>,
) -> ExplorationStats {
    let mut stats = ExplorationStats::new(num_slots, explore_rounds);
    for step in history.iter().take(explore_rounds) {
        if let (Some(slot), Some(true)) = (slot_of(step.action), step.clicked) {
            stats.record_click(slot);
        }
    }
    stats
}

impl EnumerableRule for AllRule {
    fn action_distribution(&self, bids: &[f64], history: &[HistoryStep]) -> Vec<(RoundAction, f64)> {
        let m = bids.len();
        if history.len() < self.params.explore_rounds {
            return (0..m)
                .map(|j| (RoundAction::Show(j), 1.0 / m as f64))
                .collect();
        }
        let stats = exploration_clicks_from_history(
            history,
            m,
            self.params.explore_rounds,
            |action| match action {
                RoundAction::Show(j) => Some(j),
                RoundAction::Skip => None,
            },
        );
        let dist = ExploitDistribution::from_stats(bids, &stats);
        (0..m)
            .map(|j| (RoundAction::Show(j), dist.slot_probability(j)))
            .collect()
    }
}

/// Single-agent variant: runs the two-agent rule against an internal dummy
/// ad with zero bid. Slots `0..m` are the real ads; slot `m` is the dummy
/// and maps to a skip.
#[derive(Clone, Copy, Debug)]
pub struct AllSingleRule {
    explore_rounds: usize,
    dummy_ctr: f64,
}

impl AllSingleRule {
    pub fn new(params: AllParams, dummy_ctr: f64, instance: &AdInstance) -> Result<Self, RuleError> {
        if instance.num_agents() != 1 {
            return Err(RuleError::NeedsSingleAgent {
                agents: instance.num_agents(),
            });
        }
        if !(dummy_ctr > 0.0 && dummy_ctr <= 1.0) {
            return Err(RuleError::InvalidDummyCtr { ctr: dummy_ctr });
        }
        validate_explore_rounds(params.explore_rounds, instance.horizon())?;
        Ok(AllSingleRule {
            explore_rounds: params.explore_rounds,
            dummy_ctr,
        })
    }

    pub fn explore_rounds(&self) -> usize {
        self.explore_rounds
    }

    /// The dummy CTR never influences behavior: the dummy's zero bid wipes
    /// its click count out of the exploitation weights. Kept for
    /// sensitivity tests.
    pub fn dummy_ctr(&self) -> f64 {
        self.dummy_ctr
    }

    fn augmented_bids(&self, bids: &[f64]) -> Vec<f64> {
        let mut augmented = bids.to_vec();
        augmented.push(0.0);
        augmented
    }

    fn slot_action(slot: usize, num_real: usize) -> RoundAction {
        if slot == num_real {
            RoundAction::Skip
        } else {
            RoundAction::Show(slot)
        }
    }
}

impl AllocationRule for AllSingleRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        require_unit_bids(bids)?;
        let m = env.num_ads();
        let slots = m + 1;
        let augmented = self.augmented_bids(bids);
        let mut stats = ExplorationStats::new(slots, self.explore_rounds);
        for _ in 0..self.explore_rounds {
            let slot = rng.random_range(0..slots);
            if env.act(Self::slot_action(slot, m))? == Some(true) {
                stats.record_click(slot);
            }
        }
        let dist = ExploitDistribution::from_stats(&augmented, &stats);
        while !env.finished() {
            let u: f64 = rng.random();
            let fallback = rng.random_range(0..slots);
            env.act(Self::slot_action(dist.sample(u, fallback), m))?;
        }
        Ok(())
    }
}

impl EnumerableRule for AllSingleRule {
    fn action_distribution(&self, bids: &[f64], history: &[HistoryStep]) -> Vec<(RoundAction, f64)> {
        let m = bids.len();
        let slots = m + 1;
        if history.len() < self.explore_rounds {
            return (0..slots)
                .map(|slot| (Self::slot_action(slot, m), 1.0 / slots as f64))
                .collect();
        }
        let augmented = self.augmented_bids(bids);
        let stats =
            exploration_clicks_from_history(history, slots, self.explore_rounds, |action| {
                match action {
                    RoundAction::Show(j) => Some(j),
                    // a skip in exploration was the dummy slot; its clicks
                    // never matter (zero bid), so attribute none
                    RoundAction::Skip => None,
                }
            });
        let dist = ExploitDistribution::from_stats(&augmented, &stats);
        (0..slots)
            .map(|slot| (Self::slot_action(slot, m), dist.slot_probability(slot)))
            .collect()
    }
}

/// Exact expected clicks of [`AllRule`]: exploration contributes
/// `explore_rounds * mu_j / m`, and every exploitation round contributes
/// `mu_j * (x_j + (1 - sum_k x_k) / m)` with `x_j = b_j * mu_j / m`.
pub fn all_closed_form_clicks(
    bids: &[f64],
    instance: &AdInstance,
    params: &AllParams,
) -> ClickVector {
    closed_form(
        bids,
        &instance.ctrs(),
        instance.horizon(),
        params.explore_rounds,
        0,
    )
}

/// Exact expected clicks of [`AllSingleRule`] on the real ads; the dummy
/// slot only dilutes the uniform shares.
pub fn all_single_closed_form_clicks(
    bids: &[f64],
    instance: &AdInstance,
    explore_rounds: usize,
) -> ClickVector {
    closed_form(
        bids,
        &instance.ctrs(),
        instance.horizon(),
        explore_rounds,
        1,
    )
}

fn closed_form(
    bids: &[f64],
    ctrs: &[f64],
    horizon: usize,
    explore_rounds: usize,
    extra_slots: usize,
) -> ClickVector {
    let slots = (bids.len() + extra_slots) as f64;
    let x: Vec<f64> = bids
        .iter()
        .zip(ctrs)
        .map(|(&b, &mu)| b * mu / slots)
        .collect();
    let total_x: f64 = x.iter().sum();
    let exploit_rounds = (horizon - explore_rounds) as f64;
    let clicks = ctrs
        .iter()
        .zip(&x)
        .map(|(&mu, &xj)| {
            let explore = explore_rounds as f64 * mu / slots;
            let exploit = exploit_rounds * mu * (xj + (1.0 - total_x) / slots);
            explore + exploit
        })
        .collect();
    ClickVector::from_vec(clicks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use crate::enumerate::{exact_expected_clicks, marginal_expectation};
    use crate::env::{sample_realization, simulate};
    use crate::rng::{StreamKey, StreamPurpose};
    use approx::assert_abs_diff_eq;

    fn two_agents(ctrs: [f64; 2], horizon: usize) -> AdInstance {
        AdInstance::new(
            2,
            horizon,
            vec![
                AdSpec {
                    owner: 0,
                    value_per_click: 1.0,
                    ctr: ctrs[0],
                },
                AdSpec {
                    owner: 1,
                    value_per_click: 1.0,
                    ctr: ctrs[1],
                },
            ],
        )
        .unwrap()
    }

    fn single_agent(ctrs: &[f64], horizon: usize) -> AdInstance {
        let ads = ctrs
            .iter()
            .map(|&c| AdSpec {
                owner: 0,
                value_per_click: 1.0,
                ctr: c,
            })
            .collect();
        AdInstance::new(1, horizon, ads).unwrap()
    }

    #[test]
    fn rejects_single_agent_and_bad_horizon() {
        let inst = single_agent(&[0.5, 0.5], 4);
        assert_eq!(
            AllRule::new(AllParams::default(), &inst).unwrap_err(),
            RuleError::NeedsTwoAgents { agents: 1 }
        );
        let two = two_agents([0.5, 0.5], 2);
        assert_eq!(
            AllRule::new(AllParams { explore_rounds: 2 }, &two).unwrap_err(),
            RuleError::InvalidExploreRounds {
                explore_rounds: 2,
                horizon: 2
            }
        );
    }

    #[test]
    fn zero_bids_collapse_to_uniform() {
        let inst = two_agents([0.5, 0.25], 4);
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let clicks = all_closed_form_clicks(&[0.0, 0.0], &inst, rule.params());
        // T * mu_j / m
        assert_abs_diff_eq!(clicks.get(0), 4.0 * 0.5 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(clicks.get(1), 4.0 * 0.25 / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn certain_click_and_full_bid_commits() {
        // b = (1, 0), n = (t0, 0) puts all exploitation mass on ad 0
        let stats = {
            let mut s = ExplorationStats::new(2, 1);
            s.record_click(0);
            s
        };
        let dist = ExploitDistribution::from_stats(&[1.0, 0.0], &stats);
        assert_abs_diff_eq!(dist.slot_probability(0), 1.0);
        assert_abs_diff_eq!(dist.slot_probability(1), 0.0);
        assert_eq!(dist.residual(), 0.0);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        let inst = two_agents([0.75, 0.4], 4);
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let bids = [0.9, 0.6];
        let closed = all_closed_form_clicks(&bids, &inst, rule.params());
        let enumerated = exact_expected_clicks(&rule, &bids, &inst).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(closed.get(j), enumerated.get(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_agent_exploit_probabilities() {
        // two unit ads plus the dummy: exploit shows (4/9, 4/9) and skips 1/9
        let inst = single_agent(&[1.0, 1.0], 2);
        let rule = AllSingleRule::new(AllParams::default(), 0.5, &inst).unwrap();
        let table = marginal_expectation(&rule, &[1.0, 1.0], &inst);
        assert_abs_diff_eq!(table.show_prob[1][0], 4.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.show_prob[1][1], 4.0 / 9.0, epsilon = 1e-12);
        let skip = 1.0 - table.show_prob[1][0] - table.show_prob[1][1];
        assert_abs_diff_eq!(skip, 1.0 / 9.0, epsilon = 1e-12);
        // exploit-round welfare 8/9
        assert_abs_diff_eq!(table.round_welfare(1, &[1.0, 1.0]), 8.0 / 9.0, epsilon = 1e-12);
    }

    #[test]
    fn single_agent_closed_form_matches_enumeration() {
        let inst = single_agent(&[0.8, 0.35], 3);
        let rule = AllSingleRule::new(AllParams::default(), 0.5, &inst).unwrap();
        let bids = [0.7, 1.0];
        let closed = all_single_closed_form_clicks(&bids, &inst, 1);
        let enumerated = exact_expected_clicks(&rule, &bids, &inst).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(closed.get(j), enumerated.get(j), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_agent_zero_bids_are_uniform_over_augmented_slots() {
        // every slot (two real ads plus the dummy) gets equal share, so
        // clicks collapse to T * mu_j / (m + 1) and welfare is zero
        let inst = single_agent(&[0.8, 0.35], 3);
        let zero = [0.0, 0.0];
        let clicks = all_single_closed_form_clicks(&zero, &inst, 1);
        assert_abs_diff_eq!(clicks.get(0), 3.0 * 0.8 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(clicks.get(1), 3.0 * 0.35 / 3.0, epsilon = 1e-15);
        assert_eq!(clicks.weighted_total(&zero), 0.0);
        let rule = AllSingleRule::new(AllParams::default(), 0.5, &inst).unwrap();
        let table = marginal_expectation(&rule, &zero, &inst);
        for t in 0..3 {
            for j in 0..2 {
                assert_abs_diff_eq!(table.show_prob[t][j], 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn dummy_ctr_is_inert() {
        let inst = single_agent(&[0.8, 0.35], 3);
        let bids = [0.7, 1.0];
        let base = marginal_expectation(
            &AllSingleRule::new(AllParams::default(), 0.5, &inst).unwrap(),
            &bids,
            &inst,
        );
        for ctr in [0.1, 0.9, 1.0] {
            let other = marginal_expectation(
                &AllSingleRule::new(AllParams::default(), ctr, &inst).unwrap(),
                &bids,
                &inst,
            );
            assert_eq!(base, other);
        }
    }

    #[test]
    fn streaming_run_tracks_oracle_on_average() {
        // hand-trace scale check: observed clicks equal shows when rho == 1
        let inst = two_agents([1.0, 1.0], 2);
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let real = crate::env::ClickRealization::from_fn(2, 2, |_, _| true);
        let record = simulate(
            &rule,
            &[1.0, 1.0],
            &real,
            StreamKey::new(3, 1, StreamPurpose::Rule),
        )
        .unwrap();
        let total_obs: u32 = record.observed_clicks.iter().sum();
        assert_eq!(total_obs, 2);
        assert_eq!(record.skips(), 0);
    }

    #[test]
    fn mass_identity_over_reachable_stats() {
        let bids = [0.3, 0.9, 0.45];
        for t0 in 1..=3usize {
            // every split of at most t0 clicks over 3 ads
            for a in 0..=t0 {
                for b in 0..=(t0 - a) {
                    for c in 0..=(t0 - a - b) {
                        let mut stats = ExplorationStats::new(3, t0);
                        for _ in 0..a {
                            stats.record_click(0);
                        }
                        for _ in 0..b {
                            stats.record_click(1);
                        }
                        for _ in 0..c {
                            stats.record_click(2);
                        }
                        let dist = ExploitDistribution::from_stats(&bids, &stats);
                        let mass: f64 = dist.per_slot().iter().sum::<f64>() + dist.residual();
                        assert!((mass - 1.0).abs() <= 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn monte_carlo_matches_exact_expectation() {
        // Hoeffding-style band: 4 sqrt(T/N) per coordinate
        let inst = two_agents([0.6, 0.3], 4);
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let bids = [1.0, 0.5];
        let exact = exact_expected_clicks(&rule, &bids, &inst).unwrap();
        let n = 100_000u64;
        let mut sums = [0.0f64; 2];
        for trial in 0..n {
            let real = sample_realization(
                &inst,
                StreamKey::new(2024, trial, StreamPurpose::Environment),
            );
            let record = simulate(
                &rule,
                &bids,
                &real,
                StreamKey::new(2024, trial, StreamPurpose::Rule),
            )
            .unwrap();
            sums[0] += record.realized_clicks.get(0);
            sums[1] += record.realized_clicks.get(1);
        }
        let band = 4.0 * (4.0 / n as f64).sqrt();
        for j in 0..2 {
            let mean = sums[j] / n as f64;
            assert!(
                (mean - exact.get(j)).abs() < band,
                "ad {j}: mc {mean} vs exact {}",
                exact.get(j)
            );
        }
    }
}
