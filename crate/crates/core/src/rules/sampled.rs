//! Single-parameter reduction: draw one ad per agent up front, then run the
//! explore/exploit rule restricted to the drawn ads for the whole horizon.
//!
//! The up-front draw is latent internal randomness, so this rule has no
//! history-conditional distribution oracle. It is still exactly enumerable:
//! the draw is finite, and conditioning on it leaves an enumerable inner
//! rule, so expectations are averages over all selections.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::all::{ExploitDistribution, ExplorationStats};
use super::{require_unit_bids, RuleError};
use crate::domain::{AdInstance, ClickVector};
use crate::enumerate::{marginal_expectation, EnumerableRule, HistoryStep};
use crate::env::{AllocationRule, OnlineEnv, RoundAction, SimError};
use crate::numeric::KahanSum;

#[derive(Clone, Debug)]
pub struct SampledSpRule {
    explore_rounds: usize,
    ads_by_agent: Vec<Vec<usize>>,
}

impl SampledSpRule {
    pub fn new(explore_rounds: usize, instance: &AdInstance) -> Result<Self, RuleError> {
        if explore_rounds == 0 || explore_rounds >= instance.horizon() {
            return Err(RuleError::InvalidExploreRounds {
                explore_rounds,
                horizon: instance.horizon(),
            });
        }
        let ads_by_agent = (0..instance.num_agents())
            .map(|i| instance.agent_ads(i).to_vec())
            .collect();
        Ok(SampledSpRule {
            explore_rounds,
            ads_by_agent,
        })
    }

    pub fn explore_rounds(&self) -> usize {
        self.explore_rounds
    }

    /// All possible up-front selections (one ad per agent), in a fixed
    /// lexicographic order, with their probabilities.
    pub fn selections(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = vec![(Vec::new(), 1.0f64)];
        for agent_ads in &self.ads_by_agent {
            let share = 1.0 / agent_ads.len() as f64;
            let mut next = Vec::with_capacity(out.len() * agent_ads.len());
            for (prefix, p) in &out {
                for &ad in agent_ads {
                    let mut sel = prefix.clone();
                    sel.push(ad);
                    next.push((sel, p * share));
                }
            }
            out = next;
        }
        out
    }

    fn draw_selection(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        self.ads_by_agent
            .iter()
            .map(|ads| ads[rng.random_range(0..ads.len())])
            .collect()
    }
}

impl AllocationRule for SampledSpRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        require_unit_bids(bids)?;
        let inner = RestrictedExploreExploit {
            selected: self.draw_selection(rng),
            explore_rounds: self.explore_rounds,
        };
        inner.run(bids, env, rng)
    }
}

/// The explore/exploit rule constrained to a fixed subset of ads (global
/// indices). With a single selected ad this degenerates to always showing
/// it.
#[derive(Clone, Debug)]
pub(crate) struct RestrictedExploreExploit {
    pub(crate) selected: Vec<usize>,
    pub(crate) explore_rounds: usize,
}

impl RestrictedExploreExploit {
    fn selected_bids(&self, bids: &[f64]) -> Vec<f64> {
        self.selected.iter().map(|&j| bids[j]).collect()
    }

    fn slot_of(&self, action: RoundAction) -> Option<usize> {
        match action {
            RoundAction::Show(j) => self.selected.iter().position(|&s| s == j),
            RoundAction::Skip => None,
        }
    }
}

impl AllocationRule for RestrictedExploreExploit {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        let s = self.selected.len();
        let sub_bids = self.selected_bids(bids);
        let mut stats = ExplorationStats::new(s, self.explore_rounds);
        for _ in 0..self.explore_rounds {
            let slot = rng.random_range(0..s);
            if env.act(RoundAction::Show(self.selected[slot]))? == Some(true) {
                stats.record_click(slot);
            }
        }
        let dist = ExploitDistribution::from_stats(&sub_bids, &stats);
        while !env.finished() {
            let u: f64 = rng.random();
            let fallback = rng.random_range(0..s);
            env.act(RoundAction::Show(self.selected[dist.sample(u, fallback)]))?;
        }
        Ok(())
    }
}

impl EnumerableRule for RestrictedExploreExploit {
    fn action_distribution(&self, bids: &[f64], history: &[HistoryStep]) -> Vec<(RoundAction, f64)> {
        let s = self.selected.len();
        if history.len() < self.explore_rounds {
            return self
                .selected
                .iter()
                .map(|&j| (RoundAction::Show(j), 1.0 / s as f64))
                .collect();
        }
        let mut stats = ExplorationStats::new(s, self.explore_rounds);
        for step in history.iter().take(self.explore_rounds) {
            if let (Some(slot), Some(true)) = (self.slot_of(step.action), step.clicked) {
                stats.record_click(slot);
            }
        }
        let dist = ExploitDistribution::from_stats(&self.selected_bids(bids), &stats);
        (0..s)
            .map(|slot| (RoundAction::Show(self.selected[slot]), dist.slot_probability(slot)))
            .collect()
    }
}

/// Exact expected clicks of the reduction: the selection-weighted average
/// of the restricted rule's exact expectation.
pub fn sampled_sp_expected_clicks(
    rule: &SampledSpRule,
    bids: &[f64],
    instance: &AdInstance,
) -> ClickVector {
    let m = instance.num_ads();
    let mut totals = vec![KahanSum::new(); m];
    for (selected, p) in rule.selections() {
        let inner = RestrictedExploreExploit {
            selected,
            explore_rounds: rule.explore_rounds,
        };
        let clicks = marginal_expectation(&inner, bids, instance).total_clicks();
        for (acc, &c) in totals.iter_mut().zip(clicks.as_slice()) {
            acc.add(p * c);
        }
    }
    ClickVector::from_vec(totals.iter().map(KahanSum::value).collect())
}

/// Closed-form expected welfare of the reduction: per selection S the inner
/// rule is the explore/exploit rule on |S| ads, whose welfare is
/// `t0 * M1 + (T - t0) * (M1 + M2^2 - M1^2)` with moments over S.
pub fn sampled_sp_closed_form_welfare(
    bids: &[f64],
    instance: &AdInstance,
    explore_rounds: usize,
) -> f64 {
    let rule = SampledSpRule {
        explore_rounds,
        ads_by_agent: (0..instance.num_agents())
            .map(|i| instance.agent_ads(i).to_vec())
            .collect(),
    };
    let ctrs = instance.ctrs();
    let t = instance.horizon() as f64;
    let t0 = explore_rounds as f64;
    let mut total = KahanSum::new();
    for (selected, p) in rule.selections() {
        let s = selected.len() as f64;
        let products: Vec<f64> = selected.iter().map(|&j| bids[j] * ctrs[j]).collect();
        let m1 = products.iter().sum::<f64>() / s;
        let m2_sq = products.iter().map(|v| v * v).sum::<f64>() / s;
        let per_exploit = m1 + (m2_sq - m1 * m1);
        total.add(p * (t0 * m1 + (t - t0) * per_exploit));
    }
    total.value()
}
