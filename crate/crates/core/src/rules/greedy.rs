//! Greedy commit rule: estimate once, then stick with the winner.
//!
//! With `explore_rounds = 0` it is fully deterministic and commits to the
//! highest bid outright. It never skips and its reachable allocations do
//! not depend on the CTRs, which is exactly why it fails per-realization
//! monotonicity; the violation finder uses it as its standard witness.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::RuleError;
use crate::domain::AdInstance;
use crate::enumerate::{EnumerableRule, HistoryStep};
use crate::env::{AllocationRule, OnlineEnv, RoundAction, SimError};

#[derive(Clone, Copy, Debug)]
pub struct GreedyRule {
    explore_rounds: usize,
}

impl GreedyRule {
    pub fn new(explore_rounds: usize, instance: &AdInstance) -> Result<Self, RuleError> {
        // explore_rounds = 0 is allowed here: commit to the best bid alone
        if explore_rounds >= instance.horizon() {
            return Err(RuleError::InvalidExploreRounds {
                explore_rounds,
                horizon: instance.horizon(),
            });
        }
        Ok(GreedyRule { explore_rounds })
    }

    pub fn explore_rounds(&self) -> usize {
        self.explore_rounds
    }

    /// Committed ad after exploration: argmax of `bids[j] * clicks[j]`
    /// (argmax of the bid alone when there was no exploration), lowest
    /// index on ties.
    fn committed_ad(&self, bids: &[f64], clicks: &[u32]) -> usize {
        let score = |j: usize| {
            if self.explore_rounds == 0 {
                bids[j]
            } else {
                bids[j] * clicks[j] as f64
            }
        };
        let mut best = 0;
        for j in 1..bids.len() {
            if score(j) > score(best) {
                best = j;
            }
        }
        best
    }
}

impl AllocationRule for GreedyRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        let m = env.num_ads();
        let mut clicks = alloc::vec![0u32; m];
        for _ in 0..self.explore_rounds {
            let ad = rng.random_range(0..m);
            if env.act(RoundAction::Show(ad))? == Some(true) {
                clicks[ad] += 1;
            }
        }
        let committed = self.committed_ad(bids, &clicks);
        while !env.finished() {
            env.act(RoundAction::Show(committed))?;
        }
        Ok(())
    }
}

impl EnumerableRule for GreedyRule {
    fn action_distribution(&self, bids: &[f64], history: &[HistoryStep]) -> Vec<(RoundAction, f64)> {
        let m = bids.len();
        if history.len() < self.explore_rounds {
            return (0..m)
                .map(|j| (RoundAction::Show(j), 1.0 / m as f64))
                .collect();
        }
        let mut clicks = alloc::vec![0u32; m];
        for step in history.iter().take(self.explore_rounds) {
            if let (RoundAction::Show(j), Some(true)) = (step.action, step.clicked) {
                clicks[j] += 1;
            }
        }
        alloc::vec![(RoundAction::Show(self.committed_ad(bids, &clicks)), 1.0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use crate::env::{simulate, ClickRealization};
    use crate::rng::{StreamKey, StreamPurpose};

    fn instance(m: usize, horizon: usize) -> AdInstance {
        let ads = (0..m)
            .map(|_| AdSpec {
                owner: 0,
                value_per_click: 0.5,
                ctr: 0.5,
            })
            .collect();
        AdInstance::new(1, horizon, ads).unwrap()
    }

    #[test]
    fn single_ad_always_shown() {
        let inst = instance(1, 3);
        let rule = GreedyRule::new(0, &inst).unwrap();
        let real = ClickRealization::from_fn(3, 1, |_, _| false);
        let record = simulate(
            &rule,
            &[0.4],
            &real,
            StreamKey::new(0, 0, StreamPurpose::Rule),
        )
        .unwrap();
        assert_eq!(record.shows_of(0), 3);
    }

    #[test]
    fn commits_to_higher_product() {
        let inst = instance(2, 4);
        let rule = GreedyRule::new(2, &inst).unwrap();
        assert_eq!(rule.committed_ad(&[1.0, 0.1], &[1, 1]), 0);
        // ties break to the lowest index
        assert_eq!(rule.committed_ad(&[0.5, 0.5], &[1, 1]), 0);
        assert_eq!(rule.committed_ad(&[0.1, 1.0], &[1, 1]), 1);
    }

    #[test]
    fn zero_exploration_commits_to_best_bid() {
        let inst = instance(2, 2);
        let rule = GreedyRule::new(0, &inst).unwrap();
        let dist = rule.action_distribution(&[0.0, 1.0], &[]);
        assert_eq!(dist, alloc::vec![(RoundAction::Show(1), 1.0)]);
        let dist = rule.action_distribution(&[2.0, 2.0], &[]);
        assert_eq!(dist, alloc::vec![(RoundAction::Show(0), 1.0)]);
    }

    #[test]
    fn never_skips() {
        let inst = instance(3, 6);
        let rule = GreedyRule::new(2, &inst).unwrap();
        let real = ClickRealization::from_fn(6, 3, |t, j| (t + j) % 2 == 0);
        let record = simulate(
            &rule,
            &[0.9, 0.2, 0.7],
            &real,
            StreamKey::new(5, 0, StreamPurpose::Rule),
        )
        .unwrap();
        assert_eq!(record.skips(), 0);
    }
}
