//! Deliberately broken rules used to exercise the checkers from the
//! violating side.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::all::ExplorationStats;
use crate::enumerate::{EnumerableRule, HistoryStep};
use crate::env::{AllocationRule, OnlineEnv, RoundAction, SimError};

/// Anti-monotone twin of the explore/exploit rule: exploitation weights are
/// `max(0, 1 - b_j n_j / t0)`, renormalized, so raising a bid *lowers* the
/// ad's show probability. The cycle checker must find 2-cycle witnesses
/// against it.
#[derive(Clone, Copy, Debug)]
pub struct AntiMonotoneRule {
    pub explore_rounds: usize,
}

impl AntiMonotoneRule {
    fn weights(&self, bids: &[f64], clicks: &[u32]) -> Vec<f64> {
        let t0 = self.explore_rounds as f64;
        bids.iter()
            .zip(clicks)
            .map(|(&b, &n)| (1.0 - b * n as f64 / t0).max(0.0))
            .collect()
    }

    fn distribution(&self, bids: &[f64], clicks: &[u32]) -> Vec<f64> {
        let m = bids.len();
        let weights = self.weights(bids, clicks);
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return alloc::vec![1.0 / m as f64; m];
        }
        weights.iter().map(|w| w / total).collect()
    }
}

impl AllocationRule for AntiMonotoneRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        let m = env.num_ads();
        let mut stats = ExplorationStats::new(m, self.explore_rounds);
        for _ in 0..self.explore_rounds {
            let ad = rng.random_range(0..m);
            if env.act(RoundAction::Show(ad))? == Some(true) {
                stats.record_click(ad);
            }
        }
        let probs = self.distribution(bids, stats.clicks());
        while !env.finished() {
            let u: f64 = rng.random();
            let fallback = rng.random_range(0..m);
            let mut acc = 0.0;
            let mut pick = fallback;
            for (j, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            env.act(RoundAction::Show(pick))?;
        }
        Ok(())
    }
}

impl EnumerableRule for AntiMonotoneRule {
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
        self.distribution(bids, &clicks)
            .into_iter()
            .enumerate()
            .map(|(j, p)| (RoundAction::Show(j), p))
            .collect()
    }
}
