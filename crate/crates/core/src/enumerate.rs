//! Exact expectation oracles over tiny state spaces.
//!
//! A rule that exposes its per-round action distribution given the observed
//! history can be evaluated exactly: either against one fixed click
//! realization (expectation over the rule's internal randomness only), or
//! in full, by enumerating all 2^(T*m) realizations weighted by the CTRs.
//! These oracles back the monotonicity checkers and pin down the closed
//! forms used everywhere else.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::domain::{AdInstance, ClickVector};
use crate::env::{ClickRealization, RoundAction};
use crate::numeric::KahanSum;

/// One past round as the rule saw it: the action taken and, for a show,
/// whether the ad was clicked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HistoryStep {
    pub action: RoundAction,
    pub clicked: Option<bool>,
}

/// Distribution-oracle interface: the probability of each action in the
/// round `history.len()`, conditioned on the observations so far.
///
/// Implementations must depend on the realization only through `history`;
/// that is exactly the no-simulation constraint in oracle form.
pub trait EnumerableRule {
    fn action_distribution(&self, bids: &[f64], history: &[HistoryStep]) -> Vec<(RoundAction, f64)>;
}

/// Default cap on `horizon * num_ads` for full realization enumeration
/// (2^16 tables).
pub const DEFAULT_ENUMERATION_CELLS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnumerationError {
    TooLargeForEnumeration { cells: usize, cap: usize },
}

impl fmt::Display for EnumerationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnumerationError::TooLargeForEnumeration { cells, cap } => write!(
                f,
                "instance has {cells} realization cells, enumeration cap is {cap}"
            ),
        }
    }
}

impl core::error::Error for EnumerationError {}

/// Per-round expectations of a rule run: show probabilities and expected
/// clicks, both T x m.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationTable {
    pub show_prob: Vec<Vec<f64>>,
    pub expected_clicks: Vec<Vec<f64>>,
}

impl ExpectationTable {
    fn zero(horizon: usize, num_ads: usize) -> (Self, Vec<Vec<KahanSum>>, Vec<Vec<KahanSum>>) {
        let table = ExpectationTable {
            show_prob: vec![vec![0.0; num_ads]; horizon],
            expected_clicks: vec![vec![0.0; num_ads]; horizon],
        };
        let acc_show = vec![vec![KahanSum::new(); num_ads]; horizon];
        let acc_click = vec![vec![KahanSum::new(); num_ads]; horizon];
        (table, acc_show, acc_click)
    }

    pub fn horizon(&self) -> usize {
        self.show_prob.len()
    }

    /// Total expected clicks per ad, summed over rounds.
    pub fn total_clicks(&self) -> ClickVector {
        let m = self.expected_clicks.first().map_or(0, Vec::len);
        let mut totals = vec![KahanSum::new(); m];
        for round in &self.expected_clicks {
            for (acc, &c) in totals.iter_mut().zip(round) {
                acc.add(c);
            }
        }
        ClickVector::from_vec(totals.iter().map(KahanSum::value).collect())
    }

    /// Expected welfare of round `t` under per-click weights (typically the
    /// private values).
    pub fn round_welfare(&self, t: usize, weights: &[f64]) -> f64 {
        self.expected_clicks[t]
            .iter()
            .zip(weights)
            .map(|(c, w)| c * w)
            .sum()
    }

    pub fn total_welfare(&self, weights: &[f64]) -> f64 {
        (0..self.horizon()).map(|t| self.round_welfare(t, weights)).sum()
    }
}

fn walk_fixed(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    realization: &ClickRealization,
    history: &mut Vec<HistoryStep>,
    prob: f64,
    acc_show: &mut [Vec<KahanSum>],
    acc_click: &mut [Vec<KahanSum>],
) {
    let t = history.len();
    if t == realization.horizon() {
        return;
    }
    for (action, q) in rule.action_distribution(bids, history) {
        if q <= 0.0 {
            continue;
        }
        let p = prob * q;
        let clicked = match action {
            RoundAction::Skip => None,
            RoundAction::Show(ad) => {
                let hit = realization.cell(t, ad);
                acc_show[t][ad].add(p);
                if hit {
                    acc_click[t][ad].add(p);
                }
                Some(hit)
            }
        };
        history.push(HistoryStep { action, clicked });
        walk_fixed(rule, bids, realization, history, p, acc_show, acc_click);
        history.pop();
    }
}

/// Expectation over the rule's internal randomness for one fixed
/// realization: per-round show probabilities and clicks.
pub fn realization_expectation(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    realization: &ClickRealization,
) -> ExpectationTable {
    let (mut table, mut acc_show, mut acc_click) =
        ExpectationTable::zero(realization.horizon(), realization.num_ads());
    let mut history = Vec::with_capacity(realization.horizon());
    walk_fixed(
        rule,
        bids,
        realization,
        &mut history,
        1.0,
        &mut acc_show,
        &mut acc_click,
    );
    for t in 0..realization.horizon() {
        for j in 0..realization.num_ads() {
            table.show_prob[t][j] = acc_show[t][j].value();
            table.expected_clicks[t][j] = acc_click[t][j].value();
        }
    }
    table
}

fn walk_marginal(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    ctrs: &[f64],
    horizon: usize,
    history: &mut Vec<HistoryStep>,
    prob: f64,
    acc_show: &mut [Vec<KahanSum>],
    acc_click: &mut [Vec<KahanSum>],
) {
    let t = history.len();
    if t == horizon {
        return;
    }
    for (action, q) in rule.action_distribution(bids, history) {
        if q <= 0.0 {
            continue;
        }
        let p = prob * q;
        match action {
            RoundAction::Skip => {
                history.push(HistoryStep {
                    action,
                    clicked: None,
                });
                walk_marginal(rule, bids, ctrs, horizon, history, p, acc_show, acc_click);
                history.pop();
            }
            RoundAction::Show(ad) => {
                acc_show[t][ad].add(p);
                let mu = ctrs[ad];
                for (clicked, branch) in [(true, mu), (false, 1.0 - mu)] {
                    if branch <= 0.0 {
                        continue;
                    }
                    let pb = p * branch;
                    if clicked {
                        acc_click[t][ad].add(pb);
                    }
                    history.push(HistoryStep {
                        action,
                        clicked: Some(clicked),
                    });
                    walk_marginal(rule, bids, ctrs, horizon, history, pb, acc_show, acc_click);
                    history.pop();
                }
            }
        }
    }
}

/// Exact expectation over both the rule's internal randomness and the
/// Bernoulli clicks, by walking the decision/click tree directly.
///
/// Mathematically identical to [`exact_expected_clicks`] (a rule behind the
/// oracle interface cannot see unobserved cells) but exponential only in T,
/// not in T*m.
pub fn marginal_expectation(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    instance: &AdInstance,
) -> ExpectationTable {
    let (mut table, mut acc_show, mut acc_click) =
        ExpectationTable::zero(instance.horizon(), instance.num_ads());
    let ctrs = instance.ctrs();
    let mut history = Vec::with_capacity(instance.horizon());
    walk_marginal(
        rule,
        bids,
        &ctrs,
        instance.horizon(),
        &mut history,
        1.0,
        &mut acc_show,
        &mut acc_click,
    );
    for t in 0..instance.horizon() {
        for j in 0..instance.num_ads() {
            table.show_prob[t][j] = acc_show[t][j].value();
            table.expected_clicks[t][j] = acc_click[t][j].value();
        }
    }
    table
}

/// Probability of one full realization table under the instance CTRs.
pub fn realization_probability(instance: &AdInstance, realization: &ClickRealization) -> f64 {
    let ctrs = instance.ctrs();
    let mut p = 1.0;
    for t in 0..realization.horizon() {
        for (j, &mu) in ctrs.iter().enumerate() {
            p *= if realization.cell(t, j) { mu } else { 1.0 - mu };
        }
    }
    p
}

/// Exact expected click vector by brute force: every one of the 2^(T*m)
/// click tables, weighted by its CTR probability, with the rule's internal
/// randomness enumerated inside each table.
pub fn exact_expected_clicks(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    instance: &AdInstance,
) -> Result<ClickVector, EnumerationError> {
    exact_expected_clicks_with_cap(rule, bids, instance, DEFAULT_ENUMERATION_CELLS)
}

/// [`exact_expected_clicks`] with an explicit cap on `horizon * num_ads`.
pub fn exact_expected_clicks_with_cap(
    rule: &dyn EnumerableRule,
    bids: &[f64],
    instance: &AdInstance,
    cap: usize,
) -> Result<ClickVector, EnumerationError> {
    let cells = instance.horizon() * instance.num_ads();
    if cells > cap || cap > 63 {
        return Err(EnumerationError::TooLargeForEnumeration {
            cells,
            cap: cap.min(63),
        });
    }
    let m = instance.num_ads();
    let mut totals = vec![KahanSum::new(); m];
    for index in 0u64..(1u64 << cells) {
        let realization = ClickRealization::from_index(instance.horizon(), m, index);
        let weight = realization_probability(instance, &realization);
        if weight <= 0.0 {
            continue;
        }
        let table = realization_expectation(rule, bids, &realization);
        let clicks = table.total_clicks();
        for (acc, &c) in totals.iter_mut().zip(clicks.as_slice()) {
            acc.add(weight * c);
        }
    }
    Ok(ClickVector::from_vec(
        totals.iter().map(KahanSum::value).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use approx::assert_abs_diff_eq;

    /// Uniform over all ads every round, ignoring feedback.
    struct UniformEach;

    impl EnumerableRule for UniformEach {
        fn action_distribution(
            &self,
            bids: &[f64],
            _history: &[HistoryStep],
        ) -> Vec<(RoundAction, f64)> {
            let m = bids.len();
            (0..m)
                .map(|j| (RoundAction::Show(j), 1.0 / m as f64))
                .collect()
        }
    }

    fn instance(ctrs: &[f64], horizon: usize) -> AdInstance {
        let ads = ctrs
            .iter()
            .map(|&c| AdSpec {
                owner: 0,
                value_per_click: 0.5,
                ctr: c,
            })
            .collect();
        AdInstance::new(1, horizon, ads).unwrap()
    }

    #[test]
    fn uniform_rule_expected_clicks() {
        // T * mu_j / m, both oracles
        let inst = instance(&[0.5, 0.25], 4);
        let bids = [0.5, 0.5];
        let exact = exact_expected_clicks(&UniformEach, &bids, &inst).unwrap();
        assert_abs_diff_eq!(exact.get(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.get(1), 0.5, epsilon = 1e-12);
        let marginal = marginal_expectation(&UniformEach, &bids, &inst).total_clicks();
        assert_abs_diff_eq!(marginal.get(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(marginal.get(1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_ctr_one() {
        let inst = instance(&[1.0, 1.0], 2);
        let clicks = exact_expected_clicks(&UniformEach, &[1.0, 1.0], &inst).unwrap();
        assert_abs_diff_eq!(clicks.get(0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(clicks.get(1), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let inst = instance(&[0.5, 0.5], 9);
        let err = exact_expected_clicks(&UniformEach, &[0.5, 0.5], &inst).unwrap_err();
        assert_eq!(
            err,
            EnumerationError::TooLargeForEnumeration { cells: 18, cap: 16 }
        );
    }

    #[test]
    fn realization_probabilities_sum_to_one() {
        let inst = instance(&[0.3, 0.8], 3);
        let cells = 6;
        let mut total = 0.0;
        for index in 0u64..(1 << cells) {
            let r = ClickRealization::from_index(3, 2, index);
            total += realization_probability(&inst, &r);
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
