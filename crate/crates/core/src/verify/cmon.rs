//! Cycle-monotonicity certification and per-realization weak-monotonicity
//! violation search.
//!
//! An allocation map is truthfully implementable exactly when every cycle
//! of one agent's reported types has non-negative cycle sum, the sum of
//! `theta_j(o_j) - theta_{j-1}(o_j)` around the cycle. The checker
//! enumerates all short cycles over a finite bid grid against an exact
//! expected-click oracle and reports every negative cycle as a witness.
//! The violation finder works per click realization instead, over whole
//! bid vectors, and returns the most negative directional product.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{AdInstance, ClickVector};
use crate::enumerate::{
    realization_expectation, EnumerableRule, EnumerationError, DEFAULT_ENUMERATION_CELLS,
};
use crate::env::ClickRealization;

/// A negative cycle: the agent, the bid blocks around the cycle, the
/// expected outcomes each block received, and the (negative) cycle sum.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleWitness {
    pub agent: usize,
    /// Bid blocks over the agent's own ads, in cycle order.
    pub cycle: Vec<Vec<f64>>,
    /// Expected clicks on the agent's own ads for each block.
    pub outcomes: Vec<Vec<f64>>,
    pub cycle_sum: f64,
}

/// Result of a cycle search over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct CmonReport {
    pub witnesses: Vec<CycleWitness>,
    pub cycles_checked: u64,
    pub grid_points: usize,
    /// False when the tuple space exceeded the budget and was sampled.
    pub exhaustive: bool,
    pub tolerance: f64,
}

impl CmonReport {
    pub fn certified(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Full enumeration budget; beyond this many tuples the search samples.
const CYCLE_BUDGET: u64 = 4_000_000;
const SAMPLE_SEED: u64 = 0x5eed_0cc1;

/// Cartesian product grid `points^k`, the usual way to build per-agent bid
/// blocks for [`check_cmon`].
pub fn bid_grid(points: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::with_capacity(out.len() * points.len());
        for prefix in &out {
            for &p in points {
                let mut v = prefix.clone();
                v.push(p);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// Searches all cycles of length 2..=k_max over `grid` (bid blocks for
/// `agent`'s ads, the other coordinates frozen at `base_bids`) and returns
/// every cycle whose sum is below `-tolerance`.
///
/// `clicks_fn` must be an exact expected-click oracle over full bid
/// vectors (closed form or enumeration). An empty witness list certifies
/// cycle monotonicity on the grid.
pub fn check_cmon(
    clicks_fn: &dyn Fn(&[f64]) -> ClickVector,
    instance: &AdInstance,
    agent: usize,
    base_bids: &[f64],
    grid: &[Vec<f64>],
    k_max: usize,
    tolerance: f64,
) -> CmonReport {
    assert!(k_max >= 2, "cycles need at least two types");
    let own_ads = instance.agent_ads(agent);
    let k_agent = own_ads.len();
    for block in grid {
        assert_eq!(block.len(), k_agent, "grid block arity mismatch");
    }

    // outcome (restricted to the agent's ads) for every grid point
    let outcomes: Vec<Vec<f64>> = grid
        .iter()
        .map(|block| {
            let mut bids = base_bids.to_vec();
            for (slot, &ad) in own_ads.iter().enumerate() {
                bids[ad] = block[slot];
            }
            let clicks = clicks_fn(&bids);
            own_ads.iter().map(|&ad| clicks.get(ad)).collect()
        })
        .collect();

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let cycle_sum = |tuple: &[usize]| {
        let k = tuple.len();
        let mut sum = 0.0;
        for j in 0..k {
            let prev = tuple[(j + k - 1) % k];
            let cur = tuple[j];
            sum += dot(&grid[cur], &outcomes[cur]) - dot(&grid[prev], &outcomes[cur]);
        }
        sum
    };

    let n = grid.len();
    let mut total_tuples: u64 = 0;
    for k in 2..=k_max {
        let mut count = 1u64;
        for _ in 0..k {
            count = count.saturating_mul(n as u64);
        }
        total_tuples = total_tuples.saturating_add(count);
    }

    let mut witnesses = Vec::new();
    let mut checked = 0u64;
    let mut record = |tuple: &[usize], sum: f64| {
        if sum < -tolerance {
            witnesses.push(CycleWitness {
                agent,
                cycle: tuple.iter().map(|&i| grid[i].clone()).collect(),
                outcomes: tuple.iter().map(|&i| outcomes[i].clone()).collect(),
                cycle_sum: sum,
            });
        }
    };

    let exhaustive = total_tuples <= CYCLE_BUDGET;
    if exhaustive {
        let mut tuple = Vec::new();
        for k in 2..=k_max {
            tuple.clear();
            tuple.resize(k, 0usize);
            loop {
                checked += 1;
                let sum = cycle_sum(&tuple);
                record(&tuple, sum);
                // odometer increment
                let mut pos = k;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    tuple[pos] += 1;
                    if tuple[pos] < n {
                        break;
                    }
                    tuple[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
        for _ in 0..CYCLE_BUDGET {
            let k = rng.random_range(2..=k_max);
            let tuple: Vec<usize> = (0..k).map(|_| rng.random_range(0..n)).collect();
            checked += 1;
            let sum = cycle_sum(&tuple);
            record(&tuple, sum);
        }
    }

    CmonReport {
        witnesses,
        cycles_checked: checked,
        grid_points: n,
        exhaustive,
        tolerance,
    }
}

/// A weak-monotonicity violation for a fixed realization: two bid vectors
/// whose directional allocation product is negative.
#[derive(Clone, Debug, PartialEq)]
pub struct WmonWitness {
    pub bids_a: Vec<f64>,
    pub bids_b: Vec<f64>,
    pub realization: ClickRealization,
    pub value: f64,
}

const WMON_VECTOR_CAP: usize = 4096;

/// Exhausts all bid-vector pairs over `grid_points^m` and all click
/// realizations, evaluating
/// `(b - a) . sum_t Delta_t(rho) (A(b,t,rho) - A(a,t,rho))`,
/// and returns the most negative pair if any falls below `-tolerance`.
pub fn find_wmon_violation(
    rule: &dyn EnumerableRule,
    instance: &AdInstance,
    grid_points: &[f64],
    tolerance: f64,
) -> Result<Option<WmonWitness>, EnumerationError> {
    let m = instance.num_ads();
    let t = instance.horizon();
    let cells = m * t;
    if cells > DEFAULT_ENUMERATION_CELLS {
        return Err(EnumerationError::TooLargeForEnumeration {
            cells,
            cap: DEFAULT_ENUMERATION_CELLS,
        });
    }
    let vectors = bid_grid(grid_points, m);
    if vectors.len() > WMON_VECTOR_CAP {
        return Err(EnumerationError::TooLargeForEnumeration {
            cells: vectors.len(),
            cap: WMON_VECTOR_CAP,
        });
    }

    let mut best: Option<WmonWitness> = None;
    for index in 0u64..(1u64 << cells) {
        let realization = ClickRealization::from_index(t, m, index);
        let tables: Vec<Vec<Vec<f64>>> = vectors
            .iter()
            .map(|b| realization_expectation(rule, b, &realization).show_prob)
            .collect();
        for i in 0..vectors.len() {
            // the directional product is symmetric under swapping the pair
            for j in (i + 1)..vectors.len() {
                let mut value = 0.0;
                for round in 0..t {
                    for ad in 0..m {
                        if realization.cell(round, ad) {
                            value += (vectors[j][ad] - vectors[i][ad])
                                * (tables[j][round][ad] - tables[i][round][ad]);
                        }
                    }
                }
                if value < -tolerance && best.as_ref().is_none_or(|w| value < w.value) {
                    best = Some(WmonWitness {
                        bids_a: vectors[i].clone(),
                        bids_b: vectors[j].clone(),
                        realization: realization.clone(),
                        value,
                    });
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::AdSpec;
    use crate::enumerate::marginal_expectation;
    use crate::rules::adversarial::AntiMonotoneRule;
    use crate::rules::{
        all_closed_form_clicks, AllParams, AllRule, GreedyRule, RandRule, SkipRule,
    };
    use approx::assert_abs_diff_eq;

    fn single_agent(m: usize, horizon: usize) -> AdInstance {
        let ads = (0..m)
            .map(|_| AdSpec {
                owner: 0,
                value_per_click: 0.5,
                ctr: 0.5,
            })
            .collect();
        AdInstance::new(1, horizon, ads).unwrap()
    }

    fn two_agents_one_ad_each(horizon: usize) -> AdInstance {
        AdInstance::new(
            2,
            horizon,
            vec![
                AdSpec {
                    owner: 0,
                    value_per_click: 0.5,
                    ctr: 0.5,
                },
                AdSpec {
                    owner: 1,
                    value_per_click: 0.5,
                    ctr: 0.5,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn bid_independent_rule_has_zero_cycles() {
        let inst = two_agents_one_ad_each(3);
        let clicks = |bids: &[f64]| {
            marginal_expectation(&RandRule, bids, &inst).total_clicks()
        };
        let grid = bid_grid(&[0.0, 0.5, 1.0], 1);
        let report = check_cmon(&clicks, &inst, 0, &[0.5, 0.5], &grid, 3, 1e-9);
        assert!(report.certified());
        assert!(report.exhaustive);
        assert_eq!(report.cycles_checked, 9 + 27);
    }

    #[test]
    fn explore_exploit_rule_is_cycle_monotone_on_grid() {
        let inst = two_agents_one_ad_each(3);
        let rule = AllRule::new(AllParams::default(), &inst).unwrap();
        let clicks =
            |bids: &[f64]| all_closed_form_clicks(bids, &inst, rule.params());
        let grid = bid_grid(&[0.0, 0.5, 1.0], 1);
        for agent in 0..2 {
            let report = check_cmon(&clicks, &inst, agent, &[0.5, 0.5], &grid, 3, 1e-9);
            assert!(report.certified(), "agent {agent}: {:?}", report.witnesses);
        }
    }

    #[test]
    fn anti_monotone_rule_yields_two_cycle_witness() {
        let inst = two_agents_one_ad_each(2);
        let rule = AntiMonotoneRule { explore_rounds: 1 };
        let clicks = |bids: &[f64]| marginal_expectation(&rule, bids, &inst).total_clicks();
        let grid = bid_grid(&[0.0, 0.5, 1.0], 1);
        let report = check_cmon(&clicks, &inst, 0, &[0.5, 0.5], &grid, 2, 1e-9);
        assert!(!report.certified(), "anti-monotone rule must fail");
        assert!(report.witnesses.iter().all(|w| w.cycle_sum < -1e-9));
    }

    #[test]
    fn greedy_commit_rule_violates_weak_monotonicity() {
        // m = 2, T = 2, grid {0, 1, 2}: bids (0,1) vs (2,2), only ad 1
        // clicked in round 0, gives directional product -1
        let inst = single_agent(2, 2);
        let rule = GreedyRule::new(0, &inst).unwrap();
        let witness = find_wmon_violation(&rule, &inst, &[0.0, 1.0, 2.0], 1e-9)
            .unwrap()
            .expect("violation must exist");
        assert!(witness.value <= -1.0 + 1e-9, "value {}", witness.value);
    }

    #[test]
    fn bid_independent_and_constant_rules_pass_wmon() {
        let inst = single_agent(2, 2);
        assert!(find_wmon_violation(&RandRule, &inst, &[0.0, 1.0, 2.0], 1e-9)
            .unwrap()
            .is_none());
        assert!(find_wmon_violation(&SkipRule, &inst, &[0.0, 1.0, 2.0], 1e-9)
            .unwrap()
            .is_none());
    }

    #[test]
    fn two_cycle_matches_wmon_direction() {
        // the k = 2 cycle sum over a fixed realization is the same
        // directional product the violation finder computes
        let inst = single_agent(2, 2);
        let rule = GreedyRule::new(0, &inst).unwrap();
        let witness = find_wmon_violation(&rule, &inst, &[0.0, 1.0, 2.0], 1e-9)
            .unwrap()
            .unwrap();
        let clicks = |bids: &[f64]| {
            realization_expectation(&rule, bids, &witness.realization).total_clicks()
        };
        let grid = vec![witness.bids_a.clone(), witness.bids_b.clone()];
        let report = check_cmon(&clicks, &inst, 0, &[0.0, 0.0], &grid, 2, 1e-9);
        assert!(!report.certified());
        let worst = report
            .witnesses
            .iter()
            .map(|w| w.cycle_sum)
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(worst, witness.value, epsilon = 1e-12);
    }

    #[test]
    fn enumeration_caps_are_enforced() {
        let inst = single_agent(2, 9);
        let rule = GreedyRule::new(0, &inst).unwrap();
        let err = find_wmon_violation(&rule, &inst, &[0.0, 1.0], 1e-9).unwrap_err();
        assert!(matches!(
            err,
            EnumerationError::TooLargeForEnumeration { .. }
        ));
    }
}
