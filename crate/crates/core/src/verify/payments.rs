//! The normalized truthful payment oracle.
//!
//! For a cycle-monotone allocation map, the unique normalized truthful
//! expected payment of an agent is their reported value of the outcome at
//! their full bid, minus the integral over t in [0, 1] of their reported
//! value of the outcome when their whole bid block is scaled by t. The
//! integral is evaluated by composite Gauss-Legendre quadrature; the
//! explore/exploit rules produce integrands polynomial in t, so the
//! default node count is exact for them.

use alloc::vec::Vec;

use crate::domain::{AdInstance, ClickVector};
use crate::numeric::integrate;

const PANELS: usize = 4;

/// Expected normalized truthful payment of `agent` under the exact
/// expected-click map `clicks_fn`.
pub fn myerson_payment_oracle(
    clicks_fn: &dyn Fn(&[f64]) -> ClickVector,
    bids: &[f64],
    agent: usize,
    instance: &AdInstance,
    quadrature_nodes: usize,
) -> f64 {
    assert!(quadrature_nodes >= 2, "need at least two quadrature nodes");
    let own_ads = instance.agent_ads(agent);
    let reported_value_at = |scale: f64| -> f64 {
        let mut scaled: Vec<f64> = bids.to_vec();
        for &ad in own_ads {
            scaled[ad] = bids[ad] * scale;
        }
        let clicks = clicks_fn(&scaled);
        own_ads.iter().map(|&ad| bids[ad] * clicks.get(ad)).sum()
    };
    let at_full_bid = reported_value_at(1.0);
    let surplus = integrate(reported_value_at, 0.0, 1.0, quadrature_nodes, PANELS);
    at_full_bid - surplus
}
