//! Welfare homogeneity probe.
//!
//! A rule whose per-round ad distribution is fixed (time-invariant) has
//! expected welfare linear in the CTR vector, so scaling every CTR by z
//! scales welfare by exactly z. Rules that adapt to clicks break this:
//! the explore/exploit rule's welfare is quadratic in the CTRs, and the
//! probe reports a strictly positive deviation for it. The deviation is
//! what separates feedback-using rules from fixed-distribution ones.

use alloc::vec::Vec;

/// Max over the grid of |W(z * ctrs) - z * W(ctrs)|.
pub fn homogeneity_probe<W: Fn(&[f64]) -> f64>(welfare: W, ctrs: &[f64], z_grid: &[f64]) -> f64 {
    let base = welfare(ctrs);
    let mut worst = 0.0f64;
    for &z in z_grid {
        let scaled: Vec<f64> = ctrs.iter().map(|&mu| z * mu).collect();
        let deviation = libm::fabs(welfare(&scaled) - z * base);
        worst = worst.max(deviation);
    }
    worst
}

/// Expected welfare of a time-invariant rule that shows ad j with
/// probability `show_dist[j]` every round (probabilities may sum below one
/// when the rule skips).
pub fn time_invariant_welfare(
    show_dist: &[f64],
    bids: &[f64],
    ctrs: &[f64],
    horizon: usize,
) -> f64 {
    debug_assert!(show_dist.iter().sum::<f64>() <= 1.0 + 1e-12);
    horizon as f64
        * show_dist
            .iter()
            .zip(bids.iter().zip(ctrs))
            .map(|(d, (b, mu))| d * b * mu)
            .sum::<f64>()
}
