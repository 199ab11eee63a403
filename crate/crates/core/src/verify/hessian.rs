//! The affine-maximizer machinery behind the exploit phase.
//!
//! Fixing the other agents' bids, the exploitation-round click vector of
//! one agent's ads is the unique maximizer of `b . p - G(p, mu)` for an
//! explicit quadratic potential G whose Hessian has entries `tau rho_i^2`
//! on the diagonal and `rho_i rho_j` off it, with `rho_i = sqrt(alpha m) /
//! mu_i`, `alpha = 1/(m - k)`, `tau = 1 + m - k`. Positive-definiteness is
//! verified along two independent routes: a symmetric eigensolve, and the
//! explicit Gram factor with one extra coordinate, which reconstructs the
//! matrix entry by entry.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::VerifyError;
use crate::numeric::{symmetric_eigenvalues, Dd};

/// The exploit-phase Hessian data for one agent holding `k` of `m` ads.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianSpec {
    pub alpha: f64,
    pub tau: f64,
    pub rho: Vec<f64>,
    pub matrix: Vec<Vec<f64>>,
}

pub fn build_hessian(ctrs_subset: &[f64], num_ads_total: usize) -> Result<HessianSpec, VerifyError> {
    let k = ctrs_subset.len();
    if k == 0 || k >= num_ads_total {
        return Err(VerifyError::InvalidDimensions {
            reason: "agent must hold between 1 and m-1 ads",
        });
    }
    if ctrs_subset.iter().any(|&mu| mu <= 0.0) {
        return Err(VerifyError::InvalidDimensions {
            reason: "ctrs must be strictly positive",
        });
    }
    let m = num_ads_total as f64;
    let alpha = 1.0 / (m - k as f64);
    let tau = 1.0 + m - k as f64;
    let rho: Vec<f64> = ctrs_subset
        .iter()
        .map(|&mu| libm::sqrt(alpha * m) / mu)
        .collect();
    let mut matrix = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            matrix[i][j] = if i == j {
                tau * rho[i] * rho[i]
            } else {
                rho[i] * rho[j]
            };
        }
    }
    Ok(HessianSpec {
        alpha,
        tau,
        rho,
        matrix,
    })
}

/// Result of the dual positive-definiteness check.
#[derive(Clone, Debug, PartialEq)]
pub struct HessianCheck {
    pub spec: HessianSpec,
    pub min_eigenvalue: f64,
    /// Gram factor rows in R^(k+1): `sqrt(tau - 1) rho_i` at coordinate i
    /// and `rho_i` at the shared extra coordinate.
    pub gram_vectors: Vec<Vec<f64>>,
    /// max_ij |H_ij - w_i . w_j|, evaluated in double-double so it reflects
    /// the algebra rather than f64 rounding.
    pub max_gram_residual: f64,
}

pub fn hessian_build_and_check(
    ctrs_subset: &[f64],
    num_ads_total: usize,
) -> Result<HessianCheck, VerifyError> {
    let spec = build_hessian(ctrs_subset, num_ads_total)?;
    let k = spec.rho.len();
    let min_eigenvalue = symmetric_eigenvalues(&spec.matrix)[0];

    let tau_minus_one = Dd::from_f64(spec.tau - 1.0);
    let scale = tau_minus_one.sqrt();
    let mut gram_vectors = vec![vec![0.0; k + 1]; k];
    let mut max_residual = 0.0f64;
    for i in 0..k {
        let rho_i = Dd::from_f64(spec.rho[i]);
        gram_vectors[i][i] = scale.mul(rho_i).to_f64();
        gram_vectors[i][k] = spec.rho[i];
        for j in 0..k {
            let rho_j = Dd::from_f64(spec.rho[j]);
            // only coordinates i==j and the shared extra one contribute
            let dot = if i == j {
                let s = scale.mul(rho_i);
                s.mul(s).add(rho_i.mul(rho_i))
            } else {
                rho_i.mul(rho_j)
            };
            let expected = if i == j {
                Dd::from_f64(spec.tau).mul(rho_i.mul(rho_i))
            } else {
                rho_i.mul(rho_j)
            };
            let residual = dot.sub(expected).abs().to_f64();
            max_residual = max_residual.max(residual);
        }
    }
    Ok(HessianCheck {
        spec,
        min_eigenvalue,
        gram_vectors,
        max_gram_residual: max_residual,
    })
}

/// Residual report for the affine-maximizer characterization of one
/// agent's exploit-round click vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMaximizerReport {
    /// p*: the agent's per-exploit-round expected clicks.
    pub exploit_clicks: Vec<f64>,
    /// max_i |f_i(p*, mu) - b_i| (gradient stationarity).
    pub max_gradient_residual: f64,
    /// max_i |(H p*)_i - w_i| (unique critical point system).
    pub max_critical_residual: f64,
    pub objective_at_optimum: f64,
    /// Smallest margin `objective(p*) - objective(p)` over the sampled
    /// grid; positive means p* dominated every sample.
    pub min_objective_margin: f64,
    pub samples: usize,
    /// Sampled points that met or beat the optimum (should be zero).
    pub maximality_violations: usize,
}

/// Checks, for the agent holding `agent_ads`, that the exploit-round click
/// vector is the stationary point and strict maximizer of the quadratic
/// objective reconstructed from bids and CTRs.
pub fn affine_maximizer_residual(
    bids: &[f64],
    ctrs: &[f64],
    agent_ads: &[usize],
    samples: usize,
    sample_seed: u64,
) -> Result<AffineMaximizerReport, VerifyError> {
    let m = bids.len();
    if ctrs.len() != m {
        return Err(VerifyError::InvalidDimensions {
            reason: "bids and ctrs must have equal length",
        });
    }
    let k = agent_ads.len();
    if k == 0 || k >= m {
        return Err(VerifyError::InvalidDimensions {
            reason: "agent must hold between 1 and m-1 ads",
        });
    }
    for &ad in agent_ads {
        if ad >= m {
            return Err(VerifyError::InvalidDimensions {
                reason: "agent ad index out of range",
            });
        }
    }
    if ctrs.iter().any(|&mu| mu <= 0.0) {
        return Err(VerifyError::InvalidDimensions {
            reason: "ctrs must be strictly positive",
        });
    }

    let mf = m as f64;
    let x: Vec<f64> = (0..m).map(|j| bids[j] * ctrs[j] / mf).collect();
    let total_x: f64 = x.iter().sum();
    let outside: f64 = (0..m)
        .filter(|j| !agent_ads.contains(j))
        .map(|j| x[j])
        .sum();
    let alpha = 1.0 / (mf - k as f64);
    let beta = 1.0 / mf - alpha * (outside - k as f64 / mf);

    let own_bids: Vec<f64> = agent_ads.iter().map(|&j| bids[j]).collect();
    let own_ctrs: Vec<f64> = agent_ads.iter().map(|&j| ctrs[j]).collect();
    // p*_i = mu_i (x_i + (1 - sum x)/m), the exploit-round click vector
    let p_star: Vec<f64> = agent_ads
        .iter()
        .map(|&j| ctrs[j] * (x[j] + (1.0 - total_x) / mf))
        .collect();

    let f_at = |p: &[f64], i: usize| -> f64 {
        let mu_i = own_ctrs[i];
        let cross: f64 = (0..k).map(|j| p[j] * alpha * mf / (mu_i * own_ctrs[j])).sum();
        p[i] * mf / (mu_i * mu_i) + cross - beta * mf / mu_i
    };
    let potential = |p: &[f64]| -> f64 {
        let mut g = 0.0;
        for i in 0..k {
            g -= p[i] * mf * beta / own_ctrs[i];
            g += 0.5 * mf * (1.0 + alpha) * p[i] * p[i] / (own_ctrs[i] * own_ctrs[i]);
            for j in (i + 1)..k {
                g += p[i] * p[j] * mf * alpha / (own_ctrs[i] * own_ctrs[j]);
            }
        }
        g
    };
    let objective =
        |p: &[f64]| -> f64 { own_bids.iter().zip(p).map(|(b, q)| b * q).sum::<f64>() - potential(p) };

    let mut max_gradient_residual = 0.0f64;
    for i in 0..k {
        max_gradient_residual = max_gradient_residual.max(libm::fabs(f_at(&p_star, i) - own_bids[i]));
    }

    let hessian = build_hessian(&own_ctrs, m)?;
    let mut max_critical_residual = 0.0f64;
    for i in 0..k {
        let hp: f64 = (0..k).map(|j| hessian.matrix[i][j] * p_star[j]).sum();
        let w_i = own_bids[i] + beta * mf / own_ctrs[i];
        max_critical_residual = max_critical_residual.max(libm::fabs(hp - w_i));
    }

    let objective_at_optimum = objective(&p_star);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut maximality_violations = 0usize;
    let mut min_margin = f64::INFINITY;
    for _ in 0..samples {
        let p: Vec<f64> = p_star
            .iter()
            .map(|&c| c + 4.0 * (rng.random::<f64>() - 0.5))
            .collect();
        if p == p_star {
            continue;
        }
        let margin = objective_at_optimum - objective(&p);
        min_margin = min_margin.min(margin);
        if margin <= 0.0 {
            maximality_violations += 1;
        }
    }

    Ok(AffineMaximizerReport {
        exploit_clicks: p_star,
        max_gradient_residual,
        max_critical_residual,
        objective_at_optimum,
        min_objective_margin: min_margin,
        samples,
        maximality_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_one_by_one_hessian() {
        // k = 1, m = 2, mu = 0.5: alpha = 1, tau = 2, rho = 2 sqrt(2), H = [16]
        let check = hessian_build_and_check(&[0.5], 2).unwrap();
        assert_abs_diff_eq!(check.spec.tau, 2.0);
        assert_abs_diff_eq!(check.spec.rho[0], 2.0 * libm::sqrt(2.0), epsilon = 1e-15);
        assert_abs_diff_eq!(check.spec.matrix[0][0], 16.0, epsilon = 1e-12);
        assert!(check.min_eigenvalue > 0.0);
        assert!(check.max_gram_residual <= 1e-12);
    }

    #[test]
    fn worked_two_by_two_hessian() {
        // k = 2, m = 3, mu = (1, 1): tau = 2, rho = sqrt(3), H = [[6,3],[3,6]]
        let check = hessian_build_and_check(&[1.0, 1.0], 3).unwrap();
        assert_abs_diff_eq!(check.spec.matrix[0][0], 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(check.spec.matrix[0][1], 3.0, epsilon = 1e-12);
        let eigs = symmetric_eigenvalues(&check.spec.matrix);
        assert_abs_diff_eq!(eigs[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[1], 9.0, epsilon = 1e-10);
    }

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(build_hessian(&[0.5, 0.5], 2).is_err());
        assert!(build_hessian(&[], 2).is_err());
        assert!(build_hessian(&[0.0], 2).is_err());
    }

    #[test]
    fn scalar_agent_gradient_residual_vanishes() {
        let report =
            affine_maximizer_residual(&[0.7, 0.3], &[0.6, 0.5], &[0], 100, 7).unwrap();
        assert!(report.max_gradient_residual <= 1e-10);
        assert!(report.max_critical_residual <= 1e-10);
        assert_eq!(report.maximality_violations, 0);
        assert!(report.min_objective_margin > 0.0);
    }

    #[test]
    fn sampled_instances_stay_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let m = rng.random_range(2..6usize);
            let k = rng.random_range(1..m);
            let bids: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            let ctrs: Vec<f64> = (0..m).map(|_| 0.05 + 0.95 * rng.random::<f64>()).collect();
            let agent_ads: Vec<usize> = (0..k).collect();
            let report =
                affine_maximizer_residual(&bids, &ctrs, &agent_ads, 50, 11).unwrap();
            assert!(report.max_gradient_residual <= 1e-9);
            assert!(report.max_critical_residual <= 1e-9);
            assert_eq!(report.maximality_violations, 0);
        }
    }
}
