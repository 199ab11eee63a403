//! Executable oracles for the incentive and welfare claims: cycle/weak
//! monotonicity checkers, the normalized truthful payment oracle, moment
//! and threshold analytics, the exploit-phase Hessian machinery, and the
//! welfare homogeneity probe.

use core::fmt;

mod cmon;
mod hessian;
mod homogeneity;
mod payments;
mod welfare;

pub use cmon::{
    bid_grid, check_cmon, find_wmon_violation, CmonReport, CycleWitness, WmonWitness,
};
pub use hessian::{
    affine_maximizer_residual, build_hessian, hessian_build_and_check, AffineMaximizerReport,
    HessianCheck, HessianSpec,
};
pub use homogeneity::{homogeneity_probe, time_invariant_welfare};
pub use payments::myerson_payment_oracle;
pub use welfare::{
    moments, threshold_check, welfare_report, Baseline, MomentStats, Scenario, ThresholdVerdict,
    WelfareReport,
};

#[derive(Clone, Debug, PartialEq)]
pub enum VerifyError {
    /// The instance does not satisfy the scenario's structural assumptions.
    ScenarioMismatch { reason: &'static str },
    InvalidDimensions { reason: &'static str },
    /// The requested closed form does not exist for this rule.
    UnsupportedRule { rule: &'static str },
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VerifyError::ScenarioMismatch { reason } => write!(f, "scenario mismatch: {reason}"),
            VerifyError::InvalidDimensions { reason } => write!(f, "invalid dimensions: {reason}"),
            VerifyError::UnsupportedRule { rule } => {
                write!(f, "no closed-form welfare for rule {rule}")
            }
        }
    }
}

impl core::error::Error for VerifyError {}
