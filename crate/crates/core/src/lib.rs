//! Simulation and verification toolkit for pay-per-click ad auctions with
//! unknown click-through rates.
//!
//! The crate models the T-round auction as an online environment with an
//! external click realization, implements the allocation rules of interest
//! (uniform random, explore-then-weighted-exploit, the sampled
//! single-parameter reduction, greedy commit), wraps any rule in the
//! single-call payment transform that charges random payments with the
//! normalized truthful expectation, and ships exact oracles that
//! machine-check the incentive and welfare properties at desk scale:
//! cycle/weak monotonicity, truthful payments, welfare identities, skew
//! thresholds, Hessian positive-definiteness, and welfare homogeneity.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats, and the CLI live
//! in the companion `clickmech` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod domain;
pub mod enumerate;
pub mod env;
pub mod numeric;
pub mod rng;
pub mod rules;
pub mod transform;
pub mod verify;

pub use domain::{
    agent_value, rescale_bids, AdInstance, AdSpec, BidVector, ClickVector, DomainError,
    RescaleCoefficients,
};
pub use enumerate::{
    exact_expected_clicks, exact_expected_clicks_with_cap, marginal_expectation,
    realization_expectation, EnumerableRule, EnumerationError, ExpectationTable, HistoryStep,
    DEFAULT_ENUMERATION_CELLS,
};
pub use env::{
    sample_realization, simulate, AllocationRule, ClickRealization, EnvError, OnlineEnv,
    RoundAction, RunRecord, SimError,
};
pub use rng::{StreamKey, StreamPurpose, TrialStreams};
pub use rules::{BuiltRule, RuleError, RuleKind, RuleParams};
pub use transform::{
    draw_rescale, match_probability_estimate, run_mechanism, run_mechanism_on, MatchEstimate,
    MechanismRun, RescaleDraw, TransformError,
};
