//! The T-round pay-per-click environment.
//!
//! A click realization fixes, for every round and ad, whether that ad would
//! be clicked if shown. A run of an allocation rule only ever observes the
//! cells it actually shows: [`OnlineEnv`] is the sole channel between rule
//! and realization, and reading any other cell fails loudly. Payments and
//! analytics downstream therefore can only depend on information the
//! mechanism really had.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{AdInstance, ClickVector};
use crate::rng::StreamKey;

/// What the mechanism does in one round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RoundAction {
    Skip,
    Show(usize),
}

/// T x m table of would-be clicks; the external seed of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClickRealization {
    horizon: usize,
    num_ads: usize,
    bits: Vec<bool>,
}

impl ClickRealization {
    /// Builds a realization from row-major 0/1 rows (one row per round).
    pub fn from_rows(rows: &[Vec<u8>], num_ads: usize) -> Result<Self, EnvError> {
        let mut bits = Vec::with_capacity(rows.len() * num_ads);
        for row in rows {
            if row.len() != num_ads {
                return Err(EnvError::DimensionMismatch {
                    expected: num_ads,
                    got: row.len(),
                });
            }
            for &cell in row {
                match cell {
                    0 => bits.push(false),
                    1 => bits.push(true),
                    _ => return Err(EnvError::NotBinary { cell }),
                }
            }
        }
        Ok(ClickRealization {
            horizon: rows.len(),
            num_ads,
            bits,
        })
    }

    /// Builds a realization from a predicate over (round, ad).
    pub fn from_fn(horizon: usize, num_ads: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(horizon * num_ads);
        for t in 0..horizon {
            for j in 0..num_ads {
                bits.push(f(t, j));
            }
        }
        ClickRealization {
            horizon,
            num_ads,
            bits,
        }
    }

    /// Decodes the `index`-th of the 2^(T*m) possible tables; bit (t*m + j)
    /// of `index` is cell (t, j). Used by exhaustive enumeration.
    pub fn from_index(horizon: usize, num_ads: usize, index: u64) -> Self {
        Self::from_fn(horizon, num_ads, |t, j| {
            (index >> (t * num_ads + j)) & 1 == 1
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_ads(&self) -> usize {
        self.num_ads
    }

    /// Unrestricted read; only the enumeration and verification oracles use
    /// this. Rules go through [`OnlineEnv`].
    pub fn cell(&self, round: usize, ad: usize) -> bool {
        self.bits[round * self.num_ads + ad]
    }

    /// Row-major 0/1 rows, the regression-fixture wire format.
    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.horizon)
            .map(|t| (0..self.num_ads).map(|j| self.cell(t, j) as u8).collect())
            .collect()
    }
}

/// Independent Bernoulli(ctr_j) draws for every cell, deterministic in the
/// stream key.
pub fn sample_realization(instance: &AdInstance, key: StreamKey) -> ClickRealization {
    let mut rng = key.rng();
    let ctrs = instance.ctrs();
    ClickRealization::from_fn(instance.horizon(), instance.num_ads(), |_, j| {
        rng.random::<f64>() < ctrs[j]
    })
}

/// Environment and rule failures during a run.
#[derive(Clone, Debug, PartialEq)]
pub enum EnvError {
    /// A rule asked for a click bit it never observed.
    ContractViolation { round: usize, ad: usize },
    AdOutOfRange { ad: usize },
    /// More actions than rounds.
    HorizonExhausted,
    /// Asked about a round that has not happened yet.
    RoundNotReached { round: usize },
    DimensionMismatch { expected: usize, got: usize },
    NotBinary { cell: u8 },
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::ContractViolation { round, ad } => write!(
                f,
                "no-simulation contract violation: ad {ad} was not shown in round {round}"
            ),
            EnvError::AdOutOfRange { ad } => write!(f, "ad index {ad} out of range"),
            EnvError::HorizonExhausted => write!(f, "all rounds already played"),
            EnvError::RoundNotReached { round } => write!(f, "round {round} not reached yet"),
            EnvError::DimensionMismatch { expected, got } => {
                write!(f, "expected {expected} columns, got {got}")
            }
            EnvError::NotBinary { cell } => write!(f, "realization cell {cell} is not 0/1"),
        }
    }
}

impl core::error::Error for EnvError {}

/// Errors from driving a rule through a full run.
#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Env(EnvError),
    /// Rule returned before acting in every round.
    IncompleteRun { acted: usize, horizon: usize },
    /// Bid vector does not match the environment's ad count.
    BidLengthMismatch { expected: usize, got: usize },
    /// A rule that requires bids in [0, 1] saw one outside.
    BidOutOfRange { ad: usize, bid: f64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Env(e) => write!(f, "{e}"),
            SimError::IncompleteRun { acted, horizon } => {
                write!(f, "rule stopped after {acted} of {horizon} rounds")
            }
            SimError::BidLengthMismatch { expected, got } => {
                write!(f, "bid vector has {got} entries, environment has {expected} ads")
            }
            SimError::BidOutOfRange { ad, bid } => {
                write!(f, "rule requires bids in [0, 1]; ad {ad} bid {bid}")
            }
        }
    }
}

impl core::error::Error for SimError {}

impl From<EnvError> for SimError {
    fn from(e: EnvError) -> Self {
        SimError::Env(e)
    }
}

/// Single-run view of a realization. A rule may act once per round and may
/// re-read only the cells it observed through its own shows.
pub struct OnlineEnv<'a> {
    realization: &'a ClickRealization,
    actions: Vec<RoundAction>,
    observations: Vec<Option<bool>>,
}

impl<'a> OnlineEnv<'a> {
    pub fn new(realization: &'a ClickRealization) -> Self {
        OnlineEnv {
            realization,
            actions: Vec::with_capacity(realization.horizon()),
            observations: Vec::with_capacity(realization.horizon()),
        }
    }

    pub fn horizon(&self) -> usize {
        self.realization.horizon()
    }

    pub fn num_ads(&self) -> usize {
        self.realization.num_ads()
    }

    /// Rounds played so far; also the index of the round about to be played.
    pub fn round(&self) -> usize {
        self.actions.len()
    }

    pub fn finished(&self) -> bool {
        self.round() == self.horizon()
    }

    /// Plays one round. Returns `Some(clicked)` for a shown ad, `None` for a
    /// skip (a skipped round reveals nothing).
    pub fn act(&mut self, action: RoundAction) -> Result<Option<bool>, EnvError> {
        if self.finished() {
            return Err(EnvError::HorizonExhausted);
        }
        let obs = match action {
            RoundAction::Skip => None,
            RoundAction::Show(ad) => {
                if ad >= self.num_ads() {
                    return Err(EnvError::AdOutOfRange { ad });
                }
                Some(self.realization.cell(self.round(), ad))
            }
        };
        self.actions.push(action);
        self.observations.push(obs);
        Ok(obs)
    }

    /// Re-reads the click bit for (round, ad). Succeeds only if that exact
    /// ad was shown in that round; anything else is a contract violation.
    pub fn observed_click(&self, round: usize, ad: usize) -> Result<bool, EnvError> {
        if round >= self.round() {
            return Err(EnvError::RoundNotReached { round });
        }
        match self.actions[round] {
            RoundAction::Show(shown) if shown == ad => {
                Ok(self.observations[round].expect("shown rounds record a click bit"))
            }
            _ => Err(EnvError::ContractViolation { round, ad }),
        }
    }

    fn into_record(self, rule_stream: StreamKey) -> RunRecord {
        let m = self.num_ads();
        let mut observed_clicks = vec![0u32; m];
        let mut realized = vec![0.0f64; m];
        for (action, obs) in self.actions.iter().zip(&self.observations) {
            if let (RoundAction::Show(ad), Some(true)) = (action, obs) {
                observed_clicks[*ad] += 1;
                realized[*ad] += 1.0;
            }
        }
        RunRecord {
            actions: self.actions,
            observed_clicks,
            realized_clicks: ClickVector::from_vec(realized),
            rule_stream,
        }
    }
}

/// Trace of one mechanism run: the per-round actions, the clicks observed,
/// and the stream key that reproduces the rule's randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub actions: Vec<RoundAction>,
    pub observed_clicks: Vec<u32>,
    pub realized_clicks: ClickVector,
    pub rule_stream: StreamKey,
}

impl RunRecord {
    pub fn shows_of(&self, ad: usize) -> usize {
        self.actions
            .iter()
            .filter(|a| matches!(a, RoundAction::Show(j) if *j == ad))
            .count()
    }

    pub fn skips(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| matches!(a, RoundAction::Skip))
            .count()
    }
}

/// A streaming allocation rule: drives the environment round by round,
/// seeing only its own observations.
pub trait AllocationRule {
    fn run(
        &self,
        bids: &[f64],
        env: &mut OnlineEnv<'_>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError>;
}

/// Runs `rule` once against a fixed realization, enforcing the
/// no-simulation contract, and returns the trace.
pub fn simulate(
    rule: &dyn AllocationRule,
    bids: &[f64],
    realization: &ClickRealization,
    rule_stream: StreamKey,
) -> Result<RunRecord, SimError> {
    if bids.len() != realization.num_ads() {
        return Err(SimError::BidLengthMismatch {
            expected: realization.num_ads(),
            got: bids.len(),
        });
    }
    let mut env = OnlineEnv::new(realization);
    let mut rng = rule_stream.rng();
    rule.run(bids, &mut env, &mut rng)?;
    if !env.finished() {
        return Err(SimError::IncompleteRun {
            acted: env.round(),
            horizon: env.horizon(),
        });
    }
    Ok(env.into_record(rule_stream))
}
