//! Problem instances for pay-per-click auctions with per-ad values and
//! click-through rates, plus the bid/click vector types shared by the
//! simulator, the payment transform, and the verification oracles.
//!
//! Ads are indexed globally `0..m`; each ad names its owning agent. Bids and
//! private values share [`BidVector`]; truth-telling is the special case
//! `bids == values`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// One ad: its owner, the owner's value per click, and the (latent) CTR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdSpec {
    pub owner: usize,
    /// v_j, required to lie in [0, 1].
    pub value_per_click: f64,
    /// mu_j, required to lie in (0, 1]. Unknown to the mechanism; the
    /// simulator draws clicks from it.
    pub ctr: f64,
}

/// Validation failures for [`AdInstance::new`].
#[derive(Clone, Debug, PartialEq)]
pub enum DomainError {
    EmptyInstance,
    ZeroHorizon,
    /// CTR of the named ad is zero (or negative); every oracle here needs
    /// strictly positive CTRs.
    ZeroCtr {
        ad: usize,
    },
    CtrOutOfRange {
        ad: usize,
        ctr: f64,
    },
    ValueOutOfRange {
        ad: usize,
        value: f64,
    },
    /// Ad names an owner outside `0..num_agents`.
    OwnerOutOfRange {
        ad: usize,
        owner: usize,
    },
    /// An agent owns no ads; ownership must cover all agents.
    AgentWithoutAds {
        agent: usize,
    },
    BidOutOfRange {
        ad: usize,
        bid: f64,
    },
    LengthMismatch {
        expected: usize,
        got: usize,
    },
    LambdaOutOfRange {
        agent: usize,
        lambda: f64,
    },
}

impl fmt::Display for DomainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainError::EmptyInstance => write!(f, "instance needs at least one agent and one ad"),
            DomainError::ZeroHorizon => write!(f, "horizon must be at least one round"),
            DomainError::ZeroCtr { ad } => write!(f, "ad {ad} has non-positive ctr"),
            DomainError::CtrOutOfRange { ad, ctr } => {
                write!(f, "ad {ad} has ctr {ctr} outside (0, 1]")
            }
            DomainError::ValueOutOfRange { ad, value } => {
                write!(f, "ad {ad} has value {value} outside [0, 1]")
            }
            DomainError::OwnerOutOfRange { ad, owner } => {
                write!(f, "ad {ad} names owner {owner} outside the agent range")
            }
            DomainError::AgentWithoutAds { agent } => write!(f, "agent {agent} owns no ads"),
            DomainError::BidOutOfRange { ad, bid } => {
                write!(f, "bid {bid} for ad {ad} outside [0, 1]")
            }
            DomainError::LengthMismatch { expected, got } => {
                write!(f, "expected {expected} entries, got {got}")
            }
            DomainError::LambdaOutOfRange { agent, lambda } => {
                write!(f, "rescale coefficient {lambda} for agent {agent} outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for DomainError {}

/// A validated problem instance: n agents, m ads with disjoint ownership,
/// and a horizon of T rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct AdInstance {
    num_agents: usize,
    horizon: usize,
    ads: Vec<AdSpec>,
    ads_by_agent: Vec<Vec<usize>>,
}

impl AdInstance {
    /// Validates and builds an instance. Construction is the only way to
    /// obtain an `AdInstance`, so every instance in circulation satisfies
    /// the type invariants.
    pub fn new(num_agents: usize, horizon: usize, ads: Vec<AdSpec>) -> Result<Self, DomainError> {
        if num_agents == 0 || ads.is_empty() {
            return Err(DomainError::EmptyInstance);
        }
        if horizon == 0 {
            return Err(DomainError::ZeroHorizon);
        }
        let mut ads_by_agent: Vec<Vec<usize>> = vec![Vec::new(); num_agents];
        for (j, ad) in ads.iter().enumerate() {
            if ad.ctr <= 0.0 {
                return Err(DomainError::ZeroCtr { ad: j });
            }
            if ad.ctr > 1.0 || ad.ctr.is_nan() {
                return Err(DomainError::CtrOutOfRange { ad: j, ctr: ad.ctr });
            }
            if !(0.0..=1.0).contains(&ad.value_per_click) {
                return Err(DomainError::ValueOutOfRange {
                    ad: j,
                    value: ad.value_per_click,
                });
            }
            if ad.owner >= num_agents {
                return Err(DomainError::OwnerOutOfRange {
                    ad: j,
                    owner: ad.owner,
                });
            }
            ads_by_agent[ad.owner].push(j);
        }
        for (agent, owned) in ads_by_agent.iter().enumerate() {
            if owned.is_empty() {
                return Err(DomainError::AgentWithoutAds { agent });
            }
        }
        Ok(AdInstance {
            num_agents,
            horizon,
            ads,
            ads_by_agent,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn num_ads(&self) -> usize {
        self.ads.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn ads(&self) -> &[AdSpec] {
        &self.ads
    }

    pub fn owner(&self, ad: usize) -> usize {
        self.ads[ad].owner
    }

    /// Indices of the ads owned by `agent`, in ascending order.
    pub fn agent_ads(&self, agent: usize) -> &[usize] {
        &self.ads_by_agent[agent]
    }

    pub fn ctrs(&self) -> Vec<f64> {
        self.ads.iter().map(|a| a.ctr).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.ads.iter().map(|a| a.value_per_click).collect()
    }

    /// The truthful bid profile: every ad bid at its private value.
    pub fn truthful_bids(&self) -> BidVector {
        BidVector(self.values())
    }

    /// A copy of this instance with a different horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, DomainError> {
        AdInstance::new(self.num_agents, horizon, self.ads.clone())
    }
}

/// Per-ad reported values, each in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct BidVector(Vec<f64>);

impl BidVector {
    pub fn new(bids: Vec<f64>, instance: &AdInstance) -> Result<Self, DomainError> {
        if bids.len() != instance.num_ads() {
            return Err(DomainError::LengthMismatch {
                expected: instance.num_ads(),
                got: bids.len(),
            });
        }
        for (j, &b) in bids.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(DomainError::BidOutOfRange { ad: j, bid: b });
            }
        }
        Ok(BidVector(bids))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, ad: usize) -> f64 {
        self.0[ad]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl core::ops::Deref for BidVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-ad click counts (realized, integer-valued) or expected clicks
/// (fractional). This is the outcome the agents' valuations are linear in.
#[derive(Clone, Debug, PartialEq)]
pub struct ClickVector(Vec<f64>);

impl ClickVector {
    pub fn zero(num_ads: usize) -> Self {
        ClickVector(vec![0.0; num_ads])
    }

    pub fn from_vec(clicks: Vec<f64>) -> Self {
        ClickVector(clicks)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, ad: usize) -> f64 {
        self.0[ad]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total value of these clicks under the given per-ad weights.
    pub fn weighted_total(&self, weights: &[f64]) -> f64 {
        self.0.iter().zip(weights).map(|(c, w)| c * w).sum()
    }
}

impl core::ops::Deref for ClickVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Per-agent rescaling coefficients, each in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct RescaleCoefficients(Vec<f64>);

impl RescaleCoefficients {
    pub fn new(lambda: Vec<f64>, instance: &AdInstance) -> Result<Self, DomainError> {
        if lambda.len() != instance.num_agents() {
            return Err(DomainError::LengthMismatch {
                expected: instance.num_agents(),
                got: lambda.len(),
            });
        }
        for (i, &l) in lambda.iter().enumerate() {
            if !(0.0..=1.0).contains(&l) {
                return Err(DomainError::LambdaOutOfRange {
                    agent: i,
                    lambda: l,
                });
            }
        }
        Ok(RescaleCoefficients(lambda))
    }

    pub fn ones(instance: &AdInstance) -> Self {
        RescaleCoefficients(vec![1.0; instance.num_agents()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, agent: usize) -> f64 {
        self.0[agent]
    }
}

/// An agent's valuation of a click outcome: the dot product of their
/// reported per-click values with the clicks on their own ads.
pub fn agent_value(instance: &AdInstance, bids: &[f64], agent: usize, clicks: &ClickVector) -> f64 {
    instance
        .agent_ads(agent)
        .iter()
        .map(|&j| bids[j] * clicks.get(j))
        .sum()
}

/// Scales each agent's bid block by that agent's coefficient. The output
/// stays inside [0, 1]^m because the bid space is star-shaped at zero.
pub fn rescale_bids(
    bids: &BidVector,
    lambda: &RescaleCoefficients,
    instance: &AdInstance,
) -> BidVector {
    let scaled = bids
        .iter()
        .enumerate()
        .map(|(j, &b)| lambda.get(instance.owner(j)) * b)
        .collect();
    BidVector(scaled)
}
