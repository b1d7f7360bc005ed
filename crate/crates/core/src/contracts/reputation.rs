//! Driver reputation: arrival-proof and completed-trip counters.
//!
//! The score is `β = completions / arrivals`, which lies in `[0, 1]`
//! because a trip can only complete after its arrival proof was accepted.

use serde::{Deserialize, Serialize};

use crate::crypto::PublicKey;
use crate::ledger::{Address, Amount, ContractId};
use crate::trips::Timestamp;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// A claimed deposit whose trip has not (yet) been completed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub contract: ContractId,
    pub rider: Address,
    /// What the rider stands to lose if the driver abandons the trip.
    pub loss: Amount,
    pub claimed_at: Timestamp,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReputationRecord {
    pub identity: String,
    pub public: PublicKey,
    /// β^AP: accepted arrival proofs.
    pub arrivals: u64,
    /// β^AD: completed trips.
    pub completions: u64,
    pub bond: Amount,
    pub claims: Vec<ClaimRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReputationClass {
    Honest,
    Suspect,
    Dishonest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReputationScore {
    pub arrivals: u64,
    pub completions: u64,
    pub ratio: f64,
    pub class: ReputationClass,
    /// No history yet; the score defaults to 1 and the bond is the only
    /// guarantee riders have.
    pub new_driver: bool,
}

pub fn reputation_score(arrivals: u64, completions: u64, threshold: f64) -> ReputationScore {
    let new_driver = arrivals == 0;
    let ratio = if new_driver { 1.0 } else { completions as f64 / arrivals as f64 };
    let class = if completions >= arrivals {
        ReputationClass::Honest
    } else if ratio <= threshold {
        ReputationClass::Dishonest
    } else {
        ReputationClass::Suspect
    };
    ReputationScore { arrivals, completions, ratio, class, new_driver }
}

impl ReputationRecord {
    pub fn score(&self, threshold: f64) -> ReputationScore {
        reputation_score(self.arrivals, self.completions, threshold)
    }
}
