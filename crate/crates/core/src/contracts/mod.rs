//! Contract state machines hosted on the ledger.
//!
//! * [`registry`]: ride requests, encrypted offers, driver registration,
//!   reputation counters and new-driver bonds (contract `#0`).
//! * [`deposit`]: the time-locked deposit released by a proof of arrival.
//! * [`payment`]: pay-as-you-drive escrow released per co-signed segment.

pub mod deposit;
pub mod payment;
pub mod registry;
pub mod reputation;

use serde::{Deserialize, Serialize};

use crate::ledger::Amount;

pub use deposit::{DepositStatus, DepositTerms, TimeLockedDepositState};
pub use payment::{segment_message, PaymentTerms, RidePaymentState};
pub use registry::{OfferRecord, RegistryConfig, RegistryState, RequestRecord};
pub use reputation::{reputation_score, ClaimRecord, ReputationClass, ReputationRecord, ReputationScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Contract {
    Registry(RegistryState),
    Deposit(TimeLockedDepositState),
    Payment(RidePaymentState),
}

impl Contract {
    pub fn balance(&self) -> Amount {
        match self {
            Contract::Registry(c) => c.balance,
            Contract::Deposit(c) => c.balance,
            Contract::Payment(c) => c.balance,
        }
    }

    pub(crate) fn balance_mut(&mut self) -> &mut Amount {
        match self {
            Contract::Registry(c) => &mut c.balance,
            Contract::Deposit(c) => &mut c.balance,
            Contract::Payment(c) => &mut c.balance,
        }
    }
}
