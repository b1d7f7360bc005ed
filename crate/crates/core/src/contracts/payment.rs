//! Pay-as-you-drive escrow.
//!
//! The rider locks `distance · rate − credit`, where `credit` is the part
//! of the fare already paid through a claimed time-locked deposit. Each
//! segment co-signed by rider and driver releases the escrow share for the
//! cumulative distance, rounded down, so the rounding remainder lands on
//! the final segment.

use serde::{Deserialize, Serialize};

use crate::contracts::{Contract, DepositStatus};
use crate::crypto::{AttestationSignature, PublicKey};
use crate::ledger::{derive_address, revert, Address, Amount, ContractId, Event, Exec, LedgerError, REGISTRY};
use crate::trips::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentTerms {
    pub driver_key: PublicKey,
    /// Agreed trip distance in distance units.
    pub distance: u64,
    /// Price per distance unit, normally the accepted bid.
    pub rate: Amount,
    /// Down payment already received by the driver.
    pub credit: Amount,
    pub expiration: Timestamp,
    /// Deposit contract of the same trip, if any.
    pub deposit: Option<ContractId>,
}

impl PaymentTerms {
    pub fn gross(&self) -> Option<Amount> {
        self.distance.checked_mul(self.rate)
    }

    /// Amount the rider must attach when opening the contract.
    pub fn escrow(&self) -> Option<Amount> {
        self.gross()?.checked_sub(self.credit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RidePaymentState {
    pub rider: Address,
    pub rider_key: PublicKey,
    pub driver: Address,
    pub terms: PaymentTerms,
    pub escrow: Amount,
    pub remaining: u64,
    pub paid: Amount,
    pub refunded: Amount,
    pub balance: Amount,
    pub last_segment: Option<u64>,
    pub completed: bool,
}

impl RidePaymentState {
    /// Escrow owed to the driver after `travelled` units in total.
    pub fn due_after(&self, travelled: u64) -> Amount {
        (self.escrow as u128 * travelled as u128 / self.terms.distance as u128) as Amount
    }
}

/// Message both parties sign for one segment.
pub fn segment_message(contract: ContractId, segment: u64, elapsed: u64) -> Vec<u8> {
    let mut msg = b"RIDESHARE-V1/segment".to_vec();
    msg.extend(contract.0.to_be_bytes());
    msg.extend(segment.to_be_bytes());
    msg.extend(elapsed.to_be_bytes());
    msg
}

fn state<'a>(exec: &'a mut Exec, id: ContractId) -> Result<&'a mut RidePaymentState, LedgerError> {
    match exec.contract(id)? {
        Contract::Payment(p) => Ok(p),
        _ => revert("not a ride payment contract"),
    }
}

pub(crate) fn open(exec: &mut Exec, terms: &PaymentTerms) -> Result<ContractId, LedgerError> {
    let (now, value, rider, rider_key) = (exec.now(), exec.value, exec.sender, exec.sender_key);
    if terms.distance == 0 {
        return revert("trip distance must be positive");
    }
    let Some(gross) = terms.gross() else {
        return revert("fare overflows");
    };
    let Some(escrow) = terms.escrow() else {
        return revert("credit exceeds the fare");
    };
    if value != escrow {
        return revert(format!("escrow must be exactly {escrow} (fare {gross} minus credit {})", terms.credit));
    }
    if terms.expiration <= now {
        return revert("expiration already passed");
    }
    let driver = derive_address(&terms.driver_key);
    match terms.deposit {
        None if terms.credit > 0 => return revert("credit requires a linked deposit"),
        None => {}
        Some(dep) => match exec.contract(dep)? {
            Contract::Deposit(d) => {
                if d.rider != rider || d.terms.driver != driver {
                    return revert("linked deposit belongs to another trip");
                }
                if d.status != DepositStatus::Claimed {
                    return revert("linked deposit has not been claimed");
                }
                if terms.credit > d.rider_deposit {
                    return revert("credit exceeds the rider deposit");
                }
            }
            _ => return revert("linked contract is not a deposit"),
        },
    }
    let id = exec.deploy(Contract::Payment(RidePaymentState {
        rider,
        rider_key,
        driver,
        terms: terms.clone(),
        escrow,
        remaining: terms.distance,
        paid: 0,
        refunded: 0,
        balance: value,
        last_segment: None,
        completed: false,
    }));
    exec.emit(
        Some(id),
        Event::PaymentOpened {
            rider,
            driver,
            distance: terms.distance,
            rate: terms.rate,
            credit: terms.credit,
            escrow,
            expiration: terms.expiration,
            deposit: terms.deposit,
        },
    );
    Ok(id)
}

pub(crate) fn proof_of_distance(
    exec: &mut Exec,
    id: ContractId,
    segment: u64,
    elapsed: u64,
    rider_sig: &AttestationSignature,
    driver_sig: &AttestationSignature,
) -> Result<(), LedgerError> {
    exec.require_no_value()?;
    let (ctx, now, sender) = (exec.ctx, exec.now(), exec.sender);
    let p = state(exec, id)?;
    if sender != p.rider {
        return revert("only the rider may submit distance proofs");
    }
    if now >= p.terms.expiration {
        return revert("payment contract expired");
    }
    if p.completed {
        return revert("trip already completed");
    }
    if p.last_segment.is_some_and(|last| segment <= last) {
        return revert("segment index must increase");
    }
    if elapsed == 0 || elapsed > p.remaining {
        return revert("elapsed distance out of range");
    }
    let msg = segment_message(id, segment, elapsed);
    if !p.rider_key.verify(ctx, &msg, rider_sig) || !p.terms.driver_key.verify(ctx, &msg, driver_sig) {
        return revert("segment must be signed by both rider and driver");
    }
    let travelled = p.terms.distance - p.remaining + elapsed;
    let amount = p.due_after(travelled) - p.paid;
    p.remaining -= elapsed;
    p.paid += amount;
    p.last_segment = Some(segment);
    let (driver, remaining, total_paid, deposit) = (p.driver, p.remaining, p.paid, p.terms.deposit);
    if remaining == 0 {
        p.completed = true;
    }
    exec.pay_out(id, driver, amount)?;
    exec.emit(Some(id), Event::SegmentPaid { driver, segment, elapsed, amount, remaining });
    if let Some(dep) = deposit {
        resolve_claim(exec, dep, driver);
    }
    if remaining == 0 {
        exec.emit(Some(id), Event::TripCompleted { driver, total_paid });
        if let Some(dep) = deposit {
            record_completion(exec, dep, driver)?;
        }
    }
    Ok(())
}

/// Credits a completed trip to the driver, once per claimed deposit.
fn record_completion(exec: &mut Exec, dep: ContractId, driver: Address) -> Result<(), LedgerError> {
    let Contract::Deposit(d) = exec.contract(dep)? else {
        return Ok(());
    };
    if d.status != DepositStatus::Claimed || d.terms.driver != driver || d.trip_completed {
        return Ok(());
    }
    d.trip_completed = true;
    let Some(record) = exec.registry().drivers.get_mut(&driver) else {
        return Ok(());
    };
    record.completions += 1;
    let (arrivals, completions) = (record.arrivals, record.completions);
    exec.emit(Some(REGISTRY), Event::ReputationUpdated { driver, arrivals, completions });
    Ok(())
}

/// A co-signed segment shows the ride started, so the claim on the linked
/// deposit no longer counts as a lost deposit for slashing.
fn resolve_claim(exec: &mut Exec, dep: ContractId, driver: Address) {
    if let Some(record) = exec.registry().drivers.get_mut(&driver) {
        if let Some(claim) = record.claims.iter_mut().find(|c| c.contract == dep) {
            claim.resolved = true;
        }
    }
}

pub(crate) fn withdraw_funds(exec: &mut Exec, id: ContractId) -> Result<(), LedgerError> {
    exec.require_no_value()?;
    let (now, sender) = (exec.now(), exec.sender);
    let p = state(exec, id)?;
    if sender != p.rider {
        return revert("only the rider may withdraw");
    }
    if now < p.terms.expiration {
        return revert("payment contract has not expired");
    }
    if p.balance == 0 {
        return revert("nothing left in escrow");
    }
    let amount = p.balance;
    p.refunded += amount;
    exec.pay_out(id, sender, amount)?;
    exec.emit(Some(id), Event::Refunded { rider: sender, amount });
    Ok(())
}
