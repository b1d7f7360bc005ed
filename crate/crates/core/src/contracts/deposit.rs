//! Time-locked deposit: the rider's deposit doubles as acceptance of an
//! offer, the driver matches it, and the whole balance goes either to the
//! driver (valid proof of arrival inside the pick-up window) or back to
//! the rider (after expiration).

use serde::{Deserialize, Serialize};

use super::reputation::ClaimRecord;
use crate::crypto::PublicKey;
use crate::ledger::{revert, Address, Amount, ContractId, Event, Exec, LedgerError, REGISTRY};
use crate::contracts::Contract;
use crate::trips::{TimeWindow, Timestamp};
use crate::zksm::{zksm_verify, LpAttestation, MembershipProof, ZkSetup};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositTerms {
    pub driver: Address,
    pub driver_deposit: Amount,
    pub setup: ZkSetup,
    /// The driver deposit must arrive strictly before this time.
    pub accept_deadline: Timestamp,
    pub pickup_window: TimeWindow,
    /// From this time on the rider may take the balance back.
    pub expiration: Timestamp,
    pub request_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepositStatus {
    AwaitingDriverDeposit,
    Armed,
    Claimed,
    Fined,
    Expired,
}

impl DepositStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, DepositStatus::Claimed | DepositStatus::Fined | DepositStatus::Expired)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeLockedDepositState {
    pub rider: Address,
    pub rider_key: PublicKey,
    pub rider_deposit: Amount,
    pub terms: DepositTerms,
    pub balance: Amount,
    pub status: DepositStatus,
    pub claimed_at: Option<Timestamp>,
    /// Set once a linked payment contract completes, so the completion
    /// counts towards reputation only once.
    pub trip_completed: bool,
}

fn state<'a>(exec: &'a mut Exec, id: ContractId) -> Result<&'a mut TimeLockedDepositState, LedgerError> {
    match exec.contract(id)? {
        Contract::Deposit(d) => Ok(d),
        _ => revert("not a time-locked deposit contract"),
    }
}

pub(crate) fn open(exec: &mut Exec, terms: &DepositTerms) -> Result<ContractId, LedgerError> {
    let (now, value) = (exec.now(), exec.value);
    if value == 0 {
        return revert("rider deposit must be positive");
    }
    if !exec.registry().drivers.contains_key(&terms.driver) {
        return revert("driver is not registered");
    }
    if terms.setup.k() < 2 {
        return revert("membership set too small");
    }
    if terms.accept_deadline <= now {
        return revert("accept deadline already passed");
    }
    if terms.pickup_window.is_empty() {
        return revert("empty pick-up window");
    }
    if terms.expiration < terms.pickup_window.end {
        return revert("expiration precedes the end of the pick-up window");
    }
    let (rider, rider_key) = (exec.sender, exec.sender_key);
    let id = exec.deploy(Contract::Deposit(TimeLockedDepositState {
        rider,
        rider_key,
        rider_deposit: value,
        terms: terms.clone(),
        balance: value,
        status: DepositStatus::AwaitingDriverDeposit,
        claimed_at: None,
        trip_completed: false,
    }));
    exec.emit(
        Some(id),
        Event::DepositOpened {
            rider,
            driver: terms.driver,
            rider_deposit: value,
            driver_deposit: terms.driver_deposit,
            y: terms.setup.y,
            set_size: terms.setup.k(),
            accept_deadline: terms.accept_deadline,
            pickup_window: terms.pickup_window,
            expiration: terms.expiration,
        },
    );
    Ok(id)
}

pub(crate) fn driver_deposit(exec: &mut Exec, id: ContractId) -> Result<(), LedgerError> {
    let (now, sender, value) = (exec.now(), exec.sender, exec.value);
    let d = state(exec, id)?;
    if sender != d.terms.driver {
        return revert("only the selected driver may deposit");
    }
    if d.status != DepositStatus::AwaitingDriverDeposit {
        return revert("deposit is not awaiting the driver");
    }
    if now >= d.terms.accept_deadline {
        return revert("accept deadline passed");
    }
    if value != d.terms.driver_deposit {
        return revert(format!("driver deposit must be exactly {}", d.terms.driver_deposit));
    }
    d.balance += value;
    d.status = DepositStatus::Armed;
    exec.emit(Some(id), Event::DepositArmed { driver: sender, amount: value });
    Ok(())
}

pub(crate) fn proof_of_arrival(
    exec: &mut Exec,
    id: ContractId,
    proof: &MembershipProof,
    attestation: &LpAttestation,
) -> Result<(), LedgerError> {
    exec.require_no_value()?;
    let (ctx, now, sender) = (exec.ctx, exec.now(), exec.sender);
    if !exec.registry().is_location_prover(&attestation.prover) {
        return revert("attestation is not from a registered location prover");
    }
    let d = state(exec, id)?;
    if sender != d.terms.driver {
        return revert("only the selected driver may claim");
    }
    if d.status != DepositStatus::Armed {
        return revert("deposit is not armed");
    }
    if !d.terms.pickup_window.contains(now) {
        return revert("outside the pick-up window");
    }
    if attestation.commitment != proof.commitment {
        return revert("attestation is for a different commitment");
    }
    if !attestation.verify(ctx) {
        return revert("invalid location prover signature");
    }
    if !zksm_verify(ctx, d.terms.setup.y, proof) {
        return revert("invalid membership proof");
    }
    let amount = d.balance;
    let (rider, loss) = (d.rider, d.rider_deposit);
    d.status = DepositStatus::Claimed;
    d.claimed_at = Some(now);
    exec.pay_out(id, sender, amount)?;
    exec.emit(
        Some(id),
        Event::ArrivalClaimed { driver: sender, amount, proof: *proof, attestation: attestation.clone() },
    );
    let record = exec
        .registry()
        .drivers
        .get_mut(&sender)
        .expect("deposit contracts are only opened for registered drivers");
    record.arrivals += 1;
    record.claims.push(ClaimRecord { contract: id, rider, loss, claimed_at: now, resolved: false });
    let (arrivals, completions) = (record.arrivals, record.completions);
    exec.emit(Some(REGISTRY), Event::ReputationUpdated { driver: sender, arrivals, completions });
    Ok(())
}

pub(crate) fn fine_driver(exec: &mut Exec, id: ContractId) -> Result<(), LedgerError> {
    exec.require_no_value()?;
    let (now, sender) = (exec.now(), exec.sender);
    let d = state(exec, id)?;
    if sender != d.rider {
        return revert("only the rider may reclaim the deposit");
    }
    if now < d.terms.expiration {
        return revert("deposit has not expired");
    }
    let amount = d.balance;
    let event = match d.status {
        DepositStatus::Armed => {
            d.status = DepositStatus::Fined;
            Event::DriverFined { rider: sender, amount }
        }
        DepositStatus::AwaitingDriverDeposit => {
            d.status = DepositStatus::Expired;
            Event::DepositExpired { rider: sender, amount }
        }
        _ => return revert("deposit already settled"),
    };
    exec.pay_out(id, sender, amount)?;
    exec.emit(Some(id), event);
    Ok(())
}
