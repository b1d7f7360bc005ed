//! Bidding and driver registry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::reputation::{ClaimRecord, ReputationClass, ReputationRecord, DEFAULT_THRESHOLD};
use crate::crypto::{Certificate, PublicKey};
use crate::ledger::{revert, Address, Amount, Event, Exec, LedgerError, REGISTRY};
use crate::trips::{Grid, RideRequest, Timestamp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryConfig {
    /// Registration authority key that signs driver certificates.
    pub authority: PublicKey,
    /// Keys of the location provers whose attestations are accepted.
    pub location_provers: Vec<PublicKey>,
    /// Bond every newly registered driver must lock.
    pub bond: Amount,
    /// Reputation threshold `T`.
    pub threshold: f64,
    /// How long after a claim a missing trip completion counts as a loss.
    pub claim_timeout: u64,
    /// When set, request cells must belong to this grid.
    pub grid: Option<Grid>,
}

impl RegistryConfig {
    pub fn new(authority: PublicKey) -> Self {
        Self {
            authority,
            location_provers: Vec::new(),
            bond: 0,
            threshold: DEFAULT_THRESHOLD,
            claim_timeout: 3_600,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfferRecord {
    pub driver: Address,
    #[serde(with = "crate::crypto::ser::hex_bytes")]
    pub ciphertext: Vec<u8>,
    /// Public so drivers compete on price.
    pub bid: Amount,
    pub submitted_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub requester: Address,
    /// Offers are encrypted to this key.
    pub requester_key: PublicKey,
    pub request: RideRequest,
    pub offers: Vec<OfferRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryState {
    pub config: RegistryConfig,
    pub balance: Amount,
    pub requests: BTreeMap<u64, RequestRecord>,
    pub next_request: u64,
    pub drivers: BTreeMap<Address, ReputationRecord>,
}

impl RegistryState {
    pub fn new(config: RegistryConfig) -> Self {
        Self { config, balance: 0, requests: BTreeMap::new(), next_request: 0, drivers: BTreeMap::new() }
    }

    pub fn is_location_prover(&self, key: &PublicKey) -> bool {
        self.config.location_provers.contains(key)
    }

    pub fn driver(&self, addr: &Address) -> Option<&ReputationRecord> {
        self.drivers.get(addr)
    }
}

pub(crate) fn register_driver(exec: &mut Exec, certificate: &Certificate) -> Result<(), LedgerError> {
    let (ctx, sender, key, value) = (exec.ctx, exec.sender, exec.sender_key, exec.value);
    let reg = exec.registry();
    if certificate.public != key {
        return revert("certificate is for a different key");
    }
    if !certificate.verify(ctx, &reg.config.authority) {
        return revert("certificate not signed by the registration authority");
    }
    if reg.drivers.contains_key(&sender) {
        return revert("driver already registered");
    }
    if value != reg.config.bond {
        return revert(format!("bond must be exactly {}", reg.config.bond));
    }
    reg.balance += value;
    reg.drivers.insert(
        sender,
        ReputationRecord {
            identity: certificate.identity.clone(),
            public: key,
            arrivals: 0,
            completions: 0,
            bond: value,
            claims: Vec::new(),
        },
    );
    let identity = certificate.identity.clone();
    exec.emit(Some(REGISTRY), Event::DriverRegistered { driver: sender, identity, bond: value });
    Ok(())
}

pub(crate) fn make_ride_request(exec: &mut Exec, request: &RideRequest) -> Result<u64, LedgerError> {
    exec.require_no_value()?;
    let (now, sender, key) = (exec.now(), exec.sender, exec.sender_key);
    let reg = exec.registry();
    if request.deadline < now {
        return revert("offer deadline already passed");
    }
    if request.window.is_empty() {
        return revert("empty pick-up window");
    }
    if request.max_offers == Some(0) {
        return revert("max offers must be positive");
    }
    if let Some(grid) = &reg.config.grid {
        for cell in [request.origin, request.destination] {
            if grid.cell_by_id(cell.id) != Some(cell) {
                return revert("cell is not part of the grid");
            }
        }
    }
    let id = reg.next_request;
    reg.next_request += 1;
    reg.requests.insert(id, RequestRecord { requester: sender, requester_key: key, request: *request, offers: Vec::new() });
    exec.emit(
        Some(REGISTRY),
        Event::RequestPublished {
            request_id: id,
            requester: sender,
            origin: request.origin,
            window: request.window,
            destination: request.destination,
            deadline: request.deadline,
            max_offers: request.max_offers,
        },
    );
    Ok(id)
}

pub(crate) fn make_ride_offer(
    exec: &mut Exec,
    request_id: u64,
    ciphertext: &[u8],
    bid: Amount,
) -> Result<usize, LedgerError> {
    exec.require_no_value()?;
    let (now, sender) = (exec.now(), exec.sender);
    let reg = exec.registry();
    if !reg.drivers.contains_key(&sender) {
        return revert("only registered drivers may bid");
    }
    let Some(record) = reg.requests.get_mut(&request_id) else {
        return revert("unknown request");
    };
    if now > record.request.deadline {
        return revert("offer deadline passed");
    }
    if let Some(max) = record.request.max_offers {
        if record.offers.len() >= max as usize {
            return revert("request already has the maximum number of offers");
        }
    }
    if ciphertext.is_empty() {
        return revert("empty offer ciphertext");
    }
    let index = record.offers.len();
    record.offers.push(OfferRecord { driver: sender, ciphertext: ciphertext.to_vec(), bid, submitted_at: now });
    exec.emit(Some(REGISTRY), Event::OfferSubmitted { request_id, offer_index: index, driver: sender, bid });
    Ok(index)
}

/// Splits `bond` over `losses`: in full when it covers them, otherwise
/// pro rata with the rounding remainder going to the last claim.
pub fn slash_shares(bond: Amount, losses: &[Amount]) -> Vec<Amount> {
    let total: u128 = losses.iter().map(|&l| l as u128).sum();
    if total <= bond as u128 {
        return losses.to_vec();
    }
    let mut shares: Vec<Amount> =
        losses.iter().map(|&l| (bond as u128 * l as u128 / total) as Amount).collect();
    let assigned: Amount = shares.iter().sum();
    if let Some(last) = shares.last_mut() {
        *last += bond - assigned;
    }
    shares
}

/// Compensates riders whose claimed deposits never led to a completed
/// trip, out of a driver's bond. Only allowed once the driver is
/// classified dishonest.
pub(crate) fn report_driver(exec: &mut Exec, driver: Address) -> Result<(), LedgerError> {
    exec.require_no_value()?;
    let now = exec.now();
    let reg = exec.registry();
    let (threshold, timeout) = (reg.config.threshold, reg.config.claim_timeout);
    let Some(record) = reg.drivers.get_mut(&driver) else {
        return revert("unknown driver");
    };
    if record.score(threshold).class != ReputationClass::Dishonest {
        return revert("driver is not classified dishonest");
    }
    if record.bond == 0 {
        return revert("driver bond already exhausted");
    }
    let due: Vec<&mut ClaimRecord> = record
        .claims
        .iter_mut()
        .filter(|c| !c.resolved && c.claimed_at.saturating_add(timeout) <= now)
        .collect();
    if due.is_empty() {
        return revert("no overdue abandoned claims");
    }
    let losses: Vec<Amount> = due.iter().map(|c| c.loss).collect();
    let shares = slash_shares(record.bond, &losses);
    let mut payouts = Vec::with_capacity(due.len());
    for (claim, share) in due.into_iter().zip(shares) {
        claim.resolved = true;
        payouts.push((claim.rider, share));
    }
    let paid: Amount = payouts.iter().map(|(_, a)| a).sum();
    record.bond -= paid;
    let remaining_bond = record.bond;
    for &(rider, amount) in &payouts {
        exec.pay_out(REGISTRY, rider, amount)?;
    }
    exec.emit(Some(REGISTRY), Event::BondSlashed { driver, payouts, remaining_bond });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slash_covers_losses_in_full() {
        assert_eq!(slash_shares(100, &[30, 40]), vec![30, 40]);
    }

    #[test]
    fn slash_pro_rata_with_remainder_last() {
        let shares = slash_shares(100, &[50, 50, 50]);
        assert_eq!(shares, vec![33, 33, 34]);
        assert_eq!(shares.iter().sum::<u64>(), 100);
        let shares = slash_shares(10, &[1, 2, 3, 4, 5]);
        assert_eq!(shares.iter().sum::<u64>(), 10);
        // floor(10*k/15) for the first four
        assert_eq!(&shares[..4], &[0, 1, 2, 2]);
    }
}
