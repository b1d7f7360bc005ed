//! Run reports, the ledger privacy scan and offline trace verification.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::ReputationClass;
use crate::crypto::PairingContext;
use crate::ledger::{Address, Amount, ContractId, Event, EventRecord};
use crate::trips::GeoPoint;
use crate::zksm::zksm_verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripOutcome {
    /// The request could not be published.
    NotPublished,
    NoOffers,
    NoFeasibleOffer,
    /// Rider picked an offer but never committed funds.
    ReservationAbandoned,
    /// Driver refused a setup that failed the audit; rider got the deposit back.
    RiggedSetupRefused,
    /// Driver never matched the deposit; rider got it back.
    ExpiredRecovered,
    /// Driver never proved arrival; rider took both deposits.
    FinedRecovered,
    /// Driver took the deposit and the ride never started.
    ClaimedAbandoned,
    /// Ride started but stopped before the destination.
    PartiallyPaid,
    Completed,
    /// Still open when the simulation ended.
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRow {
    pub rider: String,
    pub trip: usize,
    pub request_address: Address,
    pub request_id: Option<u64>,
    pub offers_received: usize,
    pub driver: Option<String>,
    pub bid: Option<Amount>,
    pub deposit_contract: Option<ContractId>,
    pub payment_contract: Option<ContractId>,
    pub distance_units: Option<u64>,
    pub segments_paid: u64,
    pub outcome: TripOutcome,
    /// Budget minus final balance of the request address.
    pub net_spent: i128,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceRow {
    pub label: String,
    pub balance: Amount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationRow {
    pub driver: String,
    pub address: Address,
    pub profile: crate::agents::DriverProfile,
    pub registered: bool,
    pub arrivals: u64,
    pub completions: u64,
    pub ratio: f64,
    pub class: ReputationClass,
    pub new_driver: bool,
    pub bond: Amount,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunStats {
    pub transactions_applied: u64,
    pub transactions_reverted: u64,
    pub events: u64,
    pub proofs_generated: u64,
    pub proofs_accepted: u64,
    pub proof_size_bytes: usize,
    pub genesis_supply: u128,
    pub final_supply: u128,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyReport {
    /// Ledger values that match a rider's exact coordinate.
    pub coordinate_leaks: Vec<String>,
    /// Request addresses shared between two trips.
    pub linked_requests: Vec<String>,
}

impl PrivacyReport {
    pub fn violations(&self) -> usize {
        self.coordinate_leaks.len() + self.linked_requests.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub seed: u64,
    pub trips: Vec<TripRow>,
    pub balances: Vec<BalanceRow>,
    pub reputation: Vec<ReputationRow>,
    pub stats: RunStats,
    pub privacy: PrivacyReport,
}

impl RunReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn balance_total(&self) -> u128 {
        self.balances.iter().map(|r| r.balance as u128).sum()
    }
}

/// Walks a JSON document and reports every non-integer number that equals
/// one of `coords` once both are rounded to 3 decimals (about 100 m).
pub fn scan_coordinates(doc: &serde_json::Value, coords: &[(String, GeoPoint)]) -> Vec<String> {
    let mut targets = Vec::new();
    for (label, p) in coords {
        targets.push((format!("{label} latitude"), p.lat));
        targets.push((format!("{label} longitude"), p.lon));
    }
    let mut hits = Vec::new();
    walk(doc, "$", &targets, &mut hits);
    hits
}

fn walk(v: &serde_json::Value, path: &str, targets: &[(String, f64)], hits: &mut Vec<String>) {
    use serde_json::Value;
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap_or(0.0);
                for (label, t) in targets {
                    if x.fract() != 0.0 && (x * 1e3).round() == (t * 1e3).round() {
                        hits.push(format!("{path} = {x} matches {label}"));
                    }
                }
            }
        }
        Value::String(s) => {
            if let Ok(x) = s.parse::<f64>() {
                if s.contains('.') {
                    walk(&serde_json::json!(x), path, targets, hits);
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                walk(item, &format!("{path}[{i}]"), targets, hits);
            }
        }
        Value::Object(map) => {
            for (k, item) in map {
                walk(item, &format!("{path}.{k}"), targets, hits);
            }
        }
        Value::Null | Value::Bool(_) => {}
    }
}

/// Reports addresses used for more than one request.
pub fn linked_requests(requests: &[(String, Address)]) -> Vec<String> {
    let mut seen: BTreeMap<Address, &str> = BTreeMap::new();
    let mut out = Vec::new();
    for (label, addr) in requests {
        if let Some(prev) = seen.insert(*addr, label) {
            out.push(format!("{prev} and {label} share {addr}"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed trace at event {seq}: {message}")]
    Malformed { seq: u64, message: String },
    #[error("conservation violated at event {seq}: {message}")]
    Conservation { seq: u64, message: String },
    #[error("claim-or-fine exclusivity violated at event {seq}: {message}")]
    Exclusivity { seq: u64, message: String },
    #[error("invalid arrival proof at event {seq}: {message}")]
    Proof { seq: u64, message: String },
    #[error("conservation violated: final snapshot disagrees with replayed balances: {0}")]
    SnapshotMismatch(String),
    #[error("conservation violated: genesis supply {genesis}, replayed {replayed}")]
    NotConserved { genesis: u128, replayed: u128 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub events: usize,
    pub genesis_supply: u128,
    pub proofs_checked: usize,
    pub deposits_settled: usize,
    pub has_snapshot: bool,
}

pub fn parse_trace(text: &str) -> Result<Vec<EventRecord>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn trace_to_jsonl(events: &[EventRecord]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events always serialize"));
        out.push('\n');
    }
    out
}

#[derive(Default)]
struct Replay {
    accounts: BTreeMap<Address, Amount>,
    contracts: BTreeMap<ContractId, Amount>,
}

impl Replay {
    fn debit(&mut self, seq: u64, addr: Address, amount: Amount) -> Result<(), TraceError> {
        let b = self.accounts.entry(addr).or_insert(0);
        *b = b.checked_sub(amount).ok_or_else(|| TraceError::Conservation {
            seq,
            message: format!("{addr} spends {amount} it does not have"),
        })?;
        Ok(())
    }

    fn credit(&mut self, addr: Address, amount: Amount) {
        *self.accounts.entry(addr).or_insert(0) += amount;
    }

    fn into_contract(&mut self, seq: u64, from: Address, id: ContractId, amount: Amount) -> Result<(), TraceError> {
        self.debit(seq, from, amount)?;
        *self.contracts.entry(id).or_insert(0) += amount;
        Ok(())
    }

    fn out_of_contract(&mut self, seq: u64, id: ContractId, to: Address, amount: Amount) -> Result<(), TraceError> {
        let b = self.contracts.entry(id).or_insert(0);
        *b = b.checked_sub(amount).ok_or_else(|| TraceError::Conservation {
            seq,
            message: format!("contract {} pays {amount} it does not hold", id.0),
        })?;
        self.credit(to, amount);
        Ok(())
    }

    fn total(&self) -> u128 {
        self.accounts.values().chain(self.contracts.values()).map(|&v| v as u128).sum()
    }
}

/// Replays the money flows of a trace and checks conservation, deposit
/// exclusivity and every arrival proof. An empty trace is trivially valid.
pub fn verify_trace(ctx: &PairingContext, events: &[EventRecord]) -> Result<TraceSummary, TraceError> {
    let mut summary = TraceSummary { events: events.len(), ..TraceSummary::default() };
    let mut replay = Replay::default();
    let mut setups = BTreeMap::new();
    let mut settled = BTreeSet::new();
    let mut snapshot = None;
    for rec in events {
        let seq = rec.seq;
        let fail = |message: &str| TraceError::Malformed { seq, message: message.to_string() };
        let exclusive = |message: &str| TraceError::Exclusivity { seq, message: message.to_string() };
        let bad_proof = |message: &str| TraceError::Proof { seq, message: message.to_string() };
        let here = || rec.contract.ok_or_else(|| fail("event needs a contract id"));
        if snapshot.is_some() {
            return Err(fail("events after the final snapshot"));
        }
        match &rec.event {
            Event::Genesis { allocations } => {
                if seq != 0 {
                    return Err(fail("genesis must be the first event"));
                }
                for (a, v) in allocations {
                    replay.credit(*a, *v);
                }
                summary.genesis_supply = replay.total();
            }
            Event::Transfer { from, to, amount } => {
                replay.debit(seq, *from, *amount)?;
                replay.credit(*to, *amount);
            }
            Event::DriverRegistered { driver, bond, .. } => replay.into_contract(seq, *driver, here()?, *bond)?,
            Event::RequestPublished { .. } | Event::OfferSubmitted { .. } | Event::ReputationUpdated { .. } => {}
            Event::DepositOpened { rider, rider_deposit, y, .. } => {
                let id = here()?;
                setups.insert(id, *y);
                replay.into_contract(seq, *rider, id, *rider_deposit)?;
            }
            Event::DepositArmed { driver, amount } => replay.into_contract(seq, *driver, here()?, *amount)?,
            Event::ArrivalClaimed { driver, amount, proof, attestation } => {
                let id = here()?;
                let y = *setups.get(&id).ok_or_else(|| fail("claim on an unknown deposit"))?;
                if attestation.commitment != proof.commitment || !attestation.verify(ctx) {
                    return Err(bad_proof("attestation does not match the proof"));
                }
                if !zksm_verify(ctx, y, proof) {
                    return Err(bad_proof("membership proof does not verify"));
                }
                summary.proofs_checked += 1;
                if !settled.insert(id) {
                    return Err(exclusive("deposit settled twice"));
                }
                replay.out_of_contract(seq, id, *driver, *amount)?;
            }
            Event::DriverFined { rider, amount } | Event::DepositExpired { rider, amount } => {
                let id = here()?;
                if !settled.insert(id) {
                    return Err(exclusive("deposit settled twice"));
                }
                replay.out_of_contract(seq, id, *rider, *amount)?;
            }
            Event::PaymentOpened { rider, escrow, .. } => replay.into_contract(seq, *rider, here()?, *escrow)?,
            Event::SegmentPaid { driver, amount, .. } => replay.out_of_contract(seq, here()?, *driver, *amount)?,
            Event::TripCompleted { .. } => {}
            Event::Refunded { rider, amount } => replay.out_of_contract(seq, here()?, *rider, *amount)?,
            Event::BondSlashed { payouts, .. } => {
                let id = here()?;
                for (to, amount) in payouts {
                    replay.out_of_contract(seq, id, *to, *amount)?;
                }
            }
            Event::Snapshot { accounts, contracts, supply } => snapshot = Some((accounts, contracts, *supply as u128)),
        }
    }
    summary.deposits_settled = settled.len();
    let replayed = replay.total();
    if replayed != summary.genesis_supply {
        return Err(TraceError::NotConserved { genesis: summary.genesis_supply, replayed });
    }
    if let Some((accounts, contracts, supply)) = snapshot {
        summary.has_snapshot = true;
        if supply != summary.genesis_supply {
            return Err(TraceError::SnapshotMismatch(format!("supply {supply} vs genesis {}", summary.genesis_supply)));
        }
        let nonzero = |m: &BTreeMap<Address, Amount>| -> BTreeMap<Address, Amount> {
            m.iter().filter(|(_, &v)| v > 0).map(|(k, v)| (*k, *v)).collect()
        };
        if nonzero(accounts) != nonzero(&replay.accounts) {
            return Err(TraceError::SnapshotMismatch("account balances differ".into()));
        }
        for (id, v) in &replay.contracts {
            if contracts.get(id).copied().unwrap_or(0) != *v {
                return Err(TraceError::SnapshotMismatch(format!("contract {} balance differs", id.0)));
            }
        }
        if contracts.iter().any(|(id, &v)| v > 0 && !replay.contracts.contains_key(id)) {
            return Err(TraceError::SnapshotMismatch("snapshot holds an unknown contract balance".into()));
        }
    }
    Ok(summary)
}
