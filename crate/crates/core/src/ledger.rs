//! Single-node deterministic ledger hosting the ride-sharing contracts.
//!
//! Every state change goes through [`LedgerState::apply`], which verifies
//! the sender's signature and nonce, moves the attached value and runs the
//! call against a scratch copy of the state. The copy replaces the live
//! state only if the call succeeds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::contracts::{
    deposit, payment, registry, Contract, DepositStatus, DepositTerms, PaymentTerms, RegistryConfig,
    RegistryState,
};
use crate::crypto::{AttestationSignature, Certificate, KeyPair, PairingContext, PublicKey, G2};
use crate::trips::{Cell, RideRequest, TimeWindow, Timestamp};
use crate::zksm::{LpAttestation, MembershipProof};

/// Smallest currency unit.
pub type Amount = u64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Address(pub [u8; 20]);

pub fn derive_address(public: &PublicKey) -> Address {
    let digest = Sha256::new()
        .chain_update(b"RIDESHARE-V1/address")
        .chain_update(public.encode())
        .finalize();
    let mut out = [0u8; 20];
    out.copy_from_slice(&digest[..20]);
    Address(out)
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Address {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = hex::decode(s.strip_prefix("0x").unwrap_or(s)).map_err(|e| e.to_string())?;
        let bytes: [u8; 20] = raw.try_into().map_err(|_| "address must be 20 bytes".to_owned())?;
        Ok(Address(bytes))
    }
}

impl Serialize for Address {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContractId(pub u64);

/// The bidding and reputation registry deployed at genesis.
pub const REGISTRY: ContractId = ContractId(0);

impl fmt::Display for ContractId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("transaction signature does not verify under the sender key")]
    BadSignature,
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("insufficient funds: balance {balance}, needed {needed}")]
    InsufficientFunds { balance: Amount, needed: Amount },
    #[error("contract reverted: {0}")]
    ContractRevert(String),
    #[error("unknown contract {0}")]
    UnknownContract(ContractId),
    #[error("genesis allocations overflow the supply type")]
    SupplyOverflow,
}

pub(crate) fn revert<T>(reason: impl Into<String>) -> Result<T, LedgerError> {
    Err(LedgerError::ContractRevert(reason.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "snake_case")]
pub enum Call {
    Transfer { to: Address },
    RegisterDriver { certificate: Certificate },
    MakeRideRequest { request: RideRequest },
    MakeRideOffer {
        request_id: u64,
        #[serde(with = "crate::crypto::ser::hex_bytes")]
        ciphertext: Vec<u8>,
        bid: Amount,
    },
    ReportDriver { driver: Address },
    OpenDeposit(DepositTerms),
    DriverDeposit { contract: ContractId },
    ProofOfArrival { contract: ContractId, proof: MembershipProof, attestation: LpAttestation },
    FineDriver { contract: ContractId },
    OpenPayment(PaymentTerms),
    ProofOfDistance {
        contract: ContractId,
        segment: u64,
        elapsed: u64,
        rider_sig: AttestationSignature,
        driver_sig: AttestationSignature,
    },
    WithdrawFunds { contract: ContractId },
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::Transfer { .. } => "transfer",
            Call::RegisterDriver { .. } => "register_driver",
            Call::MakeRideRequest { .. } => "make_ride_request",
            Call::MakeRideOffer { .. } => "make_ride_offer",
            Call::ReportDriver { .. } => "report_driver",
            Call::OpenDeposit(_) => "open_deposit",
            Call::DriverDeposit { .. } => "driver_deposit",
            Call::ProofOfArrival { .. } => "proof_of_arrival",
            Call::FineDriver { .. } => "fine_driver",
            Call::OpenPayment(_) => "open_payment",
            Call::ProofOfDistance { .. } => "proof_of_distance",
            Call::WithdrawFunds { .. } => "withdraw_funds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: PublicKey,
    pub nonce: u64,
    pub value: Amount,
    pub call: Call,
}

impl Transaction {
    pub fn signing_payload(&self) -> Vec<u8> {
        let mut out = b"RIDESHARE-V1/transaction".to_vec();
        out.extend(serde_json::to_vec(self).expect("transactions always serialize"));
        out
    }

    pub fn sign(self, ctx: &PairingContext, key: &KeyPair) -> SignedTransaction {
        let signature = key.sign(ctx, &self.signing_payload());
        SignedTransaction { tx: self, signature }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedTransaction {
    pub tx: Transaction,
    pub signature: AttestationSignature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum Event {
    Genesis { allocations: BTreeMap<Address, Amount> },
    Transfer { from: Address, to: Address, amount: Amount },
    DriverRegistered { driver: Address, identity: String, bond: Amount },
    RequestPublished {
        request_id: u64,
        requester: Address,
        origin: Cell,
        window: TimeWindow,
        destination: Cell,
        deadline: Timestamp,
        max_offers: Option<u32>,
    },
    OfferSubmitted { request_id: u64, offer_index: usize, driver: Address, bid: Amount },
    DepositOpened {
        rider: Address,
        driver: Address,
        rider_deposit: Amount,
        driver_deposit: Amount,
        #[serde(with = "crate::crypto::ser::hex_canonical")]
        y: G2,
        set_size: usize,
        accept_deadline: Timestamp,
        pickup_window: TimeWindow,
        expiration: Timestamp,
    },
    DepositArmed { driver: Address, amount: Amount },
    ArrivalClaimed { driver: Address, amount: Amount, proof: MembershipProof, attestation: LpAttestation },
    DriverFined { rider: Address, amount: Amount },
    DepositExpired { rider: Address, amount: Amount },
    PaymentOpened {
        rider: Address,
        driver: Address,
        distance: u64,
        rate: Amount,
        credit: Amount,
        escrow: Amount,
        expiration: Timestamp,
        deposit: Option<ContractId>,
    },
    SegmentPaid { driver: Address, segment: u64, elapsed: u64, amount: Amount, remaining: u64 },
    TripCompleted { driver: Address, total_paid: Amount },
    Refunded { rider: Address, amount: Amount },
    ReputationUpdated { driver: Address, arrivals: u64, completions: u64 },
    BondSlashed { driver: Address, payouts: Vec<(Address, Amount)>, remaining_bond: Amount },
    /// Final balances, appended by the scenario runner at the end of a trace.
    Snapshot {
        accounts: BTreeMap<Address, Amount>,
        #[serde(with = "pairs")]
        contracts: BTreeMap<ContractId, Amount>,
        /// Fits in an `Amount` because genesis rejects larger supplies.
        supply: Amount,
    },
}

/// Integer-keyed maps as `[[key, value], ...]`; flattened records cannot
/// carry non-string map keys through JSON.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub time: Timestamp,
    pub contract: Option<ContractId>,
    #[serde(flatten)]
    pub event: Event,
}

/// What a successful transaction produced besides events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Output {
    None,
    Contract(ContractId),
    Request(u64),
    Offer(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receipt {
    pub output: Output,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerState {
    pub now: Timestamp,
    pub balances: BTreeMap<Address, Amount>,
    pub nonces: BTreeMap<Address, u64>,
    pub contracts: BTreeMap<ContractId, Contract>,
    pub next_contract: u64,
    pub events: Vec<EventRecord>,
}

/// Mutable view handed to contract code for the duration of one call.
pub(crate) struct Exec<'a> {
    pub ctx: &'a PairingContext,
    pub state: &'a mut LedgerState,
    pub sender: Address,
    pub sender_key: PublicKey,
    pub value: Amount,
    pub emitted: Vec<(Option<ContractId>, Event)>,
}

impl Exec<'_> {
    pub fn now(&self) -> Timestamp {
        self.state.now
    }

    pub fn emit(&mut self, contract: Option<ContractId>, event: Event) {
        self.emitted.push((contract, event));
    }

    pub fn registry(&mut self) -> &mut RegistryState {
        match self.state.contracts.get_mut(&REGISTRY) {
            Some(Contract::Registry(r)) => r,
            _ => unreachable!("registry is deployed at genesis"),
        }
    }

    pub fn contract(&mut self, id: ContractId) -> Result<&mut Contract, LedgerError> {
        self.state.contracts.get_mut(&id).ok_or(LedgerError::UnknownContract(id))
    }

    pub fn deploy(&mut self, contract: Contract) -> ContractId {
        let id = ContractId(self.state.next_contract);
        self.state.next_contract += 1;
        self.state.contracts.insert(id, contract);
        id
    }

    /// Moves `amount` out of contract `from` into account `to`.
    pub fn pay_out(&mut self, from: ContractId, to: Address, amount: Amount) -> Result<(), LedgerError> {
        let balance = self.contract(from)?.balance_mut();
        *balance = match balance.checked_sub(amount) {
            Some(b) => b,
            None => return revert("contract balance underflow"),
        };
        self.state.credit(to, amount);
        Ok(())
    }

    pub fn require_no_value(&self) -> Result<(), LedgerError> {
        if self.value != 0 {
            return revert("call is not payable");
        }
        Ok(())
    }
}

impl LedgerState {
    pub fn genesis(config: RegistryConfig, allocations: &[(Address, Amount)]) -> Result<Self, LedgerError> {
        let mut balances = BTreeMap::new();
        let mut total: Amount = 0;
        for &(addr, amount) in allocations {
            total = total.checked_add(amount).ok_or(LedgerError::SupplyOverflow)?;
            *balances.entry(addr).or_insert(0) += amount;
        }
        let mut contracts = BTreeMap::new();
        contracts.insert(REGISTRY, Contract::Registry(RegistryState::new(config)));
        let mut state = Self {
            now: 0,
            balances: balances.clone(),
            nonces: BTreeMap::new(),
            contracts,
            next_contract: 1,
            events: Vec::new(),
        };
        state.push_event(None, Event::Genesis { allocations: balances });
        Ok(state)
    }

    fn push_event(&mut self, contract: Option<ContractId>, event: Event) -> EventRecord {
        let record = EventRecord { seq: self.events.len() as u64, time: self.now, contract, event };
        self.events.push(record.clone());
        record
    }

    pub fn balance(&self, addr: &Address) -> Amount {
        self.balances.get(addr).copied().unwrap_or(0)
    }

    pub fn nonce(&self, addr: &Address) -> u64 {
        self.nonces.get(addr).copied().unwrap_or(0)
    }

    pub(crate) fn credit(&mut self, to: Address, amount: Amount) {
        if amount > 0 {
            *self.balances.entry(to).or_insert(0) += amount;
        }
    }

    fn debit(&mut self, from: Address, amount: Amount) -> Result<(), LedgerError> {
        let balance = self.balance(&from);
        if balance < amount {
            return Err(LedgerError::InsufficientFunds { balance, needed: amount });
        }
        if amount > 0 {
            self.balances.insert(from, balance - amount);
        }
        Ok(())
    }

    pub fn registry(&self) -> &RegistryState {
        match self.contracts.get(&REGISTRY) {
            Some(Contract::Registry(r)) => r,
            _ => unreachable!("registry is deployed at genesis"),
        }
    }

    pub fn contract(&self, id: ContractId) -> Option<&Contract> {
        self.contracts.get(&id)
    }

    pub fn deposit_status(&self, id: ContractId) -> Option<DepositStatus> {
        match self.contracts.get(&id) {
            Some(Contract::Deposit(d)) => Some(d.status),
            _ => None,
        }
    }

    pub fn contract_balances(&self) -> BTreeMap<ContractId, Amount> {
        self.contracts.iter().map(|(id, c)| (*id, c.balance())).collect()
    }

    /// Sum over accounts and contract-held balances.
    pub fn total_supply(&self) -> u128 {
        let accounts: u128 = self.balances.values().map(|&b| b as u128).sum();
        let contracts: u128 = self.contracts.values().map(|c| c.balance() as u128).sum();
        accounts + contracts
    }

    pub fn advance_time(&mut self, seconds: u64) {
        self.now += seconds;
    }

    /// Moves the clock forward to `t`; never backwards.
    pub fn advance_to(&mut self, t: Timestamp) {
        self.now = self.now.max(t);
    }

    pub fn snapshot_event(&self) -> Event {
        Event::Snapshot {
            accounts: self.balances.clone(),
            contracts: self.contract_balances(),
            supply: self.total_supply() as Amount,
        }
    }

    pub fn to_canonical_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("ledger state always serializes")
    }

    /// Applies a signed transaction atomically.
    pub fn apply(&mut self, ctx: &PairingContext, stx: &SignedTransaction) -> Result<Receipt, LedgerError> {
        let tx = &stx.tx;
        if !tx.sender.verify(ctx, &tx.signing_payload(), &stx.signature) {
            return Err(LedgerError::BadSignature);
        }
        let sender = derive_address(&tx.sender);
        let expected = self.nonce(&sender);
        if tx.nonce != expected {
            return Err(LedgerError::BadNonce { expected, got: tx.nonce });
        }

        let events = std::mem::take(&mut self.events);
        let mut scratch = self.clone();
        self.events = events;

        let (output, emitted) = {
            let mut exec = Exec {
                ctx,
                state: &mut scratch,
                sender,
                sender_key: tx.sender,
                value: tx.value,
                emitted: Vec::new(),
            };
            exec.state.debit(sender, tx.value)?;
            let output = dispatch(&mut exec, &tx.call)?;
            (output, exec.emitted)
        };
        scratch.nonces.insert(sender, expected + 1);
        scratch.events = std::mem::take(&mut self.events);
        *self = scratch;
        let events = emitted.into_iter().map(|(c, e)| self.push_event(c, e)).collect();
        Ok(Receipt { output, events })
    }
}

fn dispatch(exec: &mut Exec, call: &Call) -> Result<Output, LedgerError> {
    match call {
        Call::Transfer { to } => {
            let (from, amount) = (exec.sender, exec.value);
            exec.state.credit(*to, amount);
            exec.emit(None, Event::Transfer { from, to: *to, amount });
            Ok(Output::None)
        }
        Call::RegisterDriver { certificate } => registry::register_driver(exec, certificate).map(|_| Output::None),
        Call::MakeRideRequest { request } => registry::make_ride_request(exec, request).map(Output::Request),
        Call::MakeRideOffer { request_id, ciphertext, bid } => {
            registry::make_ride_offer(exec, *request_id, ciphertext, *bid).map(Output::Offer)
        }
        Call::ReportDriver { driver } => registry::report_driver(exec, *driver).map(|_| Output::None),
        Call::OpenDeposit(terms) => deposit::open(exec, terms).map(Output::Contract),
        Call::DriverDeposit { contract } => deposit::driver_deposit(exec, *contract).map(|_| Output::None),
        Call::ProofOfArrival { contract, proof, attestation } => {
            deposit::proof_of_arrival(exec, *contract, proof, attestation).map(|_| Output::None)
        }
        Call::FineDriver { contract } => deposit::fine_driver(exec, *contract).map(|_| Output::None),
        Call::OpenPayment(terms) => payment::open(exec, terms).map(Output::Contract),
        Call::ProofOfDistance { contract, segment, elapsed, rider_sig, driver_sig } => {
            payment::proof_of_distance(exec, *contract, *segment, *elapsed, rider_sig, driver_sig)
                .map(|_| Output::None)
        }
        Call::WithdrawFunds { contract } => payment::withdraw_funds(exec, *contract).map(|_| Output::None),
    }
}

/// A keypair with its derived address and a local nonce counter.
#[derive(Debug, Clone)]
pub struct Account {
    pub key: KeyPair,
    pub address: Address,
    nonce: u64,
}

impl Account {
    pub fn new(key: KeyPair) -> Self {
        let address = derive_address(&key.public());
        Self { key, address, nonce: 0 }
    }

    /// Builds and signs a transaction with the ledger's current nonce for
    /// this account.
    pub fn transact(&mut self, ctx: &PairingContext, ledger: &LedgerState, value: Amount, call: Call) -> SignedTransaction {
        self.nonce = ledger.nonce(&self.address);
        Transaction { sender: self.key.public(), nonce: self.nonce, value, call }.sign(ctx, &self.key)
    }

    pub fn submit(
        &mut self,
        ctx: &PairingContext,
        ledger: &mut LedgerState,
        value: Amount,
        call: Call,
    ) -> Result<Receipt, LedgerError> {
        let stx = self.transact(ctx, ledger, value, call);
        ledger.apply(ctx, &stx)
    }
}
