use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use ark_ec::{AffineRepr, CurveGroup};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::auth::{mutual_authenticate, respond, AuthSession};
use super::{decoy_set, distance_units, find_offer, open_offer, split_distance, DriverProfile, OfferPlaintext, RiderBehavior};
use crate::contracts::{segment_message, Contract, DepositStatus, DepositTerms, PaymentTerms, RegistryConfig};
use crate::crypto::{offer_encrypt, Certificate, KeyPair, PairingContext, RegistrationAuthority};
use crate::ledger::{Account, Address, Amount, Call, ContractId, EventRecord, LedgerError, LedgerState, Output, Receipt, REGISTRY};
use crate::matching::{select_offer, MatchPreferences, RideOffer};
use crate::report::{
    linked_requests, scan_coordinates, BalanceRow, PrivacyReport, ReputationRow, RunReport, RunStats, TripOutcome,
    TripRow,
};
use crate::scenario::{Scenario, ScenarioError, TripSpec};
use crate::trips::{
    cloak_point, cloak_trip, encode_location, enumerate_trips, generalize_request, DesiredTrip, PlannedTrip, Timestamp,
    TripCatalog,
};
use crate::zksm::{zksm_audit, zksm_commit_location, zksm_prove, zksm_setup, zksm_verify, LocationProver, MembershipProof};

/// Wall-clock measurements, kept apart from the deterministic report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub setup_ms: Vec<f64>,
    pub prove_ms: Vec<f64>,
    pub verify_ms: Vec<f64>,
    pub mean_setup_ms: f64,
    pub mean_prove_ms: f64,
    pub mean_verify_ms: f64,
    pub total_ms: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    /// Ledger events followed by a final snapshot record.
    pub trace: Vec<EventRecord>,
    pub timing: TimingReport,
    pub ledger: LedgerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Publish(usize),
    Offer(usize, usize),
    Select(usize),
    Accept(usize),
    Arrive(usize),
    Authenticate(usize),
    StartTrip(usize),
    Segment(usize, usize),
    Withdraw(usize),
    Fine(usize),
    Report(usize),
}

struct Driver {
    name: String,
    profile: DriverProfile,
    bid: Amount,
    account: Account,
    certificate: Certificate,
    route: PlannedTrip,
    catalog: TripCatalog,
    registered: bool,
    notes: Vec<String>,
}

struct Session {
    rider: String,
    trip: usize,
    behavior: RiderBehavior,
    prefs: MatchPreferences,
    budget: Amount,
    account: Account,
    desired: DesiredTrip,
    spec: TripSpec,
    request_id: Option<u64>,
    offers: Vec<(usize, RideOffer)>,
    selected: Option<(usize, RideOffer)>,
    deposit: Option<ContractId>,
    audit_failed: bool,
    claimed: bool,
    payment: Option<ContractId>,
    distance: Option<u64>,
    plan: Vec<u64>,
    segments_paid: u64,
    stopped: bool,
    notes: Vec<String>,
}

impl Session {
    fn label(&self) -> String {
        format!("{}/trip{}", self.rider, self.trip)
    }
}

#[derive(Clone, Copy)]
enum Actor {
    Driver(usize),
    Rider(usize),
}

struct Runner<'a> {
    ctx: &'static PairingContext,
    scenario: &'a Scenario,
    rng: ChaCha20Rng,
    ledger: LedgerState,
    authority: RegistrationAuthority,
    provers: Vec<LocationProver>,
    drivers: Vec<Driver>,
    by_address: HashMap<Address, usize>,
    sessions: Vec<Session>,
    queue: BTreeMap<(Timestamp, u64), Step>,
    next_seq: u64,
    stats: RunStats,
    timing: TimingReport,
}

fn engine(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Engine(e.to_string())
}

/// Runs a scenario to completion. Same scenario and seed give a
/// byte-identical report and trace.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<RunOutput, ScenarioError> {
    scenario.validate()?;
    let started = Instant::now();
    let mut runner = Runner::new(scenario, seed)?;
    runner.register_drivers();
    runner.schedule_publications();
    while let Some(((time, _), step)) = runner.queue.pop_first() {
        runner.ledger.advance_to(time);
        runner.step(step)?;
    }
    let mut out = runner.finish(seed);
    out.timing.total_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

impl<'a> Runner<'a> {
    fn new(scenario: &'a Scenario, seed: u64) -> Result<Self, ScenarioError> {
        let ctx = PairingContext::global();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let authority = RegistrationAuthority::new(ctx, &mut rng);
        let provers: Vec<LocationProver> = scenario
            .location_provers
            .iter()
            .map(|lp| LocationProver::new(lp.name.clone(), KeyPair::generate(ctx, &mut rng), lp.coverage.clone()))
            .collect();
        let mut allocations = Vec::new();
        let mut drivers = Vec::new();
        let mut by_address = HashMap::new();
        for (i, d) in scenario.drivers.iter().enumerate() {
            let key = KeyPair::generate(ctx, &mut rng);
            let certificate = authority.issue(ctx, &d.identity, key.public());
            let route = PlannedTrip::new(d.route.clone()).map_err(engine)?;
            let cloaked = cloak_trip(&scenario.grid, &route, scenario.interval_secs).map_err(engine)?;
            let catalog = enumerate_trips(&cloaked).map_err(engine)?;
            let account = Account::new(key);
            allocations.push((account.address, d.balance));
            by_address.insert(account.address, i);
            drivers.push(Driver {
                name: d.name.clone(),
                profile: d.profile,
                bid: d.bid,
                account,
                certificate,
                route,
                catalog,
                registered: false,
                notes: Vec::new(),
            });
        }
        let mut sessions = Vec::new();
        for r in &scenario.riders {
            for (t, spec) in r.trips.iter().enumerate() {
                // A fresh, pre-funded key per request keeps trips unlinkable.
                let account = Account::new(KeyPair::generate(ctx, &mut rng));
                allocations.push((account.address, r.budget_per_trip));
                sessions.push(Session {
                    rider: r.name.clone(),
                    trip: t,
                    behavior: r.behavior,
                    prefs: r.preferences,
                    budget: r.budget_per_trip,
                    account,
                    desired: DesiredTrip {
                        pickup: spec.pickup,
                        pickup_time: spec.pickup_time,
                        dropoff: spec.dropoff,
                        expected_duration: spec.expected_duration,
                    },
                    spec: spec.clone(),
                    request_id: None,
                    offers: Vec::new(),
                    selected: None,
                    deposit: None,
                    audit_failed: false,
                    claimed: false,
                    payment: None,
                    distance: None,
                    plan: Vec::new(),
                    segments_paid: 0,
                    stopped: false,
                    notes: Vec::new(),
                });
            }
        }
        let mut config = RegistryConfig::new(authority.public());
        config.location_provers = provers.iter().map(|p| p.public()).collect();
        config.bond = scenario.reputation.bond;
        config.threshold = scenario.reputation.threshold;
        config.claim_timeout = scenario.reputation.claim_timeout_secs;
        config.grid = Some(scenario.grid.clone());
        let ledger = LedgerState::genesis(config, &allocations).map_err(engine)?;
        let stats = RunStats {
            transactions_applied: 0,
            transactions_reverted: 0,
            events: 0,
            proofs_generated: 0,
            proofs_accepted: 0,
            proof_size_bytes: MembershipProof::encoded_len(),
            genesis_supply: ledger.total_supply(),
            final_supply: 0,
        };
        Ok(Self {
            ctx,
            scenario,
            rng,
            ledger,
            authority,
            provers,
            drivers,
            by_address,
            sessions,
            queue: BTreeMap::new(),
            next_seq: 0,
            stats,
            timing: TimingReport::default(),
        })
    }

    fn schedule(&mut self, time: Timestamp, step: Step) {
        self.queue.insert((time, self.next_seq), step);
        self.next_seq += 1;
    }

    fn tx(&mut self, actor: Actor, value: Amount, call: Call) -> Result<Receipt, LedgerError> {
        let account = match actor {
            Actor::Driver(d) => &mut self.drivers[d].account,
            Actor::Rider(s) => &mut self.sessions[s].account,
        };
        let result = account.submit(self.ctx, &mut self.ledger, value, call);
        match result {
            Ok(_) => self.stats.transactions_applied += 1,
            Err(_) => self.stats.transactions_reverted += 1,
        }
        result
    }

    fn note(&mut self, s: usize, msg: impl Into<String>) {
        self.sessions[s].notes.push(msg.into());
    }

    fn register_drivers(&mut self) {
        let bond = self.scenario.reputation.bond;
        for d in 0..self.drivers.len() {
            let certificate = self.drivers[d].certificate.clone();
            match self.tx(Actor::Driver(d), bond, Call::RegisterDriver { certificate }) {
                Ok(_) => self.drivers[d].registered = true,
                Err(e) => self.drivers[d].notes.push(format!("registration failed: {e}")),
            }
        }
    }

    fn schedule_publications(&mut self) {
        let lead = self.scenario.bidding.request_lead_secs;
        for s in 0..self.sessions.len() {
            let spec = &self.sessions[s].spec;
            let t = spec.request_time.unwrap_or(spec.pickup_time.saturating_sub(lead));
            self.schedule(t, Step::Publish(s));
        }
    }

    fn step(&mut self, step: Step) -> Result<(), ScenarioError> {
        match step {
            Step::Publish(s) => self.publish(s),
            Step::Offer(s, d) => self.offer(s, d),
            Step::Select(s) => return self.select(s),
            Step::Accept(s) => self.accept(s),
            Step::Arrive(s) => self.arrive(s),
            Step::Authenticate(s) => self.authenticate(s),
            Step::StartTrip(s) => self.start_trip(s),
            Step::Segment(s, i) => self.segment(s, i),
            Step::Withdraw(s) => self.withdraw(s),
            Step::Fine(s) => self.fine(s),
            Step::Report(s) => self.report_driver(s),
        }
        Ok(())
    }

    fn publish(&mut self, s: usize) {
        let now = self.ledger.now;
        let deadline = now + self.scenario.bidding.offer_window_secs;
        let sess = &self.sessions[s];
        let request =
            match generalize_request(&self.scenario.grid, &sess.desired, self.scenario.interval_secs, deadline, sess.spec.max_offers) {
                Ok(r) => r,
                Err(e) => return self.note(s, format!("request not generalized: {e}")),
            };
        match self.tx(Actor::Rider(s), 0, Call::MakeRideRequest { request }) {
            Ok(Receipt { output: Output::Request(id), .. }) => {
                self.sessions[s].request_id = Some(id);
                for d in 0..self.drivers.len() {
                    let t = now + 1 + d as u64;
                    if t <= deadline {
                        self.schedule(t, Step::Offer(s, d));
                    }
                }
                self.schedule(deadline + 1, Step::Select(s));
            }
            Ok(_) => unreachable!("ride requests return their id"),
            Err(e) => self.note(s, format!("request rejected: {e}")),
        }
    }

    fn offer(&mut self, s: usize, d: usize) {
        let Some(request_id) = self.sessions[s].request_id else { return };
        let driver = &self.drivers[d];
        if !driver.registered {
            return;
        }
        let Some(record) = self.ledger.registry().requests.get(&request_id) else { return };
        let (request, requester_key) = (record.request, record.requester_key);
        let Some((pickup, dropoff)) = find_offer(&driver.catalog, &driver.route, &request) else { return };
        let plain = OfferPlaintext { request_id, certificate: driver.certificate.clone(), pickup, dropoff };
        let bytes = serde_json::to_vec(&plain).expect("offers always serialize");
        let ciphertext = offer_encrypt(self.ctx, &requester_key, &bytes, &mut self.rng);
        let bid = driver.bid;
        if let Err(e) = self.tx(Actor::Driver(d), 0, Call::MakeRideOffer { request_id, ciphertext, bid }) {
            let name = self.drivers[d].name.clone();
            self.drivers[d].notes.push(format!("offer on request {request_id} rejected: {e}"));
            self.note(s, format!("offer from {name} rejected: {e}"));
        }
    }

    fn select(&mut self, s: usize) -> Result<(), ScenarioError> {
        let Some(request_id) = self.sessions[s].request_id else { return Ok(()) };
        let reg = self.ledger.registry();
        let threshold = reg.config.threshold;
        let records = reg.requests[&request_id].offers.clone();
        let window = reg.requests[&request_id].request.window;
        let authority = self.authority.public();
        let mut offers = Vec::new();
        for (index, record) in records.iter().enumerate() {
            let reputation = reg.driver(&record.driver).map(|r| r.score(threshold).ratio).unwrap_or(0.0);
            match open_offer(self.ctx, &self.sessions[s].account.key, &authority, request_id, index, record, reputation) {
                Some((_, offer)) => {
                    let d = self.by_address[&record.driver];
                    offers.push((d, offer));
                }
                None => self.sessions[s].notes.push(format!("offer {index} failed verification")),
            }
        }
        let sess = &mut self.sessions[s];
        sess.offers = offers;
        if sess.offers.is_empty() {
            return Ok(());
        }
        let plain: Vec<RideOffer> = sess.offers.iter().map(|(_, o)| o.clone()).collect();
        let Some(best) = select_offer(&plain, &sess.desired, &sess.prefs) else { return Ok(()) };
        let d = sess.offers.iter().find(|(_, o)| o.index == best.index).map(|(d, _)| *d).unwrap();
        sess.selected = Some((d, best.clone()));
        if sess.behavior.skip_deposit {
            sess.notes.push("rider never opened the deposit".into());
            return Ok(());
        }

        let zk = self.scenario.zksm;
        let cell = cloak_point(&self.scenario.grid, &best.pickup.point).map_err(engine)?;
        let Some(set) = decoy_set(&self.scenario.grid, cell, &best.pickup.point, zk.set_size, zk.precision, &mut self.rng)
        else {
            return Err(ScenarioError::Engine(format!(
                "cell {} too small for {} distinct locations at precision {}",
                cell.id, zk.set_size, zk.precision
            )));
        };
        let t0 = Instant::now();
        let mut setup = zksm_setup(self.ctx, &set, &mut self.rng).map_err(engine)?;
        self.timing.setup_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        if sess.behavior.rigged_setup {
            let truth = encode_location(&best.pickup.point, zk.precision).map_err(engine)?;
            let sig = setup.signatures.iter_mut().find(|s| s.element == truth).expect("truth is in the set");
            sig.sig = (sig.sig + self.ctx.g().into_group()).into_affine();
            if sig.sig.is_zero() {
                sig.sig = self.ctx.g();
            }
        }
        let now = self.ledger.now;
        let deposits = self.scenario.deposits;
        let terms = DepositTerms {
            driver: best.driver,
            driver_deposit: deposits.driver,
            setup,
            accept_deadline: now + deposits.accept_window_secs,
            pickup_window: window,
            expiration: window.end + deposits.expiration_grace_secs,
            request_id: Some(request_id),
        };
        let expiration = terms.expiration;
        match self.tx(Actor::Rider(s), deposits.rider, Call::OpenDeposit(terms)) {
            Ok(Receipt { output: Output::Contract(id), .. }) => {
                self.sessions[s].deposit = Some(id);
                self.schedule(now + 1, Step::Accept(s));
                self.schedule(expiration, Step::Fine(s));
            }
            Ok(_) => unreachable!("deposits return their contract id"),
            Err(e) => self.note(s, format!("deposit rejected: {e}")),
        }
        Ok(())
    }

    fn deposit_terms(&self, s: usize) -> Option<(ContractId, DepositTerms, DepositStatus)> {
        let id = self.sessions[s].deposit?;
        match self.ledger.contract(id)? {
            Contract::Deposit(d) => Some((id, d.terms.clone(), d.status)),
            _ => None,
        }
    }

    fn accept(&mut self, s: usize) {
        let (Some((d, offer)), Some((contract, terms, _))) = (self.sessions[s].selected.clone(), self.deposit_terms(s))
        else {
            return;
        };
        if self.drivers[d].profile == DriverProfile::Uncommitted {
            return self.note(s, "driver never matched the deposit");
        }
        if !zksm_audit(self.ctx, &terms.setup) {
            self.sessions[s].audit_failed = true;
            return self.note(s, "driver audit rejected the membership set");
        }
        let truth = encode_location(&offer.pickup.point, self.scenario.zksm.precision).ok();
        if truth.and_then(|t| terms.setup.signature_for(t)).is_none() {
            self.sessions[s].audit_failed = true;
            return self.note(s, "membership set does not contain the agreed pick-up point");
        }
        match self.tx(Actor::Driver(d), terms.driver_deposit, Call::DriverDeposit { contract }) {
            Ok(_) => {
                let w = terms.pickup_window;
                let t = offer.pickup.time.clamp(w.start, w.end - 1).max(self.ledger.now + 1);
                self.schedule(t, Step::Arrive(s));
            }
            Err(e) => self.note(s, format!("driver deposit rejected: {e}")),
        }
    }

    fn arrive(&mut self, s: usize) {
        let (Some((d, offer)), Some((contract, terms, status))) = (self.sessions[s].selected.clone(), self.deposit_terms(s))
        else {
            return;
        };
        if status != DepositStatus::Armed || self.drivers[d].profile == DriverProfile::NoShow {
            return;
        }
        let position = offer.pickup.point;
        let Ok(element) = encode_location(&position, self.scenario.zksm.precision) else { return };
        let committed = zksm_commit_location(self.ctx, element, &mut self.rng);
        let Some(prover) = self.provers.iter().find(|p| p.coverage.contains(&position)) else {
            return self.note(s, "no location prover covers the pick-up point");
        };
        let attestation = match prover.attest(self.ctx, &committed.request, &position) {
            Ok(a) => a,
            Err(e) => return self.note(s, format!("location prover refused: {e}")),
        };
        let t0 = Instant::now();
        let proof = zksm_prove(self.ctx, &terms.setup, element, committed.blinding, committed.commitment, &mut self.rng);
        self.timing.prove_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        let proof = match proof {
            Ok(p) => p,
            Err(e) => return self.note(s, format!("proof failed: {e}")),
        };
        self.stats.proofs_generated += 1;
        let t0 = Instant::now();
        let locally_valid = zksm_verify(self.ctx, terms.setup.y, &proof);
        self.timing.verify_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        if !locally_valid {
            return self.note(s, "proof failed local verification");
        }
        match self.tx(Actor::Driver(d), 0, Call::ProofOfArrival { contract, proof, attestation }) {
            Ok(_) => {
                self.stats.proofs_accepted += 1;
                self.sessions[s].claimed = true;
                let now = self.ledger.now;
                self.schedule(now + self.scenario.reputation.claim_timeout_secs, Step::Report(s));
                if self.drivers[d].profile == DriverProfile::ClaimAndAbandon {
                    self.note(s, "driver claimed the deposit and left");
                } else {
                    self.schedule(now + 1, Step::Authenticate(s));
                }
            }
            Err(e) => self.note(s, format!("arrival claim rejected: {e}")),
        }
    }

    fn authenticate(&mut self, s: usize) {
        let expected = self.sessions[s].account.key.public();
        let mut session = AuthSession::new(expected);
        if self.sessions[s].behavior.impostor {
            let impostor = KeyPair::generate(self.ctx, &mut self.rng);
            let ctx = self.ctx;
            match mutual_authenticate(ctx, &mut session, &mut self.rng, |c| respond(ctx, &impostor, c)) {
                Ok(()) => self.note(s, "impostor accepted"),
                Err(e) => self.note(s, format!("impostor turned away: {e}")),
            }
        }
        let ctx = self.ctx;
        let key = self.sessions[s].account.key.clone();
        match mutual_authenticate(ctx, &mut session, &mut self.rng, |c| respond(ctx, &key, c)) {
            Ok(()) => {
                let now = self.ledger.now;
                self.schedule(now + 1, Step::StartTrip(s));
            }
            Err(e) => self.note(s, format!("rider authentication failed: {e}")),
        }
    }

    fn start_trip(&mut self, s: usize) {
        let Some((d, offer)) = self.sessions[s].selected.clone() else { return };
        let pay = self.scenario.payment;
        let distance = distance_units(&offer.pickup.point, &offer.dropoff.point, pay.distance_unit_m);
        let Some(gross) = distance.checked_mul(offer.bid) else {
            return self.note(s, "fare overflows");
        };
        let credit = self.scenario.deposits.rider.min(gross);
        let duration = offer.dropoff.time.saturating_sub(offer.pickup.time);
        let plan = split_distance(distance, duration.div_ceil(pay.segment_secs).max(1));
        let now = self.ledger.now;
        let end = now + pay.segment_secs * plan.len() as u64;
        let terms = PaymentTerms {
            driver_key: self.drivers[d].account.key.public(),
            distance,
            rate: offer.bid,
            credit,
            expiration: end + pay.expiration_grace_secs,
            deposit: self.sessions[s].deposit,
        };
        let expiration = terms.expiration;
        match self.tx(Actor::Rider(s), gross - credit, Call::OpenPayment(terms)) {
            Ok(Receipt { output: Output::Contract(id), .. }) => {
                let sess = &mut self.sessions[s];
                sess.payment = Some(id);
                sess.distance = Some(distance);
                let n = plan.len();
                sess.plan = plan;
                for i in 0..n {
                    self.schedule(now + pay.segment_secs * (i as u64 + 1), Step::Segment(s, i));
                }
                self.schedule(expiration, Step::Withdraw(s));
            }
            Ok(_) => unreachable!("payments return their contract id"),
            Err(e) => self.note(s, format!("payment contract rejected: {e}")),
        }
    }

    fn segment(&mut self, s: usize, i: usize) {
        let (Some(contract), Some((d, _))) = (self.sessions[s].payment, self.sessions[s].selected.clone()) else {
            return;
        };
        let sess = &self.sessions[s];
        if sess.stopped {
            return;
        }
        if sess.behavior.stop_signing_after.is_some_and(|m| sess.segments_paid >= m) {
            self.sessions[s].stopped = true;
            return self.note(s, "rider stopped co-signing segments");
        }
        let measured = sess.plan[i];
        let cheat = self.drivers[d].profile == DriverProfile::DistanceCheat && i == sess.plan.len() / 2;
        let claimed = if cheat { measured + 1 } else { measured };
        if claimed != measured {
            self.sessions[s].stopped = true;
            return self.note(s, format!("rider refused to co-sign {claimed} units for a {measured}-unit segment"));
        }
        let seg = i as u64;
        let msg = segment_message(contract, seg, measured);
        let rider_key = self.sessions[s].account.key.clone();
        let rider_sig = rider_key.sign(self.ctx, &msg);
        if self.sessions[s].behavior.forge_segment && i == 0 {
            let short = (measured / 2).max(1);
            let forged = segment_message(contract, seg, short);
            let sig = rider_key.sign(self.ctx, &forged);
            let call = Call::ProofOfDistance { contract, segment: seg, elapsed: short, rider_sig: sig, driver_sig: sig };
            match self.tx(Actor::Rider(s), 0, call) {
                Ok(_) => self.note(s, "forged segment accepted"),
                Err(e) => self.note(s, format!("forged segment rejected: {e}")),
            }
        }
        let driver_sig = self.drivers[d].account.key.sign(self.ctx, &msg);
        let call = Call::ProofOfDistance { contract, segment: seg, elapsed: measured, rider_sig, driver_sig };
        match self.tx(Actor::Rider(s), 0, call) {
            Ok(_) => self.sessions[s].segments_paid += 1,
            Err(e) => {
                self.sessions[s].stopped = true;
                self.note(s, format!("segment {i} rejected: {e}"));
            }
        }
    }

    fn withdraw(&mut self, s: usize) {
        let Some(id) = self.sessions[s].payment else { return };
        if self.ledger.contract(id).is_some_and(|c| c.balance() > 0) {
            if let Err(e) = self.tx(Actor::Rider(s), 0, Call::WithdrawFunds { contract: id }) {
                self.note(s, format!("withdrawal rejected: {e}"));
            }
        }
    }

    fn fine(&mut self, s: usize) {
        let Some((contract, _, status)) = self.deposit_terms(s) else { return };
        if !status.is_terminal() {
            if let Err(e) = self.tx(Actor::Rider(s), 0, Call::FineDriver { contract }) {
                self.note(s, format!("fine rejected: {e}"));
            }
        }
    }

    fn report_driver(&mut self, s: usize) {
        let (Some((d, _)), Some(contract)) = (self.sessions[s].selected.clone(), self.sessions[s].deposit) else {
            return;
        };
        let driver = self.drivers[d].account.address;
        let reg = self.ledger.registry();
        let Some(record) = reg.driver(&driver) else { return };
        let open = record.claims.iter().any(|c| c.contract == contract && !c.resolved);
        let dishonest = record.score(reg.config.threshold).class == crate::contracts::ReputationClass::Dishonest;
        if !open || !dishonest || record.bond == 0 {
            return;
        }
        match self.tx(Actor::Rider(s), 0, Call::ReportDriver { driver }) {
            Ok(_) => self.note(s, "reported the driver and received a bond share"),
            Err(e) => self.note(s, format!("report rejected: {e}")),
        }
    }

    fn outcome(&self, s: usize) -> TripOutcome {
        let sess = &self.sessions[s];
        if sess.request_id.is_none() {
            return TripOutcome::NotPublished;
        }
        if sess.offers.is_empty() {
            return TripOutcome::NoOffers;
        }
        if sess.selected.is_none() {
            return TripOutcome::NoFeasibleOffer;
        }
        let Some((_, _, status)) = self.deposit_terms(s) else {
            return TripOutcome::ReservationAbandoned;
        };
        match status {
            DepositStatus::Expired if sess.audit_failed => TripOutcome::RiggedSetupRefused,
            DepositStatus::Expired => TripOutcome::ExpiredRecovered,
            DepositStatus::Fined => TripOutcome::FinedRecovered,
            DepositStatus::AwaitingDriverDeposit | DepositStatus::Armed => TripOutcome::Pending,
            DepositStatus::Claimed => match (sess.distance, sess.segments_paid) {
                (None, _) | (Some(_), 0) => TripOutcome::ClaimedAbandoned,
                (Some(_), _) if sess.plan.len() as u64 == sess.segments_paid => TripOutcome::Completed,
                _ => TripOutcome::PartiallyPaid,
            },
        }
    }

    fn finish(mut self, seed: u64) -> RunOutput {
        let trips = (0..self.sessions.len())
            .map(|s| {
                let sess = &self.sessions[s];
                let final_balance = self.ledger.balance(&sess.account.address);
                TripRow {
                    rider: sess.rider.clone(),
                    trip: sess.trip,
                    request_address: sess.account.address,
                    request_id: sess.request_id,
                    offers_received: sess.offers.len(),
                    driver: sess.selected.as_ref().map(|(d, _)| self.drivers[*d].name.clone()),
                    bid: sess.selected.as_ref().map(|(_, o)| o.bid),
                    deposit_contract: sess.deposit,
                    payment_contract: sess.payment,
                    distance_units: sess.distance,
                    segments_paid: sess.segments_paid,
                    outcome: self.outcome(s),
                    net_spent: sess.budget as i128 - final_balance as i128,
                    notes: sess.notes.clone(),
                }
            })
            .collect();

        let mut balances = Vec::new();
        for d in &self.drivers {
            balances.push(BalanceRow { label: d.name.clone(), balance: self.ledger.balance(&d.account.address) });
        }
        for sess in &self.sessions {
            balances.push(BalanceRow { label: sess.label(), balance: self.ledger.balance(&sess.account.address) });
        }
        let known: std::collections::HashSet<Address> = self
            .drivers
            .iter()
            .map(|d| d.account.address)
            .chain(self.sessions.iter().map(|s| s.account.address))
            .collect();
        let other: Amount = self.ledger.balances.iter().filter(|(a, _)| !known.contains(a)).map(|(_, v)| v).sum();
        if other > 0 {
            balances.push(BalanceRow { label: "other accounts".into(), balance: other });
        }
        for (id, b) in self.ledger.contract_balances() {
            let label = if id == REGISTRY { "registry bonds".to_string() } else { format!("contract #{}", id.0) };
            balances.push(BalanceRow { label, balance: b });
        }

        let reg = self.ledger.registry();
        let threshold = reg.config.threshold;
        let reputation = self
            .drivers
            .iter()
            .map(|d| {
                let record = reg.driver(&d.account.address);
                let score = crate::contracts::reputation_score(
                    record.map_or(0, |r| r.arrivals),
                    record.map_or(0, |r| r.completions),
                    threshold,
                );
                ReputationRow {
                    driver: d.name.clone(),
                    address: d.account.address,
                    profile: d.profile,
                    registered: d.registered,
                    arrivals: score.arrivals,
                    completions: score.completions,
                    ratio: score.ratio,
                    class: score.class,
                    new_driver: score.new_driver,
                    bond: record.map_or(0, |r| r.bond),
                    notes: d.notes.clone(),
                }
            })
            .collect();

        let coords: Vec<_> = self
            .sessions
            .iter()
            .flat_map(|s| [(format!("{} pick-up", s.label()), s.desired.pickup), (format!("{} drop-off", s.label()), s.desired.dropoff)])
            .collect();
        let doc = serde_json::to_value(&self.ledger).expect("ledger always serializes");
        let requests: Vec<_> = self.sessions.iter().map(|s| (s.label(), s.account.address)).collect();
        let privacy = PrivacyReport {
            coordinate_leaks: scan_coordinates(&doc, &coords),
            linked_requests: linked_requests(&requests),
        };

        let mut trace = self.ledger.events.clone();
        self.stats.events = trace.len() as u64;
        self.stats.final_supply = self.ledger.total_supply();
        trace.push(EventRecord {
            seq: trace.len() as u64,
            time: self.ledger.now,
            contract: None,
            event: self.ledger.snapshot_event(),
        });
        let t = &mut self.timing;
        t.mean_setup_ms = mean(&t.setup_ms);
        t.mean_prove_ms = mean(&t.prove_ms);
        t.mean_verify_ms = mean(&t.verify_ms);
        RunOutput {
            report: RunReport { version: 1, seed, trips, balances, reputation, stats: self.stats, privacy },
            trace,
            timing: self.timing,
            ledger: self.ledger,
        }
    }
}
