#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rideshare_core::contracts::{DepositTerms, PaymentTerms, RegistryConfig};
use rideshare_core::crypto::{KeyPair, PairingContext, RegistrationAuthority, Scalar};
use rideshare_core::ledger::{Account, Amount, Call, ContractId, LedgerError, LedgerState, Output, Receipt};
use rideshare_core::trips::{GeoPoint, TimeWindow};
use rideshare_core::zksm::{
    lp_attest, zksm_commit_location, zksm_prove, zksm_setup, Coverage, LocationProver, LpAttestation,
    MembershipProof, ZkSetup,
};

pub const FUNDS: Amount = 10_000;
pub const BOND: Amount = 50;
pub const ACCEPT_DEADLINE: u64 = 120;
pub const PICKUP: TimeWindow = TimeWindow { start: 600, end: 1_500 };
pub const EXPIRATION: u64 = 3_600;

pub fn spot() -> GeoPoint {
    GeoPoint { lat: 36.1627, lon: -86.7816 }
}

pub struct World {
    pub ctx: &'static PairingContext,
    pub rng: ChaCha20Rng,
    pub ledger: LedgerState,
    pub lp: LocationProver,
    pub rider: Account,
    pub driver: Account,
    pub other: Account,
}

impl World {
    pub fn new(seed: u64) -> Self {
        let ctx = PairingContext::global();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ra = RegistrationAuthority::new(ctx, &mut rng);
        let lp = LocationProver::new(
            "rsu-1",
            KeyPair::generate(ctx, &mut rng),
            Coverage::Circle { center: spot(), radius_m: 300.0 },
        );
        let rider = Account::new(KeyPair::generate(ctx, &mut rng));
        let mut driver = Account::new(KeyPair::generate(ctx, &mut rng));
        let other = Account::new(KeyPair::generate(ctx, &mut rng));
        let mut config = RegistryConfig::new(ra.public());
        config.location_provers.push(lp.public());
        config.bond = BOND;
        let alloc = [(rider.address, FUNDS), (driver.address, FUNDS), (other.address, FUNDS)];
        let mut ledger = LedgerState::genesis(config, &alloc).unwrap();
        let certificate = ra.issue(ctx, "TN-DRV-001", driver.key.public());
        driver.submit(ctx, &mut ledger, BOND, Call::RegisterDriver { certificate }).unwrap();
        Self { ctx, rng, ledger, lp, rider, driver, other }
    }

    pub fn elements(k: u64) -> Vec<Scalar> {
        (0..k).map(|i| Scalar::from(5_000 + 3 * i)).collect()
    }

    pub fn setup(&mut self, k: u64) -> ZkSetup {
        zksm_setup(self.ctx, &Self::elements(k), &mut self.rng).unwrap()
    }

    pub fn terms(&self, setup: ZkSetup, driver_deposit: Amount) -> DepositTerms {
        DepositTerms {
            driver: self.driver.address,
            driver_deposit,
            setup,
            accept_deadline: ACCEPT_DEADLINE,
            pickup_window: PICKUP,
            expiration: EXPIRATION,
            request_id: None,
        }
    }

    pub fn open_deposit(&mut self, setup: ZkSetup, rider_deposit: Amount, driver_deposit: Amount) -> ContractId {
        let terms = self.terms(setup, driver_deposit);
        let r = self.rider.submit(self.ctx, &mut self.ledger, rider_deposit, Call::OpenDeposit(terms)).unwrap();
        contract_of(&r)
    }

    pub fn arm(&mut self, id: ContractId, amount: Amount) -> Result<Receipt, LedgerError> {
        self.driver.submit(self.ctx, &mut self.ledger, amount, Call::DriverDeposit { contract: id })
    }

    pub fn prove(&mut self, setup: &ZkSetup, element: Scalar) -> (MembershipProof, LpAttestation) {
        let lc = zksm_commit_location(self.ctx, element, &mut self.rng);
        let att = lp_attest(self.ctx, &self.lp, &lc.request, &spot()).unwrap();
        let proof = zksm_prove(self.ctx, setup, element, lc.blinding, lc.commitment, &mut self.rng).unwrap();
        (proof, att)
    }

    pub fn claim(&mut self, id: ContractId, proof: MembershipProof, attestation: LpAttestation) -> Result<Receipt, LedgerError> {
        let call = Call::ProofOfArrival { contract: id, proof, attestation };
        self.driver.submit(self.ctx, &mut self.ledger, 0, call)
    }

    pub fn fine(&mut self, id: ContractId) -> Result<Receipt, LedgerError> {
        self.rider.submit(self.ctx, &mut self.ledger, 0, Call::FineDriver { contract: id })
    }

    /// Opens a deposit, arms it and claims it with an honest proof.
    pub fn claimed_deposit(&mut self, rider_deposit: Amount) -> ContractId {
        let setup = self.setup(2);
        let id = self.open_deposit(setup.clone(), rider_deposit, 20);
        self.arm(id, 20).unwrap();
        self.ledger.advance_to(PICKUP.start);
        let (proof, att) = self.prove(&setup, Self::elements(2)[0]);
        self.claim(id, proof, att).unwrap();
        id
    }

    pub fn payment_terms(&self, distance: u64, rate: Amount, credit: Amount, deposit: Option<ContractId>) -> PaymentTerms {
        PaymentTerms {
            driver_key: self.driver.key.public(),
            distance,
            rate,
            credit,
            expiration: self.ledger.now + 7_200,
            deposit,
        }
    }

    pub fn open_payment(&mut self, terms: PaymentTerms, escrow: Amount) -> Result<ContractId, LedgerError> {
        self.rider.submit(self.ctx, &mut self.ledger, escrow, Call::OpenPayment(terms)).map(|r| contract_of(&r))
    }

    pub fn pay_segment(&mut self, id: ContractId, segment: u64, elapsed: u64) -> Result<Receipt, LedgerError> {
        let msg = rideshare_core::contracts::segment_message(id, segment, elapsed);
        let rider_sig = self.rider.key.sign(self.ctx, &msg);
        let driver_sig = self.driver.key.sign(self.ctx, &msg);
        let call = Call::ProofOfDistance { contract: id, segment, elapsed, rider_sig, driver_sig };
        self.rider.submit(self.ctx, &mut self.ledger, 0, call)
    }
}

pub fn contract_of(r: &Receipt) -> ContractId {
    match r.output {
        Output::Contract(id) => id,
        other => panic!("expected a contract id, got {other:?}"),
    }
}

pub fn is_revert<T: std::fmt::Debug>(r: Result<T, LedgerError>) -> bool {
    matches!(r, Err(LedgerError::ContractRevert(_)))
}
