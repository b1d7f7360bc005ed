use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::group::PairingContext;
use super::schnorr::{AttestationSignature, KeyPair, PublicKey};

/// Binds a driver public key to an off-ledger identity (e.g. a licence
/// plate). Issued by the registration authority.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub identity: String,
    pub public: PublicKey,
    pub signature: AttestationSignature,
}

fn certificate_message(identity: &str, public: &PublicKey) -> Vec<u8> {
    let mut msg = b"RIDESHARE-V1/certificate".to_vec();
    msg.extend((identity.len() as u64).to_be_bytes());
    msg.extend(identity.as_bytes());
    msg.extend(public.encode());
    msg
}

impl Certificate {
    pub fn verify(&self, ctx: &PairingContext, authority: &PublicKey) -> bool {
        authority.verify(ctx, &certificate_message(&self.identity, &self.public), &self.signature)
    }
}

/// A single trusted key issuing driver certificates.
#[derive(Clone, Debug)]
pub struct RegistrationAuthority {
    key: KeyPair,
}

impl RegistrationAuthority {
    pub fn new<R: RngCore + CryptoRng>(ctx: &PairingContext, rng: &mut R) -> Self {
        Self {
            key: KeyPair::generate(ctx, rng),
        }
    }

    pub fn public(&self) -> PublicKey {
        self.key.public()
    }

    pub fn issue(&self, ctx: &PairingContext, identity: &str, public: PublicKey) -> Certificate {
        Certificate {
            identity: identity.to_owned(),
            public,
            signature: self.key.sign(ctx, &certificate_message(identity, &public)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn issue_and_check() {
        let ctx = PairingContext::global();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let ra = RegistrationAuthority::new(ctx, &mut rng);
        let driver = KeyPair::generate(ctx, &mut rng);
        let cert = ra.issue(ctx, "TN-4471", driver.public());
        assert!(cert.verify(ctx, &ra.public()));

        let mut forged = cert.clone();
        forged.identity = "TN-4472".into();
        assert!(!forged.verify(ctx, &ra.public()));

        let rogue = RegistrationAuthority::new(ctx, &mut rng);
        assert!(!cert.verify(ctx, &rogue.public()));
    }
}
