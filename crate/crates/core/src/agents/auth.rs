//! Challenge-response check that the person at the pick-up point holds the
//! key that made the reservation.

use ark_ff::UniformRand;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{AttestationSignature, Canonical, KeyPair, PairingContext, PublicKey, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AuthError {
    #[error("response does not prove possession of the reservation key")]
    ImpersonationDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthChallenge {
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub nonce: Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthResponse {
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub nonce: Scalar,
    pub signature: AttestationSignature,
}

fn challenge_message(nonce: &Scalar) -> Vec<u8> {
    let mut msg = b"RIDESHARE-V1/rider-auth".to_vec();
    msg.extend(nonce.encode());
    msg
}

/// Rider side: sign the driver's nonce with the request key.
pub fn respond(ctx: &PairingContext, key: &KeyPair, challenge: &AuthChallenge) -> AuthResponse {
    AuthResponse { nonce: challenge.nonce, signature: key.sign(ctx, &challenge_message(&challenge.nonce)) }
}

/// Driver side state for one pick-up. Each nonce is accepted at most once.
#[derive(Debug, Clone)]
pub struct AuthSession {
    expected: PublicKey,
    pending: Option<Scalar>,
}

impl AuthSession {
    pub fn new(expected: PublicKey) -> Self {
        Self { expected, pending: None }
    }

    pub fn challenge<R: RngCore + CryptoRng>(&mut self, rng: &mut R) -> AuthChallenge {
        let nonce = Scalar::rand(rng);
        self.pending = Some(nonce);
        AuthChallenge { nonce }
    }

    pub fn verify(&mut self, ctx: &PairingContext, response: &AuthResponse) -> Result<(), AuthError> {
        let nonce = self.pending.take().ok_or(AuthError::ImpersonationDetected)?;
        if response.nonce != nonce || !self.expected.verify(ctx, &challenge_message(&nonce), &response.signature) {
            return Err(AuthError::ImpersonationDetected);
        }
        Ok(())
    }
}

/// One full round: fresh challenge, response from whoever claims to be
/// the rider, verification against the reservation key.
pub fn mutual_authenticate<R, F>(
    ctx: &PairingContext,
    session: &mut AuthSession,
    rng: &mut R,
    responder: F,
) -> Result<(), AuthError>
where
    R: RngCore + CryptoRng,
    F: FnOnce(&AuthChallenge) -> AuthResponse,
{
    let challenge = session.challenge(rng);
    let response = responder(&challenge);
    session.verify(ctx, &response)
}
