//! Schnorr signatures over G1 with an explicit base point.
//!
//! The base is a parameter so that a Pedersen blinding `ι` can sign under
//! the public key `h^ι`. Ledger, attestation and authentication signatures
//! all use this scheme; ordinary keys use base `g`.
//!
//! Nonces are derived deterministically from the secret, base and message,
//! so signing needs no randomness.

use ark_ec::CurveGroup;
use ark_ff::UniformRand;
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::group::{hash_to_scalar, Canonical, PairingContext, Scalar, G1};

const NONCE_TAG: &[u8] = b"schnorr-nonce";
const CHALLENGE_TAG: &[u8] = b"schnorr-challenge";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttestationSignature {
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub challenge: Scalar,
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub response: Scalar,
}

impl AttestationSignature {
    pub const ENCODED_LEN: usize = 64;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.challenge.encode();
        out.extend(self.response.encode());
        out
    }
}

fn challenge(base: &G1, public: &G1, commitment: &G1, message: &[u8]) -> Scalar {
    let mut buf = Vec::with_capacity(CHALLENGE_TAG.len() + 3 * 48 + message.len());
    buf.extend_from_slice(CHALLENGE_TAG);
    buf.extend(base.encode());
    buf.extend(public.encode());
    buf.extend(commitment.encode());
    buf.extend_from_slice(message);
    hash_to_scalar(&buf)
}

pub fn att_sign(secret: Scalar, base: G1, message: &[u8]) -> AttestationSignature {
    let public = (base * secret).into_affine();
    let mut seed = Vec::with_capacity(NONCE_TAG.len() + 32 + 48 + message.len());
    seed.extend_from_slice(NONCE_TAG);
    seed.extend(secret.encode());
    seed.extend(base.encode());
    seed.extend_from_slice(message);
    let nonce = hash_to_scalar(&seed);
    let commitment = (base * nonce).into_affine();
    let c = challenge(&base, &public, &commitment, message);
    AttestationSignature {
        challenge: c,
        response: nonce + c * secret,
    }
}

pub fn att_verify(public: G1, base: G1, message: &[u8], sig: &AttestationSignature) -> bool {
    let commitment = (base * sig.response - public * sig.challenge).into_affine();
    challenge(&base, &public, &commitment, message) == sig.challenge
}

/// A signing key whose public half is `g^secret`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    secret: Scalar,
    public: PublicKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PublicKey(#[serde(with = "crate::crypto::ser::hex_canonical")] pub G1);

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(ctx: &PairingContext, rng: &mut R) -> Self {
        Self::from_secret(ctx, Scalar::rand(rng))
    }

    pub fn from_secret(ctx: &PairingContext, secret: Scalar) -> Self {
        Self {
            secret,
            public: PublicKey(ctx.g_mul(secret)),
        }
    }

    pub fn public(&self) -> PublicKey {
        self.public
    }

    pub fn secret(&self) -> Scalar {
        self.secret
    }

    pub fn sign(&self, ctx: &PairingContext, message: &[u8]) -> AttestationSignature {
        att_sign(self.secret, ctx.g(), message)
    }
}

impl PublicKey {
    pub fn verify(&self, ctx: &PairingContext, message: &[u8], sig: &AttestationSignature) -> bool {
        att_verify(self.0, ctx.g(), message, sig)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.0.encode()
    }
}
