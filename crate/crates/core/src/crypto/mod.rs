//! Pairing-group arithmetic and the primitive schemes built on it.

mod cert;
mod encrypt;
mod group;
mod pedersen;
mod schnorr;
pub mod ser;
mod setsig;

use thiserror::Error;

pub use cert::{Certificate, RegistrationAuthority};
pub use encrypt::{offer_decrypt, offer_encrypt};
pub use group::{
    hash_to_g1, hash_to_scalar, Canonical, Curve, G1Config, G1Projective, Gt, PairingContext,
    Scalar, G1, G2,
};
pub use pedersen::{pedersen_commit, PedersenCommitment};
pub use schnorr::{att_sign, att_verify, AttestationSignature, KeyPair, PublicKey};
pub use setsig::{set_sign, set_verify, SetSignature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("set element makes the issuer key singular (x + element = 0)")]
    DegenerateElement,
    #[error("ciphertext is malformed or was not encrypted to this key")]
    DecryptionFailure,
}
