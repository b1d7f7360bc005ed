//! Hybrid public-key encryption for ride offers.
//!
//! Key encapsulation is hashed Diffie-Hellman in G1 against the recipient's
//! `g^sk` public key; the payload is sealed with ChaCha20-Poly1305 under the
//! derived one-time key. Ciphertext layout: `encode(g^r) ∥ aead(payload)`.

use ark_ec::CurveGroup;
use ark_ff::UniformRand;
use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};

use super::group::{Canonical, PairingContext, Scalar, G1};
use super::schnorr::PublicKey;
use super::CryptoError;

const KDF_TAG: &[u8] = b"RIDESHARE-V1/offer-kem";

fn derive_key(ephemeral: &G1, shared: &G1) -> Key {
    let digest = Sha256::new()
        .chain_update(KDF_TAG)
        .chain_update(ephemeral.encode())
        .chain_update(shared.encode())
        .finalize();
    *Key::from_slice(&digest)
}

pub fn offer_encrypt<R: RngCore + CryptoRng>(
    ctx: &PairingContext,
    pk: &PublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> Vec<u8> {
    let r = Scalar::rand(rng);
    let ephemeral = ctx.g_mul(r);
    let shared = (pk.0 * r).into_affine();
    let cipher = ChaCha20Poly1305::new(&derive_key(&ephemeral, &shared));
    // The key is fresh per message, so a fixed nonce never repeats under one key.
    let sealed = cipher
        .encrypt(Nonce::from_slice(&[0u8; 12]), plaintext)
        .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
    let mut out = ephemeral.encode();
    out.extend(sealed);
    out
}

pub fn offer_decrypt(secret: Scalar, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < G1::encoded_len() {
        return Err(CryptoError::DecryptionFailure);
    }
    let (head, body) = ciphertext.split_at(G1::encoded_len());
    let ephemeral = G1::decode(head).ok_or(CryptoError::DecryptionFailure)?;
    let shared = (ephemeral * secret).into_affine();
    let cipher = ChaCha20Poly1305::new(&derive_key(&ephemeral, &shared));
    cipher
        .decrypt(Nonce::from_slice(&[0u8; 12]), body)
        .map_err(|_| CryptoError::DecryptionFailure)
}
