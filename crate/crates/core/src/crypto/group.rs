//! Pairing-group aliases, canonical encodings and hashing into the groups.
//!
//! Every group element and scalar has exactly one fixed-length byte encoding
//! (see [`Canonical`]). Hashing, signing and the Fiat-Shamir transform consume
//! only these encodings, so they are part of the stable wire format:
//!
//! | type     | bytes | encoding                                   |
//! |----------|-------|--------------------------------------------|
//! | `Scalar` | 32    | big-endian, fully reduced mod the order    |
//! | `G1`     | 48    | compressed point (zcash/arkworks flags)    |
//! | `G2`     | 96    | compressed point                           |
//! | `Gt`     | 576   | 12 base-field limbs, arkworks canonical    |

use std::sync::OnceLock;

use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::short_weierstrass::{Affine, SWCurveConfig};
use ark_ec::{AffineRepr, CurveGroup};
use ark_ff::PrimeField;
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use sha2::{Digest, Sha512};

/// The pairing-friendly curve every other module is written against.
///
/// Swapping curves means changing these aliases together.
pub type Curve = ark_bls12_381::Bls12_381;
pub type G1Config = ark_bls12_381::g1::Config;

pub type Scalar = ark_bls12_381::Fr;
pub type G1 = ark_bls12_381::G1Affine;
pub type G1Projective = ark_bls12_381::G1Projective;
pub type G2 = ark_bls12_381::G2Affine;
pub type Gt = PairingOutput<Curve>;

const SCALAR_DST: &[u8] = b"RIDESHARE-V1/hash-to-scalar";
const H_GENERATOR_DST: &[u8] = b"RIDESHARE-V1/pedersen-h";

/// Fixed-length canonical byte encoding.
pub trait Canonical: Sized {
    fn encoded_len() -> usize;

    fn encode(&self) -> Vec<u8>;

    /// Rejects non-canonical input (wrong length, unreduced scalars, points
    /// off the curve or outside the prime-order subgroup).
    fn decode(bytes: &[u8]) -> Option<Self>;
}

impl Canonical for Scalar {
    fn encoded_len() -> usize {
        32
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::encoded_len());
        self.serialize_compressed(&mut out)
            .expect("scalar serialization into a Vec cannot fail");
        out.reverse();
        out
    }

    fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::encoded_len() {
            return None;
        }
        let mut le = bytes.to_vec();
        le.reverse();
        Scalar::deserialize_compressed(le.as_slice()).ok()
    }
}

fn encode_compressed<T: CanonicalSerialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(value.compressed_size());
    value
        .serialize_compressed(&mut out)
        .expect("serialization into a Vec cannot fail");
    out
}

impl<C: SWCurveConfig> Canonical for Affine<C> {
    fn encoded_len() -> usize {
        Affine::<C>::generator().compressed_size()
    }

    fn encode(&self) -> Vec<u8> {
        encode_compressed(self)
    }

    fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::encoded_len() {
            return None;
        }
        Self::deserialize_compressed(bytes).ok()
    }
}

impl Canonical for Gt {
    fn encoded_len() -> usize {
        576
    }

    fn encode(&self) -> Vec<u8> {
        encode_compressed(self)
    }

    fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != Self::encoded_len() {
            return None;
        }
        Self::deserialize_compressed(bytes).ok()
    }
}

/// Hashes arbitrary bytes to a scalar: SHA-512 over a domain tag and the
/// input, reduced mod the group order. The 512-bit digest keeps the
/// reduction bias negligible.
pub fn hash_to_scalar(bytes: &[u8]) -> Scalar {
    let digest = Sha512::new()
        .chain_update(SCALAR_DST)
        .chain_update((bytes.len() as u64).to_be_bytes())
        .chain_update(bytes)
        .finalize();
    Scalar::from_be_bytes_mod_order(&digest)
}

/// Hash-to-group by try-and-increment followed by cofactor clearing.
///
/// Not constant time; only used on public seeds.
pub fn hash_to_g1<C: SWCurveConfig>(dst: &[u8], seed: &[u8]) -> Affine<C>
where
    C::BaseField: PrimeField,
{
    for counter in 0u32.. {
        let digest = Sha512::new()
            .chain_update(dst)
            .chain_update(seed)
            .chain_update(counter.to_be_bytes())
            .finalize();
        let x = C::BaseField::from_be_bytes_mod_order(&digest);
        let Some(point) = Affine::<C>::get_point_from_x_unchecked(x, digest[0] & 1 == 1) else {
            continue;
        };
        let point = point.clear_cofactor();
        if !point.is_zero() && point.is_in_correct_subgroup_assuming_on_curve() {
            return point;
        }
    }
    unreachable!("try-and-increment exhausted the counter space")
}

/// Group parameters shared by all parties: the order, both G1 generators,
/// the G2 generator and the precomputed pairing of the generators.
///
/// The pairing is asymmetric (`e: G1 × G2 → GT`). Values playing the role
/// of the set-issuer public key live in G2; everything else lives in G1.
#[derive(Clone, Debug)]
pub struct PairingContext {
    g: G1,
    h: G1,
    g2: G2,
    gt: Gt,
}

impl PairingContext {
    fn build() -> Self {
        let g = G1::generator();
        let g2 = G2::generator();
        let h = hash_to_g1::<G1Config>(H_GENERATOR_DST, b"second generator");
        let gt = Curve::pairing(g, g2);
        Self { g, h, g2, gt }
    }

    /// The process-wide context. Construction is deterministic, so every
    /// party derives the same `h`.
    pub fn global() -> &'static PairingContext {
        static CTX: OnceLock<PairingContext> = OnceLock::new();
        CTX.get_or_init(Self::build)
    }

    pub fn g(&self) -> G1 {
        self.g
    }

    /// Second G1 generator, derived from a public seed so nobody knows
    /// `log_g(h)`.
    pub fn h(&self) -> G1 {
        self.h
    }

    pub fn g2(&self) -> G2 {
        self.g2
    }

    /// `e(g, g2)`.
    pub fn gt(&self) -> Gt {
        self.gt
    }

    /// Bit length of the prime group order.
    pub fn order_bits(&self) -> u32 {
        Scalar::MODULUS_BIT_SIZE
    }

    pub fn pairing(&self, a: G1, b: G2) -> Gt {
        Curve::pairing(a, b)
    }

    pub fn g_mul(&self, k: Scalar) -> G1 {
        (self.g * k).into_affine()
    }

    pub fn g2_mul(&self, k: Scalar) -> G2 {
        (self.g2 * k).into_affine()
    }
}
