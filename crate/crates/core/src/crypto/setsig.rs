//! Boneh-Boyen style signatures on set elements: `A_i = g^{1/(x+i)}`.
//!
//! The issuer key `y = g2^x` lives in G2 and signatures live in G1, so the
//! check reads `e(A_i, y · g2^i) = e(g, g2)`.

use ark_ec::CurveGroup;
use ark_ff::Field;
use serde::{Deserialize, Serialize};

use super::group::{PairingContext, Scalar, G1, G2};
use super::CryptoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetSignature {
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub element: Scalar,
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub sig: G1,
}

/// Signs `element` under issuer secret `x`. Fails when `x + element ≡ 0`,
/// in which case the caller must pick a fresh `x`.
pub fn set_sign(ctx: &PairingContext, x: Scalar, element: Scalar) -> Result<SetSignature, CryptoError> {
    let inv = (x + element).inverse().ok_or(CryptoError::DegenerateElement)?;
    Ok(SetSignature {
        element,
        sig: (ctx.g() * inv).into_affine(),
    })
}

pub fn set_verify(ctx: &PairingContext, y: G2, element: Scalar, sig: G1) -> bool {
    let shifted = (y + ctx.g2() * element).into_affine();
    ctx.pairing(sig, shifted) == ctx.gt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ark_ec::AffineRepr;
    use ark_std::UniformRand;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn completeness_over_samples() {
        let ctx = PairingContext::global();
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for _ in 0..32 {
            let x = Scalar::rand(&mut rng);
            let i = Scalar::rand(&mut rng);
            let s = set_sign(ctx, x, i).unwrap();
            assert!(set_verify(ctx, ctx.g2_mul(x), i, s.sig));
        }
    }

    #[test]
    fn forced_singularity() {
        let ctx = PairingContext::global();
        let i = Scalar::from(42u64);
        let x = -i;
        assert_eq!(set_sign(ctx, x, i), Err(CryptoError::DegenerateElement));
    }

    #[test]
    fn tampered_signature_rejected() {
        let ctx = PairingContext::global();
        let (x, i) = (Scalar::from(1000u64), Scalar::from(7u64));
        let s = set_sign(ctx, x, i).unwrap();
        let y = ctx.g2_mul(x);
        let tampered = (s.sig + ctx.g()).into_affine();
        // Direct recomputation: e(A·g, y·g2^i) = e(g,g2)^{1 + (x+i)} ≠ e(g,g2).
        let expected = ctx.gt() * (Scalar::from(1u64) + x + i);
        assert_eq!(ctx.pairing(tampered, (y + ctx.g2() * i).into_affine()), expected);
        assert!(!set_verify(ctx, y, i, tampered));
    }

    #[test]
    fn wrong_element_rejected() {
        let ctx = PairingContext::global();
        let (x, i) = (Scalar::from(31337u64), Scalar::from(5u64));
        let s = set_sign(ctx, x, i).unwrap();
        let y = ctx.g2_mul(x);
        let other = Scalar::from(6u64);
        // e(A_i, y g2^{i'}) = e(g,g2)^{(x+i')/(x+i)}
        let ratio = (x + other) * (x + i).inverse().unwrap();
        assert_eq!(ctx.pairing(s.sig, (y + ctx.g2() * other).into_affine()), ctx.gt() * ratio);
        assert!(!set_verify(ctx, y, other, s.sig));
    }

    #[test]
    fn identity_signature_rejected() {
        let ctx = PairingContext::global();
        let y = ctx.g2_mul(Scalar::from(99u64));
        for i in 0..8u64 {
            assert!(!set_verify(ctx, y, Scalar::from(i), G1::zero()));
        }
        assert!(G1::zero().is_zero());
    }
}
