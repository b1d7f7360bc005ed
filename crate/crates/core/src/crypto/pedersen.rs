use std::ops::Add;

use ark_ec::CurveGroup;
use serde::{Deserialize, Serialize};

use super::group::{Canonical, PairingContext, Scalar, G1};

/// Pedersen commitment `g^m · h^r` in G1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedersenCommitment {
    #[serde(with = "crate::crypto::ser::hex_canonical")]
    pub point: G1,
}

impl PedersenCommitment {
    pub fn commit(ctx: &PairingContext, m: Scalar, r: Scalar) -> Self {
        let point = (ctx.g() * m + ctx.h() * r).into_affine();
        Self { point }
    }

    pub fn opens_to(&self, ctx: &PairingContext, m: Scalar, r: Scalar) -> bool {
        *self == Self::commit(ctx, m, r)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.point.encode()
    }

    /// `C · g^{-m}`; equals `h^r` when the commitment opens to `m`.
    pub fn strip_message(&self, ctx: &PairingContext, m: Scalar) -> G1 {
        (self.point - ctx.g() * m).into_affine()
    }
}

impl Add for PedersenCommitment {
    type Output = PedersenCommitment;

    fn add(self, rhs: Self) -> Self {
        Self {
            point: (self.point + rhs.point).into_affine(),
        }
    }
}

pub fn pedersen_commit(ctx: &PairingContext, m: Scalar, r: Scalar) -> PedersenCommitment {
    PedersenCommitment::commit(ctx, m, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ark_ec::AffineRepr;
    use ark_ff::Zero;
    use proptest::prelude::*;

    fn scalar() -> impl Strategy<Value = Scalar> {
        any::<[u8; 32]>().prop_map(|b| {
            use ark_ff::PrimeField;
            Scalar::from_be_bytes_mod_order(&b)
        })
    }

    #[test]
    fn zero_exponents_give_identity() {
        let ctx = PairingContext::global();
        let c = pedersen_commit(ctx, Scalar::zero(), Scalar::zero());
        assert!(c.point.is_zero());
    }

    #[test]
    fn zero_randomness_is_plain_exponentiation() {
        let ctx = PairingContext::global();
        let m = Scalar::from(123_456u64);
        assert_eq!(pedersen_commit(ctx, m, Scalar::zero()).point, ctx.g_mul(m));
    }

    #[test]
    fn strip_message_leaves_h_power() {
        let ctx = PairingContext::global();
        let (m, r) = (Scalar::from(9u64), Scalar::from(77u64));
        let c = pedersen_commit(ctx, m, r);
        assert_eq!(c.strip_message(ctx, m), (ctx.h() * r).into_affine());
        assert!(c.opens_to(ctx, m, r));
        assert!(!c.opens_to(ctx, m + Scalar::from(1u64), r));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn homomorphism(m1 in scalar(), r1 in scalar(), m2 in scalar(), r2 in scalar()) {
            let ctx = PairingContext::global();
            let lhs = pedersen_commit(ctx, m1, r1) + pedersen_commit(ctx, m2, r2);
            prop_assert_eq!(lhs, pedersen_commit(ctx, m1 + m2, r1 + r2));
        }
    }
}
