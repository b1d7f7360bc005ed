//! Wall-clock measurement of set-membership setup, audit, proving and
//! verification.

use std::time::Instant;

use ark_ff::UniformRand;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::crypto::{PairingContext, Scalar};
use crate::zksm::{zksm_audit, zksm_commit_location, zksm_prove, zksm_setup, zksm_verify, MembershipProof, ZksmError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseStats {
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl PhaseStats {
    pub fn from_samples(ms: &[f64]) -> Self {
        if ms.is_empty() {
            return Self::default();
        }
        let n = ms.len() as f64;
        let mean = ms.iter().sum::<f64>() / n;
        let var = if ms.len() > 1 { ms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean_ms: mean, stddev_ms: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub k: usize,
    pub reps: usize,
    pub setup: PhaseStats,
    pub audit: PhaseStats,
    pub prove: PhaseStats,
    pub verify: PhaseStats,
    pub proof_bytes: usize,
    pub all_verified: bool,
}

/// Runs `reps` fresh setups of size `k`, each audited, then one proof for
/// a member and its verification.
pub fn bench_zksm(k: usize, reps: usize, seed: u64) -> Result<BenchResult, ZksmError> {
    if k < 2 {
        return Err(ZksmError::SetTooSmall(k));
    }
    let ctx = PairingContext::global();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let reps = reps.max(1);
    let (mut setup, mut audit, mut prove, mut verify) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut all_verified = true;
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1e3;
    for rep in 0..reps {
        let elements: Vec<Scalar> = (0..k).map(|_| Scalar::rand(&mut rng)).collect();
        let t = Instant::now();
        let s = zksm_setup(ctx, &elements, &mut rng)?;
        setup.push(ms(t));
        let t = Instant::now();
        all_verified &= zksm_audit(ctx, &s);
        audit.push(ms(t));
        let element = elements[rep % k];
        let c = zksm_commit_location(ctx, element, &mut rng);
        let t = Instant::now();
        let proof = zksm_prove(ctx, &s, element, c.blinding, c.commitment, &mut rng)?;
        prove.push(ms(t));
        let t = Instant::now();
        all_verified &= zksm_verify(ctx, s.y, &proof);
        verify.push(ms(t));
    }
    Ok(BenchResult {
        k,
        reps,
        setup: PhaseStats::from_samples(&setup),
        audit: PhaseStats::from_samples(&audit),
        prove: PhaseStats::from_samples(&prove),
        verify: PhaseStats::from_samples(&verify),
        proof_bytes: MembershipProof::encoded_len(),
        all_verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_stats() {
        let s = PhaseStats::from_samples(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean_ms, 2.0);
        assert_eq!(s.stddev_ms, 1.0);
        assert_eq!(PhaseStats::from_samples(&[4.0]).stddev_ms, 0.0);
    }

    #[test]
    fn small_bench_verifies() {
        let r = bench_zksm(4, 2, 1).unwrap();
        assert!(r.all_verified);
        assert_eq!(r.proof_bytes, 848);
        assert!(bench_zksm(1, 1, 1).is_err());
    }
}
