//! Operation accounting. Every protocol step routes its primitive
//! calls through an [`OpCounters`] instrument so per-phase, per-role
//! cost tables can be reported without guessing.

use num_bigint::BigUint;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::{
    cheby_eval, hash_fields, sym_decrypt, sym_encrypt, ChebyParams, ChebySecret, CryptoError,
    Digest,
};

/// Monotone counters for hash, Chebyshev, symmetric-cipher and RNG
/// operations.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounters {
    pub hash_ops: u64,
    pub cheby_evals: u64,
    pub sym_ops: u64,
    pub rng_draws: u64,
}

impl OpCounters {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counted wrapper around [`hash_fields`].
    pub fn hash(&mut self, fields: &[&[u8]]) -> Digest {
        self.hash_ops += 1;
        hash_fields(fields)
    }

    /// Counted wrapper around [`cheby_eval`].
    pub fn cheby(
        &mut self,
        n: &BigUint,
        y: &BigUint,
        params: &ChebyParams,
    ) -> Result<BigUint, CryptoError> {
        self.cheby_evals += 1;
        cheby_eval(n, y, params)
    }

    /// Counted encryption; the fresh nonce is booked as one RNG draw.
    pub fn sym_encrypt<R: RngCore>(
        &mut self,
        key: &[u8; 32],
        plaintext: &[u8],
        rng: &mut R,
    ) -> Vec<u8> {
        self.sym_ops += 1;
        self.rng_draws += 1;
        sym_encrypt(key, plaintext, rng)
    }

    pub fn sym_decrypt(&mut self, key: &[u8; 32], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        self.sym_ops += 1;
        sym_decrypt(key, ciphertext)
    }

    /// One fresh fixed-width random value.
    pub fn random_array<const N: usize, R: RngCore>(&mut self, rng: &mut R) -> [u8; N] {
        self.rng_draws += 1;
        let mut out = [0u8; N];
        rng.fill_bytes(&mut out);
        out
    }

    /// One fresh secret exponent in `[2, p-2]`.
    pub fn random_secret<R: RngCore>(&mut self, params: &ChebyParams, rng: &mut R) -> ChebySecret {
        self.rng_draws += 1;
        ChebySecret::random(params, rng)
    }

    pub fn merge(&mut self, other: &OpCounters) {
        self.hash_ops += other.hash_ops;
        self.cheby_evals += other.cheby_evals;
        self.sym_ops += other.sym_ops;
        self.rng_draws += other.rng_draws;
    }

    pub fn total(&self) -> u64 {
        self.hash_ops + self.cheby_evals + self.sym_ops + self.rng_draws
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn wrappers_count_and_delegate() {
        let params = ChebyParams::new(crate::crypto::test_prime(), BigUint::from(2u32)).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut m = OpCounters::new();

        let d = m.hash(&[b"x"]);
        assert_eq!(d, hash_fields(&[b"x"]));
        let v = m.cheby(&BigUint::one(), &BigUint::from(7u32), &params).unwrap();
        assert_eq!(v, BigUint::from(7u32));
        let ct = m.sym_encrypt(&[1u8; 32], b"m", &mut rng);
        assert_eq!(m.sym_decrypt(&[1u8; 32], &ct).unwrap(), b"m");
        let _: [u8; 16] = m.random_array(&mut rng);
        let _ = m.random_secret(&params, &mut rng);

        assert_eq!(
            m,
            OpCounters { hash_ops: 1, cheby_evals: 1, sym_ops: 2, rng_draws: 3 }
        );

        let mut sum = OpCounters::new();
        sum.merge(&m);
        sum.merge(&m);
        assert_eq!(sum.total(), 2 * m.total());
    }
}
