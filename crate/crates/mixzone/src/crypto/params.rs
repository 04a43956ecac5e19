use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::CryptoError;

/// Fixed big-endian width of a group element on the wire. Covers any
/// modulus up to 2^256, including the default prime.
pub const ELEM_BYTES: usize = 32;

/// The default 256-bit modulus, 2^256 - 189.
pub fn default_prime() -> BigUint {
    (BigUint::one() << 256u32) - BigUint::from(189u32)
}

/// Small modulus used by the self-check suites and unit tests.
pub fn test_prime() -> BigUint {
    BigUint::from(251u32)
}

/// Public chaotic-map parameters shared by every party: the prime
/// modulus `p` and the public seed point `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChebyParams {
    p: BigUint,
    x: BigUint,
}

impl ChebyParams {
    /// Validates `p` (probabilistic primality) and `2 <= x <= p - 2`.
    pub fn new(p: BigUint, x: BigUint) -> Result<Self, CryptoError> {
        if p < BigUint::from(2u32) || !is_probable_prime(&p) {
            return Err(CryptoError::InvalidParams("modulus is not prime"));
        }
        if x < BigUint::from(2u32) || x > &p - BigUint::from(2u32) {
            return Err(CryptoError::InvalidParams("seed out of range [2, p-2]"));
        }
        Ok(Self { p, x })
    }

    /// Builds parameters over `p` with a uniformly drawn public seed.
    pub fn generate<R: RngCore>(p: BigUint, rng: &mut R) -> Result<Self, CryptoError> {
        if p < BigUint::from(5u32) {
            return Err(CryptoError::InvalidParams("modulus too small to seed"));
        }
        // x uniform in [2, p-2]
        let x = random_below(rng, &(&p - BigUint::from(3u32))) + BigUint::from(2u32);
        Self::new(p, x)
    }

    pub fn prime(&self) -> &BigUint {
        &self.p
    }

    pub fn seed(&self) -> &BigUint {
        &self.x
    }
}

/// Big-endian encoding at the fixed element width, left-padded with
/// zeros. Panics if the value does not fit; protocol values are always
/// reduced mod p < 2^256 first.
pub fn elem_bytes(v: &BigUint) -> [u8; ELEM_BYTES] {
    let raw = v.to_bytes_be();
    assert!(raw.len() <= ELEM_BYTES, "element exceeds {ELEM_BYTES} bytes");
    let mut out = [0u8; ELEM_BYTES];
    out[ELEM_BYTES - raw.len()..].copy_from_slice(&raw);
    out
}

pub fn elem_from_bytes(bytes: &[u8; ELEM_BYTES]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

/// Uniform value in `[0, bound)` by rejection sampling from `rng`.
/// Panics if `bound` is zero.
pub fn random_below<R: RngCore>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty sampling range");
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let top_mask = if bits % 8 == 0 {
        0xffu8
    } else {
        (1u8 << (bits % 8)) - 1
    };
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[0] &= top_mask;
        let v = BigUint::from_bytes_be(&buf);
        if &v < bound {
            return v;
        }
    }
}

/// Miller-Rabin primality test: fixed small-prime bases plus rounds
/// with bases derived deterministically from the candidate, so repeated
/// checks of the same value always agree.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    const SMALL: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for q in SMALL {
        let q = BigUint::from(q);
        if n == &q {
            return true;
        }
        if (n % &q).is_zero() {
            return false;
        }
    }
    // n - 1 = d * 2^s with d odd
    let n_minus_1 = n - BigUint::one();
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut seed = [0u8; 32];
    let le = n.to_bytes_le();
    for (i, b) in le.iter().enumerate().take(32) {
        seed[i] = *b;
    }
    let mut base_rng = ChaCha20Rng::from_seed(seed);

    let witness = |a: &BigUint| -> bool {
        // true if a proves n composite
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            return false;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                return false;
            }
        }
        true
    };

    for q in SMALL {
        if witness(&BigUint::from(q)) {
            return false;
        }
    }
    for _ in 0..28 {
        let a = random_below(&mut base_rng, &(n - BigUint::from(3u32))) + &two;
        if witness(&a) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn default_prime_is_prime() {
        assert!(is_probable_prime(&default_prime()));
        assert!(is_probable_prime(&test_prime()));
    }

    #[test]
    fn composites_rejected() {
        for n in [0u32, 1, 4, 15, 249, 255, 1024] {
            assert!(!is_probable_prime(&BigUint::from(n)), "{n}");
        }
        // Carmichael number
        assert!(!is_probable_prime(&BigUint::from(561u32)));
        assert!(!is_probable_prime(
            &((BigUint::one() << 256u32) - BigUint::from(187u32))
        ));
    }

    #[test]
    fn params_validate_ranges() {
        let p = test_prime();
        assert!(ChebyParams::new(p.clone(), BigUint::from(2u32)).is_ok());
        assert!(ChebyParams::new(p.clone(), BigUint::from(249u32)).is_ok());
        assert!(ChebyParams::new(p.clone(), BigUint::from(1u32)).is_err());
        assert!(ChebyParams::new(p.clone(), BigUint::from(250u32)).is_err());
        assert!(ChebyParams::new(BigUint::from(250u32), BigUint::from(2u32)).is_err());
        let _ = p;
    }

    #[test]
    fn elem_roundtrip() {
        let v = BigUint::from(0x42abcdu32);
        let b = elem_bytes(&v);
        assert_eq!(b.len(), ELEM_BYTES);
        assert_eq!(elem_from_bytes(&b), v);
        assert_eq!(elem_bytes(&BigUint::zero()), [0u8; 32]);
    }

    #[test]
    fn random_below_in_range() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(9);
        let bound = BigUint::from(248u32);
        for _ in 0..500 {
            assert!(random_below(&mut rng, &bound) < bound);
        }
    }
}
