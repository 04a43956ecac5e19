//! Self-check suites for the Chebyshev core: the exhaustive semigroup
//! sweep at p = 251 against a plain-recurrence table, and
//! ladder-vs-recurrence equivalence at both moduli.

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::crypto::{cheby_eval, cheby_eval_naive, default_prime, random_below, test_prime,
    ChebyParams};

const P: u64 = 251;
/// Table depth: covers every degree product n*m for n, m <= 300 and
/// the n <= 10^5 equivalence range.
const MAX_DEGREE: usize = 100_000;

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct SelftestReport {
    pub semigroup_triples: u64,
    pub semigroup_failures: u64,
    pub ladder_checks: u64,
    pub ladder_failures: u64,
    pub elapsed_ms: u128,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.semigroup_failures == 0 && self.ladder_failures == 0
    }
}

/// T_k(y) mod 251 for every y in [0, 250] and k in [0, MAX_DEGREE],
/// built with the plain linear recurrence. Layout: `tab[y * K + k]`.
fn recurrence_table() -> Vec<u8> {
    let k_len = MAX_DEGREE + 1;
    let mut tab = vec![0u8; 251 * k_len];
    for y in 0..251u64 {
        let row = y as usize * k_len;
        tab[row] = 1;
        if k_len > 1 {
            tab[row + 1] = y as u8;
        }
        let mut t0 = 1u64;
        let mut t1 = y;
        for k in 2..k_len {
            let t2 = (2 * y * t1 + P - t0 % P) % P;
            t0 = t1;
            t1 = t2;
            tab[row + k] = t2 as u8;
        }
    }
    tab
}

/// Exhaustive semigroup and commutativity sweep:
/// T_n(T_m(y)) = T_{nm}(y) = T_m(T_n(y)) for all n, m in [0, 300]
/// and y in [0, 250], plus ladder spot checks against the table.
pub fn run_selftest(seed: u64) -> SelftestReport {
    let start = std::time::Instant::now();
    let k_len = MAX_DEGREE + 1;
    let tab = recurrence_table();

    let mut triples = 0u64;
    let mut semigroup_failures = 0u64;
    for y in 0..251usize {
        let row = y * k_len;
        for n in 0..=300usize {
            let t_n = tab[row + n] as usize;
            for m in 0..=300usize {
                let t_m = tab[row + m] as usize;
                let direct = tab[row + n * m];
                let via_m = tab[t_m * k_len + n];
                let via_n = tab[t_n * k_len + m];
                if direct != via_m || direct != via_n {
                    semigroup_failures += 1;
                }
                triples += 1;
            }
        }
    }

    // fast ladder against the recurrence table: the full degree range
    // sampled, plus every degree up to 300 on a few points
    let params = ChebyParams::new(test_prime(), BigUint::from(2u32)).expect("251 is prime");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ladder_checks = 0u64;
    let mut ladder_failures = 0u64;
    let mut check = |n: usize, y: usize, tab: &[u8]| -> bool {
        let got = cheby_eval(&BigUint::from(n), &BigUint::from(y), &params)
            .expect("y < p by construction");
        got == BigUint::from(tab[y * k_len + n])
    };
    for n in 0..=300usize {
        for y in [0usize, 1, 2, 17, 128, 250] {
            if !check(n, y, &tab) {
                ladder_failures += 1;
            }
            ladder_checks += 1;
        }
    }
    for _ in 0..1_000 {
        let n = rng.gen_range(0..=MAX_DEGREE);
        let y = rng.gen_range(0..251usize);
        if !check(n, y, &tab) {
            ladder_failures += 1;
        }
        ladder_checks += 1;
    }

    SelftestReport {
        semigroup_triples: triples,
        semigroup_failures,
        ladder_checks,
        ladder_failures,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

/// Ladder-vs-recurrence equivalence at the 256-bit default modulus:
/// `trials` random (n <= 10^5, y) pairs. Returns the failure count.
pub fn ladder_equivalence_default_prime(trials: u64, seed: u64) -> u64 {
    let params =
        ChebyParams::new(default_prime(), BigUint::from(2u32)).expect("default prime ships");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut failures = 0u64;
    for _ in 0..trials {
        let n = rng.gen_range(0..=100_000u64);
        let y = random_below(&mut rng, params.prime());
        let fast = cheby_eval(&BigUint::from(n), &y, &params).expect("y reduced");
        let slow = cheby_eval_naive(n, &y, &params).expect("y reduced");
        if fast != slow {
            failures += 1;
        }
    }
    failures
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_known_values() {
        let tab = recurrence_table();
        let k_len = MAX_DEGREE + 1;
        // T_5(2) = 362 mod 251 = 111, T_6(2) = 96
        assert_eq!(tab[2 * k_len + 5], 111);
        assert_eq!(tab[2 * k_len + 6], 96);
        assert_eq!(tab[26 * k_len + 2], 96); // T_2(T_3(2))
    }

    #[test]
    fn default_prime_equivalence_smoke() {
        assert_eq!(ladder_equivalence_default_prime(3, 42), 0);
    }
}
