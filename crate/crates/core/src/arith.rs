//! Small-modulus number theory: primality, inverses, next prime.
//!
//! Everything here works on `u64` moduli with `u128` intermediates, which is
//! all the masking scheme needs for desk-scale support counts.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("{value} has no inverse modulo {modulus} (gcd = {gcd})")]
    NotInvertible { value: u64, modulus: u64, gcd: u64 },
    #[error("value {value} is outside (0, {modulus})")]
    OutOfRange { value: u64, modulus: u64 },
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for the full `u64` range.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime_above(n: u64) -> u64 {
    let mut candidate = n.checked_add(1).expect("no u64 prime above u64::MAX");
    while !is_prime(candidate) {
        candidate += 1;
    }
    candidate
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Multiplicative inverse of `value` modulo `modulus` by the extended
/// Euclidean algorithm.
pub fn mod_inverse(value: u64, modulus: u64) -> Result<u64, ArithError> {
    if value == 0 || value >= modulus {
        return Err(ArithError::OutOfRange { value, modulus });
    }
    let (mut old_r, mut r) = (value as i128, modulus as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(ArithError::NotInvertible {
            value,
            modulus,
            gcd: old_r as u64,
        });
    }
    Ok(old_s.rem_euclid(modulus as i128) as u64)
}
