//! Mask / mix / unmask over a prime modulus.
//!
//! Each site hides its count `c` as `alpha = (c * r + n_i) mod p`. The mixer
//! adds the alphas as plain integers and every site recovers
//! `(epsilon - sum(n_i)) * r^-1 mod p`, which equals the sum of the counts as
//! long as that sum stays below `p`.

use thiserror::Error;

use crate::arith::{self, mul_mod};

/// Largest supported chunk width. Residues and alphas live in `u64`.
pub const MAX_BIT_LENGTH: u32 = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SecureSumError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {modulus} does not exceed the count bound {bound}")]
    ModulusTooSmall { modulus: u64, bound: u64 },
    #[error("modulus {modulus} does not fit in {bit_length} bits")]
    BitLengthTooSmall { modulus: u64, bit_length: u32 },
    #[error("bit length {0} exceeds the supported maximum of {MAX_BIT_LENGTH}")]
    BitLengthTooLarge(u32),
    #[error("{0} sites configured; at least 3 are required")]
    TooFewSites(u16),
    #[error("count {count} is not below the modulus {modulus}")]
    CountOutOfRange { count: u64, modulus: u64 },
    #[error("site index {index} outside 1..={site_count}")]
    SiteIndexOutOfRange { index: u16, site_count: u16 },
    #[error("masked values disagree on round or item index")]
    RoundMismatch,
    #[error("expected {expected} masked values, got {got}")]
    IncompleteSet { expected: usize, got: usize },
    #[error("got {got} masked values but only {expected} sites exist")]
    SurplusValues { expected: usize, got: usize },
    #[error("invalid iteration keys: {0}")]
    BadKeys(String),
    #[error(transparent)]
    Arith(#[from] arith::ArithError),
}

/// Public group parameters shared by sites (and, harmlessly, the mixer).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupParams {
    modulus: u64,
    bit_length: u32,
    site_count: u16,
}

impl GroupParams {
    /// Skips every check. Used for worked examples with a composite modulus.
    pub fn new_unchecked(modulus: u64, bit_length: u32, site_count: u16) -> Self {
        Self {
            modulus,
            bit_length,
            site_count,
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    pub fn site_count(&self) -> u16 {
        self.site_count
    }

    /// Upper bound on any aggregate: `N * (p - 1)`.
    pub fn max_aggregate(&self) -> u128 {
        self.site_count as u128 * (self.modulus as u128 - 1)
    }
}

pub fn validate_params(
    modulus: u64,
    bit_length: u32,
    site_count: u16,
    count_bound: u64,
) -> Result<GroupParams, SecureSumError> {
    if !arith::is_prime(modulus) {
        return Err(SecureSumError::NotPrime(modulus));
    }
    if modulus <= count_bound {
        return Err(SecureSumError::ModulusTooSmall {
            modulus,
            bound: count_bound,
        });
    }
    if bit_length > MAX_BIT_LENGTH {
        return Err(SecureSumError::BitLengthTooLarge(bit_length));
    }
    if modulus >= 1u64 << bit_length {
        return Err(SecureSumError::BitLengthTooSmall {
            modulus,
            bit_length,
        });
    }
    if site_count < 3 {
        return Err(SecureSumError::TooFewSites(site_count));
    }
    Ok(GroupParams {
        modulus,
        bit_length,
        site_count,
    })
}

/// Masking material for one `(round, item_index)` slot.
#[derive(Clone, PartialEq, Eq)]
pub struct IterationKeys {
    round: u32,
    item_index: u32,
    r: u64,
    r_inv: u64,
    nonces: Vec<u64>,
    nonce_sum: u128,
}

impl std::fmt::Debug for IterationKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IterationKeys")
            .field("round", &self.round)
            .field("item_index", &self.item_index)
            .finish_non_exhaustive()
    }
}

impl IterationKeys {
    /// Builds keys from a multiplier and one nonce per site; computes `r^-1`
    /// and the unreduced nonce sum.
    pub fn new(
        round: u32,
        item_index: u32,
        r: u64,
        nonces: Vec<u64>,
        params: &GroupParams,
    ) -> Result<Self, SecureSumError> {
        if nonces.len() != params.site_count as usize {
            return Err(SecureSumError::BadKeys(format!(
                "{} nonces for {} sites",
                nonces.len(),
                params.site_count
            )));
        }
        if let Some(n) = nonces.iter().find(|&&n| n >= params.modulus) {
            return Err(SecureSumError::BadKeys(format!(
                "nonce {n} not reduced modulo {}",
                params.modulus
            )));
        }
        let r_inv = arith::mod_inverse(r, params.modulus)?;
        let nonce_sum = nonces.iter().map(|&n| n as u128).sum();
        Ok(Self {
            round,
            item_index,
            r,
            r_inv,
            nonces,
            nonce_sum,
        })
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn item_index(&self) -> u32 {
        self.item_index
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn r_inv(&self) -> u64 {
        self.r_inv
    }

    pub fn nonces(&self) -> &[u64] {
        &self.nonces
    }

    pub fn nonce_sum(&self) -> u128 {
        self.nonce_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedValue {
    pub round: u32,
    pub item_index: u32,
    pub alpha: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregateCiphertext {
    pub round: u32,
    pub item_index: u32,
    /// Plain integer sum of the alphas; never reduced.
    pub epsilon: u128,
}

/// `site_index` is 1-based.
pub fn mask(
    count: u64,
    keys: &IterationKeys,
    site_index: u16,
    params: &GroupParams,
) -> Result<MaskedValue, SecureSumError> {
    if count >= params.modulus {
        return Err(SecureSumError::CountOutOfRange {
            count,
            modulus: params.modulus,
        });
    }
    if site_index == 0 || site_index > params.site_count {
        return Err(SecureSumError::SiteIndexOutOfRange {
            index: site_index,
            site_count: params.site_count,
        });
    }
    let nonce = keys.nonces[site_index as usize - 1];
    let alpha =
        (mul_mod(count, keys.r, params.modulus) as u128 + nonce as u128) % params.modulus as u128;
    Ok(MaskedValue {
        round: keys.round,
        item_index: keys.item_index,
        alpha: alpha as u64,
    })
}

pub fn mix(values: &[MaskedValue], site_count: u16) -> Result<AggregateCiphertext, SecureSumError> {
    let expected = site_count as usize;
    if values.len() < expected {
        return Err(SecureSumError::IncompleteSet {
            expected,
            got: values.len(),
        });
    }
    if values.len() > expected {
        return Err(SecureSumError::SurplusValues {
            expected,
            got: values.len(),
        });
    }
    let (round, item_index) = (values[0].round, values[0].item_index);
    if values
        .iter()
        .any(|v| v.round != round || v.item_index != item_index)
    {
        return Err(SecureSumError::RoundMismatch);
    }
    Ok(AggregateCiphertext {
        round,
        item_index,
        epsilon: values.iter().map(|v| v.alpha as u128).sum(),
    })
}

pub fn unmask(
    agg: &AggregateCiphertext,
    keys: &IterationKeys,
    params: &GroupParams,
) -> Result<u64, SecureSumError> {
    if agg.round != keys.round || agg.item_index != keys.item_index {
        return Err(SecureSumError::RoundMismatch);
    }
    let modulus = params.modulus as i128;
    let shifted = (agg.epsilon as i128 - keys.nonce_sum as i128).rem_euclid(modulus);
    Ok(mul_mod(shifted as u64, keys.r_inv, params.modulus))
}
