//! Shared keystream and per-slot key schedule.
//!
//! Every site runs an identical generator keyed by the seed, so all of them
//! slice the same `l * (1 + N)`-bit chunk for a given slot: the first `l` bits
//! become the multiplier `r`, the following `N` groups of `l` bits become the
//! per-site nonces. Bits are consumed MSB-first.

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use thiserror::Error;

use crate::secure_sum::{GroupParams, IterationKeys};

/// 80-bit seed.
pub const DEFAULT_SEED_BYTES: usize = 10;
const AES_BLOCK: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeystreamError {
    #[error("seed is {got} bytes, expected {expected}")]
    BadSeedLength { expected: usize, got: usize },
    #[error("seed hex is malformed: {0}")]
    BadSeedHex(String),
    #[error("generator constant is {0} bytes; at most 15 are supported")]
    BadConstantLength(usize),
    #[error("slot ({round}, {item_index}) requested after ({last_round}, {last_item})")]
    OutOfOrder {
        round: u32,
        item_index: u32,
        last_round: u32,
        last_item: u32,
    },
    #[error("key schedule is for l={config_bits}, N={config_sites} but params have l={param_bits}, N={param_sites}")]
    ConfigMismatch {
        config_bits: u32,
        config_sites: u16,
        param_bits: u32,
        param_sites: u16,
    },
}

/// The shared secret `mu`. Deliberately not serializable and redacted in
/// `Debug` output.
#[derive(Clone, PartialEq, Eq)]
pub struct Seed(Vec<u8>);

impl Seed {
    pub fn new(bytes: Vec<u8>, expected_len: usize) -> Result<Self, KeystreamError> {
        if bytes.len() != expected_len || bytes.is_empty() || bytes.len() > AES_BLOCK {
            return Err(KeystreamError::BadSeedLength {
                expected: expected_len,
                got: bytes.len(),
            });
        }
        Ok(Self(bytes))
    }

    pub fn from_hex(hex_str: &str, expected_len: usize) -> Result<Self, KeystreamError> {
        let bytes =
            hex::decode(hex_str.trim()).map_err(|e| KeystreamError::BadSeedHex(e.to_string()))?;
        Self::new(bytes, expected_len)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl std::fmt::Debug for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Seed(<{} bytes redacted>)", self.0.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyScheduleConfig {
    bit_length: u32,
    site_count: u16,
    chunk_bits: usize,
}

impl KeyScheduleConfig {
    pub fn new(bit_length: u32, site_count: u16) -> Self {
        Self {
            bit_length,
            site_count,
            chunk_bits: bit_length as usize * (1 + site_count as usize),
        }
    }

    pub fn for_params(params: &GroupParams) -> Self {
        Self::new(params.bit_length(), params.site_count())
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    pub fn site_count(&self) -> u16 {
        self.site_count
    }

    pub fn chunk_bits(&self) -> usize {
        self.chunk_bits
    }
}

/// Source of raw keystream bytes.
pub trait Keystream: Send {
    fn fill(&mut self, buf: &mut [u8]);

    fn id(&self) -> &'static str;
}

/// AES-128 in output feedback mode: the constant seeds the feedback register
/// and each encryption of the register yields the next 16 keystream bytes.
pub struct OfbKeystream {
    cipher: Aes128,
    register: [u8; AES_BLOCK],
    block: [u8; AES_BLOCK],
    used: usize,
}

impl OfbKeystream {
    pub const ID: &'static str = "aes128-ofb-v1";

    /// The seed is zero-padded to a 128-bit key. The initial register is
    /// `[len(constant)] || constant || 0...`.
    pub fn new(seed: &Seed, constant: &[u8]) -> Result<Self, KeystreamError> {
        if constant.len() >= AES_BLOCK {
            return Err(KeystreamError::BadConstantLength(constant.len()));
        }
        let mut key = [0u8; AES_BLOCK];
        key[..seed.0.len()].copy_from_slice(&seed.0);
        let mut register = [0u8; AES_BLOCK];
        register[0] = constant.len() as u8;
        register[1..=constant.len()].copy_from_slice(constant);
        Ok(Self {
            cipher: Aes128::new(&GenericArray::from(key)),
            register,
            block: [0; AES_BLOCK],
            used: AES_BLOCK,
        })
    }
}

impl Keystream for OfbKeystream {
    fn fill(&mut self, buf: &mut [u8]) {
        for out in buf {
            if self.used == AES_BLOCK {
                let mut b = GenericArray::from(self.register);
                self.cipher.encrypt_block(&mut b);
                self.register.copy_from_slice(&b);
                self.block = self.register;
                self.used = 0;
            }
            *out = self.block[self.used];
            self.used += 1;
        }
    }

    fn id(&self) -> &'static str {
        Self::ID
    }
}

/// Replays a recorded byte stream. Panics once the recording runs out.
pub struct FixedKeystream {
    bytes: Vec<u8>,
    pos: usize,
}

impl FixedKeystream {
    pub fn new(bytes: Vec<u8>) -> Self {
        Self { bytes, pos: 0 }
    }
}

impl Keystream for FixedKeystream {
    fn fill(&mut self, buf: &mut [u8]) {
        let end = self.pos + buf.len();
        assert!(end <= self.bytes.len(), "fixed keystream exhausted");
        buf.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
    }

    fn id(&self) -> &'static str {
        "fixed"
    }
}

/// A bit string of exactly `bits` bits, packed MSB-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    bits: usize,
    bytes: Vec<u8>,
}

impl Chunk {
    pub fn from_bytes(bytes: Vec<u8>, bits: usize) -> Self {
        assert!(bits <= bytes.len() * 8);
        Self { bits, bytes }
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Big-endian value of bits `[offset, offset + len)`, `len <= 64`.
    pub fn field(&self, offset: usize, len: usize) -> u64 {
        assert!(len <= 64 && offset + len <= self.bits);
        (offset..offset + len).fold(0u64, |acc, bit| {
            let set = self.bytes[bit / 8] >> (7 - bit % 8) & 1;
            (acc << 1) | set as u64
        })
    }
}

/// Sequential bit reader over a [`Keystream`]. Not shareable between
/// consumers; each site owns its own.
pub struct StreamGenerator {
    source: Box<dyn Keystream>,
    current: u8,
    bits_left: u8,
    consumed_bits: u64,
    last_slot: Option<(u32, u32)>,
}

impl std::fmt::Debug for StreamGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StreamGenerator")
            .field("source", &self.source.id())
            .field("consumed_bits", &self.consumed_bits)
            .finish()
    }
}

pub fn init_generator(seed: &Seed, constant: &[u8]) -> Result<StreamGenerator, KeystreamError> {
    Ok(StreamGenerator::from_source(Box::new(OfbKeystream::new(
        seed, constant,
    )?)))
}

/// The constant fed to the generator when it is derived from the modulus.
pub fn modulus_constant(modulus: u64) -> Vec<u8> {
    modulus.to_be_bytes().to_vec()
}

impl StreamGenerator {
    pub fn from_source(source: Box<dyn Keystream>) -> Self {
        Self {
            source,
            current: 0,
            bits_left: 0,
            consumed_bits: 0,
            last_slot: None,
        }
    }

    pub fn consumed_bits(&self) -> u64 {
        self.consumed_bits
    }

    fn next_bit(&mut self) -> u8 {
        if self.bits_left == 0 {
            let mut byte = [0u8];
            self.source.fill(&mut byte);
            self.current = byte[0];
            self.bits_left = 8;
        }
        self.bits_left -= 1;
        self.consumed_bits += 1;
        (self.current >> self.bits_left) & 1
    }

    /// Reads `bits` bits from the stream.
    pub fn read_bits(&mut self, bits: usize) -> Chunk {
        let mut bytes = vec![0u8; bits.div_ceil(8)];
        if self.bits_left == 0 && bits.is_multiple_of(8) {
            self.source.fill(&mut bytes);
            self.consumed_bits += bits as u64;
            return Chunk { bits, bytes };
        }
        for i in 0..bits {
            bytes[i / 8] |= self.next_bit() << (7 - i % 8);
        }
        Chunk { bits, bytes }
    }

    pub fn next_chunk(&mut self, config: &KeyScheduleConfig) -> Chunk {
        self.read_bits(config.chunk_bits)
    }

    /// Draws chunks until one yields a nonzero multiplier. Slots must be
    /// requested in strictly increasing `(round, item_index)` order so every
    /// site reads the same chunk for the same slot.
    pub fn derive_iteration_keys(
        &mut self,
        round: u32,
        item_index: u32,
        config: &KeyScheduleConfig,
        params: &GroupParams,
    ) -> Result<IterationKeys, KeystreamError> {
        if config.bit_length != params.bit_length() || config.site_count != params.site_count() {
            return Err(KeystreamError::ConfigMismatch {
                config_bits: config.bit_length,
                config_sites: config.site_count,
                param_bits: params.bit_length(),
                param_sites: params.site_count(),
            });
        }
        if let Some((last_round, last_item)) = self.last_slot {
            if (round, item_index) <= (last_round, last_item) {
                return Err(KeystreamError::OutOfOrder {
                    round,
                    item_index,
                    last_round,
                    last_item,
                });
            }
        }
        self.last_slot = Some((round, item_index));
        loop {
            let chunk = self.next_chunk(config);
            if let Some(keys) = keys_from_chunk(&chunk, round, item_index, config, params) {
                return Ok(keys);
            }
        }
    }
}

/// Slices one chunk into keys, or `None` when the multiplier reduces to zero.
pub fn keys_from_chunk(
    chunk: &Chunk,
    round: u32,
    item_index: u32,
    config: &KeyScheduleConfig,
    params: &GroupParams,
) -> Option<IterationKeys> {
    let l = config.bit_length as usize;
    let p = params.modulus();
    let r = chunk.field(0, l) % p;
    if r == 0 {
        return None;
    }
    let nonces = (1..=config.site_count as usize)
        .map(|i| chunk.field(l * i, l) % p)
        .collect();
    // r is a nonzero residue of a prime, so this only fails for composite
    // moduli built with `GroupParams::new_unchecked`.
    IterationKeys::new(round, item_index, r, nonces, params).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(b: u8) -> Seed {
        Seed::new(vec![b; DEFAULT_SEED_BYTES], DEFAULT_SEED_BYTES).unwrap()
    }

    fn first_bits(seed: &Seed, constant: &[u8], bits: usize) -> Chunk {
        init_generator(seed, constant).unwrap().read_bits(bits)
    }

    #[test]
    fn chunk_sizes() {
        assert_eq!(KeyScheduleConfig::new(8, 3).chunk_bits(), 32);
        assert_eq!(KeyScheduleConfig::new(16, 5).chunk_bits(), 96);
        let mut gen = init_generator(&seed(1), b"x").unwrap();
        assert_eq!(gen.next_chunk(&KeyScheduleConfig::new(5, 3)).bits(), 20);
        assert_eq!(gen.consumed_bits(), 20);
    }

    #[test]
    fn same_seed_same_stream() {
        let c = modulus_constant(101);
        assert_eq!(
            first_bits(&seed(7), &c, 1024),
            first_bits(&seed(7), &c, 1024)
        );
    }

    #[test]
    fn seed_and_constant_both_matter() {
        let c = modulus_constant(101);
        assert_ne!(first_bits(&seed(7), &c, 128), first_bits(&seed(8), &c, 128));
        assert_ne!(
            first_bits(&seed(7), &c, 128),
            first_bits(&seed(7), &modulus_constant(103), 128)
        );
    }

    #[test]
    fn successive_chunks_tile_the_stream() {
        let c = modulus_constant(101);
        let whole = first_bits(&seed(3), &c, 40);
        let mut gen = init_generator(&seed(3), &c).unwrap();
        let config = KeyScheduleConfig::new(5, 3);
        let a = gen.next_chunk(&config);
        let b = gen.next_chunk(&config);
        assert_eq!(a.field(0, 20), whole.field(0, 20));
        assert_eq!(b.field(0, 20), whole.field(20, 20));
    }

    #[test]
    fn bad_lengths() {
        assert_eq!(
            Seed::new(vec![0; 9], 10),
            Err(KeystreamError::BadSeedLength {
                expected: 10,
                got: 9
            })
        );
        assert!(Seed::new(vec![0; 17], 17).is_err());
        assert!(Seed::from_hex("zz", 1).is_err());
        assert!(matches!(
            init_generator(&seed(0), &[0u8; 16]),
            Err(KeystreamError::BadConstantLength(16))
        ));
    }

    #[test]
    fn seed_debug_is_redacted() {
        let s = Seed::from_hex("00112233445566778899", 10).unwrap();
        assert!(!format!("{s:?}").contains("11"));
    }

    #[test]
    fn slices_worked_example_chunk() {
        let params = GroupParams::new_unchecked(91, 8, 3);
        let config = KeyScheduleConfig::for_params(&params);
        let chunk = Chunk::from_bytes(vec![0x17, 0x11, 0x0B, 0x0A], 32);
        let keys = keys_from_chunk(&chunk, 0, 0, &config, &params).unwrap();
        assert_eq!(keys.r(), 23);
        assert_eq!(keys.nonces(), &[17, 11, 10]);
        assert_eq!(keys.r_inv(), 4);
    }

    #[test]
    fn zero_multiplier_rejected() {
        let params = GroupParams::new_unchecked(91, 8, 3);
        let config = KeyScheduleConfig::for_params(&params);
        // 182 = 2 * 91 reduces to zero, so the next chunk is used.
        let stream = vec![182, 1, 2, 3, 0x17, 0x11, 0x0B, 0x0A];
        let mut gen = StreamGenerator::from_source(Box::new(FixedKeystream::new(stream)));
        let keys = gen.derive_iteration_keys(0, 0, &config, &params).unwrap();
        assert_eq!(keys.r(), 23);
        assert_eq!(keys.nonces(), &[17, 11, 10]);
        assert_eq!(gen.consumed_bits(), 64);
    }

    #[test]
    fn nonces_reduced() {
        let params = GroupParams::new_unchecked(91, 8, 3);
        let config = KeyScheduleConfig::for_params(&params);
        let chunk = Chunk::from_bytes(vec![1, 91, 200, 255], 32);
        let keys = keys_from_chunk(&chunk, 0, 0, &config, &params).unwrap();
        assert_eq!(keys.nonces(), &[0, 200 - 182, 255 - 182]);
    }

    #[test]
    fn slots_must_increase() {
        let params = GroupParams::new_unchecked(101, 8, 3);
        let config = KeyScheduleConfig::for_params(&params);
        let mut gen = init_generator(&seed(1), b"c").unwrap();
        gen.derive_iteration_keys(1, 0, &config, &params).unwrap();
        gen.derive_iteration_keys(1, 5, &config, &params).unwrap();
        gen.derive_iteration_keys(2, 0, &config, &params).unwrap();
        assert!(matches!(
            gen.derive_iteration_keys(1, 9, &config, &params),
            Err(KeystreamError::OutOfOrder { .. })
        ));
        assert!(matches!(
            gen.derive_iteration_keys(2, 0, &config, &params),
            Err(KeystreamError::OutOfOrder { .. })
        ));
        let wrong = KeyScheduleConfig::new(16, 3);
        assert!(matches!(
            gen.derive_iteration_keys(3, 0, &wrong, &params),
            Err(KeystreamError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn derived_keys_are_inverse_pairs() {
        let params = GroupParams::new_unchecked(65_521, 16, 5);
        let config = KeyScheduleConfig::for_params(&params);
        let mut gen = init_generator(&seed(9), &modulus_constant(65_521)).unwrap();
        for j in 0..2_000 {
            let keys = gen.derive_iteration_keys(0, j, &config, &params).unwrap();
            assert_eq!(crate::arith::mul_mod(keys.r(), keys.r_inv(), 65_521), 1);
        }
    }

    #[test]
    fn monobit_frequency() {
        let chunk = first_bits(&seed(0x5a), &modulus_constant(65_521), 100_000);
        let ones: u32 = chunk.as_bytes().iter().map(|b| b.count_ones()).sum();
        // |S_n| / sqrt(n) < 3.29 (two-sided 0.001 level).
        let s = (2.0 * ones as f64 - 100_000.0).abs() / 100_000f64.sqrt();
        assert!(s < 3.29, "monobit statistic {s}");
    }
}
