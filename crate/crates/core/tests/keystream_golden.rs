//! Keystream output checked against goldens produced by an independent AES
//! implementation (see fixtures/gen_keystream_golden.py).

use std::path::PathBuf;

use mixmine::keystream::{
    init_generator, modulus_constant, KeyScheduleConfig, Keystream, OfbKeystream, Seed,
};
use mixmine::secure_sum::validate_params;
use serde::Deserialize;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn sidecar() -> (Seed, Vec<u8>, String) {
    let text = std::fs::read_to_string(golden("keystream_ofb.txt")).unwrap();
    let field = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
            .unwrap()
    };
    (
        Seed::from_hex(&field("seed "), 10).unwrap(),
        hex::decode(field("constant ")).unwrap(),
        field("generator "),
    )
}

#[test]
fn ofb_bytes_match_reference() {
    let expected = std::fs::read(golden("keystream_ofb.bin")).unwrap();
    let (seed, constant, id) = sidecar();
    let mut ks = OfbKeystream::new(&seed, &constant).unwrap();
    assert_eq!(ks.id(), id);
    // Odd-sized reads must not disturb the stream.
    let mut got = Vec::new();
    for len in [1usize, 15, 16, 17, 63, 400] {
        let mut buf = vec![0u8; len];
        ks.fill(&mut buf);
        got.extend(buf);
    }
    assert_eq!(got.len(), expected.len());
    assert_eq!(got, expected);
}

#[test]
fn constant_is_the_modulus() {
    let (_, constant, _) = sidecar();
    assert_eq!(constant, modulus_constant(65521));
}

#[derive(Deserialize)]
struct Slot {
    r: u64,
    r_inv: u64,
    nonces: Vec<u64>,
}

#[derive(Deserialize)]
struct Keys {
    seed: String,
    modulus: u64,
    bit_length: u32,
    sites: u16,
    slots: Vec<Slot>,
}

#[test]
fn iteration_keys_match_reference() {
    let keys: Keys =
        serde_json::from_str(&std::fs::read_to_string(golden("iteration_keys.json")).unwrap())
            .unwrap();
    let params = validate_params(keys.modulus, keys.bit_length, keys.sites, 0).unwrap();
    let config = KeyScheduleConfig::for_params(&params);
    let seed = Seed::from_hex(&keys.seed, 10).unwrap();
    let mut gen = init_generator(&seed, &modulus_constant(keys.modulus)).unwrap();
    let slots = std::iter::once((0, 0)).chain((0..10).map(|j| (1, j)));
    for ((round, item), want) in slots.zip(&keys.slots) {
        let got = gen
            .derive_iteration_keys(round, item, &config, &params)
            .unwrap();
        assert_eq!(got.r(), want.r, "slot ({round}, {item})");
        assert_eq!(got.r_inv(), want.r_inv, "slot ({round}, {item})");
        assert_eq!(got.nonces(), &want.nonces[..], "slot ({round}, {item})");
    }
}
