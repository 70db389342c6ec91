//! Whole-session properties on the in-process bus.

use mixmine::arith::next_prime_above;
use mixmine::keystream::Seed;
use mixmine::mining::{Itemset, TransactionDB};
use mixmine::oracle::{brute_force_frequent, merge_partitions};
use mixmine::protocol::wire::{self, WireWidths};
use mixmine::protocol::{
    run_simulated, ChannelKey, ChannelSetup, ProtocolError, SessionConfig, SimOptions,
};
use mixmine::secure_sum::validate_params;
use mixmine::transport::Peer;
use proptest::prelude::*;

fn config(
    dbs: &[TransactionDB],
    seed: [u8; 10],
    minsup: f64,
    channel: ChannelSetup,
) -> SessionConfig {
    let merged = merge_partitions(dbs);
    let total = merged.size() as u64;
    SessionConfig {
        params: validate_params(next_prime_above(total), 16, dbs.len() as u16, total).unwrap(),
        seed: Seed::new(seed.to_vec(), 10).unwrap(),
        minsup,
        minconf: 0.6,
        item_universe: merged.item_universe(),
        channel,
    }
}

fn partitions() -> impl Strategy<Value = Vec<TransactionDB>> {
    (3usize..6).prop_flat_map(|n| {
        proptest::collection::vec(
            proptest::collection::vec(proptest::collection::vec(0u32..8, 0..5), 0..25),
            n,
        )
        .prop_map(|parts| {
            parts
                .into_iter()
                .map(|rows| rows.into_iter().map(Itemset::new).collect())
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_oracle_under_any_schedule(
        dbs in partitions(),
        seed in any::<[u8; 10]>(),
        minsup in 0.1f64..0.6,
        schedule in any::<u64>(),
    ) {
        let merged = merge_partitions(&dbs);
        prop_assume!(!merged.is_empty());
        let cfg = config(&dbs, seed, minsup, ChannelSetup::Plain);
        let opts = SimOptions { scheduler_seed: schedule, muted: vec![] };
        let (result, _) = run_simulated(&cfg, &dbs, &opts).unwrap();
        let oracle = brute_force_frequent(&merged, minsup, 0.6).unwrap();
        prop_assert_eq!(result.total_transactions, merged.size() as u64);
        prop_assert_eq!(result.frequent_counts(), oracle.frequents);
        prop_assert_eq!(result.rules, oracle.rules);
    }

    #[test]
    fn transcript_is_byte_identical(dbs in partitions(), seed in any::<[u8; 10]>(), schedule in any::<u64>()) {
        prop_assume!(!merge_partitions(&dbs).is_empty());
        let cfg = config(&dbs, seed, 0.3, ChannelSetup::Aead(ChannelKey::new([7; 32])));
        let opts = SimOptions { scheduler_seed: schedule, muted: vec![] };
        let (a, ta) = run_simulated(&cfg, &dbs, &opts).unwrap();
        let (b, tb) = run_simulated(&cfg, &dbs, &opts).unwrap();
        prop_assert_eq!(ta, tb);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn uploads_are_sealed_on_the_wire() {
    let dbs = vec![TransactionDB::new(vec![Itemset::new([1, 2])]); 3];
    let cfg = config(
        &dbs,
        [1; 10],
        0.5,
        ChannelSetup::Aead(ChannelKey::new([3; 32])),
    );
    let (_, transcript) = run_simulated(&cfg, &dbs, &SimOptions::default()).unwrap();
    let uploads: Vec<_> = transcript.iter().filter(|e| e.to == Peer::Mixer).collect();
    // Each site's first frame is the round-0 upload: an 11-byte header, one
    // 2-byte alpha and a 16-byte tag. None of them parse as a plain frame.
    for i in 1..=3 {
        let first = uploads.iter().find(|e| e.from == Peer::Site(i)).unwrap();
        assert_eq!(first.frame.len(), 11 + 2 + 16);
    }
    let widths = WireWidths::for_bit_length(16);
    assert!(uploads
        .iter()
        .all(|e| wire::decode(&e.frame, widths).is_err()));
    let broadcasts = transcript.iter().filter(|e| e.from == Peer::Mixer).count();
    assert!(broadcasts > 0 && broadcasts % 3 == 0);
}

#[test]
fn silent_mixer_input_surfaces_timeout() {
    let dbs = vec![TransactionDB::new(vec![Itemset::new([1])]); 4];
    let cfg = config(&dbs, [1; 10], 0.5, ChannelSetup::Plain);
    let opts = SimOptions {
        scheduler_seed: 0,
        muted: vec![4],
    };
    match run_simulated(&cfg, &dbs, &opts) {
        Err(ProtocolError::Timeout(waiting)) => {
            assert_eq!(waiting.len(), 5);
        }
        other => panic!("{other:?}"),
    }
}
