//! Centralized plaintext references for checking distributed runs.
//!
//! `brute_force_frequent` never touches the join/prune machinery: it counts
//! every subset of the item universe at once with a superset-sum transform
//! over transaction bitmasks.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mining::{self, FrequentSet, Item, Itemset, Rule, TransactionDB};

pub const MAX_ORACLE_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("item universe has {0} items; the oracle enumerates at most {MAX_ORACLE_ITEMS}")]
    UniverseTooLarge(usize),
    #[error(transparent)]
    Mining(#[from] mining::MiningError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub frequents: BTreeMap<Itemset, u64>,
    pub rules: Vec<Rule>,
}

impl OracleResult {
    /// Groups the itemsets by size into `L_1, L_2, ...`.
    pub fn levels(&self) -> Vec<FrequentSet> {
        let mut by_size: BTreeMap<usize, Vec<(Itemset, u64)>> = BTreeMap::new();
        for (set, count) in &self.frequents {
            by_size
                .entry(set.len())
                .or_default()
                .push((set.clone(), *count));
        }
        by_size
            .into_iter()
            .map(|(k, entries)| FrequentSet::new(k, entries))
            .collect()
    }
}

/// Every nonempty itemset over the items present in `db` whose count reaches
/// `ceil(minsup * |db|)`, with rules from [`mining::generate_rules`].
pub fn brute_force_frequent(
    db: &TransactionDB,
    minsup: f64,
    minconf: f64,
) -> Result<OracleResult, OracleError> {
    let universe = db.item_universe();
    brute_force_over(db, &universe, minsup, minconf)
}

/// As [`brute_force_frequent`] but over an explicit universe; items outside
/// it are ignored.
pub fn brute_force_over(
    db: &TransactionDB,
    universe: &[Item],
    minsup: f64,
    minconf: f64,
) -> Result<OracleResult, OracleError> {
    let n = universe.len();
    if n > MAX_ORACLE_ITEMS {
        return Err(OracleError::UniverseTooLarge(n));
    }
    let empty = OracleResult {
        frequents: BTreeMap::new(),
        rules: Vec::new(),
    };
    if db.is_empty() {
        return Ok(empty);
    }
    let position: BTreeMap<Item, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, &it)| (it, i))
        .collect();

    // exact[m] = number of transactions whose projection is exactly m.
    let mut counts = vec![0u64; 1 << n];
    for t in db.transactions() {
        let m = t
            .items()
            .iter()
            .filter_map(|it| position.get(it))
            .fold(0usize, |m, &bit| m | 1 << bit);
        counts[m] += 1;
    }
    // Superset sums: counts[m] becomes the number of transactions containing m.
    for bit in 0..n {
        for m in 0..1usize << n {
            if m & (1 << bit) == 0 {
                counts[m] += counts[m | 1 << bit];
            }
        }
    }

    let total = db.size() as u64;
    let threshold = mining::support_threshold(minsup, total);
    let frequents: BTreeMap<Itemset, u64> = (1..1usize << n)
        .filter(|&m| counts[m] >= threshold)
        .map(|m| {
            let set = Itemset::new((0..n).filter(|b| m >> b & 1 == 1).map(|b| universe[b]));
            (set, counts[m])
        })
        .collect();
    let mut result = OracleResult {
        frequents,
        rules: Vec::new(),
    };
    result.rules = mining::generate_rules(&result.levels(), total, minconf)?;
    Ok(result)
}

/// Concatenates partitions in order.
pub fn merge_partitions(dbs: &[TransactionDB]) -> TransactionDB {
    dbs.iter()
        .flat_map(|db| db.transactions().iter().cloned())
        .collect()
}
