//! Apriori over dense integer item ids, plus rule generation.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

pub type Item = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MiningError {
    #[error("{counts} counts supplied for {candidates} candidates")]
    AlignmentMismatch { candidates: usize, counts: usize },
    #[error("itemset {itemset} has size {got}, expected {expected}")]
    WrongItemsetSize {
        itemset: Itemset,
        expected: usize,
        got: usize,
    },
    #[error("no count available for subset {0}")]
    MissingSubsetCount(Itemset),
    #[error("total transaction count must be positive")]
    EmptyTotal,
}

/// Sorted, duplicate-free set of items.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Itemset(Vec<Item>);

impl Itemset {
    pub fn new(items: impl IntoIterator<Item = Item>) -> Self {
        let mut items: Vec<Item> = items.into_iter().collect();
        items.sort_unstable();
        items.dedup();
        Self(items)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn items(&self) -> &[Item] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Both sides are sorted, so a single merge pass suffices.
    pub fn is_subset_of(&self, other: &Itemset) -> bool {
        let mut theirs = other.0.iter();
        self.0
            .iter()
            .all(|item| theirs.by_ref().any(|candidate| candidate == item))
    }

    pub fn without_index(&self, idx: usize) -> Itemset {
        let mut items = self.0.clone();
        items.remove(idx);
        Itemset(items)
    }

    pub fn difference(&self, other: &Itemset) -> Itemset {
        Itemset(
            self.0
                .iter()
                .copied()
                .filter(|i| other.0.binary_search(i).is_err())
                .collect(),
        )
    }
}

impl std::fmt::Display for Itemset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{item}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransactionDB {
    transactions: Vec<Itemset>,
}

impl TransactionDB {
    pub fn new(transactions: Vec<Itemset>) -> Self {
        Self { transactions }
    }

    pub fn transactions(&self) -> &[Itemset] {
        &self.transactions
    }

    pub fn size(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    /// Sorted union of all items that appear in some transaction.
    pub fn item_universe(&self) -> Vec<Item> {
        let mut items: Vec<Item> = self
            .transactions
            .iter()
            .flat_map(|t| t.items().iter().copied())
            .collect();
        items.sort_unstable();
        items.dedup();
        items
    }
}

impl FromIterator<Itemset> for TransactionDB {
    fn from_iter<T: IntoIterator<Item = Itemset>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Candidates of one size in canonical order. The position of a candidate is
/// its slot index on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    k: usize,
    candidates: Vec<Itemset>,
}

impl CandidateSet {
    pub fn new(k: usize, mut candidates: Vec<Itemset>) -> Result<Self, MiningError> {
        if let Some(bad) = candidates.iter().find(|c| c.len() != k) {
            return Err(MiningError::WrongItemsetSize {
                itemset: bad.clone(),
                expected: k,
                got: bad.len(),
            });
        }
        candidates.sort();
        candidates.dedup();
        Ok(Self { k, candidates })
    }

    /// Single-item candidates, one per item of the public universe.
    pub fn singletons(universe: &[Item]) -> Self {
        let mut candidates: Vec<Itemset> = universe.iter().map(|&i| Itemset(vec![i])).collect();
        candidates.sort();
        candidates.dedup();
        Self { k: 1, candidates }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn candidates(&self) -> &[Itemset] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrequentSet {
    k: usize,
    entries: Vec<(Itemset, u64)>,
}

impl FrequentSet {
    /// Entries are sorted into canonical order.
    pub fn new(k: usize, mut entries: Vec<(Itemset, u64)>) -> Self {
        entries.sort();
        Self { k, entries }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[(Itemset, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, itemset: &Itemset) -> bool {
        self.entries
            .binary_search_by(|(set, _)| set.cmp(itemset))
            .is_ok()
    }
}

/// `X => Y` with its exact counts. `support` and `confidence` are the
/// float renderings of `support_count / total` and
/// `support_count / antecedent_count`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub antecedent: Itemset,
    pub consequent: Itemset,
    pub support_count: u64,
    pub antecedent_count: u64,
    pub total: u64,
    pub support: f64,
    pub confidence: f64,
}

// Relative slack for comparing a user-supplied fraction against a ratio of
// integers, so that e.g. 0.1 * 30 counts as exactly 3.
const FRACTION_SLACK: f64 = 1e-9;

/// `ceil(minsup * total)`, evaluated with a small tolerance against decimal
/// rounding of `minsup`.
pub fn support_threshold(minsup: f64, total: u64) -> u64 {
    let x = minsup.max(0.0) * total as f64;
    (x - FRACTION_SLACK * x.max(1.0)).ceil().max(0.0) as u64
}

/// `num / den >= frac`, with the same tolerance as [`support_threshold`].
pub fn ratio_at_least(num: u64, den: u64, frac: f64) -> bool {
    let target = frac * den as f64;
    num as f64 >= target - FRACTION_SLACK * target.abs().max(1.0)
}

/// Pairs of `(k-1)`-itemsets sharing their first `k-2` items.
pub fn apriori_join(prev: &FrequentSet) -> Vec<Itemset> {
    let sets: Vec<&Itemset> = prev.entries.iter().map(|(s, _)| s).collect();
    let mut out = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        let prefix = &a.0[..a.len() - 1];
        for b in &sets[i + 1..] {
            // Entries are sorted, so sets sharing a prefix are contiguous.
            if &b.0[..b.len() - 1] != prefix {
                break;
            }
            let mut joined = a.0.clone();
            joined.push(*b.0.last().unwrap());
            out.push(Itemset(joined));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Drops any joined itemset with a `(k-1)`-subset missing from `prev`.
pub fn apriori_prune(joined: Vec<Itemset>, prev: &FrequentSet) -> CandidateSet {
    let k = prev.k + 1;
    let candidates = joined
        .into_iter()
        .filter(|c| (0..c.len()).all(|i| prev.contains(&c.without_index(i))))
        .collect();
    CandidateSet::new(k, candidates).expect("join produces k-itemsets")
}

pub fn next_candidates(prev: &FrequentSet) -> CandidateSet {
    apriori_prune(apriori_join(prev), prev)
}

pub fn count_supports(db: &TransactionDB, cands: &CandidateSet) -> Vec<u64> {
    cands
        .candidates
        .iter()
        .map(|c| db.transactions.iter().filter(|t| c.is_subset_of(t)).count() as u64)
        .collect()
}

pub fn compute_frequent(
    cands: &CandidateSet,
    global_counts: &[u64],
    total_size: u64,
    minsup: f64,
) -> Result<FrequentSet, MiningError> {
    if cands.len() != global_counts.len() {
        return Err(MiningError::AlignmentMismatch {
            candidates: cands.len(),
            counts: global_counts.len(),
        });
    }
    if total_size == 0 {
        return Err(MiningError::EmptyTotal);
    }
    let threshold = support_threshold(minsup, total_size);
    let entries = cands
        .candidates
        .iter()
        .zip(global_counts)
        .filter(|(_, &count)| count >= threshold)
        .map(|(set, &count)| (set.clone(), count))
        .collect();
    Ok(FrequentSet {
        k: cands.k,
        entries,
    })
}

/// Every rule `X => Z \ X` over nonempty proper subsets `X` of each frequent
/// `Z` with `|Z| >= 2`, ordered by `Z` then `X`. Antecedents with a zero
/// count (only possible at zero support) yield no rule.
pub fn generate_rules(
    all_frequent: &[FrequentSet],
    total_size: u64,
    minconf: f64,
) -> Result<Vec<Rule>, MiningError> {
    if total_size == 0 {
        return Err(MiningError::EmptyTotal);
    }
    let counts: HashMap<&Itemset, u64> = all_frequent
        .iter()
        .flat_map(|f| f.entries.iter().map(|(s, c)| (s, *c)))
        .collect();
    let mut itemsets: Vec<(&Itemset, u64)> = counts
        .iter()
        .filter(|(s, _)| s.len() >= 2)
        .map(|(s, c)| (*s, *c))
        .collect();
    itemsets.sort_by(|a, b| (a.0.len(), a.0).cmp(&(b.0.len(), b.0)));

    let mut rules = Vec::new();
    for (z, z_count) in itemsets {
        let n = z.len();
        assert!(n < 64, "itemset too large for rule enumeration");
        let mut local = Vec::new();
        for mask in 1..(1u64 << n) - 1 {
            let antecedent = Itemset(
                (0..n)
                    .filter(|bit| mask >> bit & 1 == 1)
                    .map(|bit| z.0[bit])
                    .collect(),
            );
            let x_count = *counts
                .get(&antecedent)
                .ok_or_else(|| MiningError::MissingSubsetCount(antecedent.clone()))?;
            if x_count == 0 || !ratio_at_least(z_count, x_count, minconf) {
                continue;
            }
            local.push(Rule {
                consequent: z.difference(&antecedent),
                antecedent,
                support_count: z_count,
                antecedent_count: x_count,
                total: total_size,
                support: z_count as f64 / total_size as f64,
                confidence: z_count as f64 / x_count as f64,
            });
        }
        local.sort_by(|a, b| a.antecedent.cmp(&b.antecedent));
        rules.extend(local);
    }
    Ok(rules)
}

/// Plain single-database Apriori iterated to its fixpoint. Returns the
/// nonempty levels `L_1, L_2, ...`.
pub fn centralized_apriori(db: &TransactionDB, universe: &[Item], minsup: f64) -> Vec<FrequentSet> {
    let total = db.size() as u64;
    let mut levels = Vec::new();
    if total == 0 {
        return levels;
    }
    let mut cands = CandidateSet::singletons(universe);
    while !cands.is_empty() {
        let counts = count_supports(db, &cands);
        let frequent = compute_frequent(&cands, &counts, total, minsup).expect("aligned");
        if frequent.is_empty() {
            break;
        }
        cands = next_candidates(&frequent);
        levels.push(frequent);
    }
    levels
}
