//! FIMI-style transaction files: one transaction per line, item ids
//! separated by whitespace.

use std::path::Path;

use thiserror::Error;

use crate::arith;
use crate::mining::{Item, Itemset, TransactionDB};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: `{token}` is not a non-negative item id")]
    Parse { line: usize, token: String },
    #[error("dataset has no transactions")]
    EmptyDataset,
    #[error("{0} sites requested; at least 3 are required")]
    TooFewSites(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PartitionScheme {
    RoundRobin,
    Contiguous,
}

pub fn parse_dataset(text: &str) -> Result<TransactionDB, DatasetError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let items = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<Item>().map_err(|_| DatasetError::Parse {
                    line: i + 1,
                    token: tok.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Itemset::new(items));
    }
    if rows.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(TransactionDB::new(rows))
}

pub fn load_dataset(path: &Path) -> Result<TransactionDB, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_dataset(&text)
}

/// Splits `db` across `n` sites. Round-robin deals transactions in turn;
/// contiguous hands out consecutive blocks. Either way sizes differ by at
/// most one.
pub fn partition(
    db: &TransactionDB,
    n: usize,
    scheme: PartitionScheme,
) -> Result<Vec<TransactionDB>, DatasetError> {
    if n < 3 {
        return Err(DatasetError::TooFewSites(n));
    }
    let rows = db.transactions();
    let parts: Vec<Vec<Itemset>> = match scheme {
        PartitionScheme::RoundRobin => (0..n)
            .map(|site| rows.iter().skip(site).step_by(n).cloned().collect())
            .collect(),
        PartitionScheme::Contiguous => {
            let (base, extra) = (rows.len() / n, rows.len() % n);
            let mut start = 0;
            (0..n)
                .map(|site| {
                    let len = base + usize::from(site < extra);
                    let block = rows[start..start + len].to_vec();
                    start += len;
                    block
                })
                .collect()
        }
    };
    Ok(parts.into_iter().map(TransactionDB::new).collect())
}

/// Smallest prime above the transaction count, which bounds every global
/// support count.
pub fn derive_modulus(total_transactions: u64) -> u64 {
    arith::next_prime_above(total_transactions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::merge_partitions;

    #[test]
    fn parses_lines() {
        let db = parse_dataset("1 2 3\n2 3\n").unwrap();
        assert_eq!(db.size(), 2);
        assert_eq!(db.transactions()[0].items(), &[1, 2, 3]);
        assert_eq!(db.transactions()[1].items(), &[2, 3]);
    }

    #[test]
    fn collapses_duplicates_and_skips_blanks() {
        let db = parse_dataset("\n1 1 2\n   \n\t3\n").unwrap();
        assert_eq!(db.size(), 2);
        assert_eq!(db.transactions()[0].items(), &[1, 2]);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(
            parse_dataset("1 x\n"),
            Err(DatasetError::Parse {
                line: 1,
                token: "x".into()
            })
        );
        assert!(matches!(
            parse_dataset("1\n\n-4\n"),
            Err(DatasetError::Parse { line: 3, .. })
        ));
        assert_eq!(parse_dataset("\n \n"), Err(DatasetError::EmptyDataset));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_dataset(Path::new("/nonexistent/x.dat")),
            Err(DatasetError::Io { .. })
        ));
    }

    fn ten() -> TransactionDB {
        (0..10).map(|i| Itemset::new([i])).collect()
    }

    #[test]
    fn round_robin_sizes() {
        let parts = partition(&ten(), 3, PartitionScheme::RoundRobin).unwrap();
        let sizes: Vec<_> = parts.iter().map(|p| p.size()).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        assert_eq!(parts[1].transactions()[0].items(), &[1]);
    }

    #[test]
    fn contiguous_blocks() {
        let parts = partition(&ten(), 3, PartitionScheme::Contiguous).unwrap();
        assert_eq!(merge_partitions(&parts), ten());
        assert_eq!(parts[2].transactions()[0].items(), &[7]);
    }

    #[test]
    fn partition_is_a_cover() {
        let db = ten();
        let mut merged: Vec<_> =
            merge_partitions(&partition(&db, 4, PartitionScheme::RoundRobin).unwrap())
                .transactions()
                .to_vec();
        merged.sort();
        assert_eq!(merged, db.transactions());
        assert_eq!(
            partition(&db, 2, PartitionScheme::RoundRobin),
            Err(DatasetError::TooFewSites(2))
        );
    }

    #[test]
    fn modulus_derivation() {
        assert_eq!(derive_modulus(100), 101);
        assert_eq!(derive_modulus(1), 2);
        assert_eq!(derive_modulus(89), 97);
    }
}
