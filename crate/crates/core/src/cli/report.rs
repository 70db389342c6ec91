//! Text and JSON reports. Neither ever contains the seed or channel keys.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cost::{Reconciliation, Table1};
use crate::mining::{FrequentSet, Item, Rule};
use crate::transport::ChannelMetrics;

/// `num / den` rounded half-up to six decimals, computed on integers.
pub fn ratio6(num: u64, den: u64) -> String {
    assert!(den > 0, "ratio with zero denominator");
    let scaled = (num as u128 * 2_000_000 + den as u128) / (2 * den as u128);
    format!("{}.{:06}", scaled / 1_000_000, scaled % 1_000_000)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub role: String,
    pub transport: String,
    pub dataset: Option<String>,
    pub sites: u16,
    pub site_index: Option<u16>,
    pub minsup: Option<f64>,
    pub minconf: Option<f64>,
    pub modulus: u64,
    pub bit_length: u32,
    pub partition: String,
    pub private_channel: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemsetLine {
    pub itemset: Vec<Item>,
    pub count: u64,
    pub support: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RuleLine {
    pub antecedent: Vec<Item>,
    pub consequent: Vec<Item>,
    pub support_count: u64,
    pub antecedent_count: u64,
    pub support: String,
    pub confidence: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Mined {
    pub total_transactions: u64,
    pub frequent_itemsets: Vec<ItemsetLine>,
    pub rules: Vec<RuleLine>,
}

impl Mined {
    pub fn new(total: u64, frequents: &[FrequentSet], rules: &[Rule]) -> Self {
        let frequent_itemsets = frequents
            .iter()
            .flat_map(|level| level.entries())
            .map(|(set, count)| ItemsetLine {
                itemset: set.items().to_vec(),
                count: *count,
                support: ratio6(*count, total),
            })
            .collect();
        let rules = rules
            .iter()
            .map(|r| RuleLine {
                antecedent: r.antecedent.items().to_vec(),
                consequent: r.consequent.items().to_vec(),
                support_count: r.support_count,
                antecedent_count: r.antecedent_count,
                support: ratio6(r.support_count, r.total),
                confidence: ratio6(r.support_count, r.antecedent_count),
            })
            .collect();
        Self {
            total_transactions: total,
            frequent_itemsets,
            rules,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub generated_at: String,
    pub config: ReportConfig,
    /// Absent for the mixer, which learns no counts.
    pub mining: Option<Mined>,
    pub metrics: ChannelMetrics,
    pub reconciliation: Reconciliation,
    pub table1: Table1,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "mixmine {} ({}): {} sites, modulus {}, {}-bit keys",
            c.role, c.transport, c.sites, c.modulus, c.bit_length
        );
        if let Some(m) = &self.mining {
            let _ = writeln!(s, "transactions: {}", m.total_transactions);
            let _ = writeln!(s, "\nfrequent itemsets ({}):", m.frequent_itemsets.len());
            for f in &m.frequent_itemsets {
                let _ = writeln!(
                    s,
                    "  {:<24} count {:>6}  support {}",
                    fmt_items(&f.itemset),
                    f.count,
                    f.support
                );
            }
            let _ = writeln!(s, "\nrules ({}):", m.rules.len());
            for r in &m.rules {
                let _ = writeln!(
                    s,
                    "  {} => {}  support {}  confidence {}",
                    fmt_items(&r.antecedent),
                    fmt_items(&r.consequent),
                    r.support,
                    r.confidence
                );
            }
        }
        let _ = writeln!(
            s,
            "\ntraffic: {} bytes in {} frames site->mixer, {} bytes in {} frames mixer->sites",
            self.metrics.site_to_mixer_bytes,
            self.metrics.site_to_mixer_messages,
            self.metrics.mixer_to_sites_bytes,
            self.metrics.mixer_to_sites_messages
        );
        let _ = writeln!(
            s,
            "\nround  H     upload  analytic  broadcast  analytic  deviation"
        );
        for r in &self.reconciliation.rounds {
            let _ = writeln!(
                s,
                "{:>5}  {:<5} {:>6}  {:>8}  {:>9}  {:>8}  {}",
                r.round,
                r.candidates,
                r.measured_upload,
                r.analytic_upload,
                r.measured_broadcast,
                r.analytic_broadcast,
                r.deviation_pct
                    .map_or_else(|| "n/a".to_string(), |d| format!("{d:+.1}%"))
            );
        }
        let t = &self.table1;
        let _ = writeln!(
            s,
            "\nper-round payload at N={}, H={}: mixer {} vs Paillier {} (ratio {}); \
             exponentiations {} vs {}; key bits {} vs {}",
            t.n,
            t.h,
            t.payload_proposed,
            t.payload_yizhang,
            t.payload_ratio,
            t.ops.proposed.exponential,
            t.ops.yizhang.exponential,
            t.ops.proposed.key_bits,
            t.ops.yizhang.key_bits
        );
        s
    }
}

fn fmt_items(items: &[Item]) -> String {
    let inner: Vec<String> = items.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", inner.join(","))
}
