//! Analytic payload and operation counts for the mixer scheme and for the
//! Paillier-based two-phase scheme of Yi and Zhang, plus a comparison of the
//! analytic figures against what a session actually put on the wire.

use serde::Serialize;
use thiserror::Error;

use crate::transport::ChannelMetrics;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("cost parameter {name} = {value} must be finite and non-negative")]
    Negative { name: &'static str, value: f64 },
    #[error("encryption ratio {0} must be at least 1")]
    RatioBelowOne(f64),
}

/// `n` sites, `h` itemsets per round, `l` bytes per masked entry, `k` bytes
/// per item, `phi` ciphertext/plaintext expansion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostParams {
    pub n: f64,
    pub h: f64,
    pub l: f64,
    pub k: f64,
    pub phi: f64,
}

impl CostParams {
    pub fn new(n: f64, h: f64, l: f64, k: f64, phi: f64) -> Result<Self, CostError> {
        for (name, value) in [("N", n), ("H", h), ("L", l), ("K", k), ("phi", phi)] {
            if !value.is_finite() || value < 0.0 {
                return Err(CostError::Negative { name, value });
            }
        }
        if phi < 1.0 {
            return Err(CostError::RatioBelowOne(phi));
        }
        Ok(Self { n, h, l, k, phi })
    }

    /// The same parameters with a different `h`.
    pub fn with_h(self, h: f64) -> Self {
        Self { h, ..self }
    }

    fn base(&self) -> f64 {
        self.phi * self.h * self.n
    }
}

/// Bytes per round for the mixer scheme: `phi*H*N*(1 + L)`.
pub fn payload_proposed(p: &CostParams) -> f64 {
    p.base() * (1.0 + p.l)
}

/// Bytes per round for the Yi-Zhang scheme: `2*phi*N*H*K`.
pub fn payload_yizhang(p: &CostParams) -> f64 {
    p.base() * (2.0 * p.k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCount {
    pub exponential: u32,
    pub basic: u32,
    pub key_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpComparison {
    pub proposed: OpCount,
    pub yizhang: OpCount,
}

/// Per-site operation counts of one secure-sum round.
pub fn op_counts() -> OpComparison {
    OpComparison {
        proposed: OpCount {
            exponential: 0,
            basic: 4,
            key_bits: 80,
        },
        yizhang: OpCount {
            exponential: 4,
            basic: 13,
            key_bits: 1024,
        },
    }
}

/// Side-by-side figures at `L = 2`, `K = 3`, `phi = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub n: f64,
    pub h: f64,
    pub payload_proposed: f64,
    pub payload_yizhang: f64,
    pub payload_ratio: f64,
    pub ops: OpComparison,
}

pub fn table1(n: f64, h: f64) -> Result<Table1, CostError> {
    let p = CostParams::new(n, h, 2.0, 3.0, 1.0)?;
    let proposed = payload_proposed(&p);
    let yizhang = payload_yizhang(&p);
    Ok(Table1 {
        n,
        h,
        payload_proposed: proposed,
        payload_yizhang: yizhang,
        payload_ratio: if yizhang == 0.0 {
            0.0
        } else {
            proposed / yizhang
        },
        ops: op_counts(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundReconciliation {
    pub round: u32,
    /// Itemsets actually counted this round.
    pub candidates: f64,
    pub measured_upload: u64,
    pub measured_broadcast: u64,
    /// `N*phi*L*H`, the upload half of the analytic payload.
    pub analytic_upload: f64,
    /// `phi*H*N`, the broadcast half.
    pub analytic_broadcast: f64,
    pub analytic_proposed: f64,
    pub analytic_yizhang: f64,
    pub upload_deviation_pct: Option<f64>,
    pub broadcast_deviation_pct: Option<f64>,
    pub deviation_pct: Option<f64>,
    pub header_bytes: u64,
    pub prefix_bytes: u64,
    pub channel_overhead_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reconciliation {
    pub params: CostParams,
    pub rounds: Vec<RoundReconciliation>,
}

fn deviation_pct(measured: u64, analytic: f64) -> Option<f64> {
    if analytic == 0.0 {
        return (measured == 0).then_some(0.0);
    }
    Some((measured as f64 - analytic) / analytic * 100.0)
}

/// Compares measured inner payload bytes per round with the analytic
/// formula, taking `H` from the round's actual upload vectors. Headers,
/// length prefixes and `wire_overhead` bytes per sealed frame are itemized
/// apart from the payload.
pub fn reconcile(measured: &ChannelMetrics, p: &CostParams, wire_overhead: u64) -> Reconciliation {
    let rounds = measured
        .rounds
        .iter()
        .map(|(&round, m)| {
            let h = if m.upload.frames == 0 {
                0.0
            } else {
                m.upload.entries as f64 / m.upload.frames as f64
            };
            let q = p.with_h(h);
            let analytic_upload = q.n * q.phi * q.l * q.h;
            let analytic_broadcast = q.base();
            let analytic_proposed = payload_proposed(&q);
            RoundReconciliation {
                round,
                candidates: h,
                measured_upload: m.upload.payload_bytes,
                measured_broadcast: m.broadcast.payload_bytes,
                analytic_upload,
                analytic_broadcast,
                analytic_proposed,
                analytic_yizhang: payload_yizhang(&q),
                upload_deviation_pct: deviation_pct(m.upload.payload_bytes, analytic_upload),
                broadcast_deviation_pct: deviation_pct(
                    m.broadcast.payload_bytes,
                    analytic_broadcast,
                ),
                deviation_pct: deviation_pct(
                    m.upload.payload_bytes + m.broadcast.payload_bytes,
                    analytic_proposed,
                ),
                header_bytes: m.upload.header_bytes + m.broadcast.header_bytes,
                prefix_bytes: m.upload.prefix_bytes + m.broadcast.prefix_bytes,
                channel_overhead_bytes: m.upload.frames * wire_overhead,
            }
        })
        .collect();
    Reconciliation { params: *p, rounds }
}
