//! Inner frame layout, before channel encryption:
//!
//! ```text
//! [u8 variant][u32 round][u16 site_index][u32 vector_length][entries...]
//! ```
//!
//! Entries are big-endian and fixed-width: `ceil(l/8)` bytes for alphas,
//! twice that for aggregates since an unreduced sum can exceed `l` bits.

use thiserror::Error;

use crate::transport::FrameAccounting;

pub const HEADER_BYTES: usize = 11;

const UPLOAD_MASKED: u8 = 1;
const BROADCAST_AGGREGATE: u8 = 2;
const TERMINATE: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("frame truncated: {0} bytes")]
    Truncated(usize),
    #[error("unknown variant tag {0}")]
    UnknownVariant(u8),
    #[error("frame declares {declared} entries but carries {actual} payload bytes")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("value {value} does not fit in {width} bytes")]
    ValueTooWide { value: u128, width: usize },
    #[error("terminate frame carries {0} entries")]
    TerminateWithEntries(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolMessage {
    UploadMasked {
        round: u32,
        site_index: u16,
        alphas: Vec<u64>,
    },
    BroadcastAggregate {
        round: u32,
        epsilons: Vec<u128>,
    },
    Terminate {
        round: u32,
        site_index: u16,
    },
}

impl ProtocolMessage {
    pub fn round(&self) -> u32 {
        match self {
            Self::UploadMasked { round, .. }
            | Self::BroadcastAggregate { round, .. }
            | Self::Terminate { round, .. } => *round,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireWidths {
    pub alpha: usize,
    pub epsilon: usize,
}

impl WireWidths {
    pub fn for_bit_length(bit_length: u32) -> Self {
        let alpha = (bit_length as usize).div_ceil(8);
        Self {
            alpha,
            epsilon: 2 * alpha,
        }
    }
}

fn put_entry(out: &mut Vec<u8>, value: u128, width: usize) -> Result<(), WireError> {
    if width < 16 && value >> (8 * width) != 0 {
        return Err(WireError::ValueTooWide { value, width });
    }
    out.extend_from_slice(&value.to_be_bytes()[16 - width..]);
    Ok(())
}

fn get_entry(bytes: &[u8]) -> u128 {
    bytes.iter().fold(0u128, |acc, &b| acc << 8 | b as u128)
}

pub fn encode(msg: &ProtocolMessage, widths: WireWidths) -> Result<Vec<u8>, WireError> {
    let (tag, round, site_index, count) = match msg {
        ProtocolMessage::UploadMasked {
            round,
            site_index,
            alphas,
        } => (UPLOAD_MASKED, *round, *site_index, alphas.len()),
        ProtocolMessage::BroadcastAggregate { round, epsilons } => {
            (BROADCAST_AGGREGATE, *round, 0, epsilons.len())
        }
        ProtocolMessage::Terminate { round, site_index } => (TERMINATE, *round, *site_index, 0),
    };
    let mut out = Vec::with_capacity(HEADER_BYTES + count * widths.epsilon);
    out.push(tag);
    out.extend_from_slice(&round.to_be_bytes());
    out.extend_from_slice(&site_index.to_be_bytes());
    out.extend_from_slice(&(count as u32).to_be_bytes());
    match msg {
        ProtocolMessage::UploadMasked { alphas, .. } => {
            for &a in alphas {
                put_entry(&mut out, a as u128, widths.alpha)?;
            }
        }
        ProtocolMessage::BroadcastAggregate { epsilons, .. } => {
            for &e in epsilons {
                put_entry(&mut out, e, widths.epsilon)?;
            }
        }
        ProtocolMessage::Terminate { .. } => {}
    }
    Ok(out)
}

struct Header {
    tag: u8,
    round: u32,
    site_index: u16,
    count: usize,
}

fn header(frame: &[u8]) -> Result<Header, WireError> {
    if frame.len() < HEADER_BYTES {
        return Err(WireError::Truncated(frame.len()));
    }
    Ok(Header {
        tag: frame[0],
        round: u32::from_be_bytes(frame[1..5].try_into().unwrap()),
        site_index: u16::from_be_bytes(frame[5..7].try_into().unwrap()),
        count: u32::from_be_bytes(frame[7..11].try_into().unwrap()) as usize,
    })
}

pub fn decode(frame: &[u8], widths: WireWidths) -> Result<ProtocolMessage, WireError> {
    let h = header(frame)?;
    let body = &frame[HEADER_BYTES..];
    let width = match h.tag {
        UPLOAD_MASKED => widths.alpha,
        BROADCAST_AGGREGATE => widths.epsilon,
        TERMINATE => {
            if h.count != 0 {
                return Err(WireError::TerminateWithEntries(h.count));
            }
            0
        }
        other => return Err(WireError::UnknownVariant(other)),
    };
    if h.count.checked_mul(width) != Some(body.len()) {
        return Err(WireError::LengthMismatch {
            declared: h.count,
            actual: body.len(),
        });
    }
    Ok(match h.tag {
        UPLOAD_MASKED => ProtocolMessage::UploadMasked {
            round: h.round,
            site_index: h.site_index,
            alphas: body.chunks(width).map(|c| get_entry(c) as u64).collect(),
        },
        BROADCAST_AGGREGATE => ProtocolMessage::BroadcastAggregate {
            round: h.round,
            epsilons: body.chunks(width).map(get_entry).collect(),
        },
        _ => ProtocolMessage::Terminate {
            round: h.round,
            site_index: h.site_index,
        },
    })
}

/// Header/payload split of an encoded inner frame.
pub fn accounting(frame: &[u8]) -> Result<FrameAccounting, WireError> {
    let h = header(frame)?;
    Ok(FrameAccounting {
        round: h.round,
        header_bytes: HEADER_BYTES as u64,
        payload_bytes: (frame.len() - HEADER_BYTES) as u64,
        entries: h.count as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const W16: WireWidths = WireWidths {
        alpha: 2,
        epsilon: 4,
    };

    #[test]
    fn upload_layout() {
        let msg = ProtocolMessage::UploadMasked {
            round: 1,
            site_index: 2,
            alphas: vec![41, 0x1234],
        };
        let bytes = encode(&msg, W16).unwrap();
        assert_eq!(
            bytes,
            vec![1, 0, 0, 0, 1, 0, 2, 0, 0, 0, 2, 0, 41, 0x12, 0x34]
        );
        assert_eq!(decode(&bytes, W16).unwrap(), msg);
        let acct = accounting(&bytes).unwrap();
        assert_eq!(
            (acct.header_bytes, acct.payload_bytes, acct.entries),
            (11, 4, 2)
        );
    }

    #[test]
    fn broadcast_layout() {
        let msg = ProtocolMessage::BroadcastAggregate {
            round: 7,
            epsilons: vec![179],
        };
        let bytes = encode(&msg, WireWidths::for_bit_length(8)).unwrap();
        assert_eq!(bytes, vec![2, 0, 0, 0, 7, 0, 0, 0, 0, 0, 1, 0, 179]);
    }

    #[test]
    fn widths() {
        assert_eq!(WireWidths::for_bit_length(16), W16);
        assert_eq!(WireWidths::for_bit_length(9).alpha, 2);
        assert_eq!(WireWidths::for_bit_length(63).epsilon, 16);
    }

    #[test]
    fn malformed() {
        assert_eq!(decode(&[1, 2, 3], W16), Err(WireError::Truncated(3)));
        let mut bad = encode(
            &ProtocolMessage::Terminate {
                round: 1,
                site_index: 1,
            },
            W16,
        )
        .unwrap();
        bad[0] = 9;
        assert_eq!(decode(&bad, W16), Err(WireError::UnknownVariant(9)));
        let mut short = encode(
            &ProtocolMessage::UploadMasked {
                round: 0,
                site_index: 1,
                alphas: vec![1, 2],
            },
            W16,
        )
        .unwrap();
        short.pop();
        assert!(matches!(
            decode(&short, W16),
            Err(WireError::LengthMismatch { .. })
        ));
        assert_eq!(
            encode(
                &ProtocolMessage::UploadMasked {
                    round: 0,
                    site_index: 1,
                    alphas: vec![70_000],
                },
                W16
            ),
            Err(WireError::ValueTooWide {
                value: 70_000,
                width: 2
            })
        );
    }

    proptest! {
        #[test]
        fn round_trips(
            round in any::<u32>(),
            site in any::<u16>(),
            alphas in proptest::collection::vec(0u64..1 << 24, 0..20),
            bits in 24u32..64,
        ) {
            let widths = WireWidths::for_bit_length(bits);
            let up = ProtocolMessage::UploadMasked { round, site_index: site, alphas: alphas.clone() };
            let bytes = encode(&up, widths).unwrap();
            prop_assert_eq!(bytes.len(), HEADER_BYTES + alphas.len() * widths.alpha);
            prop_assert_eq!(decode(&bytes, widths).unwrap(), up);
            let epsilons: Vec<u128> = alphas.iter().map(|&a| a as u128 * 3).collect();
            let down = ProtocolMessage::BroadcastAggregate { round, epsilons };
            prop_assert_eq!(decode(&encode(&down, widths).unwrap(), widths).unwrap(), down);
        }
    }
}
