//! Byte and message counters for a session.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

/// Bytes of the `u32` length prefix in front of every frame on the wire.
pub const LENGTH_PREFIX_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    SiteToMixer,
    MixerToSite,
}

/// What an inner (pre-encryption) protocol frame contributes to the
/// per-round counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameAccounting {
    pub round: u32,
    pub header_bytes: u64,
    pub payload_bytes: u64,
    pub entries: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PayloadCounters {
    pub frames: u64,
    pub header_bytes: u64,
    pub prefix_bytes: u64,
    pub payload_bytes: u64,
    pub entries: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoundMetrics {
    pub upload: PayloadCounters,
    pub broadcast: PayloadCounters,
}

/// Gross counters include the length prefix and any channel expansion; the
/// per-round counters describe inner protocol frames only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ChannelMetrics {
    pub site_to_mixer_bytes: u64,
    pub mixer_to_sites_bytes: u64,
    pub site_to_mixer_messages: u64,
    pub mixer_to_sites_messages: u64,
    pub rounds: BTreeMap<u32, RoundMetrics>,
}

impl ChannelMetrics {
    pub fn upload_payload_bytes(&self) -> u64 {
        self.rounds.values().map(|r| r.upload.payload_bytes).sum()
    }

    pub fn broadcast_payload_bytes(&self) -> u64 {
        self.rounds
            .values()
            .map(|r| r.broadcast.payload_bytes)
            .sum()
    }
}

/// Shared, thread-safe handle onto one session's metrics.
#[derive(Debug, Clone, Default)]
pub struct MetricsHandle(Arc<Mutex<ChannelMetrics>>);

impl MetricsHandle {
    pub fn new() -> Self {
        Self::default()
    }

    /// Counts one frame of `frame_len` bytes plus its length prefix.
    pub fn record_wire(&self, direction: Direction, frame_len: usize) {
        let mut m = self.0.lock().unwrap();
        let bytes = frame_len as u64 + LENGTH_PREFIX_BYTES;
        match direction {
            Direction::SiteToMixer => {
                m.site_to_mixer_bytes += bytes;
                m.site_to_mixer_messages += 1;
            }
            Direction::MixerToSite => {
                m.mixer_to_sites_bytes += bytes;
                m.mixer_to_sites_messages += 1;
            }
        }
    }

    pub fn record_frame(&self, direction: Direction, acct: &FrameAccounting) {
        let mut m = self.0.lock().unwrap();
        let round = m.rounds.entry(acct.round).or_default();
        let counters = match direction {
            Direction::SiteToMixer => &mut round.upload,
            Direction::MixerToSite => &mut round.broadcast,
        };
        counters.frames += 1;
        counters.header_bytes += acct.header_bytes;
        counters.prefix_bytes += LENGTH_PREFIX_BYTES;
        counters.payload_bytes += acct.payload_bytes;
        counters.entries += acct.entries;
    }

    pub fn snapshot(&self) -> ChannelMetrics {
        self.0.lock().unwrap().clone()
    }

    pub fn reset(&self) {
        *self.0.lock().unwrap() = ChannelMetrics::default();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_is_zero() {
        assert_eq!(MetricsHandle::new().snapshot(), ChannelMetrics::default());
    }

    #[test]
    fn wire_counts_prefix() {
        let m = MetricsHandle::new();
        m.record_wire(Direction::SiteToMixer, 10);
        let s = m.snapshot();
        assert_eq!(s.site_to_mixer_bytes, 14);
        assert_eq!(s.site_to_mixer_messages, 1);
        assert_eq!(s.mixer_to_sites_bytes, 0);
    }

    #[test]
    fn frames_itemized_per_round() {
        let m = MetricsHandle::new();
        let acct = FrameAccounting {
            round: 2,
            header_bytes: 11,
            payload_bytes: 6,
            entries: 3,
        };
        m.record_frame(Direction::SiteToMixer, &acct);
        m.record_frame(Direction::SiteToMixer, &acct);
        m.record_frame(Direction::MixerToSite, &acct);
        let s = m.snapshot();
        let r = s.rounds[&2];
        assert_eq!(r.upload.frames, 2);
        assert_eq!(r.upload.payload_bytes, 12);
        assert_eq!(r.upload.header_bytes, 22);
        assert_eq!(r.upload.prefix_bytes, 8);
        assert_eq!(r.broadcast.entries, 3);
        m.reset();
        assert_eq!(m.snapshot(), ChannelMetrics::default());
    }
}
