//! Frame delivery between the sites and the mixer.
//!
//! The topology is a star: every site talks only to the mixer. Endpoints
//! count every frame they send (plus its length prefix) into a shared
//! [`MetricsHandle`].

pub mod bus;
pub mod metrics;
pub mod tcp;

use serde::Serialize;
use thiserror::Error;

pub use bus::{Bus, BusEndpoint, TranscriptEntry};
pub use metrics::{
    ChannelMetrics, Direction, FrameAccounting, MetricsHandle, PayloadCounters, RoundMetrics,
    LENGTH_PREFIX_BYTES,
};
pub use tcp::{TcpMixerEndpoint, TcpSiteEndpoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Peer {
    Mixer,
    /// 1-based site index.
    Site(u16),
}

impl std::fmt::Display for Peer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Peer::Mixer => write!(f, "mixer"),
            Peer::Site(i) => write!(f, "site {i}"),
        }
    }
}

/// Direction of a `from -> to` hop, or `None` for a hop the star does not
/// have.
pub fn direction(from: Peer, to: Peer) -> Option<Direction> {
    match (from, to) {
        (Peer::Site(_), Peer::Mixer) => Some(Direction::SiteToMixer),
        (Peer::Mixer, Peer::Site(_)) => Some(Direction::MixerToSite),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("endpoint closed")]
    Closed,
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("timed out waiting for a frame")]
    Timeout,
    #[error("no route from {from} to {to}")]
    InvalidRoute { from: Peer, to: Peer },
    #[error("unknown peer {0}")]
    UnknownPeer(Peer),
    #[error("bad handshake: {0}")]
    Handshake(String),
}

impl From<std::io::Error> for TransportError {
    fn from(e: std::io::Error) -> Self {
        match e.kind() {
            std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut => {
                TransportError::Timeout
            }
            _ => TransportError::IoFailure(e.to_string()),
        }
    }
}

pub trait Endpoint: Send {
    fn peer(&self) -> Peer;

    fn send(&mut self, to: Peer, frame: &[u8]) -> Result<(), TransportError>;

    /// Next frame addressed to this endpoint. Polled endpoints return
    /// `Ok(None)` when nothing is queued; blocking ones wait and report
    /// [`TransportError::Timeout`] instead.
    fn recv(&mut self) -> Result<Option<(Peer, Vec<u8>)>, TransportError>;

    fn close(&mut self);
}

pub fn snapshot_metrics(metrics: &MetricsHandle) -> ChannelMetrics {
    metrics.snapshot()
}
