//! Deterministic in-process bus with per-pair FIFO queues.
//!
//! The bus never delivers on its own: a scheduler inspects
//! [`Bus::pending_pairs`] and pops frames with [`Bus::deliver`], or an
//! endpoint polls with [`Endpoint::recv`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};

use super::{direction, Endpoint, MetricsHandle, Peer, TransportError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub from: Peer,
    pub to: Peer,
    pub frame: Vec<u8>,
}

#[derive(Debug, Default)]
struct BusState {
    queues: BTreeMap<(Peer, Peer), VecDeque<Vec<u8>>>,
    closed: BTreeSet<Peer>,
    transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone)]
pub struct Bus {
    state: Arc<Mutex<BusState>>,
    metrics: MetricsHandle,
}

impl Bus {
    pub fn new(metrics: MetricsHandle) -> Self {
        Self {
            state: Arc::default(),
            metrics,
        }
    }

    pub fn endpoint(&self, peer: Peer) -> BusEndpoint {
        BusEndpoint {
            peer,
            bus: self.clone(),
        }
    }

    pub fn metrics(&self) -> &MetricsHandle {
        &self.metrics
    }

    /// `(from, to)` pairs with at least one queued frame, in a stable order.
    pub fn pending_pairs(&self) -> Vec<(Peer, Peer)> {
        let state = self.state.lock().unwrap();
        state
            .queues
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(pair, _)| *pair)
            .collect()
    }

    pub fn deliver(&self, from: Peer, to: Peer) -> Option<Vec<u8>> {
        let mut state = self.state.lock().unwrap();
        state.queues.get_mut(&(from, to))?.pop_front()
    }

    /// Every frame sent so far, in send order.
    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.state.lock().unwrap().transcript.clone()
    }
}

#[derive(Debug)]
pub struct BusEndpoint {
    peer: Peer,
    bus: Bus,
}

impl Endpoint for BusEndpoint {
    fn peer(&self) -> Peer {
        self.peer
    }

    fn send(&mut self, to: Peer, frame: &[u8]) -> Result<(), TransportError> {
        let dir = direction(self.peer, to).ok_or(TransportError::InvalidRoute {
            from: self.peer,
            to,
        })?;
        let mut state = self.bus.state.lock().unwrap();
        if state.closed.contains(&self.peer) || state.closed.contains(&to) {
            return Err(TransportError::Closed);
        }
        state
            .queues
            .entry((self.peer, to))
            .or_default()
            .push_back(frame.to_vec());
        state.transcript.push(TranscriptEntry {
            from: self.peer,
            to,
            frame: frame.to_vec(),
        });
        drop(state);
        self.bus.metrics.record_wire(dir, frame.len());
        Ok(())
    }

    fn recv(&mut self) -> Result<Option<(Peer, Vec<u8>)>, TransportError> {
        let mut state = self.bus.state.lock().unwrap();
        let me = self.peer;
        let next = state
            .queues
            .iter_mut()
            .filter(|((_, to), q)| *to == me && !q.is_empty())
            .find_map(|((from, _), q)| q.pop_front().map(|f| (*from, f)));
        match next {
            Some(msg) => Ok(Some(msg)),
            None if state.closed.contains(&me) => Err(TransportError::Closed),
            None => Ok(None),
        }
    }

    fn close(&mut self) {
        self.bus.state.lock().unwrap().closed.insert(self.peer);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus() -> Bus {
        Bus::new(MetricsHandle::new())
    }

    #[test]
    fn delivers_in_send_order() {
        let bus = bus();
        let mut site = bus.endpoint(Peer::Site(1));
        let mut mixer = bus.endpoint(Peer::Mixer);
        site.send(Peer::Mixer, b"first").unwrap();
        site.send(Peer::Mixer, b"second").unwrap();
        assert_eq!(
            mixer.recv().unwrap(),
            Some((Peer::Site(1), b"first".to_vec()))
        );
        assert_eq!(
            mixer.recv().unwrap(),
            Some((Peer::Site(1), b"second".to_vec()))
        );
        assert_eq!(mixer.recv().unwrap(), None);
    }

    #[test]
    fn send_counts_prefix() {
        let bus = bus();
        let mut site = bus.endpoint(Peer::Site(2));
        site.send(Peer::Mixer, &[0u8; 10]).unwrap();
        assert_eq!(bus.metrics().snapshot().site_to_mixer_bytes, 14);
        let mut mixer = bus.endpoint(Peer::Mixer);
        mixer.send(Peer::Site(2), &[0u8; 3]).unwrap();
        assert_eq!(bus.metrics().snapshot().mixer_to_sites_bytes, 7);
    }

    #[test]
    fn closed_endpoints() {
        let bus = bus();
        let mut site = bus.endpoint(Peer::Site(1));
        let mut mixer = bus.endpoint(Peer::Mixer);
        site.send(Peer::Mixer, b"x").unwrap();
        mixer.close();
        assert_eq!(site.send(Peer::Mixer, b"y"), Err(TransportError::Closed));
        assert_eq!(mixer.send(Peer::Site(1), b"z"), Err(TransportError::Closed));
        // queued frames drain before the close is reported
        assert_eq!(mixer.recv().unwrap(), Some((Peer::Site(1), b"x".to_vec())));
        assert_eq!(mixer.recv(), Err(TransportError::Closed));
    }

    #[test]
    fn star_only() {
        let bus = bus();
        let mut site = bus.endpoint(Peer::Site(1));
        assert!(matches!(
            site.send(Peer::Site(2), b"x"),
            Err(TransportError::InvalidRoute { .. })
        ));
    }

    #[test]
    fn scheduler_view() {
        let bus = bus();
        bus.endpoint(Peer::Site(2)).send(Peer::Mixer, b"b").unwrap();
        bus.endpoint(Peer::Site(1)).send(Peer::Mixer, b"a").unwrap();
        assert_eq!(
            bus.pending_pairs(),
            vec![(Peer::Site(1), Peer::Mixer), (Peer::Site(2), Peer::Mixer)]
        );
        assert_eq!(bus.deliver(Peer::Site(2), Peer::Mixer), Some(b"b".to_vec()));
        assert_eq!(bus.transcript().len(), 2);
        assert_eq!(bus.transcript()[0].frame, b"b");
    }
}
