//! Byte-level wrappers around the state machines: decode, open, dispatch,
//! encode, seal. Transports only ever see the output of these nodes.

use std::collections::BTreeMap;

use crate::mining::TransactionDB;
use crate::transport::{FrameAccounting, Peer};

use super::site::{SiteOutcome, SiteState};
use super::wire::{self, ProtocolMessage, WireWidths};
use super::{MixerConfig, MixerState, ProtocolError, SecureChannel, SessionConfig};

/// A frame ready for the transport. `accounting` describes the inner frame
/// before sealing.
#[derive(Debug, Clone)]
pub struct Outbound {
    pub to: Peer,
    pub bytes: Vec<u8>,
    pub accounting: FrameAccounting,
}

pub trait Node: Send {
    fn peer(&self) -> Peer;

    /// Frames to send before anything is received.
    fn start(&mut self) -> Result<Vec<Outbound>, ProtocolError>;

    fn handle(&mut self, from: Peer, frame: &[u8]) -> Result<Vec<Outbound>, ProtocolError>;

    fn is_done(&self) -> bool;
}

pub struct SiteNode {
    state: SiteState,
    channel: Box<dyn SecureChannel>,
    widths: WireWidths,
}

impl SiteNode {
    pub fn new(
        config: &SessionConfig,
        site_index: u16,
        db: TransactionDB,
    ) -> Result<Self, ProtocolError> {
        Ok(Self::from_state(
            SiteState::new(config, site_index, db)?,
            config.channel.site_channel(site_index),
            WireWidths::for_bit_length(config.params.bit_length()),
        ))
    }

    pub fn from_state(
        state: SiteState,
        channel: Box<dyn SecureChannel>,
        widths: WireWidths,
    ) -> Self {
        Self {
            state,
            channel,
            widths,
        }
    }

    pub fn state(&self) -> &SiteState {
        &self.state
    }

    pub fn outcome(&self) -> Result<SiteOutcome, ProtocolError> {
        self.state.result()
    }

    fn upload(&mut self, msg: &ProtocolMessage) -> Result<Outbound, ProtocolError> {
        let inner = wire::encode(msg, self.widths)?;
        let accounting = wire::accounting(&inner)?;
        Ok(Outbound {
            to: Peer::Mixer,
            bytes: self.channel.seal(&inner),
            accounting,
        })
    }
}

impl Node for SiteNode {
    fn peer(&self) -> Peer {
        Peer::Site(self.state.site_index())
    }

    fn start(&mut self) -> Result<Vec<Outbound>, ProtocolError> {
        let msg = self.state.site_round()?;
        Ok(vec![self.upload(&msg)?])
    }

    fn handle(&mut self, from: Peer, frame: &[u8]) -> Result<Vec<Outbound>, ProtocolError> {
        if from != Peer::Mixer {
            return Err(ProtocolError::UnexpectedMessage(format!(
                "site frame from {from}"
            )));
        }
        let ProtocolMessage::BroadcastAggregate { round, epsilons } =
            wire::decode(frame, self.widths)?
        else {
            return Err(ProtocolError::UnexpectedMessage(
                "site expected a broadcast".into(),
            ));
        };
        let msg = match self.state.site_receive(round, &epsilons)? {
            Some(terminate) => terminate,
            None => self.state.site_round()?,
        };
        Ok(vec![self.upload(&msg)?])
    }

    fn is_done(&self) -> bool {
        self.state.phase() == super::Phase::Terminated
    }
}

pub struct MixerNode {
    state: MixerState,
    channels: BTreeMap<u16, Box<dyn SecureChannel>>,
    widths: WireWidths,
    site_count: u16,
}

impl MixerNode {
    pub fn new(config: &MixerConfig) -> Self {
        let site_count = config.params.site_count();
        Self {
            state: MixerState::new(&config.params),
            channels: (1..=site_count)
                .map(|i| (i, config.channel.site_channel(i)))
                .collect(),
            widths: WireWidths::for_bit_length(config.params.bit_length()),
            site_count,
        }
    }

    pub fn state(&self) -> &MixerState {
        &self.state
    }
}

impl Node for MixerNode {
    fn peer(&self) -> Peer {
        Peer::Mixer
    }

    fn start(&mut self) -> Result<Vec<Outbound>, ProtocolError> {
        Ok(Vec::new())
    }

    fn handle(&mut self, from: Peer, frame: &[u8]) -> Result<Vec<Outbound>, ProtocolError> {
        let Peer::Site(sender) = from else {
            return Err(ProtocolError::UnexpectedMessage(
                "mixer frame from mixer".into(),
            ));
        };
        let channel = self
            .channels
            .get_mut(&sender)
            .ok_or_else(|| ProtocolError::UnexpectedMessage(format!("unknown sender {from}")))?;
        let inner = channel.open(frame)?;
        let msg = wire::decode(&inner, self.widths)?;
        let claimed = match &msg {
            ProtocolMessage::UploadMasked { site_index, .. }
            | ProtocolMessage::Terminate { site_index, .. } => *site_index,
            ProtocolMessage::BroadcastAggregate { .. } => sender,
        };
        if claimed != sender {
            return Err(ProtocolError::Spoofed {
                channel: from,
                claimed,
            });
        }
        let Some(broadcast) = self.state.handle(&msg)? else {
            return Ok(Vec::new());
        };
        let bytes = wire::encode(&broadcast, self.widths)?;
        let accounting = wire::accounting(&bytes)?;
        Ok((1..=self.site_count)
            .map(|i| Outbound {
                to: Peer::Site(i),
                bytes: bytes.clone(),
                accounting,
            })
            .collect())
    }

    fn is_done(&self) -> bool {
        self.state.is_finished()
    }
}
