//! Count Distribution Apriori over the mixer secure sum.
//!
//! Every site computes the same candidate set each round, counts it locally,
//! masks each count under fresh per-slot keys and uploads the masked vector.
//! The mixer adds the vectors slot-wise and sends the sums back; each site
//! unmasks them into global counts and keeps the frequent candidates. Round 0
//! sums the empty itemset, i.e. the database sizes, so every site learns the
//! global transaction count without revealing its own.

pub mod channel;
pub mod mixer;
pub mod node;
pub mod session;
pub mod site;
pub mod wire;

use thiserror::Error;

use crate::keystream::{KeystreamError, Seed};
use crate::mining::{Item, MiningError};
use crate::secure_sum::{GroupParams, SecureSumError};
use crate::transport::{Peer, TransportError};

pub use channel::{AeadChannel, ChannelKey, ChannelSetup, PlainChannel, SecureChannel};
pub use mixer::MixerState;
pub use node::{MixerNode, Node, Outbound, SiteNode};
pub use session::{
    run_session, run_simulated, run_tcp_loopback, MiningResult, SimOptions, TransportKind,
};
pub use site::{Phase, SiteOutcome, SiteState};
pub use wire::{ProtocolMessage, WireError, WireWidths};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("local count {count} is not below the modulus {modulus}")]
    CountOverflow { count: u64, modulus: u64 },
    #[error("message for round {got} while in round {expected}")]
    StaleRound { expected: u32, got: u32 },
    #[error("broadcast for round {got} while awaiting round {expected}")]
    RoundMismatch { expected: u32, got: u32 },
    #[error("alpha {alpha} is not a residue modulo {modulus}")]
    AlphaOutOfRange { alpha: u64, modulus: u64 },
    #[error("site {0} already reported this round")]
    DuplicateUpload(u16),
    #[error("vector of {got} entries where {expected} were expected")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{0}")]
    UnexpectedMessage(String),
    #[error("sites disagree on termination in round {0}")]
    SiteDisagreement(u32),
    #[error("sites hold different frequent itemsets after round {0}")]
    AgreementViolation(u32),
    #[error("frame from {channel} claims to come from site {claimed}")]
    Spoofed { channel: Peer, claimed: u16 },
    #[error("timed out; still waiting on {0:?}")]
    Timeout(Vec<Peer>),
    #[error("{0} sites configured; at least 3 are required")]
    TooFewSites(u16),
    #[error("{dbs} databases supplied for {sites} sites")]
    PartitionCount { sites: u16, dbs: usize },
    #[error("modulus {modulus} does not exceed the {total} transactions in the session")]
    ModulusTooSmall { modulus: u64, total: u64 },
    #[error("site worker failed: {0}")]
    Worker(String),
    #[error(transparent)]
    SecureSum(#[from] SecureSumError),
    #[error(transparent)]
    Keystream(#[from] KeystreamError),
    #[error(transparent)]
    Mining(#[from] MiningError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Channel(#[from] channel::ChannelError),
    #[error(transparent)]
    Transport(TransportError),
}

impl From<TransportError> for ProtocolError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::Timeout => ProtocolError::Timeout(Vec::new()),
            other => ProtocolError::Transport(other),
        }
    }
}

/// Everything a site needs. The mixer gets a [`MixerConfig`] instead, which
/// has no seed field at all.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub params: GroupParams,
    pub seed: Seed,
    pub minsup: f64,
    pub minconf: f64,
    pub item_universe: Vec<Item>,
    pub channel: ChannelSetup,
}

impl SessionConfig {
    pub fn site_count(&self) -> u16 {
        self.params.site_count()
    }

    pub fn mixer_config(&self) -> MixerConfig {
        MixerConfig {
            params: self.params,
            channel: self.channel.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixerConfig {
    pub params: GroupParams,
    pub channel: ChannelSetup,
}
