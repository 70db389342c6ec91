//! Command-line front end: dataset ingestion, partitioning, session
//! execution and reporting.

pub mod config;
pub mod dataset;
pub mod report;
pub mod run;

use thiserror::Error;

use crate::cost::CostError;
use crate::keystream::KeystreamError;
use crate::protocol::channel::ChannelError;
use crate::protocol::ProtocolError;
use crate::secure_sum::SecureSumError;
use crate::transport::TransportError;

pub use config::{Role, RunConfig, TransportChoice};
pub use dataset::{
    derive_modulus, load_dataset, parse_dataset, partition, DatasetError, PartitionScheme,
};
pub use report::Report;
pub use run::{run, site_key_hex, write_report};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("missing required option {0}")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot write report: {0}")]
    Io(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Params(#[from] SecureSumError),
    #[error(transparent)]
    Seed(#[from] KeystreamError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Cost(#[from] CostError),
}
