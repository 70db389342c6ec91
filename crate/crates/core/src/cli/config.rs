use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use super::dataset::PartitionScheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportChoice {
    Inproc,
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Role {
    Mixer,
    Site,
}

/// Mine association rules across data sites without revealing any site's
/// counts to the mixer.
#[derive(Debug, Clone, Parser)]
#[command(name = "mixmine", version)]
pub struct RunConfig {
    /// Transaction file, one whitespace-separated transaction per line.
    #[arg(long)]
    pub dataset: Option<PathBuf>,

    /// Number of data sites (at least 3).
    #[arg(long)]
    pub sites: u16,

    #[arg(long)]
    pub minsup: Option<f64>,

    #[arg(long)]
    pub minconf: Option<f64>,

    /// Shared key-stream seed as hex (20 hex digits).
    #[arg(long, env = "MIXMINE_SEED", hide_env_values = true)]
    pub seed: Option<String>,

    /// Prime modulus. Defaults to the smallest prime above the number of
    /// transactions.
    #[arg(long)]
    pub modulus: Option<u64>,

    #[arg(long, default_value_t = 16)]
    pub bit_length: u32,

    #[arg(long, value_enum, default_value_t = TransportChoice::Inproc)]
    pub transport: TransportChoice,

    /// Role of this process in a TCP session.
    #[arg(long, value_enum)]
    pub role: Option<Role>,

    #[arg(long)]
    pub site_index: Option<u16>,

    /// Address the mixer listens on and sites connect to.
    #[arg(long)]
    pub mixer_addr: Option<SocketAddr>,

    /// Where to write the JSON report.
    #[arg(long)]
    pub report: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = PartitionScheme::RoundRobin)]
    pub partition: PartitionScheme,

    /// Site role only: mine this file as the site's own data instead of a
    /// partition of --dataset. Needs --modulus and --universe.
    #[arg(long)]
    pub local_data: Option<PathBuf>,

    /// Public item universe as comma-separated ids. Defaults to the items
    /// of --dataset.
    #[arg(long, value_delimiter = ',')]
    pub universe: Option<Vec<u32>>,

    /// Private channel key as 64 hex digits. The mixer and in-process runs
    /// take the master key; a TCP site takes its own derived key.
    #[arg(long, env = "MIXMINE_CHANNEL_KEY", hide_env_values = true)]
    pub channel_key: Option<String>,

    /// Print the channel key for --site-index derived from the master
    /// --channel-key, then exit.
    #[arg(long)]
    pub print_site_key: bool,

    /// Seed for the in-process delivery schedule.
    #[arg(long, default_value_t = 0)]
    pub scheduler_seed: u64,

    /// Seconds to wait for a peer in TCP mode.
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}
