use std::net::TcpListener;
use std::path::Path;
use std::time::Duration;

use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::cost::{self, CostParams};
use crate::keystream::{Seed, DEFAULT_SEED_BYTES};
use crate::mining::{Item, TransactionDB};
use crate::protocol::node::{MixerNode, SiteNode};
use crate::protocol::session::{drive_node, run_session, SimOptions, TransportKind};
use crate::protocol::site::SiteState;
use crate::protocol::wire::WireWidths;
use crate::protocol::{AeadChannel, ChannelKey, ChannelSetup, MixerConfig, SessionConfig};
use crate::secure_sum::{validate_params, GroupParams};
use crate::transport::{
    ChannelMetrics, MetricsHandle, TcpMixerEndpoint, TcpSiteEndpoint, TransportError,
};

use super::config::{Role, RunConfig, TransportChoice};
use super::dataset::{derive_modulus, load_dataset, partition};
use super::report::{Mined, Report, ReportConfig};
use super::CliError;

const CHANNEL_TAG_BYTES: u64 = 16;
// Bytes per item id assumed by the Paillier comparison.
const ITEM_BYTES: f64 = 3.0;

fn require<T: Clone>(value: &Option<T>, flag: &'static str) -> Result<T, CliError> {
    value.clone().ok_or(CliError::Missing(flag))
}

fn seed(cfg: &RunConfig) -> Result<Seed, CliError> {
    Ok(Seed::from_hex(
        &require(&cfg.seed, "--seed")?,
        DEFAULT_SEED_BYTES,
    )?)
}

fn channel_key(cfg: &RunConfig) -> Result<Option<ChannelKey>, CliError> {
    cfg.channel_key
        .as_deref()
        .map(ChannelKey::from_hex)
        .transpose()
        .map_err(CliError::from)
}

struct Shared {
    db: TransactionDB,
    params: GroupParams,
    universe: Vec<Item>,
}

/// Loads `--dataset` and resolves the modulus and universe from it unless
/// given explicitly.
fn shared(cfg: &RunConfig) -> Result<Shared, CliError> {
    let db = load_dataset(&require(&cfg.dataset, "--dataset")?)?;
    let total = db.size() as u64;
    let modulus = cfg.modulus.unwrap_or_else(|| derive_modulus(total));
    let params = validate_params(modulus, cfg.bit_length, cfg.sites, total)?;
    let universe = cfg.universe.clone().unwrap_or_else(|| db.item_universe());
    Ok(Shared {
        db,
        params,
        universe,
    })
}

fn session_config(
    cfg: &RunConfig,
    params: GroupParams,
    universe: Vec<Item>,
    channel: ChannelSetup,
) -> Result<SessionConfig, CliError> {
    Ok(SessionConfig {
        params,
        seed: seed(cfg)?,
        minsup: require(&cfg.minsup, "--minsup")?,
        minconf: require(&cfg.minconf, "--minconf")?,
        item_universe: universe,
        channel,
    })
}

fn timeout(cfg: &RunConfig) -> Duration {
    Duration::from_secs(cfg.timeout_secs)
}

fn report(
    cfg: &RunConfig,
    role: &str,
    params: &GroupParams,
    mining: Option<Mined>,
    metrics: ChannelMetrics,
) -> Result<Report, CliError> {
    let cost_params = CostParams::new(
        params.site_count() as f64,
        0.0,
        WireWidths::for_bit_length(params.bit_length()).alpha as f64,
        ITEM_BYTES,
        1.0,
    )?;
    let reconciliation = cost::reconcile(&metrics, &cost_params, CHANNEL_TAG_BYTES);
    let counted: Vec<f64> = reconciliation
        .rounds
        .iter()
        .map(|r| r.candidates)
        .filter(|&h| h > 0.0)
        .collect();
    let mean_h = if counted.is_empty() {
        0.0
    } else {
        counted.iter().sum::<f64>() / counted.len() as f64
    };
    let table1 = cost::table1(params.site_count() as f64, mean_h)?;
    let transport = match cfg.transport {
        TransportChoice::Inproc => "inproc",
        TransportChoice::Tcp => "tcp",
    };
    Ok(Report {
        generated_at: OffsetDateTime::now_utc()
            .format(&Rfc3339)
            .unwrap_or_default(),
        config: ReportConfig {
            role: role.to_string(),
            transport: transport.to_string(),
            dataset: cfg
                .local_data
                .as_ref()
                .or(cfg.dataset.as_ref())
                .map(|p| p.display().to_string()),
            sites: params.site_count(),
            site_index: cfg.site_index.filter(|_| role == "site"),
            minsup: cfg.minsup.filter(|_| role != "mixer"),
            minconf: cfg.minconf.filter(|_| role != "mixer"),
            modulus: params.modulus(),
            bit_length: params.bit_length(),
            partition: format!("{:?}", cfg.partition).to_lowercase(),
            private_channel: true,
        },
        mining,
        metrics,
        reconciliation,
        table1,
    })
}

fn run_inproc(cfg: &RunConfig) -> Result<Report, CliError> {
    let Shared {
        db,
        params,
        universe,
    } = shared(cfg)?;
    let parts = partition(&db, cfg.sites as usize, cfg.partition)?;
    let master = match channel_key(cfg)? {
        Some(k) => k,
        None => ChannelKey::new(rand::random()),
    };
    let config = session_config(cfg, params, universe, ChannelSetup::Aead(master))?;
    let result = run_session(
        &config,
        &parts,
        &TransportKind::InProcess(SimOptions {
            scheduler_seed: cfg.scheduler_seed,
            muted: Vec::new(),
        }),
    )?;
    let mined = Mined::new(result.total_transactions, &result.frequents, &result.rules);
    report(cfg, "all", &params, Some(mined), result.metrics)
}

fn run_mixer(cfg: &RunConfig) -> Result<Report, CliError> {
    let params = match (cfg.modulus, &cfg.dataset) {
        (Some(m), None) => validate_params(m, cfg.bit_length, cfg.sites, 0)?,
        _ => shared(cfg)?.params,
    };
    let master = channel_key(cfg)?.ok_or(CliError::Missing("--channel-key"))?;
    let addr = require(&cfg.mixer_addr, "--mixer-addr")?;
    let listener = TcpListener::bind(addr).map_err(TransportError::from)?;
    let metrics = MetricsHandle::new();
    let mut ep = TcpMixerEndpoint::accept(&listener, cfg.sites, metrics.clone(), timeout(cfg))?;
    let mut node = MixerNode::new(&MixerConfig {
        params,
        channel: ChannelSetup::Aead(master),
    });
    drive_node(&mut node, &mut ep, &metrics)?;
    report(cfg, "mixer", &params, None, metrics.snapshot())
}

fn run_site(cfg: &RunConfig) -> Result<Report, CliError> {
    let index = require(&cfg.site_index, "--site-index")?;
    let (db, params, universe) = match &cfg.local_data {
        Some(path) => {
            let db = load_dataset(path)?;
            let modulus = require(&cfg.modulus, "--modulus")?;
            let universe = require(&cfg.universe, "--universe")?;
            let params = validate_params(modulus, cfg.bit_length, cfg.sites, db.size() as u64)?;
            (db, params, universe)
        }
        None => {
            let Shared {
                db,
                params,
                universe,
            } = shared(cfg)?;
            let mut parts = partition(&db, cfg.sites as usize, cfg.partition)?;
            if index == 0 || index > cfg.sites {
                return Err(CliError::Invalid(format!(
                    "--site-index {index} outside 1..={}",
                    cfg.sites
                )));
            }
            (parts.swap_remove(index as usize - 1), params, universe)
        }
    };
    let key = channel_key(cfg)?.ok_or(CliError::Missing("--channel-key"))?;
    let addr = require(&cfg.mixer_addr, "--mixer-addr")?;
    let config = session_config(cfg, params, universe, ChannelSetup::Plain)?;
    let mut node = SiteNode::from_state(
        SiteState::new(&config, index, db)?,
        Box::new(AeadChannel::new(&key, index)),
        WireWidths::for_bit_length(params.bit_length()),
    );
    let metrics = MetricsHandle::new();
    let mut ep = TcpSiteEndpoint::connect(addr, index, metrics.clone(), timeout(cfg))?;
    drive_node(&mut node, &mut ep, &metrics)?;
    let outcome = node.outcome()?;
    let mined = Mined::new(
        outcome.total_transactions,
        &outcome.frequents,
        &outcome.rules,
    );
    report(cfg, "site", &params, Some(mined), metrics.snapshot())
}

/// Load, partition, derive the modulus, mine, and build the report.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    match (cfg.transport, cfg.role) {
        (TransportChoice::Inproc, None) => run_inproc(cfg),
        (TransportChoice::Inproc, Some(_)) => Err(CliError::Invalid(
            "--role only applies to --transport tcp".into(),
        )),
        (TransportChoice::Tcp, None) => Err(CliError::Missing("--role")),
        (TransportChoice::Tcp, Some(Role::Mixer)) => run_mixer(cfg),
        (TransportChoice::Tcp, Some(Role::Site)) => run_site(cfg),
    }
}

/// The channel key a site needs, derived from the master key.
pub fn site_key_hex(cfg: &RunConfig) -> Result<String, CliError> {
    let master = channel_key(cfg)?.ok_or(CliError::Missing("--channel-key"))?;
    let index = require(&cfg.site_index, "--site-index")?;
    Ok(master.derive_for_site(index).to_hex())
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, report.to_json())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
