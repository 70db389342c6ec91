//! Drives a full session: all sites plus the mixer, either on the
//! deterministic in-process bus or over loopback TCP.

use std::collections::BTreeMap;
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mining::{FrequentSet, Itemset, Rule, TransactionDB};
use crate::transport::{
    direction, Bus, ChannelMetrics, Endpoint, MetricsHandle, Peer, TcpMixerEndpoint,
    TcpSiteEndpoint, TranscriptEntry, TransportError,
};

use super::node::{MixerNode, Node, Outbound, SiteNode};
use super::site::SiteOutcome;
use super::{ProtocolError, SessionConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MiningResult {
    pub total_transactions: u64,
    pub frequents: Vec<FrequentSet>,
    pub rules: Vec<Rule>,
    pub metrics: ChannelMetrics,
}

impl MiningResult {
    fn from_outcome(outcome: SiteOutcome, metrics: ChannelMetrics) -> Self {
        Self {
            total_transactions: outcome.total_transactions,
            frequents: outcome.frequents,
            rules: outcome.rules,
            metrics,
        }
    }

    /// All frequent itemsets with their global counts.
    pub fn frequent_counts(&self) -> BTreeMap<Itemset, u64> {
        self.frequents
            .iter()
            .flat_map(|level| level.entries().iter().cloned())
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Seeds the choice of which queued frame is delivered next.
    pub scheduler_seed: u64,
    /// Sites whose outgoing frames are silently dropped.
    pub muted: Vec<u16>,
}

#[derive(Debug, Clone)]
pub enum TransportKind {
    InProcess(SimOptions),
    TcpLoopback { timeout: Duration },
}

fn check_preconditions(config: &SessionConfig, dbs: &[TransactionDB]) -> Result<(), ProtocolError> {
    let sites = config.site_count();
    if sites < 3 {
        return Err(ProtocolError::TooFewSites(sites));
    }
    if dbs.len() != sites as usize {
        return Err(ProtocolError::PartitionCount {
            sites,
            dbs: dbs.len(),
        });
    }
    let total: u64 = dbs.iter().map(|db| db.size() as u64).sum();
    let modulus = config.params.modulus();
    if modulus <= total {
        return Err(ProtocolError::ModulusTooSmall { modulus, total });
    }
    Ok(())
}

fn send_all(
    endpoint: &mut dyn Endpoint,
    metrics: &MetricsHandle,
    outbound: Vec<Outbound>,
) -> Result<(), ProtocolError> {
    for out in outbound {
        endpoint.send(out.to, &out.bytes)?;
        if let Some(dir) = direction(endpoint.peer(), out.to) {
            metrics.record_frame(dir, &out.accounting);
        }
    }
    Ok(())
}

fn check_agreement(outcomes: &[SiteOutcome]) -> Result<(), ProtocolError> {
    let first = &outcomes[0];
    for other in &outcomes[1..] {
        if other != first {
            let round = first
                .frequents
                .iter()
                .zip(&other.frequents)
                .position(|(a, b)| a != b)
                .unwrap_or(first.frequents.len().min(other.frequents.len()));
            return Err(ProtocolError::AgreementViolation(round as u32 + 1));
        }
    }
    Ok(())
}

/// Runs every participant on one thread over the in-process bus. Frames are
/// delivered one at a time in an order drawn from `options.scheduler_seed`,
/// so a fixed seed gives a byte-identical transcript.
pub fn run_simulated(
    config: &SessionConfig,
    dbs: &[TransactionDB],
    options: &SimOptions,
) -> Result<(MiningResult, Vec<TranscriptEntry>), ProtocolError> {
    check_preconditions(config, dbs)?;
    let metrics = MetricsHandle::new();
    let bus = Bus::new(metrics.clone());
    let n = config.site_count();

    let mut mixer = MixerNode::new(&config.mixer_config());
    let mut mixer_ep = bus.endpoint(Peer::Mixer);
    let mut sites = Vec::new();
    let mut site_eps = Vec::new();
    for (i, db) in (1..=n).zip(dbs) {
        sites.push(SiteNode::new(config, i, db.clone())?);
        site_eps.push(bus.endpoint(Peer::Site(i)));
    }
    let mut agreed: BTreeMap<u32, Option<FrequentSet>> = BTreeMap::new();

    for (i, site) in sites.iter_mut().enumerate() {
        let out = site.start()?;
        if !options.muted.contains(&(i as u16 + 1)) {
            send_all(&mut site_eps[i], &metrics, out)?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.scheduler_seed);
    loop {
        if mixer.is_done() && sites.iter().all(|s| s.is_done()) {
            break;
        }
        let pending = bus.pending_pairs();
        if pending.is_empty() {
            let mut waiting: Vec<Peer> = sites
                .iter()
                .filter(|s| !s.is_done())
                .map(|s| s.peer())
                .collect();
            if !mixer.is_done() {
                waiting.push(Peer::Mixer);
            }
            return Err(ProtocolError::Timeout(waiting));
        }
        let (from, to) = pending[rng.gen_range(0..pending.len())];
        let frame = bus.deliver(from, to).expect("pair has a queued frame");
        match to {
            Peer::Mixer => {
                let out = mixer.handle(from, &frame)?;
                send_all(&mut mixer_ep, &metrics, out)?;
            }
            Peer::Site(i) => {
                let idx = i as usize - 1;
                let site = &mut sites[idx];
                let round = site.state().round();
                let out = site.handle(from, &frame)?;
                let level = site
                    .state()
                    .frequents()
                    .last()
                    .filter(|l| l.k() == round as usize)
                    .cloned();
                match agreed.get(&round) {
                    Some(seen) if *seen != level => {
                        return Err(ProtocolError::AgreementViolation(round))
                    }
                    Some(_) => {}
                    None => {
                        agreed.insert(round, level);
                    }
                }
                if !options.muted.contains(&i) {
                    send_all(&mut site_eps[idx], &metrics, out)?;
                }
            }
        }
    }

    let outcomes = sites
        .iter()
        .map(|s| s.outcome())
        .collect::<Result<Vec<_>, _>>()?;
    check_agreement(&outcomes)?;
    let result =
        MiningResult::from_outcome(outcomes.into_iter().next().unwrap(), metrics.snapshot());
    Ok((result, bus.transcript()))
}

/// Sends `node`'s opening frames, then feeds it frames from `endpoint`
/// until it is done.
pub fn drive_node(
    node: &mut dyn Node,
    endpoint: &mut dyn Endpoint,
    metrics: &MetricsHandle,
) -> Result<(), ProtocolError> {
    let out = node.start()?;
    send_all(endpoint, metrics, out)?;
    while !node.is_done() {
        let Some((from, frame)) = endpoint.recv()? else {
            return Err(ProtocolError::Timeout(vec![endpoint.peer()]));
        };
        let out = node.handle(from, &frame)?;
        send_all(endpoint, metrics, out)?;
    }
    endpoint.close();
    Ok(())
}

/// One thread per site plus the mixer on the calling thread, all talking
/// over real sockets on 127.0.0.1.
pub fn run_tcp_loopback(
    config: &SessionConfig,
    dbs: &[TransactionDB],
    timeout: Duration,
) -> Result<MiningResult, ProtocolError> {
    check_preconditions(config, dbs)?;
    let listener = TcpListener::bind("127.0.0.1:0").map_err(TransportError::from)?;
    let addr = listener.local_addr().map_err(TransportError::from)?;
    let metrics = MetricsHandle::new();

    let workers: Vec<_> = (1..=config.site_count())
        .zip(dbs)
        .map(|(i, db)| {
            let config = config.clone();
            let db = db.clone();
            let metrics = metrics.clone();
            thread::spawn(move || -> Result<SiteOutcome, ProtocolError> {
                let mut node = SiteNode::new(&config, i, db)?;
                let mut ep = TcpSiteEndpoint::connect(addr, i, metrics.clone(), timeout)?;
                drive_node(&mut node, &mut ep, &metrics)?;
                node.outcome()
            })
        })
        .collect();

    let mixer_result = (|| {
        let mut ep =
            TcpMixerEndpoint::accept(&listener, config.site_count(), metrics.clone(), timeout)?;
        let mut node = MixerNode::new(&config.mixer_config());
        drive_node(&mut node, &mut ep, &metrics)
    })();

    let mut outcomes = Vec::new();
    let mut first_err = mixer_result.err();
    for w in workers {
        match w.join() {
            Ok(Ok(o)) => outcomes.push(o),
            Ok(Err(e)) => {
                first_err.get_or_insert(e);
            }
            Err(_) => {
                first_err.get_or_insert(ProtocolError::Worker("site thread panicked".into()));
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    check_agreement(&outcomes)?;
    Ok(MiningResult::from_outcome(
        outcomes.into_iter().next().unwrap(),
        metrics.snapshot(),
    ))
}

pub fn run_session(
    config: &SessionConfig,
    dbs: &[TransactionDB],
    transport: &TransportKind,
) -> Result<MiningResult, ProtocolError> {
    match transport {
        TransportKind::InProcess(options) => run_simulated(config, dbs, options).map(|(r, _)| r),
        TransportKind::TcpLoopback { timeout } => run_tcp_loopback(config, dbs, *timeout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keystream::Seed;
    use crate::protocol::ChannelSetup;
    use crate::secure_sum::validate_params;

    fn config(n: u16, modulus: u64, minsup: f64) -> SessionConfig {
        SessionConfig {
            params: validate_params(modulus, 16, n, 0).unwrap(),
            seed: Seed::new(vec![3; 10], 10).unwrap(),
            minsup,
            minconf: 0.5,
            item_universe: vec![0, 1, 2],
            channel: ChannelSetup::Plain,
        }
    }

    fn single(items: &[u32]) -> TransactionDB {
        TransactionDB::new(vec![Itemset::new(items.iter().copied())])
    }

    #[test]
    fn unanimous_singleton() {
        let mut cfg = config(3, 101, 1.0);
        cfg.item_universe = vec![0];
        let dbs = vec![single(&[0]); 3];
        let (r, _) = run_simulated(&cfg, &dbs, &SimOptions::default()).unwrap();
        assert_eq!(r.total_transactions, 3);
        assert_eq!(
            r.frequent_counts().into_iter().collect::<Vec<_>>(),
            vec![(Itemset::new([0]), 3)]
        );
        assert!(r.rules.is_empty());
    }

    #[test]
    fn two_sites_rejected() {
        let cfg = SessionConfig {
            params: crate::secure_sum::GroupParams::new_unchecked(101, 16, 2),
            ..config(3, 101, 0.5)
        };
        assert_eq!(
            run_simulated(&cfg, &[single(&[0]), single(&[0])], &SimOptions::default()).unwrap_err(),
            ProtocolError::TooFewSites(2)
        );
    }

    #[test]
    fn modulus_must_exceed_total() {
        let cfg = config(3, 2, 0.5);
        assert_eq!(
            run_simulated(&cfg, &vec![single(&[0]); 3], &SimOptions::default()).unwrap_err(),
            ProtocolError::ModulusTooSmall {
                modulus: 2,
                total: 3
            }
        );
        assert!(matches!(
            run_simulated(
                &config(3, 101, 0.5),
                &vec![single(&[0]); 2],
                &SimOptions::default()
            ),
            Err(ProtocolError::PartitionCount { sites: 3, dbs: 2 })
        ));
    }

    #[test]
    fn silent_site_times_out() {
        let cfg = config(3, 101, 0.5);
        let opts = SimOptions {
            scheduler_seed: 1,
            muted: vec![2],
        };
        match run_simulated(&cfg, &vec![single(&[0, 1]); 3], &opts) {
            Err(ProtocolError::Timeout(waiting)) => {
                assert!(waiting.contains(&Peer::Mixer));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn transcript_is_reproducible_and_schedule_independent() {
        let cfg = config(4, 101, 0.3);
        let dbs: Vec<TransactionDB> = (0..4)
            .map(|i| {
                TransactionDB::new(vec![
                    Itemset::new([0, 1]),
                    Itemset::new([i % 3, 2]),
                    Itemset::new([1, 2]),
                ])
            })
            .collect();
        let opts = |seed| SimOptions {
            scheduler_seed: seed,
            muted: vec![],
        };
        let (a, ta) = run_simulated(&cfg, &dbs, &opts(7)).unwrap();
        let (b, tb) = run_simulated(&cfg, &dbs, &opts(7)).unwrap();
        assert_eq!(ta, tb);
        assert_eq!(a, b);
        let (c, _) = run_simulated(&cfg, &dbs, &opts(8)).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn tcp_matches_in_process() {
        let cfg = config(3, 101, 0.3);
        let dbs = vec![single(&[0, 1]), single(&[1, 2]), single(&[0, 1, 2])];
        let inproc =
            run_session(&cfg, &dbs, &TransportKind::InProcess(SimOptions::default())).unwrap();
        let tcp = run_session(
            &cfg,
            &dbs,
            &TransportKind::TcpLoopback {
                timeout: Duration::from_secs(10),
            },
        )
        .unwrap();
        assert_eq!(inproc, tcp);
    }
}
