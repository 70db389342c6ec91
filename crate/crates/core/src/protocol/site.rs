//! One data site.
//!
//! Round 0 has a single slot, the empty itemset, whose count is the size of
//! the local database. Rounds `k >= 1` carry `C_k` in canonical order.

use crate::keystream::{self, KeyScheduleConfig, StreamGenerator};
use crate::mining::{self, CandidateSet, FrequentSet, Item, Itemset, Rule, TransactionDB};
use crate::secure_sum::{self, AggregateCiphertext, GroupParams, IterationKeys};

use super::{ProtocolError, ProtocolMessage, SessionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    GenerateCandidates,
    CountLocal,
    AwaitAggregate,
    Terminated,
}

/// What every site knows once the session ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteOutcome {
    pub total_transactions: u64,
    pub frequents: Vec<FrequentSet>,
    pub rules: Vec<Rule>,
}

#[derive(Debug)]
pub struct SiteState {
    site_index: u16,
    db: TransactionDB,
    params: GroupParams,
    schedule: KeyScheduleConfig,
    minsup: f64,
    minconf: f64,
    universe: Vec<Item>,
    round: u32,
    phase: Phase,
    current_candidates: CandidateSet,
    keys: Vec<IterationKeys>,
    total: Option<u64>,
    frequents: Vec<FrequentSet>,
    keygen: StreamGenerator,
}

impl SiteState {
    pub fn new(
        config: &SessionConfig,
        site_index: u16,
        db: TransactionDB,
    ) -> Result<Self, ProtocolError> {
        let keygen = keystream::init_generator(
            &config.seed,
            &keystream::modulus_constant(config.params.modulus()),
        )?;
        Self::with_generator(config, site_index, db, keygen)
    }

    /// As [`SiteState::new`] with an explicit key source.
    pub fn with_generator(
        config: &SessionConfig,
        site_index: u16,
        db: TransactionDB,
        keygen: StreamGenerator,
    ) -> Result<Self, ProtocolError> {
        let params = config.params;
        if site_index == 0 || site_index > params.site_count() {
            return Err(secure_sum::SecureSumError::SiteIndexOutOfRange {
                index: site_index,
                site_count: params.site_count(),
            }
            .into());
        }
        Ok(Self {
            site_index,
            db,
            params,
            schedule: KeyScheduleConfig::for_params(&params),
            minsup: config.minsup,
            minconf: config.minconf,
            universe: config.item_universe.clone(),
            round: 0,
            phase: Phase::GenerateCandidates,
            current_candidates: CandidateSet::new(0, vec![Itemset::empty()])?,
            keys: Vec::new(),
            total: None,
            frequents: Vec::new(),
            keygen,
        })
    }

    pub fn site_index(&self) -> u16 {
        self.site_index
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn frequents(&self) -> &[FrequentSet] {
        &self.frequents
    }

    pub fn current_candidates(&self) -> &CandidateSet {
        &self.current_candidates
    }

    fn candidates_for_round(&self) -> CandidateSet {
        match (self.round, self.frequents.last()) {
            (0, _) => self.current_candidates.clone(),
            (1, _) => CandidateSet::singletons(&self.universe),
            (_, Some(prev)) => mining::next_candidates(prev),
            (_, None) => CandidateSet::new(self.round as usize, Vec::new()).expect("empty"),
        }
    }

    /// Builds this round's upload, or a `Terminate` when there is nothing
    /// left to count.
    pub fn site_round(&mut self) -> Result<ProtocolMessage, ProtocolError> {
        if !matches!(self.phase, Phase::GenerateCandidates | Phase::CountLocal) {
            return Err(ProtocolError::UnexpectedMessage(format!(
                "site {} asked to upload in phase {:?}",
                self.site_index, self.phase
            )));
        }
        self.current_candidates = self.candidates_for_round();
        if self.current_candidates.is_empty() {
            self.phase = Phase::Terminated;
            return Ok(ProtocolMessage::Terminate {
                round: self.round,
                site_index: self.site_index,
            });
        }
        self.phase = Phase::CountLocal;

        let counts = mining::count_supports(&self.db, &self.current_candidates);
        let modulus = self.params.modulus();
        if let Some(&count) = counts.iter().find(|&&c| c >= modulus) {
            return Err(ProtocolError::CountOverflow { count, modulus });
        }
        self.keys.clear();
        let mut alphas = Vec::with_capacity(counts.len());
        for (j, &count) in counts.iter().enumerate() {
            let keys = self.keygen.derive_iteration_keys(
                self.round,
                j as u32,
                &self.schedule,
                &self.params,
            )?;
            alphas.push(secure_sum::mask(count, &keys, self.site_index, &self.params)?.alpha);
            self.keys.push(keys);
        }
        self.phase = Phase::AwaitAggregate;
        Ok(ProtocolMessage::UploadMasked {
            round: self.round,
            site_index: self.site_index,
            alphas,
        })
    }

    /// Unmasks a broadcast. Returns the `Terminate` to send when the round
    /// left no frequent itemsets.
    pub fn site_receive(
        &mut self,
        round: u32,
        epsilons: &[u128],
    ) -> Result<Option<ProtocolMessage>, ProtocolError> {
        if self.phase != Phase::AwaitAggregate || round != self.round {
            return Err(ProtocolError::RoundMismatch {
                expected: self.round,
                got: round,
            });
        }
        if epsilons.len() != self.keys.len() {
            return Err(ProtocolError::LengthMismatch {
                expected: self.keys.len(),
                got: epsilons.len(),
            });
        }
        let mut counts = Vec::with_capacity(epsilons.len());
        for (keys, &epsilon) in self.keys.iter().zip(epsilons) {
            let agg = AggregateCiphertext {
                round,
                item_index: keys.item_index(),
                epsilon,
            };
            counts.push(secure_sum::unmask(&agg, keys, &self.params)?);
        }
        self.keys.clear();

        let done = if round == 0 {
            self.total = Some(counts[0]);
            counts[0] == 0
        } else {
            let total = self.total.expect("round 0 sets the total");
            let level =
                mining::compute_frequent(&self.current_candidates, &counts, total, self.minsup)?;
            let empty = level.is_empty();
            if !empty {
                self.frequents.push(level);
            }
            empty
        };
        self.round += 1;
        if done {
            self.phase = Phase::Terminated;
            return Ok(Some(ProtocolMessage::Terminate {
                round: self.round,
                site_index: self.site_index,
            }));
        }
        self.phase = Phase::GenerateCandidates;
        Ok(None)
    }

    /// Frequent itemsets and rules, available once terminated.
    pub fn result(&self) -> Result<SiteOutcome, ProtocolError> {
        if self.phase != Phase::Terminated {
            return Err(ProtocolError::UnexpectedMessage(format!(
                "site {} has not terminated",
                self.site_index
            )));
        }
        let total = self.total.unwrap_or(0);
        let rules = if total == 0 {
            Vec::new()
        } else {
            mining::generate_rules(&self.frequents, total, self.minconf)?
        };
        Ok(SiteOutcome {
            total_transactions: total,
            frequents: self.frequents.clone(),
            rules,
        })
    }
}
