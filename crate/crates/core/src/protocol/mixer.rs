//! The mixer: adds masked vectors slot by slot.
//!
//! [`MixerState`] holds masked values and bookkeeping only. It has no seed,
//! no keys and no way to build any.

use std::collections::{BTreeMap, BTreeSet};

use crate::secure_sum::{self, GroupParams, MaskedValue, SecureSumError};

use super::{ProtocolError, ProtocolMessage};

#[derive(Debug, Clone)]
pub struct MixerState {
    round: u32,
    expected: u16,
    modulus: u64,
    pending: BTreeMap<(u32, u32), Vec<MaskedValue>>,
    uploaded: BTreeSet<u16>,
    vector_len: Option<usize>,
    terminated: BTreeSet<u16>,
    finished: bool,
}

impl MixerState {
    pub fn new(params: &GroupParams) -> Self {
        Self {
            round: 0,
            expected: params.site_count(),
            modulus: params.modulus(),
            pending: BTreeMap::new(),
            uploaded: BTreeSet::new(),
            vector_len: None,
            terminated: BTreeSet::new(),
            finished: false,
        }
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Sites heard from in the current round.
    pub fn reported(&self) -> BTreeSet<u16> {
        self.uploaded.union(&self.terminated).copied().collect()
    }

    fn check_sender(&self, round: u32, site_index: u16) -> Result<(), ProtocolError> {
        if self.finished || round != self.round {
            return Err(ProtocolError::StaleRound {
                expected: self.round,
                got: round,
            });
        }
        if site_index == 0 || site_index > self.expected {
            return Err(SecureSumError::SiteIndexOutOfRange {
                index: site_index,
                site_count: self.expected,
            }
            .into());
        }
        if self.uploaded.contains(&site_index) || self.terminated.contains(&site_index) {
            return Err(ProtocolError::DuplicateUpload(site_index));
        }
        Ok(())
    }

    /// Stores one upload; once all sites have uploaded, returns the
    /// broadcast of per-slot sums and moves to the next round.
    pub fn mixer_round(
        &mut self,
        round: u32,
        site_index: u16,
        alphas: &[u64],
    ) -> Result<Option<ProtocolMessage>, ProtocolError> {
        self.check_sender(round, site_index)?;
        if !self.terminated.is_empty() {
            return Err(ProtocolError::SiteDisagreement(round));
        }
        if let Some(len) = self.vector_len {
            if len != alphas.len() {
                return Err(ProtocolError::LengthMismatch {
                    expected: len,
                    got: alphas.len(),
                });
            }
        }
        if let Some(&alpha) = alphas.iter().find(|&&a| a >= self.modulus) {
            return Err(ProtocolError::AlphaOutOfRange {
                alpha,
                modulus: self.modulus,
            });
        }
        self.vector_len = Some(alphas.len());
        self.uploaded.insert(site_index);
        for (j, &alpha) in alphas.iter().enumerate() {
            let item_index = j as u32;
            self.pending
                .entry((round, item_index))
                .or_default()
                .push(MaskedValue {
                    round,
                    item_index,
                    alpha,
                });
        }
        if self.uploaded.len() < self.expected as usize {
            return Ok(None);
        }

        let len = self.vector_len.take().unwrap_or(0);
        let mut epsilons = Vec::with_capacity(len);
        for j in 0..len as u32 {
            let values = self.pending.remove(&(round, j)).unwrap_or_default();
            epsilons.push(secure_sum::mix(&values, self.expected)?.epsilon);
        }
        self.uploaded.clear();
        self.round += 1;
        Ok(Some(ProtocolMessage::BroadcastAggregate {
            round,
            epsilons,
        }))
    }

    /// Records a site's decision to stop. Returns true once every site has
    /// terminated in this round.
    pub fn mixer_terminate(&mut self, round: u32, site_index: u16) -> Result<bool, ProtocolError> {
        self.check_sender(round, site_index)?;
        if !self.uploaded.is_empty() {
            return Err(ProtocolError::SiteDisagreement(round));
        }
        self.terminated.insert(site_index);
        self.finished = self.terminated.len() == self.expected as usize;
        Ok(self.finished)
    }

    /// Dispatches a site message.
    pub fn handle(
        &mut self,
        msg: &ProtocolMessage,
    ) -> Result<Option<ProtocolMessage>, ProtocolError> {
        match msg {
            ProtocolMessage::UploadMasked {
                round,
                site_index,
                alphas,
            } => self.mixer_round(*round, *site_index, alphas),
            ProtocolMessage::Terminate { round, site_index } => {
                self.mixer_terminate(*round, *site_index)?;
                Ok(None)
            }
            ProtocolMessage::BroadcastAggregate { .. } => Err(ProtocolError::UnexpectedMessage(
                "mixer received a broadcast".into(),
            )),
        }
    }
}
