//! Server engine. It only ever sees addresses, masked values, blinding
//! scalars, frequency ciphertexts, and the encrypted cross-tag filter.

use std::collections::HashMap;

use crate::bloom::positions;
use crate::error::{Error, Result};
use crate::lfka::{freq_find, EncryptedFreqSet};
use crate::messages::{
    ResultEntry, Round1Request, Round1Response, Round2Request, Round2Response, Round3Request,
    Round3Response, SetupMessage, UpdateMessage,
};
use crate::prims::{group_exp, Scalar};
use crate::shve::{shve_query, ShveCiphertext};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TSetValue {
    pub val: [u8; 32],
    pub alpha: Scalar,
}

/// `EDB = (TSet, xtagBF, C)` plus the public filter geometry the server
/// needs to map cross-tags to positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedDatabase {
    m: u64,
    k: u16,
    tset: HashMap<[u8; 32], TSetValue>,
    xtag_bf: ShveCiphertext,
    freq_set: EncryptedFreqSet,
}

impl EncryptedDatabase {
    pub fn from_setup(msg: SetupMessage) -> Result<Self> {
        Self::from_parts(msg.m, msg.k, HashMap::new(), msg.xtag_bf, EncryptedFreqSet::empty(0))
    }

    pub fn from_parts(
        m: u64,
        k: u16,
        tset: HashMap<[u8; 32], TSetValue>,
        xtag_bf: ShveCiphertext,
        freq_set: EncryptedFreqSet,
    ) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidParameter("zero filter geometry".into()));
        }
        if xtag_bf.len() as u64 != m {
            return Err(Error::LengthMismatch {
                expected: m as usize,
                actual: xtag_bf.len(),
            });
        }
        Ok(Self {
            m,
            k,
            tset,
            xtag_bf,
            freq_set,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn epoch(&self) -> u64 {
        self.freq_set.epoch
    }

    pub fn tset(&self) -> &HashMap<[u8; 32], TSetValue> {
        &self.tset
    }

    pub fn xtag_bf(&self) -> &ShveCiphertext {
        &self.xtag_bf
    }

    pub fn freq_set(&self) -> &EncryptedFreqSet {
        &self.freq_set
    }

    pub fn entry_count(&self) -> usize {
        self.tset.len()
    }

    /// Stores the batch, replacing the filter and frequency set wholesale.
    /// The batch is rejected as a whole if any address is already present.
    pub fn apply_update(&mut self, msg: UpdateMessage) -> Result<()> {
        if msg.xtag_bf.len() as u64 != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m as usize,
                actual: msg.xtag_bf.len(),
            });
        }
        let mut seen = std::collections::HashSet::with_capacity(msg.entries.len());
        for e in &msg.entries {
            if self.tset.contains_key(&e.addr) || !seen.insert(e.addr) {
                return Err(Error::AddressCollision);
            }
        }
        self.tset.reserve(msg.entries.len());
        for e in msg.entries {
            self.tset.insert(
                e.addr,
                TSetValue {
                    val: e.val,
                    alpha: e.alpha,
                },
            );
        }
        self.xtag_bf = msg.xtag_bf;
        self.freq_set = msg.freq_set;
        Ok(())
    }

    pub fn search_round1(&self, req: &Round1Request) -> Round1Response {
        Round1Response {
            entries: freq_find(&req.tokens, &self.freq_set),
        }
    }

    /// Looks up each s-term address, raises its cross-tokens to the stored
    /// blinding factor, and answers with the union of Bloom positions per
    /// address. The masked values are kept for round 3.
    pub fn search_round2(&self, req: &Round2Request) -> Result<(Round2Response, PendingSearch)> {
        if !req.xtokens.is_empty() && req.xtokens.len() != req.saddrs.len() {
            return Err(Error::Protocol("cross-token list length differs from address list".into()));
        }
        let xt = req.x_terms();
        if req.xtokens.iter().any(|t| t.len() != xt) || (!req.xtokens.is_empty() && xt == 0) {
            return Err(Error::Protocol("ragged cross-token tuples".into()));
        }

        let mut svals = Vec::with_capacity(req.saddrs.len());
        let mut sets = Vec::with_capacity(if xt > 0 { req.saddrs.len() } else { 0 });
        for (j, saddr) in req.saddrs.iter().enumerate() {
            let entry = self.tset.get(saddr).ok_or(Error::UnknownAddress)?;
            svals.push(entry.val);
            if xt > 0 {
                let mut set: Vec<u32> = req.xtokens[j]
                    .iter()
                    .flat_map(|tok| {
                        let xtag = group_exp(tok, &entry.alpha);
                        positions(xtag.as_bytes(), self.m, self.k)
                    })
                    .map(|p| p as u32)
                    .collect();
                set.sort_unstable();
                set.dedup();
                sets.push(set);
            }
        }

        if xt == 0 {
            let results = numbered(svals);
            return Ok((Round2Response::Results(results), PendingSearch { svals: Vec::new() }));
        }
        Ok((Round2Response::Positions(sets), PendingSearch { svals }))
    }

    /// One SHVE query per key against the encrypted filter; returns the
    /// masked values whose key matched, ascending in `j`.
    pub fn search_round3(&self, pending: PendingSearch, req: &Round3Request) -> Result<Round3Response> {
        if req.keys.len() != pending.svals.len() {
            return Err(Error::LengthMismatch {
                expected: pending.svals.len(),
                actual: req.keys.len(),
            });
        }
        let results = numbered(pending.svals)
            .into_iter()
            .zip(&req.keys)
            .filter(|(_, key)| shve_query(key, &self.xtag_bf))
            .map(|(entry, _)| entry)
            .collect();
        Ok(Round3Response { results })
    }
}

fn numbered(svals: Vec<[u8; 32]>) -> Vec<ResultEntry> {
    svals
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i as u64 + 1, v))
        .collect()
}

/// Server memory between rounds 2 and 3 of one search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PendingSearch {
    svals: Vec<[u8; 32]>,
}

impl PendingSearch {
    pub fn len(&self) -> usize {
        self.svals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.svals.is_empty()
    }
}
