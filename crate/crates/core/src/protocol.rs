//! Byte-level client/server plumbing and the drivers that run a full update
//! or three-round search over any [`Channel`].

use rand::{CryptoRng, RngCore};
use std::collections::BTreeSet;

use crate::client::{self, ClientState, Round2, SearchPlan};
use crate::error::{Error, Result};
use crate::messages::{
    Round1Request, Round1Response, Round2Request, Round2Response, Round3Request, Round3Response,
    SetupMessage, UpdateMessage,
};
use crate::prims::SecretKeyBundle;
use crate::server::{EncryptedDatabase, PendingSearch};
use crate::transcript::{MessageKind, SearchTranscript};
use crate::types::{DocId, Keyword, SearchQuery, UpdateTriple};

/// Public parameters a searcher fetches before searching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ServerInfo {
    pub epoch: u64,
    pub m: u64,
    pub k: u16,
}

/// Request/response transport carrying encoded message payloads. Round 1
/// opens a search session that rounds 2 and 3 continue.
pub trait Channel {
    fn hello(&mut self) -> Result<ServerInfo>;
    fn setup(&mut self, payload: &[u8]) -> Result<()>;
    fn update(&mut self, payload: &[u8]) -> Result<()>;
    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>>;
    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>>;
    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>>;
}

impl<C: Channel + ?Sized> Channel for &mut C {
    fn hello(&mut self) -> Result<ServerInfo> {
        (**self).hello()
    }
    fn setup(&mut self, payload: &[u8]) -> Result<()> {
        (**self).setup(payload)
    }
    fn update(&mut self, payload: &[u8]) -> Result<()> {
        (**self).update(payload)
    }
    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        (**self).round1(payload)
    }
    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        (**self).round2(payload)
    }
    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        (**self).round3(payload)
    }
}

/// In-process server holding the encrypted database directly.
#[derive(Debug, Default)]
pub struct LocalServer {
    edb: Option<EncryptedDatabase>,
    pending: Option<PendingSearch>,
}

impl LocalServer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_database(edb: EncryptedDatabase) -> Self {
        Self {
            edb: Some(edb),
            pending: None,
        }
    }

    pub fn database(&self) -> Option<&EncryptedDatabase> {
        self.edb.as_ref()
    }

    fn edb(&self) -> Result<&EncryptedDatabase> {
        self.edb
            .as_ref()
            .ok_or_else(|| Error::Protocol("server not initialized".into()))
    }
}

impl Channel for LocalServer {
    fn hello(&mut self) -> Result<ServerInfo> {
        let edb = self.edb()?;
        Ok(ServerInfo {
            epoch: edb.epoch(),
            m: edb.m(),
            k: edb.k(),
        })
    }

    fn setup(&mut self, payload: &[u8]) -> Result<()> {
        if self.edb.is_some() {
            return Err(Error::Protocol("server already initialized".into()));
        }
        self.edb = Some(EncryptedDatabase::from_setup(SetupMessage::from_bytes(payload)?)?);
        Ok(())
    }

    fn update(&mut self, payload: &[u8]) -> Result<()> {
        let msg = UpdateMessage::from_bytes(payload)?;
        self.pending = None;
        self.edb
            .as_mut()
            .ok_or_else(|| Error::Protocol("server not initialized".into()))?
            .apply_update(msg)
    }

    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let req = Round1Request::from_bytes(payload)?;
        self.pending = None;
        Ok(self.edb()?.search_round1(&req).to_bytes())
    }

    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let req = Round2Request::from_bytes(payload)?;
        let (resp, pending) = self.edb()?.search_round2(&req)?;
        self.pending = Some(pending);
        Ok(resp.to_bytes())
    }

    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let req = Round3Request::from_bytes(payload)?;
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("round 3 without round 2".into()))?;
        Ok(self.edb()?.search_round3(pending, &req)?.to_bytes())
    }
}

/// Wraps a channel and logs every setup, update, and search payload in both
/// directions.
#[derive(Debug)]
pub struct RecordingChannel<C> {
    inner: C,
    transcript: SearchTranscript,
}

impl<C> RecordingChannel<C> {
    pub fn new(inner: C) -> Self {
        Self {
            inner,
            transcript: SearchTranscript::new(),
        }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut C {
        &mut self.inner
    }

    pub fn transcript(&self) -> &SearchTranscript {
        &self.transcript
    }

    pub fn transcript_mut(&mut self) -> &mut SearchTranscript {
        &mut self.transcript
    }

    pub fn into_parts(self) -> (C, SearchTranscript) {
        (self.inner, self.transcript)
    }
}

impl<C: Channel> RecordingChannel<C> {
    fn exchange(
        &mut self,
        kinds: (MessageKind, MessageKind),
        payload: &[u8],
        call: impl FnOnce(&mut C, &[u8]) -> Result<Vec<u8>>,
    ) -> Result<Vec<u8>> {
        let search = self.transcript.current_search();
        self.transcript.record(kinds.0, search, payload);
        let resp = call(&mut self.inner, payload)?;
        self.transcript.record(kinds.1, search, &resp);
        Ok(resp)
    }
}

impl<C: Channel> Channel for RecordingChannel<C> {
    fn hello(&mut self) -> Result<ServerInfo> {
        self.inner.hello()
    }

    fn setup(&mut self, payload: &[u8]) -> Result<()> {
        self.transcript.record(MessageKind::Setup, None, payload);
        self.inner.setup(payload)
    }

    fn update(&mut self, payload: &[u8]) -> Result<()> {
        self.transcript.record(MessageKind::Update, None, payload);
        self.inner.update(payload)
    }

    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.transcript.begin_search();
        self.exchange(
            (MessageKind::Round1Request, MessageKind::Round1Response),
            payload,
            |c, p| c.round1(p),
        )
    }

    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.exchange(
            (MessageKind::Round2Request, MessageKind::Round2Response),
            payload,
            |c, p| c.round2(p),
        )
    }

    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.exchange(
            (MessageKind::Round3Request, MessageKind::Round3Response),
            payload,
            |c, p| c.round3(p),
        )
    }
}

/// Runs setup locally and ships the initial database.
pub fn run_setup<C: Channel, R: RngCore + CryptoRng>(
    channel: &mut C,
    capacity: u64,
    target_fp: f64,
    rng: &mut R,
) -> Result<(SecretKeyBundle, ClientState)> {
    let (sk, st, msg) = client::setup(capacity, target_fp, rng)?;
    channel.setup(&msg.to_bytes())?;
    Ok((sk, st))
}

/// Builds and sends one update batch. Client state advances only after the
/// server accepts the batch.
pub fn run_update<C: Channel, R: RngCore + CryptoRng>(
    sk: &SecretKeyBundle,
    st: &mut ClientState,
    channel: &mut C,
    batch: &[UpdateTriple],
    rng: &mut R,
) -> Result<UpdateMessage> {
    let mut next = st.clone();
    let msg = client::client_update(sk, &mut next, batch, rng)?;
    channel.update(&msg.to_bytes())?;
    *st = next;
    Ok(msg)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub ids: BTreeSet<DocId>,
    /// s-term and reordered query; `None` if a conjunct was not indexed.
    pub plan: Option<SearchPlan>,
    pub not_indexed: Option<Keyword>,
    /// Entries returned by the server before add/del resolution.
    pub returned: usize,
}

pub fn run_search<C: Channel, R: RngCore + CryptoRng>(
    sk: &SecretKeyBundle,
    channel: &mut C,
    query: &SearchQuery,
    rng: &mut R,
) -> Result<SearchOutcome> {
    let info = channel.hello()?;
    let req1 = client::search_round1(sk, info.epoch, query);
    let resp1 = Round1Response::from_bytes(&channel.round1(&req1.to_bytes())?)?;
    if resp1.entries.len() != query.len() {
        return Err(Error::Protocol("round-1 response length differs from query".into()));
    }

    let (plan, req2) = match client::search_round2(sk, info.epoch, query, &resp1, rng)? {
        Round2::NotIndexed { keyword } => {
            return Ok(SearchOutcome {
                ids: BTreeSet::new(),
                plan: None,
                not_indexed: Some(keyword),
                returned: 0,
            })
        }
        Round2::Request { plan, request } => (plan, request),
    };

    let results = match Round2Response::from_bytes(&channel.round2(&req2.to_bytes())?)? {
        Round2Response::Results(r) if plan.x_terms().is_empty() => r,
        Round2Response::Positions(sets) if !plan.x_terms().is_empty() => {
            if sets.len() as u64 != plan.s_count {
                return Err(Error::Protocol("round-2 response length differs from request".into()));
            }
            let req3 = client::search_round3(sk, info.m, &sets, rng)?;
            Round3Response::from_bytes(&channel.round3(&req3.to_bytes())?)?.results
        }
        _ => return Err(Error::Protocol("unexpected round-2 response shape".into())),
    };

    if results.iter().any(|(j, _)| *j == 0 || *j > plan.s_count) {
        return Err(Error::Protocol("result counter out of range".into()));
    }
    let ids = client::finalize(sk, plan.s_term(), &results)?;
    Ok(SearchOutcome {
        ids,
        returned: results.len(),
        plan: Some(plan),
        not_indexed: None,
    })
}
