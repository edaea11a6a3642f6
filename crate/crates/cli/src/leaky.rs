//! A deliberately broken server used to prove the auditor can see leaks.
//! It behaves like [`LocalServer`] but appends, to every round-2 response,
//! one byte per (address, x-term) pair saying whether that x-term matched:
//! exactly the per-pair outcome the aggregated filter test exists to hide.

use csse_core::bloom::BloomFilter;
use csse_core::codec::Writer;
use csse_core::messages::Round2Request;
use csse_core::prims::group_exp;
use csse_core::protocol::{Channel, LocalServer, ServerInfo};
use csse_core::{Error, Result};

pub struct LeakyServer {
    inner: LocalServer,
    filter: Option<BloomFilter>,
}

impl LeakyServer {
    pub fn new(inner: LocalServer) -> Self {
        Self { inner, filter: None }
    }

    /// The instrumented double is handed the plaintext filter, something a
    /// real server never has.
    pub fn set_filter(&mut self, filter: BloomFilter) {
        self.filter = Some(filter);
    }

    pub fn inner(&self) -> &LocalServer {
        &self.inner
    }
}

impl Channel for LeakyServer {
    fn hello(&mut self) -> Result<ServerInfo> {
        self.inner.hello()
    }

    fn setup(&mut self, payload: &[u8]) -> Result<()> {
        self.inner.setup(payload)
    }

    fn update(&mut self, payload: &[u8]) -> Result<()> {
        self.inner.update(payload)
    }

    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.inner.round1(payload)
    }

    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let mut resp = self.inner.round2(payload)?;
        let req = Round2Request::from_bytes(payload)?;
        let (Some(db), Some(filter)) = (self.inner.database(), &self.filter) else {
            return Err(Error::Protocol("leaky double needs a database and a filter".into()));
        };
        let mut w = Writer::new();
        w.count(req.xtokens.iter().map(Vec::len).sum());
        for (saddr, tokens) in req.saddrs.iter().zip(&req.xtokens) {
            let alpha = db.tset()[saddr].alpha;
            for tok in tokens {
                w.u8(u8::from(filter.contains(group_exp(tok, &alpha).as_bytes())));
            }
        }
        resp.extend(w.into_bytes());
        Ok(resp)
    }

    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.inner.round3(payload)
    }
}

/// Client-side adapter that removes the leak suffix again, so a search
/// through `LeakTolerant<RecordingChannel<LeakyServer>>` completes while the
/// transcript keeps the leaking bytes.
pub struct LeakTolerant<C> {
    inner: C,
}

impl<C> LeakTolerant<C> {
    pub fn new(inner: C) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn inner_mut(&mut self) -> &mut C {
        &mut self.inner
    }

    pub fn into_inner(self) -> C {
        self.inner
    }
}

impl<C: Channel> Channel for LeakTolerant<C> {
    fn hello(&mut self) -> Result<ServerInfo> {
        self.inner.hello()
    }

    fn setup(&mut self, payload: &[u8]) -> Result<()> {
        self.inner.setup(payload)
    }

    fn update(&mut self, payload: &[u8]) -> Result<()> {
        self.inner.update(payload)
    }

    fn round1(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.inner.round1(payload)
    }

    fn round2(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        let mut resp = self.inner.round2(payload)?;
        let req = Round2Request::from_bytes(payload)?;
        let leak = 4 + req.xtokens.iter().map(Vec::len).sum::<usize>();
        let keep = resp
            .len()
            .checked_sub(leak)
            .ok_or_else(|| Error::Protocol("round-2 response shorter than the leak suffix".into()))?;
        resp.truncate(keep);
        Ok(resp)
    }

    fn round3(&mut self, payload: &[u8]) -> Result<Vec<u8>> {
        self.inner.round3(payload)
    }
}
