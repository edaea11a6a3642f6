//! Client/server messages and their binary payload encodings.
//!
//! Every decoder is strict: unknown tags, non-canonical group or scalar
//! encodings, and trailing bytes are all rejected.

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::lfka::{EncryptedFreqSet, FreqToken, TOKEN_LEN};
use crate::prims::{GroupElement, Scalar};
use crate::shve::{ShveCiphertext, ShveKey};

fn strict<T>(bytes: &[u8], f: impl FnOnce(&mut Reader<'_>) -> Result<T>) -> Result<T> {
    let mut r = Reader::new(bytes);
    let v = f(&mut r)?;
    r.finish()?;
    Ok(v)
}

fn to_bytes(f: impl FnOnce(&mut Writer)) -> Vec<u8> {
    let mut w = Writer::new();
    f(&mut w);
    w.into_bytes()
}

fn scalar(r: &mut Reader<'_>) -> Result<Scalar> {
    Scalar::from_bytes(&r.array()?)
}

fn group(r: &mut Reader<'_>) -> Result<GroupElement> {
    GroupElement::from_bytes(&r.array()?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TSetEntry {
    pub addr: [u8; 32],
    pub val: [u8; 32],
    pub alpha: Scalar,
}

/// Everything one update batch sends: the re-encrypted frequency set, the new
/// TSet entries, and the full re-encrypted cross-tag filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateMessage {
    pub freq_set: EncryptedFreqSet,
    pub entries: Vec<TSetEntry>,
    pub xtag_bf: ShveCiphertext,
}

impl UpdateMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| {
            self.freq_set.encode(w);
            w.count(self.entries.len());
            for e in &self.entries {
                w.bytes(&e.addr).bytes(&e.val).bytes(&e.alpha.to_bytes());
            }
            self.xtag_bf.encode(w);
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            let freq_set = EncryptedFreqSet::decode(r)?;
            let n = r.count(96)?;
            let mut entries = Vec::with_capacity(n);
            for _ in 0..n {
                entries.push(TSetEntry {
                    addr: r.array()?,
                    val: r.array()?,
                    alpha: scalar(r)?,
                });
            }
            let xtag_bf = ShveCiphertext::decode(r)?;
            Ok(Self {
                freq_set,
                entries,
                xtag_bf,
            })
        })
    }
}

/// Initial encrypted database shipped once after setup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetupMessage {
    pub m: u64,
    pub k: u16,
    pub xtag_bf: ShveCiphertext,
}

impl SetupMessage {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| {
            w.u64(self.m).u16(self.k);
            self.xtag_bf.encode(w);
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            Ok(Self {
                m: r.u64()?,
                k: r.u16()?,
                xtag_bf: ShveCiphertext::decode(r)?,
            })
        })
    }
}

/// Round 1: one frequency token per query keyword.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round1Request {
    pub tokens: Vec<FreqToken>,
}

impl Round1Request {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| {
            w.count(self.tokens.len());
            for t in &self.tokens {
                w.bytes(&t.0);
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            let n = r.count(TOKEN_LEN)?;
            let tokens = (0..n).map(|_| r.array().map(FreqToken)).collect::<Result<_>>()?;
            Ok(Self { tokens })
        })
    }
}

/// `Delta`: per token, the matching frequency ciphertext or absent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round1Response {
    pub entries: Vec<Option<[u8; TOKEN_LEN]>>,
}

impl Round1Response {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| {
            w.count(self.entries.len());
            for e in &self.entries {
                match e {
                    Some(ecnt) => w.u8(1).bytes(ecnt),
                    None => w.u8(0),
                };
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            let n = r.count(1)?;
            let mut entries = Vec::with_capacity(n);
            for _ in 0..n {
                entries.push(match r.u8()? {
                    0 => None,
                    1 => Some(r.array()?),
                    t => return Err(Error::Decode(format!("presence flag {t}"))),
                });
            }
            Ok(Self { entries })
        })
    }
}

/// Round 2: s-term addresses and, per address, a shuffled tuple of `n - 1`
/// cross-tokens. `xtokens` is empty for single-keyword queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round2Request {
    pub saddrs: Vec<[u8; 32]>,
    pub xtokens: Vec<Vec<GroupElement>>,
}

impl Round2Request {
    /// Number of x-terms per address.
    pub fn x_terms(&self) -> usize {
        self.xtokens.first().map_or(0, Vec::len)
    }

    /// `count (4) || x_terms (4) || per j: saddr, x_terms tokens`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let xt = self.x_terms();
        to_bytes(|w| {
            w.count(self.saddrs.len()).count(xt);
            for (j, saddr) in self.saddrs.iter().enumerate() {
                w.bytes(saddr);
                if xt > 0 {
                    for t in &self.xtokens[j] {
                        w.bytes(t.as_bytes());
                    }
                }
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            let n = r.count(32)?;
            let xt = r.u32()? as usize;
            if n > 0 && xt.saturating_mul(32).saturating_mul(n) > r.remaining() {
                return Err(Error::Decode("cross-token count exceeds payload".into()));
            }
            let mut saddrs = Vec::with_capacity(n);
            let mut xtokens = Vec::with_capacity(if xt > 0 { n } else { 0 });
            for _ in 0..n {
                saddrs.push(r.array()?);
                if xt > 0 {
                    xtokens.push((0..xt).map(|_| group(r)).collect::<Result<Vec<_>>>()?);
                }
            }
            Ok(Self { saddrs, xtokens })
        })
    }
}

/// `(j, sval_j)` with `j` the 1-based update counter of the s-term.
pub type ResultEntry = (u64, [u8; 32]);

fn encode_results(w: &mut Writer, results: &[ResultEntry]) {
    w.count(results.len());
    for (j, sval) in results {
        w.u64(*j).bytes(sval);
    }
}

fn decode_results(r: &mut Reader<'_>) -> Result<Vec<ResultEntry>> {
    let n = r.count(40)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let j = r.u64()?;
        if out.last().is_some_and(|(last, _)| *last >= j) {
            return Err(Error::Decode("result entries not ascending in j".into()));
        }
        out.push((j, r.array()?));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Round2Response {
    /// Per address, the sorted distinct Bloom positions of its cross-tags.
    Positions(Vec<Vec<u32>>),
    /// Single-keyword query: every `(j, sval_j)` directly.
    Results(Vec<ResultEntry>),
}

impl Round2Response {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| match self {
            Round2Response::Positions(sets) => {
                w.u8(0).count(sets.len());
                for s in sets {
                    w.count(s.len());
                    for p in s {
                        w.u32(*p);
                    }
                }
            }
            Round2Response::Results(res) => {
                w.u8(1);
                encode_results(w, res);
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| match r.u8()? {
            0 => {
                let n = r.count(4)?;
                let mut sets = Vec::with_capacity(n);
                for _ in 0..n {
                    let len = r.count(4)?;
                    let mut s: Vec<u32> = Vec::with_capacity(len);
                    for _ in 0..len {
                        let p = r.u32()?;
                        if s.last().is_some_and(|&l| l >= p) {
                            return Err(Error::Decode("position set not sorted and distinct".into()));
                        }
                        s.push(p);
                    }
                    sets.push(s);
                }
                Ok(Round2Response::Positions(sets))
            }
            1 => Ok(Round2Response::Results(decode_results(r)?)),
            t => Err(Error::Decode(format!("round-2 response tag {t}"))),
        })
    }
}

/// Round 3: one SHVE key per s-term address.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round3Request {
    pub keys: Vec<ShveKey>,
}

impl Round3Request {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| {
            w.count(self.keys.len());
            for k in &self.keys {
                k.encode(w);
            }
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| {
            let n = r.count(40)?;
            let keys = (0..n).map(|_| ShveKey::decode(r)).collect::<Result<_>>()?;
            Ok(Self { keys })
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round3Response {
    pub results: Vec<ResultEntry>,
}

impl Round3Response {
    pub fn to_bytes(&self) -> Vec<u8> {
        to_bytes(|w| encode_results(w, &self.results))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        strict(bytes, |r| Ok(Self { results: decode_results(r)? }))
    }
}
