//! Least-frequent-keyword acquisition.
//!
//! Each epoch the data owner publishes, for every keyword `w`,
//!
//! ```text
//! ecnt_w = F1(K, r || w)  +  (0^32 || F2'(K, w || r) + cnt_w)
//! ```
//!
//! where the high 32 bytes of `ecnt_w` are exactly the high half of `F1` and
//! the low 32 bytes are `F1_low + F2' + cnt_w mod 2^256`. `F2'` is `F2` with
//! its top 32 bits cleared, and `cnt_w < 2^32`, so the sum never carries into
//! the matching prefix. A searcher holding `K` and `r` sends `F1(K, r || w)`
//! tokens; the server matches on the 32-byte prefix and returns the stored
//! ciphertexts, which only the searcher can open.

use rand::{CryptoRng, RngCore};
use std::collections::{BTreeMap, HashMap};

use crate::codec::{Reader, Writer};
use crate::error::{Error, Result};
use crate::prims::{prf_f1, prf_f2, Key32};

pub const TOKEN_LEN: usize = 64;
pub const PREFIX_LEN: usize = 32;

/// Highest count representable in a frequency ciphertext.
pub const MAX_COUNT: u64 = u32::MAX as u64;

/// Keyword to update count.
pub type FreqDictionary = HashMap<Vec<u8>, u64>;

pub fn lfka_keygen<R: RngCore + CryptoRng>(rng: &mut R) -> Key32 {
    Key32::random(rng)
}

/// Encrypted frequency set `C` for epoch `r`, keyed by 32-byte prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EncryptedFreqSet {
    pub epoch: u64,
    entries: BTreeMap<[u8; PREFIX_LEN], [u8; TOKEN_LEN]>,
}

impl EncryptedFreqSet {
    pub fn empty(epoch: u64) -> Self {
        Self {
            epoch,
            entries: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, prefix: &[u8; PREFIX_LEN]) -> Option<&[u8; TOKEN_LEN]> {
        self.entries.get(prefix)
    }

    pub fn prefixes(&self) -> impl Iterator<Item = &[u8; PREFIX_LEN]> {
        self.entries.keys()
    }

    /// `r (8) || count (4) || ecnt entries sorted by prefix`.
    pub fn encode(&self, w: &mut Writer) {
        w.u64(self.epoch).count(self.entries.len());
        for ecnt in self.entries.values() {
            w.bytes(ecnt);
        }
    }

    pub fn decode(r: &mut Reader<'_>) -> Result<Self> {
        let epoch = r.u64()?;
        let n = r.count(TOKEN_LEN)?;
        let mut entries = BTreeMap::new();
        let mut last: Option<[u8; PREFIX_LEN]> = None;
        for _ in 0..n {
            let ecnt: [u8; TOKEN_LEN] = r.array()?;
            let prefix = prefix_of(&ecnt);
            if last.is_some_and(|l| l >= prefix) {
                return Err(Error::Decode("frequency entries not sorted by prefix".into()));
            }
            last = Some(prefix);
            entries.insert(prefix, ecnt);
        }
        Ok(Self { epoch, entries })
    }
}

fn prefix_of(v: &[u8; TOKEN_LEN]) -> [u8; PREFIX_LEN] {
    v[..PREFIX_LEN].try_into().unwrap()
}

fn low_of(v: &[u8; TOKEN_LEN]) -> [u8; 32] {
    v[PREFIX_LEN..].try_into().unwrap()
}

/// 64-byte frequency token `F1(K, r || w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreqToken(pub [u8; TOKEN_LEN]);

impl FreqToken {
    pub fn prefix(&self) -> [u8; PREFIX_LEN] {
        prefix_of(&self.0)
    }
}

fn f1_input(epoch: u64, keyword: &[u8]) -> Vec<u8> {
    let mut v = epoch.to_be_bytes().to_vec();
    v.extend_from_slice(keyword);
    v
}

/// `F2(K, w || r)` truncated to 224 bits (top four bytes cleared).
fn f2_truncated(key: &Key32, epoch: u64, keyword: &[u8]) -> [u8; 32] {
    let mut input = keyword.to_vec();
    input.extend_from_slice(&epoch.to_be_bytes());
    let mut out = prf_f2(key, &input);
    out[..4].fill(0);
    out
}

fn u256_from_u64(v: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    out[24..].copy_from_slice(&v.to_be_bytes());
    out
}

/// Big-endian addition modulo 2^256.
fn add_mod(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut carry = 0u16;
    for i in (0..32).rev() {
        let s = u16::from(a[i]) + u16::from(b[i]) + carry;
        out[i] = s as u8;
        carry = s >> 8;
    }
    out
}

/// Big-endian subtraction modulo 2^256.
fn sub_mod(a: &[u8; 32], b: &[u8; 32]) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut borrow = 0i16;
    for i in (0..32).rev() {
        let mut d = i16::from(a[i]) - i16::from(b[i]) - borrow;
        borrow = 0;
        if d < 0 {
            d += 256;
            borrow = 1;
        }
        out[i] = d as u8;
    }
    out
}

pub fn encrypt_count(key: &Key32, epoch: u64, keyword: &[u8], count: u64) -> Result<[u8; TOKEN_LEN]> {
    if count > MAX_COUNT {
        return Err(Error::CounterOverflow);
    }
    let f1 = prf_f1(key, &f1_input(epoch, keyword));
    let masked = add_mod(&f2_truncated(key, epoch, keyword), &u256_from_u64(count));
    let low = add_mod(&low_of(&f1), &masked);
    let mut ecnt = f1;
    ecnt[PREFIX_LEN..].copy_from_slice(&low);
    Ok(ecnt)
}

pub fn decrypt_count(key: &Key32, epoch: u64, keyword: &[u8], ecnt: &[u8; TOKEN_LEN]) -> Result<u64> {
    let f1 = prf_f1(key, &f1_input(epoch, keyword));
    if prefix_of(&f1) != prefix_of(ecnt) {
        return Err(Error::Protocol("frequency entry does not match its token".into()));
    }
    let rest = sub_mod(&low_of(ecnt), &low_of(&f1));
    let count = sub_mod(&rest, &f2_truncated(key, epoch, keyword));
    if count[..28].iter().any(|b| *b != 0) {
        return Err(Error::CorruptCount);
    }
    Ok(u64::from(u32::from_be_bytes(count[28..].try_into().unwrap())))
}

/// Encrypts every count in the dictionary under epoch `r`. A prefix
/// collision between two keywords is reported so the caller can retry with
/// a fresh epoch.
pub fn freq_setup(dict: &FreqDictionary, key: &Key32, epoch: u64) -> Result<EncryptedFreqSet> {
    let mut entries = BTreeMap::new();
    for (w, &cnt) in dict {
        let ecnt = encrypt_count(key, epoch, w, cnt)?;
        if entries.insert(prefix_of(&ecnt), ecnt).is_some() {
            return Err(Error::PrefixCollision);
        }
    }
    Ok(EncryptedFreqSet { epoch, entries })
}

pub fn token_gen<W: AsRef<[u8]>>(query: &[W], key: &Key32, epoch: u64) -> Vec<FreqToken> {
    query
        .iter()
        .map(|w| FreqToken(prf_f1(key, &f1_input(epoch, w.as_ref()))))
        .collect()
}

/// Server-side match: per token the stored ciphertext with the same 32-byte
/// prefix, or `None` for a keyword that has never been updated.
pub fn freq_find(tokens: &[FreqToken], set: &EncryptedFreqSet) -> Vec<Option<[u8; TOKEN_LEN]>> {
    tokens
        .iter()
        .map(|t| set.entries.get(&t.prefix()).copied())
        .collect()
}

/// The s-term: slot in the query list and its update count. A count of zero
/// means the keyword at `slot` is not indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeastFrequent {
    pub slot: usize,
    pub count: u64,
}

/// Opens every returned ciphertext; absent entries read as zero.
pub fn decrypt_delta<W: AsRef<[u8]>>(
    delta: &[Option<[u8; TOKEN_LEN]>],
    key: &Key32,
    epoch: u64,
    query: &[W],
) -> Result<Vec<u64>> {
    if delta.len() != query.len() {
        return Err(Error::LengthMismatch {
            expected: query.len(),
            actual: delta.len(),
        });
    }
    delta
        .iter()
        .zip(query)
        .map(|(entry, w)| match entry {
            Some(ecnt) => decrypt_count(key, epoch, w.as_ref(), ecnt),
            None => Ok(0),
        })
        .collect()
}

/// Least-frequent keyword; ties go to the earliest slot.
pub fn compare<W: AsRef<[u8]>>(
    delta: &[Option<[u8; TOKEN_LEN]>],
    key: &Key32,
    epoch: u64,
    query: &[W],
) -> Result<LeastFrequent> {
    let counts = decrypt_delta(delta, key, epoch, query)?;
    counts
        .iter()
        .enumerate()
        .min_by_key(|&(slot, &count)| (count, slot))
        .map(|(slot, &count)| LeastFrequent { slot, count })
        .ok_or_else(|| Error::InvalidParameter("empty query".into()))
}
