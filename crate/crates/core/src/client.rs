//! Client engine: setup, batched updates, and the client half of each
//! search round.

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};
use std::collections::{BTreeSet, HashMap};

use crate::bloom::{BloomFilter, BloomParams};
use crate::codec::{Reader, Writer};
use crate::derive;
use crate::error::{Error, Result};
use crate::lfka::{self, FreqDictionary, MAX_COUNT};
use crate::messages::{
    ResultEntry, Round1Request, Round1Response, Round2Request, Round3Request, SetupMessage,
    TSetEntry, UpdateMessage,
};
use crate::prims::SecretKeyBundle;
use crate::shve::{shve_enc_filter, shve_keygen, PredicateVector};
use crate::types::{DocId, Keyword, Op, SearchQuery, UpdateTriple};

const EPOCH_ATTEMPTS: usize = 8;

/// Data-owner state `st = (Cnt, r, BF)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClientState {
    counters: HashMap<Keyword, u64>,
    epoch: u64,
    filter: BloomFilter,
}

impl ClientState {
    pub fn new(params: BloomParams) -> Self {
        Self {
            counters: HashMap::new(),
            epoch: 0,
            filter: BloomFilter::new(params),
        }
    }

    pub fn counter(&self, w: &Keyword) -> u64 {
        self.counters.get(w).copied().unwrap_or(0)
    }

    pub fn counters(&self) -> &HashMap<Keyword, u64> {
        &self.counters
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn filter(&self) -> &BloomFilter {
        &self.filter
    }

    pub fn params(&self) -> BloomParams {
        self.filter.params()
    }

    /// `capacity (8) || epoch (8) || filter || count (4) || (keyword, counter)*`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.filter.params().capacity)
            .u64(self.epoch)
            .bytes(&self.filter.to_bytes());
        let mut counters: Vec<_> = self.counters.iter().collect();
        counters.sort();
        w.count(counters.len());
        for (kw, c) in counters {
            w.var_bytes(kw.as_bytes()).u64(*c);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let capacity = r.u64()?;
        let epoch = r.u64()?;
        let filter = BloomFilter::decode(&mut r, capacity)?;
        let n = r.count(12)?;
        let mut counters = HashMap::with_capacity(n);
        for _ in 0..n {
            let kw = Keyword::new(r.var_bytes()?);
            let c = r.u64()?;
            if c == 0 || counters.insert(kw, c).is_some() {
                return Err(Error::Decode("invalid keyword counter".into()));
            }
        }
        r.finish()?;
        Ok(Self {
            counters,
            epoch,
            filter,
        })
    }
}

/// Fresh keys, empty state, and the initial encrypted database: an empty
/// TSet and the encryption of the all-zero filter.
pub fn setup<R: RngCore + CryptoRng>(
    capacity: u64,
    target_fp: f64,
    rng: &mut R,
) -> Result<(SecretKeyBundle, ClientState, SetupMessage)> {
    let params = BloomParams::derive(capacity, target_fp)?;
    let sk = SecretKeyBundle::generate(rng);
    let (st, msg) = setup_with_keys(&sk, params);
    Ok((sk, st, msg))
}

/// Setup for keys generated earlier.
pub fn setup_with_keys(sk: &SecretKeyBundle, params: BloomParams) -> (ClientState, SetupMessage) {
    let st = ClientState::new(params);
    let msg = SetupMessage {
        m: params.m,
        k: params.k,
        xtag_bf: shve_enc_filter(&sk.msk, &st.filter),
    };
    (st, msg)
}

fn next_epoch<R: RngCore>(current: u64, rng: &mut R) -> u64 {
    // high half counts epochs, low half is random
    let seq = (current >> 32).wrapping_add(1) & 0xFFFF_FFFF;
    seq << 32 | u64::from(rng.next_u32())
}

/// Builds the update message for a batch of triples. `st` is only modified
/// when the whole batch succeeds.
pub fn client_update<R: RngCore + CryptoRng>(
    sk: &SecretKeyBundle,
    st: &mut ClientState,
    batch: &[UpdateTriple],
    rng: &mut R,
) -> Result<UpdateMessage> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty update batch".into()));
    }
    let capacity = st.filter.params().capacity;
    if st.filter.inserted() + batch.len() as u64 > capacity {
        return Err(Error::CapacityExceeded { capacity });
    }

    let mut counters = st.counters.clone();
    let mut filter = st.filter.clone();
    let mut entries = Vec::with_capacity(batch.len());
    for t in batch {
        let w = t.keyword.as_bytes();
        let cnt = counters.entry(t.keyword.clone()).or_insert(0);
        if *cnt >= MAX_COUNT {
            return Err(Error::CounterOverflow);
        }
        *cnt += 1;
        entries.push(TSetEntry {
            addr: derive::addr(sk, w, *cnt),
            val: derive::masked_value(sk, w, *cnt, &t.id, t.op),
            alpha: derive::alpha(sk, w, *cnt, &t.id, t.op),
        });
        filter.insert(derive::xtag(sk, w, &t.id, t.op).as_bytes())?;
    }

    let dict: FreqDictionary = counters
        .iter()
        .map(|(k, v)| (k.as_bytes().to_vec(), *v))
        .collect();
    let mut epoch = st.epoch;
    let mut freq_set = None;
    for _ in 0..EPOCH_ATTEMPTS {
        epoch = next_epoch(epoch, rng);
        match lfka::freq_setup(&dict, &sk.freq, epoch) {
            Ok(set) => {
                freq_set = Some(set);
                break;
            }
            Err(Error::PrefixCollision) => continue,
            Err(e) => return Err(e),
        }
    }
    let freq_set = freq_set.ok_or(Error::PrefixCollision)?;
    let xtag_bf = shve_enc_filter(&sk.msk, &filter);

    st.counters = counters;
    st.filter = filter;
    st.epoch = epoch;
    Ok(UpdateMessage {
        freq_set,
        entries,
        xtag_bf,
    })
}

pub fn search_round1(sk: &SecretKeyBundle, epoch: u64, query: &SearchQuery) -> Round1Request {
    Round1Request {
        tokens: lfka::token_gen(query.keywords(), &sk.freq, epoch),
    }
}

/// The s-term and the query reordered with it in front.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchPlan {
    pub order: Vec<Keyword>,
    pub s_count: u64,
}

impl SearchPlan {
    pub fn s_term(&self) -> &Keyword {
        &self.order[0]
    }

    pub fn x_terms(&self) -> &[Keyword] {
        &self.order[1..]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Round2 {
    /// Some conjunct has never been updated; the result is empty.
    NotIndexed { keyword: Keyword },
    Request { plan: SearchPlan, request: Round2Request },
}

pub fn search_round2<R: RngCore + CryptoRng>(
    sk: &SecretKeyBundle,
    epoch: u64,
    query: &SearchQuery,
    resp: &Round1Response,
    rng: &mut R,
) -> Result<Round2> {
    let least = lfka::compare(&resp.entries, &sk.freq, epoch, query.keywords())?;
    let kws = query.keywords();
    if least.count == 0 {
        return Ok(Round2::NotIndexed {
            keyword: kws[least.slot].clone(),
        });
    }
    let mut order = Vec::with_capacity(kws.len());
    order.push(kws[least.slot].clone());
    order.extend(
        kws.iter()
            .enumerate()
            .filter(|(i, _)| *i != least.slot)
            .map(|(_, w)| w.clone()),
    );
    let plan = SearchPlan {
        order,
        s_count: least.count,
    };

    let s = plan.s_term().as_bytes();
    let saddrs = (1..=plan.s_count).map(|j| derive::addr(sk, s, j)).collect();
    let xtokens = if plan.x_terms().is_empty() {
        Vec::new()
    } else {
        (1..=plan.s_count)
            .map(|j| {
                let mut tuple: Vec<_> = plan
                    .x_terms()
                    .iter()
                    .map(|x| derive::xtoken(sk, s, j, x.as_bytes()))
                    .collect();
                tuple.shuffle(rng);
                tuple
            })
            .collect()
    };
    Ok(Round2::Request {
        plan,
        request: Round2Request { saddrs, xtokens },
    })
}

/// One SHVE key per address: `1` at every received position, `*` elsewhere.
pub fn search_round3<R: RngCore + CryptoRng>(
    sk: &SecretKeyBundle,
    m: u64,
    position_sets: &[Vec<u32>],
    rng: &mut R,
) -> Result<Round3Request> {
    let keys = position_sets
        .iter()
        .map(|set| {
            let v = PredicateVector::ones_at(m, set.iter().map(|&p| u64::from(p)))?;
            shve_keygen(&sk.msk, &v, rng)
        })
        .collect::<Result<_>>()?;
    Ok(Round3Request { keys })
}

/// Unmasks each returned value and replays add/del in counter order.
pub fn finalize(
    sk: &SecretKeyBundle,
    s_term: &Keyword,
    results: &[ResultEntry],
) -> Result<BTreeSet<DocId>> {
    let mut ids = BTreeSet::new();
    let mut last = 0;
    for (j, sval) in results {
        if *j <= last {
            return Err(Error::Protocol("result entries out of order".into()));
        }
        last = *j;
        let record = derive::xor32(sval, &derive::value_mask(sk, s_term.as_bytes(), *j));
        match DocId::unpack(&record)? {
            (id, Op::Add) => ids.insert(id),
            (id, Op::Del) => ids.remove(&id),
        };
    }
    Ok(ids)
}
