//! Transcript auditor. Decodes every recorded payload against the strict
//! message schema and checks the observable sizes against the plaintext
//! truth annotations:
//!
//! * (a) round-2 address count equals the s-term's update count;
//! * (b) no response carries per-x-term outcomes: round-2 responses must be
//!   exactly one position set per address and round-3 responses per-address
//!   aggregates, with nothing appended;
//! * (c) the number of returned entries equals the candidate count;
//! * (d) update payloads contain no keyword, identifier, or packed record in
//!   the clear, and their address and value bytes look uniformly random.

use serde::Serialize;
use std::collections::{BTreeMap, HashMap};

use csse_core::messages::{
    Round1Request, Round1Response, Round2Request, Round2Response, Round3Request, Round3Response,
    SetupMessage, UpdateMessage,
};
use csse_core::transcript::{MessageKind, SearchTranscript, TranscriptEvent};
use csse_core::{DocId, Op};

/// Shortest plaintext string worth scanning for; shorter ones occur in
/// random bytes too often to mean anything.
const MIN_SCAN_LEN: usize = 4;
/// Minimum byte sample for the entropy check.
const ENTROPY_SAMPLE: usize = 1024;
const MIN_ENTROPY_BITS: f64 = 7.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    UpdCount,
    PerXTermOutcome,
    CandidateCount,
    UpdateCleartext,
    Schema,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub search: Option<u64>,
    pub rule: Rule,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryLeakage {
    pub search: u64,
    pub n: Option<usize>,
    /// Round-2 address count: the server's reconstruction of `|Upd(q)|`.
    pub saddrs: Option<usize>,
    pub s_term_updates: Option<u64>,
    pub position_sets: Option<usize>,
    /// Entries returned to the client, from round 3 or, for single-keyword
    /// queries, round 2.
    pub returned: Option<usize>,
    pub candidates: Option<u64>,
    pub result_size: Option<u64>,
    pub sizes: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LeakageReport {
    pub queries: Vec<QueryLeakage>,
    pub updates: usize,
    pub violations: Vec<Violation>,
}

impl LeakageReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "{} searches, {} updates, {} violations\n",
            self.queries.len(),
            self.updates,
            self.violations.len()
        );
        for v in &self.violations {
            let at = v.search.map_or_else(|| "-".to_string(), |n| n.to_string());
            s.push_str(&format!("  search {at}: {:?}: {}\n", v.rule, v.detail));
        }
        s
    }
}

struct Auditor {
    report: LeakageReport,
    m: Option<u64>,
}

impl Auditor {
    fn flag(&mut self, search: Option<u64>, rule: Rule, detail: impl Into<String>) {
        self.report.violations.push(Violation {
            search,
            rule,
            detail: detail.into(),
        });
    }
}

fn kind_name(k: MessageKind) -> String {
    serde_json::to_value(k)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn audit(t: &SearchTranscript) -> LeakageReport {
    let mut a = Auditor {
        report: LeakageReport::default(),
        m: None,
    };
    let mut searches: BTreeMap<u64, Vec<(MessageKind, &[u8])>> = BTreeMap::new();
    let mut truths: HashMap<u64, (usize, u64, u64, u64)> = HashMap::new();
    let events = t.events();

    for (i, e) in events.iter().enumerate() {
        match e {
            TranscriptEvent::Message { search, kind, payload, .. } => match (kind, search) {
                (MessageKind::Setup, _) => match SetupMessage::from_bytes(payload) {
                    Ok(msg) => a.m = Some(msg.m),
                    Err(err) => a.flag(None, Rule::Schema, format!("setup message: {err}")),
                },
                (MessageKind::Update, _) => {
                    a.report.updates += 1;
                    let truth = match events.get(i + 1) {
                        Some(TranscriptEvent::UpdateTruth { keywords, ids }) => Some((keywords, ids)),
                        _ => None,
                    };
                    audit_update(&mut a, payload, truth);
                }
                (_, Some(s)) => searches.entry(*s).or_default().push((*kind, payload)),
                (_, None) => a.flag(None, Rule::Schema, format!("{} outside any search", kind_name(*kind))),
            },
            TranscriptEvent::SearchTruth {
                search,
                n,
                s_term_updates,
                candidates,
                results,
            } => {
                truths.insert(*search, (*n, *s_term_updates, *candidates, *results));
            }
            TranscriptEvent::UpdateTruth { .. } => {}
        }
    }

    for (search, msgs) in searches {
        let q = audit_search(&mut a, search, &msgs, truths.get(&search).copied());
        a.report.queries.push(q);
    }
    a.report
}

fn audit_search(
    a: &mut Auditor,
    search: u64,
    msgs: &[(MessageKind, &[u8])],
    truth: Option<(usize, u64, u64, u64)>,
) -> QueryLeakage {
    let at = Some(search);
    let mut q = QueryLeakage {
        search,
        ..Default::default()
    };
    let mut by_kind: HashMap<MessageKind, &[u8]> = HashMap::new();
    for (kind, payload) in msgs {
        if by_kind.insert(*kind, payload).is_some() {
            a.flag(at, Rule::Schema, format!("{} sent twice", kind_name(*kind)));
        }
        q.sizes.insert(kind_name(*kind), payload.len());
    }

    if let Some(p) = by_kind.get(&MessageKind::Round1Request) {
        let tokens = Round1Request::from_bytes(p).map(|r| r.tokens.len());
        match (tokens, by_kind.get(&MessageKind::Round1Response).map(|p| Round1Response::from_bytes(p))) {
            (Ok(n), Some(Ok(resp))) if resp.entries.len() != n => {
                a.flag(at, Rule::Schema, "round-1 response length differs from token count")
            }
            (Err(e), _) => a.flag(at, Rule::Schema, format!("round-1 request: {e}")),
            (_, Some(Err(e))) => a.flag(at, Rule::PerXTermOutcome, format!("round-1 response: {e}")),
            _ => {}
        }
    }

    let req2 = by_kind.get(&MessageKind::Round2Request).map(|p| Round2Request::from_bytes(p));
    let (saddrs, x_terms) = match req2 {
        Some(Ok(r)) => (Some(r.saddrs.len()), r.x_terms()),
        Some(Err(e)) => {
            a.flag(at, Rule::Schema, format!("round-2 request: {e}"));
            (None, 0)
        }
        None => (None, 0),
    };
    q.saddrs = saddrs;

    let mut sets: Option<Vec<Vec<u32>>> = None;
    if let Some(p) = by_kind.get(&MessageKind::Round2Response) {
        match Round2Response::from_bytes(p) {
            Ok(Round2Response::Positions(s)) => {
                if x_terms == 0 {
                    a.flag(at, Rule::Schema, "position sets for a query without x-terms");
                }
                if Some(s.len()) != saddrs {
                    a.flag(at, Rule::PerXTermOutcome, "round-2 response is not one position set per address");
                }
                for set in &s {
                    if a.m.is_some_and(|m| set.iter().any(|&p| u64::from(p) >= m)) {
                        a.flag(at, Rule::Schema, "position outside the filter");
                        break;
                    }
                }
                q.position_sets = Some(s.len());
                sets = Some(s);
            }
            Ok(Round2Response::Results(r)) => {
                if x_terms > 0 {
                    a.flag(at, Rule::PerXTermOutcome, "round 2 returned results for a conjunctive query");
                }
                q.returned = Some(r.len());
            }
            Err(e) => a.flag(
                at,
                Rule::PerXTermOutcome,
                format!("round-2 response does not match the position-set schema ({e}); extra fields may enumerate per-x-term outcomes"),
            ),
        }
    }

    if let Some(p) = by_kind.get(&MessageKind::Round3Request) {
        match Round3Request::from_bytes(p) {
            Ok(r) if sets.as_ref().is_some_and(|s| s.len() != r.keys.len()) => {
                a.flag(at, Rule::Schema, "round-3 key count differs from position sets")
            }
            Ok(_) => {}
            Err(e) => a.flag(at, Rule::Schema, format!("round-3 request: {e}")),
        }
    }
    if let Some(p) = by_kind.get(&MessageKind::Round3Response) {
        match Round3Response::from_bytes(p) {
            Ok(r) => {
                if saddrs.is_some_and(|n| r.results.iter().any(|(j, _)| *j == 0 || *j as usize > n)) {
                    a.flag(at, Rule::Schema, "round-3 result index outside the address range");
                }
                q.returned = Some(r.results.len());
            }
            Err(e) => a.flag(at, Rule::PerXTermOutcome, format!("round-3 response: {e}")),
        }
    }

    if let Some((n, upd, candidates, results)) = truth {
        q.n = Some(n);
        q.s_term_updates = Some(upd);
        q.candidates = Some(candidates);
        q.result_size = Some(results);
        let observed = saddrs.unwrap_or(0) as u64;
        if observed != upd {
            a.flag(at, Rule::UpdCount, format!("{observed} addresses but the s-term has {upd} updates"));
        }
        if let Some(returned) = q.returned {
            if returned as u64 != candidates {
                a.flag(at, Rule::CandidateCount, format!("{returned} entries returned, {candidates} candidates"));
            }
        }
    }
    q
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn entropy_bits(bytes: &[u8]) -> f64 {
    let mut hist = [0u64; 256];
    for &b in bytes {
        hist[b as usize] += 1;
    }
    let n = bytes.len() as f64;
    hist.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn audit_update(a: &mut Auditor, payload: &[u8], truth: Option<(&Vec<String>, &Vec<String>)>) {
    let msg = match UpdateMessage::from_bytes(payload) {
        Ok(m) => m,
        Err(e) => {
            a.flag(None, Rule::Schema, format!("update message: {e}"));
            return;
        }
    };
    let sample: Vec<u8> = msg.entries.iter().flat_map(|e| e.addr.into_iter().chain(e.val)).collect();
    if sample.len() >= ENTROPY_SAMPLE {
        let h = entropy_bits(&sample);
        if h < MIN_ENTROPY_BITS {
            a.flag(None, Rule::UpdateCleartext, format!("address/value bytes have {h:.2} bits/byte"));
        }
    }
    let Some((keywords, ids)) = truth else { return };
    for k in keywords.iter().filter(|k| k.len() >= MIN_SCAN_LEN) {
        if contains(payload, k.as_bytes()) {
            a.flag(None, Rule::UpdateCleartext, format!("keyword {k:?} appears in an update"));
        }
    }
    for id in ids {
        if id.len() >= MIN_SCAN_LEN && contains(payload, id.as_bytes()) {
            a.flag(None, Rule::UpdateCleartext, format!("id {id:?} appears in an update"));
        }
        if let Ok(doc) = DocId::try_from(id.as_str()) {
            for op in [Op::Add, Op::Del] {
                if contains(payload, &doc.pack(op)) {
                    a.flag(None, Rule::UpdateCleartext, format!("packed record for {id:?} appears in an update"));
                }
            }
        }
    }
}
