//! Plaintext mirror of every update, used to check search results and to
//! compute the leakage the server is allowed to observe.

use std::collections::{BTreeSet, HashMap};

use crate::types::{DocId, Keyword, Op, SearchQuery, UpdateTriple};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogEntry {
    pub t: u64,
    pub op: Op,
    pub id: DocId,
    pub keyword: Keyword,
}

/// Ordered log `O` of `(t, op, id, w)` with logical timestamps.
#[derive(Clone, Debug, Default)]
pub struct PlaintextOracle {
    log: Vec<LogEntry>,
    by_keyword: HashMap<Keyword, Vec<usize>>,
}

impl PlaintextOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, triples: &[UpdateTriple]) {
        for tr in triples {
            let t = self.log.len() as u64;
            self.by_keyword
                .entry(tr.keyword.clone())
                .or_default()
                .push(self.log.len());
            self.log.push(LogEntry {
                t,
                op: tr.op,
                id: tr.id,
                keyword: tr.keyword.clone(),
            });
        }
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    fn entries(&self, w: &Keyword) -> impl Iterator<Item = &LogEntry> {
        self.by_keyword
            .get(w)
            .into_iter()
            .flatten()
            .map(|&i| &self.log[i])
    }

    pub fn update_count(&self, w: &Keyword) -> u64 {
        self.by_keyword.get(w).map_or(0, |v| v.len() as u64)
    }

    /// `DB(w)`: ids whose latest record for `w` is an add.
    pub fn db(&self, w: &Keyword) -> BTreeSet<DocId> {
        let mut latest: HashMap<DocId, Op> = HashMap::new();
        for e in self.entries(w) {
            latest.insert(e.id, e.op);
        }
        latest
            .into_iter()
            .filter(|(_, op)| *op == Op::Add)
            .map(|(id, _)| id)
            .collect()
    }

    /// `DB(q)`: intersection of `DB(w_i)`.
    pub fn search(&self, q: &SearchQuery) -> BTreeSet<DocId> {
        let mut kws = q.keywords().iter();
        let first = kws.next().map(|w| self.db(w)).unwrap_or_default();
        kws.fold(first, |acc, w| acc.intersection(&self.db(w)).copied().collect())
    }

    /// The keyword with the fewest updates, earliest slot on ties.
    pub fn s_term(&self, q: &SearchQuery) -> (usize, u64) {
        q.keywords()
            .iter()
            .enumerate()
            .map(|(i, w)| (i, self.update_count(w)))
            .min_by_key(|&(i, c)| (c, i))
            .expect("queries are non-empty")
    }

    /// `Upd(q)`: timestamps of every update on the s-term.
    pub fn upd(&self, q: &SearchQuery) -> Vec<u64> {
        let (slot, _) = self.s_term(q);
        self.entries(&q.keywords()[slot]).map(|e| e.t).collect()
    }

    /// `TimeDB(q)`: every result id with the add timestamp of each conjunct,
    /// in query order.
    pub fn timedb(&self, q: &SearchQuery) -> Vec<(Vec<u64>, DocId)> {
        self.search(q)
            .into_iter()
            .map(|id| {
                let ts = q
                    .keywords()
                    .iter()
                    .map(|w| {
                        self.entries(w)
                            .filter(|e| e.id == id && e.op == Op::Add)
                            .map(|e| e.t)
                            .last()
                            .expect("result ids have an add on every conjunct")
                    })
                    .collect();
                (ts, id)
            })
            .collect()
    }

    /// Number of s-term records `(op, id)` for which every x-term also has a
    /// record `(op, id, x)` anywhere in the log: exactly the entries an
    /// ideal (false-positive free) cross-tag test lets through.
    pub fn candidates(&self, q: &SearchQuery) -> u64 {
        let (slot, _) = self.s_term(q);
        let kws = q.keywords();
        let xsets: Vec<BTreeSet<(DocId, Op)>> = kws
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != slot)
            .map(|(_, w)| self.entries(w).map(|e| (e.id, e.op)).collect())
            .collect();
        self.entries(&kws[slot])
            .filter(|e| xsets.iter().all(|s| s.contains(&(e.id, e.op))))
            .count() as u64
    }

    /// Whether `(op, id, w)` was ever recorded.
    pub fn has_record(&self, op: Op, id: &DocId, w: &Keyword) -> bool {
        self.entries(w).any(|e| e.op == op && e.id == *id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn add_doc(o: &mut PlaintextOracle, op: Op, id: &str, kws: &[&str]) {
        let id = DocId::try_from(id).unwrap();
        let t: Vec<_> = kws.iter().map(|w| UpdateTriple::new(op, id, *w)).collect();
        o.record(&t);
    }

    fn ids(v: &[&str]) -> BTreeSet<DocId> {
        v.iter().map(|s| DocId::try_from(*s).unwrap()).collect()
    }

    #[test]
    fn table_scenario_views() {
        let mut o = PlaintextOracle::new();
        add_doc(&mut o, Op::Add, "id1", &["w1", "w2", "w3", "w4", "w6"]);
        add_doc(&mut o, Op::Add, "id2", &["w2", "w3", "w4", "w5"]);
        add_doc(&mut o, Op::Add, "id3", &["w1", "w2", "w4", "w5", "w6"]);
        add_doc(&mut o, Op::Add, "id4", &["w2", "w3", "w6"]);
        add_doc(&mut o, Op::Add, "id5", &["w1", "w3", "w4"]);
        assert_eq!(o.db(&"w1".into()), ids(&["id1", "id3", "id5"]));
        let q = SearchQuery::new(["w1", "w2", "w3"]).unwrap();
        assert_eq!(o.search(&q), ids(&["id1"]));
        assert_eq!(o.s_term(&q), (0, 3));
        assert_eq!(o.upd(&q), vec![0, 9, 17]);
        assert_eq!(o.candidates(&q), 1);
        assert_eq!(o.timedb(&q), vec![(vec![0, 1, 2], DocId::try_from("id1").unwrap())]);
    }

    #[test]
    fn empty_log() {
        let o = PlaintextOracle::new();
        assert!(o.search(&SearchQuery::new(["a"]).unwrap()).is_empty());
        assert!(o.upd(&SearchQuery::new(["a"]).unwrap()).is_empty());
    }

    #[test]
    fn delete_removes() {
        let mut o = PlaintextOracle::new();
        add_doc(&mut o, Op::Add, "d", &["a", "b"]);
        add_doc(&mut o, Op::Del, "d", &["a", "b"]);
        let q = SearchQuery::new(["a", "b"]).unwrap();
        assert!(o.search(&q).is_empty());
        // the del record on the s-term also passes the cross-tag test
        assert_eq!(o.candidates(&q), 2);
    }

    /// Naive replay: walk the whole log per query and track a live set.
    fn naive_search(log: &[(Op, u8, u8)], q: &[u8]) -> BTreeSet<u8> {
        let mut live: HashMap<(u8, u8), bool> = HashMap::new();
        for &(op, id, w) in log {
            live.insert((id, w), op == Op::Add);
        }
        (0..8u8)
            .filter(|id| q.iter().all(|w| live.get(&(*id, *w)) == Some(&true)))
            .collect()
    }

    proptest! {
        #[test]
        fn agrees_with_naive_replay(
            log in prop::collection::vec((prop::bool::ANY, 0u8..8, 0u8..6), 0..80),
            q in prop::collection::btree_set(0u8..6, 1..4),
        ) {
            let log: Vec<_> = log.into_iter().map(|(a, id, w)| (if a { Op::Add } else { Op::Del }, id, w)).collect();
            let mut o = PlaintextOracle::new();
            let triples: Vec<_> = log.iter().map(|&(op, id, w)| {
                UpdateTriple::new(op, DocId::new(&[id]).unwrap(), Keyword::new(vec![w]))
            }).collect();
            o.record(&triples);
            let qv: Vec<u8> = q.iter().copied().collect();
            let query = SearchQuery::new(qv.iter().map(|w| Keyword::new(vec![*w]))).unwrap();
            let got: BTreeSet<u8> = o.search(&query).iter().map(|id| id.as_bytes()[0]).collect();
            prop_assert_eq!(got, naive_search(&log, &qv));
        }
    }
}
