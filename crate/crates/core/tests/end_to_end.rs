mod common;

use common::{doc, id, table_scenario, Fixture};
use csse_core::client::{search_round1, search_round2, search_round3, Round2};
use csse_core::messages::{Round1Response, Round2Response};
use csse_core::protocol::{run_search, Channel, LocalServer, RecordingChannel};
use csse_core::transcript::{MessageKind, TranscriptEvent};
use csse_core::{Error, Op, SearchQuery};
use rand::rngs::OsRng;
use std::collections::BTreeSet;

fn q(kws: &[&str]) -> SearchQuery {
    SearchQuery::new(kws.iter().copied()).unwrap()
}

#[test]
fn table_scenario_every_pair_and_triple_matches_oracle() {
    let mut f = table_scenario();
    let words = ["w1", "w2", "w3", "w4", "w5", "w6"];
    for a in 0..6 {
        for b in a..6 {
            for c in b..6 {
                let query = q(&[words[a], words[b], words[c]]);
                let out = run_search(&f.sk, &mut f.server, &query, &mut OsRng).unwrap();
                assert_eq!(out.ids, f.oracle.search(&query), "{query:?}");
            }
        }
    }
}

#[test]
fn table_scenario_w1_w2_w3() {
    let mut f = table_scenario();
    let query = q(&["w1", "w2", "w3"]);
    let out = run_search(&f.sk, &mut f.server, &query, &mut OsRng).unwrap();
    assert_eq!(out.ids, BTreeSet::from([id("id1")]));
    let plan = out.plan.unwrap();
    assert_eq!(plan.s_term().as_bytes(), b"w1");
    assert_eq!(plan.s_count, 3);
    assert_eq!(out.returned, 1);
}

#[test]
fn least_frequent_term_is_chosen_regardless_of_position() {
    let mut f = table_scenario();
    // w5 has two updates, every other word at least three
    let out = run_search(&f.sk, &mut f.server, &q(&["w2", "w4", "w5"]), &mut OsRng).unwrap();
    assert_eq!(out.plan.unwrap().s_term().as_bytes(), b"w5");
    assert_eq!(out.ids, BTreeSet::from([id("id2"), id("id3")]));
}

#[test]
fn single_keyword_search_skips_round_three() {
    let f = table_scenario();
    let mut ch = RecordingChannel::new(f.server);
    let out = run_search(&f.sk, &mut ch, &q(&["w4"]), &mut OsRng).unwrap();
    assert_eq!(out.ids, f.oracle.search(&q(&["w4"])));
    let kinds: Vec<_> = ch
        .transcript()
        .events()
        .iter()
        .filter_map(|e| match e {
            TranscriptEvent::Message { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    assert_eq!(
        kinds,
        [
            MessageKind::Round1Request,
            MessageKind::Round1Response,
            MessageKind::Round2Request,
            MessageKind::Round2Response
        ]
    );
}

#[test]
fn unindexed_keyword_short_circuits() {
    let mut f = table_scenario();
    let out = run_search(&f.sk, &mut f.server, &q(&["w1", "nope"]), &mut OsRng).unwrap();
    assert!(out.ids.is_empty());
    assert_eq!(out.not_indexed.unwrap().as_bytes(), b"nope");
    assert!(out.plan.is_none());
}

#[test]
fn whole_document_deletion() {
    let mut f = table_scenario();
    f.doc(Op::Del, "id1", &["w1", "w2", "w3", "w4", "w6"]);
    for query in [q(&["w1", "w2", "w3"]), q(&["w1"]), q(&["w6", "w4"])] {
        let out = run_search(&f.sk, &mut f.server, &query, &mut OsRng).unwrap();
        assert!(!out.ids.contains(&id("id1")));
        assert_eq!(out.ids, f.oracle.search(&query));
    }
    // add and del records for w1 are both candidates; finalize cancels them
    let out = run_search(&f.sk, &mut f.server, &q(&["w1", "w2", "w3"]), &mut OsRng).unwrap();
    assert!(out.ids.is_empty());
    assert_eq!(out.returned, 2);
}

#[test]
fn single_keyword_deletion_only_holds_for_that_keyword_alone() {
    let mut f = table_scenario();
    f.doc(Op::Del, "id3", &["w5"]);
    let out = run_search(&f.sk, &mut f.server, &q(&["w5"]), &mut OsRng).unwrap();
    assert_eq!(out.ids, BTreeSet::from([id("id2")]));
    // the del record for w5 has no del tag under w2, so the cross test drops it
    // and the stale add survives: deletions must cover the whole document
    let out = run_search(&f.sk, &mut f.server, &q(&["w2", "w5"]), &mut OsRng).unwrap();
    assert_eq!(out.ids, BTreeSet::from([id("id2"), id("id3")]));
    assert_eq!(out.returned as u64, f.oracle.candidates(&q(&["w2", "w5"])));
}

#[test]
fn mixed_batch_in_one_update() {
    let mut f = Fixture::new(100, 1e-6);
    let mut batch = doc(Op::Add, "a", &["x", "y"]);
    batch.extend(doc(Op::Add, "b", &["x", "y"]));
    batch.extend(doc(Op::Del, "a", &["x", "y"]));
    f.apply(&batch);
    let out = run_search(&f.sk, &mut f.server, &q(&["x", "y"]), &mut OsRng).unwrap();
    assert_eq!(out.ids, BTreeSet::from([id("b")]));
}

#[test]
fn forward_privacy_old_tokens_miss_new_entries() {
    let mut f = table_scenario();
    let query = q(&["w1", "w2"]);
    let epoch_before = f.server.hello().unwrap().epoch;
    let r1 = search_round1(&f.sk, epoch_before, &query);
    let resp1 = Round1Response::from_bytes(&f.server.round1(&r1.to_bytes()).unwrap()).unwrap();
    let Round2::Request { request: old_r2, .. } =
        search_round2(&f.sk, epoch_before, &query, &resp1, &mut OsRng).unwrap()
    else {
        panic!("indexed query")
    };

    f.doc(Op::Add, "id9", &["w1", "w2"]);
    let db = f.server.database().unwrap();
    assert_ne!(db.epoch(), epoch_before);

    // stale frequency tokens no longer locate anything
    let stale = Round1Response::from_bytes(&f.server.round1(&r1.to_bytes()).unwrap()).unwrap();
    assert!(stale.entries.iter().all(Option::is_none));

    // replaying the old round-2 request reaches only entries that existed before
    let resp = Round2Response::from_bytes(&f.server.round2(&old_r2.to_bytes()).unwrap()).unwrap();
    let Round2Response::Positions(sets) = resp else { panic!("x-terms present") };
    assert_eq!(sets.len(), 3);
    let r3 = search_round3(&f.sk, f.server.database().unwrap().m(), &sets, &mut OsRng).unwrap();
    let r3 = csse_core::messages::Round3Response::from_bytes(&f.server.round3(&r3.to_bytes()).unwrap()).unwrap();
    let ids = csse_core::client::finalize(&f.sk, &"w1".into(), &r3.results).unwrap();
    assert_eq!(ids, BTreeSet::from([id("id1"), id("id3")]));

    // a fresh search sees the new document
    let out = run_search(&f.sk, &mut f.server, &query, &mut OsRng).unwrap();
    assert!(out.ids.contains(&id("id9")));
}

#[test]
fn server_rejects_round_three_without_round_two() {
    let mut f = table_scenario();
    assert!(matches!(f.server.round3(&[0, 0, 0, 0]), Err(Error::Protocol(_))));
}

#[test]
fn server_rejects_replayed_update() {
    let mut f = Fixture::new(100, 1e-6);
    let before = f.st.clone();
    f.doc(Op::Add, "a", &["x"]);
    let mut st = before;
    let msg = csse_core::client::client_update(&f.sk, &mut st, &doc(Op::Add, "b", &["x"]), &mut OsRng).unwrap();
    assert_eq!(f.server.update(&msg.to_bytes()), Err(Error::AddressCollision));
    assert_eq!(f.server.database().unwrap().entry_count(), 1);
}

#[test]
fn uninitialized_server_refuses_everything() {
    let mut s = LocalServer::new();
    assert!(s.hello().is_err());
    assert!(s.round1(&[0, 0, 0, 0]).is_err());
}

#[test]
fn capacity_is_enforced_end_to_end() {
    let mut f = Fixture::new(4, 1e-3);
    f.doc(Op::Add, "a", &["x", "y", "z"]);
    let err = csse_core::protocol::run_update(
        &f.sk,
        &mut f.st,
        &mut f.server,
        &doc(Op::Add, "b", &["x", "y"]),
        &mut OsRng,
    );
    assert!(matches!(err, Err(Error::CapacityExceeded { capacity: 4 })));
    assert_eq!(f.st.filter().inserted(), 3);
}
