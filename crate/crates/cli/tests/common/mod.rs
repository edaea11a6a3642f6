#![allow(dead_code)]

use rand::rngs::OsRng;

use csse_cli::ingest::{DatasetRecord, Ledger};
use csse_cli::leaky::{LeakTolerant, LeakyServer};
use csse_cli::recording::{recorded_search, recorded_update};
use csse_core::oracle::PlaintextOracle;
use csse_core::protocol::{run_setup, LocalServer, RecordingChannel};
use csse_core::transcript::SearchTranscript;
use csse_core::{SearchQuery, UpdateTriple};

pub fn table_records() -> Vec<DatasetRecord> {
    vec![
        DatasetRecord::add("id1", &["w1", "w2", "w3", "w4", "w6"]),
        DatasetRecord::add("id2", &["w2", "w3", "w4", "w5"]),
        DatasetRecord::add("id3", &["w1", "w2", "w4", "w5", "w6"]),
        DatasetRecord::add("id4", &["w2", "w3", "w6"]),
        DatasetRecord::add("id5", &["w1", "w3", "w4"]),
    ]
}

/// A mixed workload with one deletion, expanded through a ledger.
pub fn audit_workload() -> Vec<Vec<UpdateTriple>> {
    let mut ledger = Ledger::new();
    let mut first: Vec<DatasetRecord> = table_records();
    first.push(DatasetRecord::add("id6", &["w1", "w2", "w7"]));
    let first: Vec<UpdateTriple> = first
        .into_iter()
        .flat_map(|r| ledger.apply(r).unwrap().triples())
        .collect();
    let second: Vec<UpdateTriple> = [DatasetRecord::del("id3"), DatasetRecord::add("id7", &["w1", "w3"])]
        .into_iter()
        .flat_map(|r| ledger.apply(r).unwrap().triples())
        .collect();
    vec![first, second]
}

pub fn audit_queries() -> Vec<SearchQuery> {
    [
        vec!["w1", "w2", "w3"],
        vec!["w2", "w6"],
        vec!["w5"],
        vec!["w1", "w4"],
        vec!["w3", "w7", "w1"],
        vec!["w1", "nope"],
    ]
    .into_iter()
    .map(|q| SearchQuery::new(q).unwrap())
    .collect()
}

pub fn clean_transcript() -> SearchTranscript {
    let ch = &mut RecordingChannel::new(LocalServer::new());
    let (sk, mut st) = run_setup(ch, 200, 1e-6, &mut OsRng).unwrap();
    let mut oracle = PlaintextOracle::new();
    for batch in audit_workload() {
        recorded_update(ch, &sk, &mut st, &mut oracle, &batch, &mut OsRng).unwrap();
        for q in audit_queries() {
            let out = recorded_search(ch, &sk, &oracle, &q, &mut OsRng).unwrap();
            assert_eq!(out.ids, oracle.search(&q));
        }
    }
    std::mem::take(ch.transcript_mut())
}

/// Transcript of the same session against the instrumented double.
pub fn leaky_transcript() -> SearchTranscript {
    // the recorder sits between the tolerant client and the leaky server,
    // so the appended bytes land in the transcript
    let mut ch = LeakTolerant::new(RecordingChannel::new(LeakyServer::new(LocalServer::new())));
    let (sk, mut st) = run_setup(&mut ch, 200, 1e-6, &mut OsRng).unwrap();
    let mut oracle = PlaintextOracle::new();
    for batch in audit_workload() {
        recorded_update(ch.inner_mut(), &sk, &mut st, &mut oracle, &batch, &mut OsRng).unwrap();
        ch.inner_mut().inner_mut().set_filter(st.filter().clone());
        for q in audit_queries() {
            let out = csse_core::protocol::run_search(&sk, &mut ch, &q, &mut OsRng).unwrap();
            assert_eq!(out.ids, oracle.search(&q));
            let rec = ch.inner_mut();
            if let Some(search) = rec.transcript().current_search() {
                let truth = csse_cli::recording::search_truth(&oracle, &q, search, out.ids.len());
                rec.transcript_mut().annotate(truth);
            }
        }
    }
    std::mem::take(ch.inner_mut().transcript_mut())
}
