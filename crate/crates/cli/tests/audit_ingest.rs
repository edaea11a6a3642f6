mod common;

use std::io::Cursor;

use csse_cli::audit::{audit, Rule};
use csse_cli::ingest::{ingest, ingest_reader, to_jsonl, Ledger, RecordOp};
use csse_core::transcript::SearchTranscript;

#[test]
fn clean_session_has_no_violations() {
    let r = audit(&common::clean_transcript());
    assert!(r.is_clean(), "{}", r.summary());
    assert_eq!(r.queries.len(), 12);
    assert_eq!(r.updates, 2);
    for q in &r.queries {
        if let Some(s) = q.saddrs {
            assert_eq!(Some(s as u64), q.s_term_updates);
        }
        if let (Some(ret), Some(c)) = (q.returned, q.candidates) {
            assert_eq!(ret as u64, c);
        }
    }
}

#[test]
fn leaky_double_is_flagged() {
    let r = audit(&common::leaky_transcript());
    assert!(!r.is_clean());
    assert!(r.violations.iter().any(|v| v.rule == Rule::PerXTermOutcome));
    // only searches that reach round 2 with x-terms can leak this way
    assert!(r.violations.iter().all(|v| v.search.is_some()));
}

#[test]
fn empty_transcript_gives_empty_report() {
    let r = audit(&SearchTranscript::new());
    assert!(r.is_clean());
    assert!(r.queries.is_empty());
    assert_eq!(r.updates, 0);
}

#[test]
fn transcript_file_round_trip_keeps_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.json");
    common::clean_transcript().save(&p).unwrap();
    assert!(audit(&SearchTranscript::load(&p).unwrap()).is_clean());
}

#[test]
fn well_formed_file_is_parsed_fully() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    let mut text = to_jsonl(&common::table_records());
    text.push_str("\n{\"op\":\"del\",\"id\":\"id2\"}\n");
    std::fs::write(&p, text).unwrap();
    let mut ledger = Ledger::new();
    let recs = ingest(&p, &mut ledger).unwrap();
    assert_eq!(recs.len(), 6);
    assert_eq!(recs[5].op, RecordOp::Del);
    assert_eq!(recs[5].keywords, ["w2", "w3", "w4", "w5"]);
    assert!(!ledger.is_live("id2") && ledger.is_live("id1"));
}

#[test]
fn bad_input_is_rejected_with_line_numbers_and_ledger_untouched() {
    let mut ledger = Ledger::new();
    ingest_reader(Cursor::new(to_jsonl(&common::table_records())), &mut ledger).unwrap();
    let before = ledger.clone();
    let cases = [
        ("{\"op\":\"del\",\"id\":\"ghost\"}\n", "line 1"),
        ("{\"op\":\"del\",\"id\":\"id1\"}\n{\"op\":\"del\",\"id\":\"id1\"}\n", "line 2"),
        ("{\"op\":\"add\",\"id\":\"x\",\"keywords\":[]}\n", "line 1"),
        ("{\"op\":\"move\",\"id\":\"x\"}\n", "line 1"),
        ("{\"op\":\"add\",\"id\":\"x\",\"keywords\":[\"a\"],\"extra\":1}\n", "line 1"),
        ("\n\n{\"op\":\"add\",\"id\":\"0123456789012345678901234567890\",\"keywords\":[\"a\"]}\n", "line 3"),
        ("{\"op\":\"del\",\"id\":\"id4\",\"keywords\":[\"w2\"]}\n", "line 1"),
    ];
    for (text, line) in cases {
        let err = ingest_reader(Cursor::new(text), &mut ledger).unwrap_err();
        assert!(err.to_string().contains(line), "{text:?}: {err}");
        assert_eq!(err.exit_code(), 1);
        assert_eq!(ledger, before);
    }
    assert!(ingest(std::path::Path::new("/nonexistent/x.jsonl"), &mut ledger).is_err());
}
