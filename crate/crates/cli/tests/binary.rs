//! Drives the `csse` binary against an in-process daemon.

mod common;

use std::path::PathBuf;
use std::process::{Command, Output};

use csse_cli::ingest::to_jsonl;
use csse_service::{spawn, ServerConfig, ServerHandle};

fn csse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csse")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn daemon() -> ServerHandle {
    spawn(ServerConfig {
        listen: "127.0.0.1:0".parse().unwrap(),
        ..ServerConfig::default()
    })
    .unwrap()
}

struct Owner {
    dir: tempfile::TempDir,
    server: ServerHandle,
}

impl Owner {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let me = Self { dir, server: daemon() };
        let o = csse(&["keygen", "--out", me.s("key")]);
        assert!(o.status.success(), "{}", stderr(&o));
        me
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> &str {
        // leak a little per test for convenient &str args
        Box::leak(self.path(name).to_string_lossy().into_owned().into_boxed_str())
    }

    fn addr(&self) -> &str {
        Box::leak(self.server.addr().to_string().into_boxed_str())
    }

    fn init(&self, capacity: u64) -> Output {
        let cap = capacity.to_string();
        csse(&["init", "--server", self.addr(), "--key", self.s("key"), "--state", self.s("state.json"), "--capacity", &cap])
    }

    fn update(&self, jsonl: &str, extra: &[&str]) -> Output {
        let data = self.path("data.jsonl");
        std::fs::write(&data, jsonl).unwrap();
        let mut args = vec!["update", "--server", self.addr(), "--key", self.s("key"), "--state", self.s("state.json")];
        args.extend_from_slice(extra);
        args.push(self.s("data.jsonl"));
        csse(&args)
    }

    fn search(&self, q: &str, extra: &[&str]) -> Output {
        let mut args = vec!["search", "--server", self.addr(), "--key", self.s("key")];
        args.extend_from_slice(extra);
        args.push(q);
        csse(&args)
    }
}

#[test]
fn table_scenario_prints_only_id1() {
    let o = Owner::new();
    assert!(o.init(1000).status.success());
    let up = o.update(&to_jsonl(&common::table_records()), &["--batch-docs", "2"]);
    assert!(up.status.success(), "{}", stderr(&up));
    let out = o.search("w1 AND w2 AND w3", &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "id1\n");
    assert_eq!(stdout(&o.search("w2 AND w6", &[])), "id1\nid3\nid4\n");
}

#[test]
fn empty_database_gives_empty_output() {
    let o = Owner::new();
    // before and after init
    let out = o.search("w1 AND w2", &[]);
    assert_eq!((out.status.code(), stdout(&out)), (Some(0), String::new()));
    assert!(o.init(100).status.success());
    let out = o.search("w1", &[]);
    assert_eq!((out.status.code(), stdout(&out)), (Some(0), String::new()));
}

#[test]
fn unindexed_keyword_prints_a_note() {
    let o = Owner::new();
    assert!(o.init(100).status.success());
    assert!(o.update(&to_jsonl(&common::table_records()), &[]).status.success());
    let out = o.search("w1 AND zzz", &[]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "");
    assert!(stderr(&out).contains("keyword not indexed: zzz"), "{}", stderr(&out));
}

#[test]
fn deletions_and_state_persist_across_invocations() {
    let o = Owner::new();
    assert!(o.init(100).status.success());
    assert!(o.update(&to_jsonl(&common::table_records()), &[]).status.success());
    assert!(o.update("{\"op\":\"del\",\"id\":\"id1\"}\n", &[]).status.success());
    assert_eq!(stdout(&o.search("w1 AND w4", &[])), "id3\nid5\n");
    // deleted ids cannot come back
    let again = o.update("{\"op\":\"add\",\"id\":\"id1\",\"keywords\":[\"w1\"]}\n", &[]);
    assert_eq!(again.status.code(), Some(1));
    assert!(stderr(&again).contains("line 1"));
}

#[test]
fn exit_codes() {
    let o = Owner::new();
    // bad query syntax: user error
    assert_eq!(o.search("w1 and w2", &[]).status.code(), Some(1));
    assert_eq!(o.search("AND w2", &[]).status.code(), Some(1));
    // missing key file: user error
    let out = csse(&["search", "--server", o.addr(), "--key", o.s("nokey"), "w1"]);
    assert_eq!(out.status.code(), Some(1));
    // nobody listening: protocol error
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string();
    let out = csse(&["search", "--server", &dead, "--key", o.s("key"), "w1"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    // second init: the server refuses
    assert!(o.init(10).status.success());
    assert_eq!(o.init(10).status.code(), Some(2));
    // malformed dataset line
    let out = o.update("{\"op\":\"add\",\"id\":\"a\",\"keywords\":[\"x\"]}\nnot json\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    // unknown subcommand and empty bench profile
    assert_eq!(csse(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(csse(&["bench", "--profile", ""]).status.code(), Some(1));
    assert_eq!(csse(&["--help"]).status.code(), Some(0));
}

#[test]
fn recorded_session_audits_clean() {
    let o = Owner::new();
    let t = o.s("transcript.json");
    assert!(o.init(100).status.success());
    assert!(o.update(&to_jsonl(&common::table_records()), &["--transcript", t]).status.success());
    for q in ["w1 AND w2 AND w3", "w5", "w4 AND w6", "w1 AND nope"] {
        let out = o.search(q, &["--transcript", t, "--state", o.s("state.json")]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let out = csse(&["audit", t]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("4 searches, 1 updates, 0 violations"), "{}", stdout(&out));
    let json: serde_json::Value = serde_json::from_slice(&csse(&["audit", "--json", t]).stdout).unwrap();
    assert_eq!(json["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn audit_flags_leaky_transcript_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("leaky.json");
    common::leaky_transcript().save(&p).unwrap();
    let out = csse(&["audit", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(!text.contains(" 0 violations"), "{text}");
    assert!(text.contains("PerXTermOutcome"), "{text}");
}

#[test]
fn serve_and_bench_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("server.toml");
    std::fs::write(&cfg, "listen = \"127.0.0.1:0\"\nbogus = 1\n").unwrap();
    assert_eq!(csse(&["serve", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));

    let csv = dir.path().join("out.csv");
    let out = csse(&["bench", "--profile", "quick", "--runs", "1", "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("workload,phase,median_ms,p95_ms"));
    assert!(text.contains("freq-sweep/f=64,search"));
    assert!(stderr(&out).contains("db-growth"));
}
