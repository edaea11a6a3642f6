#![allow(dead_code)]

use csse_core::client::ClientState;
use csse_core::oracle::PlaintextOracle;
use csse_core::protocol::{run_setup, run_update, LocalServer};
use csse_core::{DocId, Op, SecretKeyBundle, UpdateTriple};
use rand::rngs::OsRng;

pub struct Fixture {
    pub sk: SecretKeyBundle,
    pub st: ClientState,
    pub server: LocalServer,
    pub oracle: PlaintextOracle,
}

impl Fixture {
    pub fn new(capacity: u64, fp: f64) -> Self {
        let mut server = LocalServer::new();
        let (sk, st) = run_setup(&mut server, capacity, fp, &mut OsRng).unwrap();
        Self {
            sk,
            st,
            server,
            oracle: PlaintextOracle::new(),
        }
    }

    pub fn apply(&mut self, batch: &[UpdateTriple]) {
        run_update(&self.sk, &mut self.st, &mut self.server, batch, &mut OsRng).unwrap();
        self.oracle.record(batch);
    }

    pub fn doc(&mut self, op: Op, id: &str, kws: &[&str]) {
        let batch = doc(op, id, kws);
        self.apply(&batch);
    }
}

pub fn id(s: &str) -> DocId {
    DocId::try_from(s).unwrap()
}

pub fn doc(op: Op, id_: &str, kws: &[&str]) -> Vec<UpdateTriple> {
    kws.iter().map(|w| UpdateTriple::new(op, id(id_), *w)).collect()
}

/// The five-document example database, one batch per document.
pub fn table_scenario() -> Fixture {
    let mut f = Fixture::new(1000, 1e-6);
    f.doc(Op::Add, "id1", &["w1", "w2", "w3", "w4", "w6"]);
    f.doc(Op::Add, "id2", &["w2", "w3", "w4", "w5"]);
    f.doc(Op::Add, "id3", &["w1", "w2", "w4", "w5", "w6"]);
    f.doc(Op::Add, "id4", &["w2", "w3", "w6"]);
    f.doc(Op::Add, "id5", &["w1", "w3", "w4"]);
    f
}
