//! The data owner's local state file: client counters and filter, the
//! ingestion ledger, and the plaintext update history used for auditing.

use serde::{Deserialize, Serialize};
use std::path::Path;

use csse_core::client::ClientState;
use csse_core::oracle::PlaintextOracle;

use crate::error::{CliError, CliResult};
use crate::ingest::{DatasetRecord, Ledger};

#[derive(Serialize, Deserialize)]
struct OwnerFile {
    client_state: String,
    ledger: Ledger,
    history: Vec<DatasetRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OwnerState {
    pub client: ClientState,
    pub ledger: Ledger,
    pub history: Vec<DatasetRecord>,
}

impl OwnerState {
    pub fn new(client: ClientState) -> Self {
        Self {
            client,
            ledger: Ledger::new(),
            history: Vec::new(),
        }
    }

    /// Rebuilds the plaintext oracle from the recorded history.
    pub fn oracle(&self) -> PlaintextOracle {
        let mut o = PlaintextOracle::new();
        for r in &self.history {
            o.record(&r.triples());
        }
        o
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&OwnerFile {
            client_state: hex::encode(self.client.to_bytes()),
            ledger: self.ledger.clone(),
            history: self.history.clone(),
        })
        .expect("owner state serializes")
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        let f: OwnerFile = serde_json::from_str(s).map_err(|e| CliError::user(format!("state file: {e}")))?;
        let bytes = hex::decode(&f.client_state).map_err(|e| CliError::user(format!("state file: {e}")))?;
        let client = ClientState::from_bytes(&bytes).map_err(|e| CliError::user(format!("state file: {e}")))?;
        Ok(Self {
            client,
            ledger: f.ledger,
            history: f.history,
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json())
            .and_then(|_| std::fs::rename(&tmp, path))
            .map_err(|e| CliError::user(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use csse_core::bloom::BloomParams;
    use csse_core::SearchQuery;

    #[test]
    fn json_round_trip_and_oracle() {
        let mut s = OwnerState::new(ClientState::new(BloomParams::derive(10, 1e-3).unwrap()));
        for r in [DatasetRecord::add("a", &["x", "y"]), DatasetRecord::add("b", &["x"]), DatasetRecord::del("a")] {
            let r = s.ledger.apply(r).unwrap();
            s.history.push(r);
        }
        let back = OwnerState::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let q = SearchQuery::new(["x"]).unwrap();
        assert_eq!(back.oracle().search(&q).len(), 1);
        assert!(OwnerState::from_json("{}").is_err());
    }
}
