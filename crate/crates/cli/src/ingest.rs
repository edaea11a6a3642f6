//! JSON-lines datasets, one `{"op": "add"|"del", "id": ..., "keywords": [...]}`
//! per line. A `del` names a document; its keywords come from the ledger of
//! earlier adds, so every deletion covers the whole document.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use csse_core::types::ID_LEN;
use csse_core::{DocId, DocumentUpdate, Keyword, Op, UpdateTriple};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordOp {
    Add,
    Del,
}

impl From<RecordOp> for Op {
    fn from(op: RecordOp) -> Op {
        match op {
            RecordOp::Add => Op::Add,
            RecordOp::Del => Op::Del,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub op: RecordOp,
    pub id: String,
    #[serde(default)]
    pub keywords: Vec<String>,
}

impl DatasetRecord {
    pub fn add(id: impl Into<String>, keywords: &[&str]) -> Self {
        Self {
            op: RecordOp::Add,
            id: id.into(),
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn del(id: impl Into<String>) -> Self {
        Self {
            op: RecordOp::Del,
            id: id.into(),
            keywords: Vec::new(),
        }
    }

    pub fn document(&self) -> DocumentUpdate {
        DocumentUpdate {
            op: self.op.into(),
            id: DocId::try_from(self.id.as_str()).expect("ids are validated at ingestion"),
            keywords: self.keywords.iter().map(|k| Keyword::from(k.as_str())).collect(),
        }
    }

    pub fn triples(&self) -> Vec<UpdateTriple> {
        self.document().triples().collect()
    }
}

/// Keywords of every live document, plus ids that were deleted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    live: BTreeMap<String, Vec<String>>,
    deleted: BTreeSet<String>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn live(&self) -> impl Iterator<Item = (&String, &Vec<String>)> {
        self.live.iter()
    }

    pub fn is_live(&self, id: &str) -> bool {
        self.live.contains_key(id)
    }

    /// Validates one record and returns it with deletions expanded.
    pub fn apply(&mut self, rec: DatasetRecord) -> Result<DatasetRecord, String> {
        if rec.id.is_empty() || rec.id.len() > ID_LEN {
            return Err(format!("id must be 1 to {ID_LEN} bytes, got {}", rec.id.len()));
        }
        match rec.op {
            RecordOp::Add => {
                let mut seen = BTreeSet::new();
                let keywords: Vec<String> =
                    rec.keywords.into_iter().filter(|k| seen.insert(k.clone())).collect();
                if keywords.is_empty() {
                    return Err("add needs at least one keyword".into());
                }
                if keywords.iter().any(String::is_empty) {
                    return Err("empty keyword".into());
                }
                if self.live.contains_key(&rec.id) {
                    return Err(format!("id {:?} is already present", rec.id));
                }
                if self.deleted.contains(&rec.id) {
                    // its old add tags would still pass the cross test
                    return Err(format!("id {:?} was deleted and cannot be reused", rec.id));
                }
                self.live.insert(rec.id.clone(), keywords.clone());
                Ok(DatasetRecord {
                    op: RecordOp::Add,
                    id: rec.id,
                    keywords,
                })
            }
            RecordOp::Del => {
                let Some(known) = self.live.get(&rec.id) else {
                    return Err(format!("del of unknown id {:?}", rec.id));
                };
                if !rec.keywords.is_empty() {
                    let given: BTreeSet<&String> = rec.keywords.iter().collect();
                    let have: BTreeSet<&String> = known.iter().collect();
                    if given != have {
                        return Err(format!(
                            "del of {:?} must list all of its keywords or none",
                            rec.id
                        ));
                    }
                }
                let keywords = self.live.remove(&rec.id).unwrap();
                self.deleted.insert(rec.id.clone());
                Ok(DatasetRecord {
                    op: RecordOp::Del,
                    id: rec.id,
                    keywords,
                })
            }
        }
    }
}

pub fn parse_line(line: &str) -> Result<DatasetRecord, String> {
    serde_json::from_str(line).map_err(|e| e.to_string())
}

/// Parses and validates a whole stream against `ledger`. The ledger is only
/// advanced if every line is accepted.
pub fn ingest_reader<R: BufRead>(r: R, ledger: &mut Ledger) -> CliResult<Vec<DatasetRecord>> {
    let mut next = ledger.clone();
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(|e| CliError::user(format!("line {n}: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_line(&line).map_err(|e| CliError::user(format!("line {n}: {e}")))?;
        out.push(next.apply(rec).map_err(|e| CliError::user(format!("line {n}: {e}")))?);
    }
    *ledger = next;
    Ok(out)
}

pub fn ingest(path: &Path, ledger: &mut Ledger) -> CliResult<Vec<DatasetRecord>> {
    let f = std::fs::File::open(path).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    ingest_reader(std::io::BufReader::new(f), ledger)
}

pub fn to_jsonl(records: &[DatasetRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}
