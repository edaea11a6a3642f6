use std::fmt;

use crate::error::{Error, Result};

/// Maximum document identifier length in bytes.
pub const ID_LEN: usize = 30;

/// Bytes of `id || op || original length`; also the width of a TSet value.
pub const RECORD_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Del,
}

impl Op {
    pub fn to_byte(self) -> u8 {
        match self {
            Op::Add => 0x00,
            Op::Del => 0x01,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0x00 => Ok(Op::Add),
            0x01 => Ok(Op::Del),
            other => Err(Error::CorruptEntry(format!("op byte {other:#04x}"))),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Add => "add",
            Op::Del => "del",
        })
    }
}

/// Document identifier of at most 30 bytes, zero-padded with its length kept.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DocId {
    bytes: [u8; ID_LEN],
    len: u8,
}

impl DocId {
    pub fn new(id: &[u8]) -> Result<Self> {
        if id.len() > ID_LEN {
            return Err(Error::InvalidParameter(format!(
                "document id of {} bytes exceeds {ID_LEN}",
                id.len()
            )));
        }
        let mut bytes = [0u8; ID_LEN];
        bytes[..id.len()].copy_from_slice(id);
        Ok(Self {
            bytes,
            len: id.len() as u8,
        })
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    /// `id (30, zero-padded) || op || len`.
    pub fn pack(&self, op: Op) -> [u8; RECORD_LEN] {
        let mut out = [0u8; RECORD_LEN];
        out[..ID_LEN].copy_from_slice(&self.bytes);
        out[ID_LEN] = op.to_byte();
        out[ID_LEN + 1] = self.len;
        out
    }

    pub fn unpack(record: &[u8; RECORD_LEN]) -> Result<(Self, Op)> {
        let op = Op::from_byte(record[ID_LEN])?;
        let len = record[ID_LEN + 1] as usize;
        if len > ID_LEN || record[len..ID_LEN].iter().any(|b| *b != 0) {
            return Err(Error::CorruptEntry("identifier padding".into()));
        }
        Ok((Self::new(&record[..len])?, op))
    }
}

impl fmt::Debug for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DocId({:?})", String::from_utf8_lossy(self.as_bytes()))
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(self.as_bytes()))
    }
}

impl TryFrom<&str> for DocId {
    type Error = Error;

    fn try_from(s: &str) -> Result<Self> {
        Self::new(s.as_bytes())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Keyword(Vec<u8>);

impl Keyword {
    pub fn new(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl AsRef<[u8]> for Keyword {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl From<&str> for Keyword {
    fn from(s: &str) -> Self {
        Self(s.as_bytes().to_vec())
    }
}

impl From<String> for Keyword {
    fn from(s: String) -> Self {
        Self(s.into_bytes())
    }
}

impl fmt::Debug for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Keyword({:?})", String::from_utf8_lossy(&self.0))
    }
}

impl fmt::Display for Keyword {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&String::from_utf8_lossy(&self.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UpdateTriple {
    pub op: Op,
    pub id: DocId,
    pub keyword: Keyword,
}

impl UpdateTriple {
    pub fn new(op: Op, id: DocId, keyword: impl Into<Keyword>) -> Self {
        Self {
            op,
            id,
            keyword: keyword.into(),
        }
    }
}

/// A whole-document change. Deletions must list every keyword the document
/// was added with, otherwise later conjunctive tests can still see it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentUpdate {
    pub op: Op,
    pub id: DocId,
    pub keywords: Vec<Keyword>,
}

impl DocumentUpdate {
    pub fn triples(&self) -> impl Iterator<Item = UpdateTriple> + '_ {
        self.keywords
            .iter()
            .map(|w| UpdateTriple::new(self.op, self.id, w.clone()))
    }
}

/// Ordered conjunction `w1 AND ... AND wn`, duplicates removed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchQuery {
    keywords: Vec<Keyword>,
}

impl SearchQuery {
    pub fn new<K: Into<Keyword>>(keywords: impl IntoIterator<Item = K>) -> Result<Self> {
        let mut out: Vec<Keyword> = Vec::new();
        for k in keywords {
            let k = k.into();
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidParameter("query needs at least one keyword".into()));
        }
        Ok(Self { keywords: out })
    }

    pub fn keywords(&self) -> &[Keyword] {
        &self.keywords
    }

    pub fn len(&self) -> usize {
        self.keywords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keywords.is_empty()
    }
}
