//! Conjunctive dynamic searchable symmetric encryption.
//!
//! A data owner indexes `(op, id, keyword)` triples into an encrypted
//! database held by an untrusted server. A searcher holding the secret keys
//! runs a three-round protocol to evaluate `w1 AND ... AND wn`:
//!
//! 1. Frequency tokens let the server return encrypted update counts, from
//!    which the client picks the least frequently updated keyword (s-term)
//!    without contacting the owner.
//! 2. The client sends the s-term's TSet addresses plus blinded cross-tokens
//!    for every other keyword; the server unblinds them into cross-tags and
//!    answers with their Bloom filter positions.
//! 3. The client turns each position set into a hidden-vector-encryption
//!    key; the server tests each key against the encrypted cross-tag filter
//!    and returns only the entries that pass every x-term at once.
//!
//! Updates use fresh per-keyword counters (forward privacy) and deletions
//! are encoded as new `del` records (backward privacy).

pub mod bloom;
pub mod client;
pub mod codec;
pub mod derive;
mod error;
pub mod lfka;
pub mod messages;
pub mod oracle;
pub mod prims;
pub mod protocol;
pub mod server;
pub mod shve;
pub mod transcript;
pub mod types;

pub use error::{Error, Result};
pub use prims::{GroupElement, Key32, Scalar, SecretKeyBundle};
pub use types::{DocId, DocumentUpdate, Keyword, Op, SearchQuery, UpdateTriple};
