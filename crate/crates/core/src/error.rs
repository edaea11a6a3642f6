use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bloom filter capacity of {capacity} insertions exceeded")]
    CapacityExceeded { capacity: u64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("non-canonical encoding of {0}")]
    NonCanonical(&'static str),

    #[error("scalar derivation failed after all retries")]
    ScalarDerivation,

    #[error("inverse of zero requested")]
    ZeroInverse,

    #[error("symmetric decryption failed")]
    SymDecrypt,

    #[error("frequency ciphertext prefix collision; re-run with a fresh epoch nonce")]
    PrefixCollision,

    #[error("update counter overflow for a keyword (limit 2^32 - 1)")]
    CounterOverflow,

    #[error("decrypted frequency out of range; frequency set is corrupt or stale")]
    CorruptCount,

    #[error("corrupt search result entry: {0}")]
    CorruptEntry(String),

    #[error("unknown TSet address in search request")]
    UnknownAddress,

    #[error("TSet address collision; client and server state have diverged")]
    AddressCollision,

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("randomness source failure: {0}")]
    Entropy(String),
}
