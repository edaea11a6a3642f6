//! Operator tooling around the csse engine: dataset ingestion with
//! document-level deletion, owner state files, a synthetic workload
//! generator, the benchmark sweeps, and the transcript leakage auditor.

pub mod audit;
pub mod bench;
pub mod error;
pub mod ingest;
pub mod leaky;
pub mod owner;
pub mod query;
pub mod recording;
pub mod verify;
pub mod workload;

pub use error::{CliError, CliResult};
