//! Drivers that run updates and searches over a [`RecordingChannel`] and
//! append the plaintext ground truth the auditor compares against.

use rand::{CryptoRng, RngCore};
use std::collections::BTreeSet;

use csse_core::client::ClientState;
use csse_core::oracle::PlaintextOracle;
use csse_core::protocol::{run_search, run_update, Channel, RecordingChannel, SearchOutcome};
use csse_core::transcript::TranscriptEvent;
use csse_core::{Result, SearchQuery, SecretKeyBundle, UpdateTriple};

pub fn search_truth(oracle: &PlaintextOracle, q: &SearchQuery, search: u64, results: usize) -> TranscriptEvent {
    TranscriptEvent::SearchTruth {
        search,
        n: q.len(),
        s_term_updates: oracle.s_term(q).1,
        candidates: oracle.candidates(q),
        results: results as u64,
    }
}

pub fn update_truth(batch: &[UpdateTriple]) -> TranscriptEvent {
    let keywords: BTreeSet<String> = batch
        .iter()
        .map(|t| String::from_utf8_lossy(t.keyword.as_bytes()).into_owned())
        .collect();
    let ids: BTreeSet<String> = batch.iter().map(|t| t.id.to_string()).collect();
    TranscriptEvent::UpdateTruth {
        keywords: keywords.into_iter().collect(),
        ids: ids.into_iter().collect(),
    }
}

/// `oracle` must reflect every update applied so far.
pub fn recorded_search<C: Channel, R: RngCore + CryptoRng>(
    ch: &mut RecordingChannel<C>,
    sk: &SecretKeyBundle,
    oracle: &PlaintextOracle,
    q: &SearchQuery,
    rng: &mut R,
) -> Result<SearchOutcome> {
    let out = run_search(sk, ch, q, rng)?;
    if let Some(search) = ch.transcript().current_search() {
        let truth = search_truth(oracle, q, search, out.ids.len());
        ch.transcript_mut().annotate(truth);
    }
    Ok(out)
}

/// Sends the batch, then records it in `oracle` and the transcript.
pub fn recorded_update<C: Channel, R: RngCore + CryptoRng>(
    ch: &mut RecordingChannel<C>,
    sk: &SecretKeyBundle,
    st: &mut ClientState,
    oracle: &mut PlaintextOracle,
    batch: &[UpdateTriple],
    rng: &mut R,
) -> Result<()> {
    run_update(sk, st, ch, batch, rng)?;
    oracle.record(batch);
    ch.transcript_mut().annotate(update_truth(batch));
    Ok(())
}
