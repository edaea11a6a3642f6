//! Append-only record of every payload the server receives or sends,
//! optionally annotated with plaintext ground truth for the leakage auditor.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Setup,
    Update,
    Round1Request,
    Round1Response,
    Round2Request,
    Round2Response,
    Round3Request,
    Round3Response,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TranscriptEvent {
    Message {
        at_us: u64,
        /// Search session number for round messages.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        search: Option<u64>,
        kind: MessageKind,
        #[serde(with = "hex_bytes")]
        payload: Vec<u8>,
    },
    /// Plaintext-side view of one search, from the oracle.
    SearchTruth {
        search: u64,
        n: usize,
        s_term_updates: u64,
        candidates: u64,
        results: u64,
    },
    /// Plaintext contents of the most recent update batch.
    UpdateTruth {
        keywords: Vec<String>,
        ids: Vec<String>,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct SearchTranscript {
    events: Vec<TranscriptEvent>,
    #[serde(skip)]
    started: Option<Instant>,
    #[serde(skip)]
    searches: u64,
}

impl SearchTranscript {
    pub fn new() -> Self {
        Self {
            events: Vec::new(),
            started: Some(Instant::now()),
            searches: 0,
        }
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn now_us(&mut self) -> u64 {
        self.started.get_or_insert_with(Instant::now).elapsed().as_micros() as u64
    }

    /// Opens a new search session number.
    pub fn begin_search(&mut self) -> u64 {
        self.searches += 1;
        self.searches
    }

    /// Session number of the latest search.
    pub fn current_search(&self) -> Option<u64> {
        (self.searches > 0).then_some(self.searches)
    }

    pub fn record(&mut self, kind: MessageKind, search: Option<u64>, payload: &[u8]) {
        let at_us = self.now_us();
        self.events.push(TranscriptEvent::Message {
            at_us,
            search,
            kind,
            payload: payload.to_vec(),
        });
    }

    pub fn annotate(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("transcript serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut t: Self =
            serde_json::from_str(s).map_err(|e| Error::Decode(format!("transcript: {e}")))?;
        t.searches = t
            .events
            .iter()
            .filter_map(|e| match e {
                TranscriptEvent::Message { search, .. } => *search,
                _ => None,
            })
            .max()
            .unwrap_or(0);
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Decode(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_keeps_session_numbering() {
        let mut t = SearchTranscript::new();
        let s = t.begin_search();
        t.record(MessageKind::Round1Request, Some(s), &[1, 2, 3]);
        t.annotate(TranscriptEvent::SearchTruth {
            search: s,
            n: 2,
            s_term_updates: 1,
            candidates: 0,
            results: 0,
        });
        let back = SearchTranscript::from_json(&t.to_json()).unwrap();
        assert_eq!(back.events(), t.events());
        assert_eq!(back.current_search(), Some(1));
        assert!(t.to_json().contains("\"payload\": \"010203\""));
    }
}
