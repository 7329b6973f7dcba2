//! Annotator transports: remote HTTP, record/replay transcript, or none.
//!
//! Wire format: `POST /annotate` with JSON `{kind, payload, template_id}`;
//! the reply is `{"text": ...}` for area labels and `{"score": ...}` for
//! counterfactual scores. Replay transcripts are JSON lines of
//! `{request_hash, reply}`, keyed by the SHA-256 of the canonical request
//! JSON (kind + payload + template id).

use super::AnnotatorRequest;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("transport io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("http error: {0}")]
    Http(String),
    #[error("malformed reply: {0}")]
    MalformedReply(String),
    #[error("no transcript entry for request {0}")]
    ReplayMiss(String),
    #[error("malformed transcript line {line}: {message}")]
    MalformedTranscript { line: usize, message: String },
}

/// Raw annotator reply as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawReply {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TranscriptLine {
    request_hash: String,
    reply: RawReply,
}

/// Hex SHA-256 of the canonical request JSON; the replay cache key.
pub fn request_hash(request: &AnnotatorRequest) -> String {
    let canonical = serde_json::to_string(request).expect("request serialization");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// A way of answering annotator requests. Implementations must be safe to
/// call from several threads at once.
pub trait Transport: Send + Sync {
    fn query(&self, request: &AnnotatorRequest) -> Result<RawReply, TransportError>;
}

/// HTTP client for a remote annotation service.
pub struct RemoteTransport {
    agent: ureq::Agent,
    endpoint: String,
}

impl RemoteTransport {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
        }
    }
}

impl Transport for RemoteTransport {
    fn query(&self, request: &AnnotatorRequest) -> Result<RawReply, TransportError> {
        let url = format!("{}/annotate", self.endpoint.trim_end_matches('/'));
        let mut response = self
            .agent
            .post(&url)
            .send_json(request)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        response
            .body_mut()
            .read_json::<RawReply>()
            .map_err(|e| TransportError::MalformedReply(e.to_string()))
    }
}

/// Replays answers from a recorded transcript; misses are errors so the
/// caller can fall back to the lexicon.
#[derive(Debug)]
pub struct ReplayTransport {
    entries: BTreeMap<String, RawReply>,
}

impl ReplayTransport {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TranscriptLine =
                serde_json::from_str(&line).map_err(|e| TransportError::MalformedTranscript {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            entries.insert(parsed.request_hash, parsed.reply);
        }
        Ok(Self { entries })
    }
}

impl Transport for ReplayTransport {
    fn query(&self, request: &AnnotatorRequest) -> Result<RawReply, TransportError> {
        let hash = request_hash(request);
        self.entries
            .get(&hash)
            .cloned()
            .ok_or(TransportError::ReplayMiss(hash))
    }
}

/// Wraps another transport and appends every reply to a transcript file.
/// Writes are serialized behind a mutex.
pub struct RecordingTransport<T: Transport> {
    inner: T,
    writer: Mutex<std::io::BufWriter<std::fs::File>>,
}

impl<T: Transport> RecordingTransport<T> {
    pub fn create(inner: T, path: impl AsRef<Path>) -> Result<Self, TransportError> {
        let file = std::fs::File::create(path)?;
        Ok(Self {
            inner,
            writer: Mutex::new(std::io::BufWriter::new(file)),
        })
    }
}

impl<T: Transport> Transport for RecordingTransport<T> {
    fn query(&self, request: &AnnotatorRequest) -> Result<RawReply, TransportError> {
        let reply = self.inner.query(request)?;
        let line = TranscriptLine {
            request_hash: request_hash(request),
            reply: reply.clone(),
        };
        let mut writer = self.writer.lock().expect("transcript writer lock");
        serde_json::to_writer(&mut *writer, &line).map_err(|e| {
            TransportError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
        })?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enrich::{AnnotationKind, AnnotationPayload};

    fn area_request(categories: &[&str]) -> AnnotatorRequest {
        AnnotatorRequest {
            kind: AnnotationKind::AreaLabel,
            payload: AnnotationPayload::Categories(
                categories.iter().map(|c| c.to_string()).collect(),
            ),
            template_id: "area_label_v1".to_string(),
        }
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let a = request_hash(&area_request(&["stove"]));
        let b = request_hash(&area_request(&["stove"]));
        let c = request_hash(&area_request(&["sofa"]));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn record_then_replay_round_trips() {
        struct Fixed;
        impl Transport for Fixed {
            fn query(&self, _: &AnnotatorRequest) -> Result<RawReply, TransportError> {
                Ok(RawReply {
                    text: Some("Pantry Area".to_string()),
                    score: None,
                })
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.jsonl");
        let recorder = RecordingTransport::create(Fixed, &path).unwrap();
        let request = area_request(&["stove", "pan"]);
        let recorded = recorder.query(&request).unwrap();
        drop(recorder);

        let replay = ReplayTransport::from_path(&path).unwrap();
        let replayed = replay.query(&request).unwrap();
        assert_eq!(recorded, replayed);
        assert!(matches!(
            replay.query(&area_request(&["sofa"])),
            Err(TransportError::ReplayMiss(_))
        ));
    }

    #[test]
    fn malformed_transcript_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "not json\n").unwrap();
        match ReplayTransport::from_path(&path) {
            Err(TransportError::MalformedTranscript { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected malformed transcript, got {other:?}"),
        }
    }
}
