//! Semantic enrichment: area labels for hyperedges and counterfactual
//! scores for node attributes.
//!
//! Both annotations go through an [`Annotator`], which combines an
//! optional transport (remote service or recorded transcript) with the
//! bundled rule lexicons. Any transport failure or invalid reply degrades
//! to the lexicon, and every answer carries its [`Provenance`].
//!
//! Requests for one graph are issued sequentially: hyperedges in id
//! order first, then nodes in id order.

pub mod annotator;
mod lexicon;

pub use annotator::{
    request_hash, RawReply, RecordingTransport, RemoteTransport, ReplayTransport, Transport,
    TransportError,
};
pub use lexicon::Lexicons;

use crate::hypergraph::SceneHypergraph;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What an annotation request asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnotationKind {
    AreaLabel,
    CounterfactualScore,
}

/// Request payload: aggregated category labels for area naming, or one
/// attribute text for counterfactual scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationPayload {
    Categories(Vec<String>),
    Attributes(String),
}

/// One annotation request; also the unit the replay cache is keyed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorRequest {
    pub kind: AnnotationKind,
    pub payload: AnnotationPayload,
    pub template_id: String,
}

/// Where an annotation value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// A live annotation service answered.
    Annotator,
    /// The deterministic lexicon rule answered.
    Fallback,
    /// A recorded transcript answered.
    Cache,
}

/// Annotation seam: optional transport plus the lexicon fallback.
pub struct Annotator {
    transport: Option<Box<dyn Transport>>,
    transport_is_cache: bool,
    lexicons: &'static Lexicons,
}

impl Annotator {
    /// Lexicon-only annotator; every answer has provenance `Fallback`.
    pub fn fallback() -> Self {
        Self {
            transport: None,
            transport_is_cache: false,
            lexicons: Lexicons::bundled(),
        }
    }

    /// Remote annotator backed by an HTTP endpoint.
    pub fn remote(endpoint: impl Into<String>) -> Self {
        Self {
            transport: Some(Box::new(RemoteTransport::new(endpoint))),
            transport_is_cache: false,
            lexicons: Lexicons::bundled(),
        }
    }

    /// Replay annotator backed by a recorded transcript.
    pub fn replay(transport: ReplayTransport) -> Self {
        Self {
            transport: Some(Box::new(transport)),
            transport_is_cache: true,
            lexicons: Lexicons::bundled(),
        }
    }

    /// Annotator over an arbitrary transport (e.g. a recorder).
    pub fn with_transport(transport: Box<dyn Transport>, is_cache: bool) -> Self {
        Self {
            transport: Some(transport),
            transport_is_cache: is_cache,
            lexicons: Lexicons::bundled(),
        }
    }

    fn transport_provenance(&self) -> Provenance {
        if self.transport_is_cache {
            Provenance::Cache
        } else {
            Provenance::Annotator
        }
    }
}

/// Infer an area-level label from the member categories of one hyperedge.
///
/// An empty category list short-circuits to "Unknown Area". Otherwise the
/// transport is consulted when configured; a failure or an empty reply
/// falls back to the lexicon majority vote.
pub fn label_area(categories: &[String], annotator: &Annotator) -> (String, Provenance) {
    if categories.is_empty() {
        return ("Unknown Area".to_string(), Provenance::Fallback);
    }
    if let Some(transport) = &annotator.transport {
        let request = AnnotatorRequest {
            kind: AnnotationKind::AreaLabel,
            payload: AnnotationPayload::Categories(categories.to_vec()),
            template_id: "area_label_v1".to_string(),
        };
        if let Ok(reply) = transport.query(&request) {
            if let Some(text) = reply.text {
                if !text.is_empty() {
                    return (text, annotator.transport_provenance());
                }
            }
        }
    }
    (annotator.lexicons.vote_area(categories), Provenance::Fallback)
}

/// Score how counterfactual an attribute description is, in `[0, 1]`
/// (0 = normal, 1 = clearly abnormal).
///
/// Empty attributes default to 0. Numeric transport replies are clamped
/// to `[0, 1]`; missing or non-finite replies fall back to the lexicon.
pub fn score_counterfactual(attributes: &str, annotator: &Annotator) -> (f64, Provenance) {
    if attributes.is_empty() {
        return (0.0, Provenance::Fallback);
    }
    if let Some(transport) = &annotator.transport {
        let request = AnnotatorRequest {
            kind: AnnotationKind::CounterfactualScore,
            payload: AnnotationPayload::Attributes(attributes.to_string()),
            template_id: "cf_score_v1".to_string(),
        };
        if let Ok(reply) = transport.query(&request) {
            if let Some(score) = reply.score {
                if score.is_finite() {
                    return (score.clamp(0.0, 1.0), annotator.transport_provenance());
                }
            }
        }
    }
    (
        annotator.lexicons.score_abnormality(attributes),
        Provenance::Fallback,
    )
}

/// A hypergraph plus its semantic annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnrichedHypergraph {
    pub base: SceneHypergraph,
    /// Hyperedge id -> area label. Every hyperedge is labeled.
    pub area_labels: BTreeMap<usize, String>,
    /// Node id -> counterfactual score in [0, 1]. Nodes with empty
    /// attributes default to 0.
    pub cf_scores: BTreeMap<usize, f64>,
    pub provenance: EnrichProvenance,
}

/// Provenance of every annotation in an [`EnrichedHypergraph`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnrichProvenance {
    pub areas: BTreeMap<usize, Provenance>,
    pub scores: BTreeMap<usize, Provenance>,
}

/// Annotate every hyperedge with an area label and every node with a
/// counterfactual score.
pub fn enrich(graph: &SceneHypergraph, annotator: &Annotator) -> EnrichedHypergraph {
    let mut area_labels = BTreeMap::new();
    let mut cf_scores = BTreeMap::new();
    let mut provenance = EnrichProvenance::default();

    for edge in &graph.hyperedges {
        let categories: Vec<String> = edge
            .members
            .iter()
            .map(|&m| graph.nodes[m].category.clone())
            .collect();
        let (label, source) = label_area(&categories, annotator);
        area_labels.insert(edge.id, label);
        provenance.areas.insert(edge.id, source);
    }

    for node in &graph.nodes {
        let (score, source) = score_counterfactual(&node.attributes, annotator);
        cf_scores.insert(node.id, score);
        provenance.scores.insert(node.id, source);
    }

    EnrichedHypergraph {
        base: graph.clone(),
        area_labels,
        cf_scores,
        provenance,
    }
}
