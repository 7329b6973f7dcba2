//! JSON file format for (enriched) hypergraphs.
//!
//! The schema extends the bare hypergraph contract
//! `{nodes: [{id, category, attributes}], hyperedges: [{id, members}]}`
//! with the scene id, the optional task, and per-node/per-edge enrichment
//! (`label`, `cf_score`, `provenance`). Maps and arrays are emitted in id
//! order so equal graphs serialize byte-equal.

use crate::enrich::{EnrichProvenance, EnrichedHypergraph, Provenance};
use crate::hypergraph::{HyperNode, Hyperedge, SceneHypergraph};
use crate::scene::TaskSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed graph file: {0}")]
    Malformed(String),
}

#[derive(Serialize, Deserialize)]
struct GraphFileNode {
    id: usize,
    category: String,
    attributes: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cf_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct GraphFileEdge {
    id: usize,
    members: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<TaskSpec>,
    nodes: Vec<GraphFileNode>,
    hyperedges: Vec<GraphFileEdge>,
}

/// Serialize an enriched hypergraph to the JSON schema above.
pub fn to_json(graph: &EnrichedHypergraph) -> String {
    let file = GraphFile {
        scene_id: graph.base.scene_id.clone(),
        task: graph.base.task.clone(),
        nodes: graph
            .base
            .nodes
            .iter()
            .map(|n| GraphFileNode {
                id: n.id,
                category: n.category.clone(),
                attributes: n.attributes.clone(),
                cf_score: graph.cf_scores.get(&n.id).copied(),
                provenance: graph.provenance.scores.get(&n.id).copied(),
            })
            .collect(),
        hyperedges: graph
            .base
            .hyperedges
            .iter()
            .map(|e| GraphFileEdge {
                id: e.id,
                members: e.members.clone(),
                label: graph.area_labels.get(&e.id).cloned(),
                provenance: graph.provenance.areas.get(&e.id).copied(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("graph serialization");
    out.push('\n');
    out
}

/// Parse a graph file back into an enriched hypergraph.
///
/// Nodes and edges must be listed in id order with contiguous ids; every
/// edge needs a label and every node a score (files written by
/// [`to_json`] after enrichment always satisfy this).
pub fn from_json(text: &str) -> Result<EnrichedHypergraph, GraphIoError> {
    let file: GraphFile =
        serde_json::from_str(text).map_err(|e| GraphIoError::Malformed(e.to_string()))?;

    let node_count = file.nodes.len();
    let mut nodes = Vec::with_capacity(node_count);
    let mut cf_scores = BTreeMap::new();
    let mut provenance = EnrichProvenance::default();
    for (idx, node) in file.nodes.into_iter().enumerate() {
        if node.id != idx {
            return Err(GraphIoError::Malformed(format!(
                "node ids must be contiguous from 0, found {} at position {idx}",
                node.id
            )));
        }
        cf_scores.insert(node.id, node.cf_score.unwrap_or(0.0));
        provenance
            .scores
            .insert(node.id, node.provenance.unwrap_or(Provenance::Fallback));
        nodes.push(HyperNode {
            id: node.id,
            category: node.category,
            attributes: node.attributes,
        });
    }

    let mut hyperedges = Vec::with_capacity(file.hyperedges.len());
    let mut area_labels = BTreeMap::new();
    let mut assignment: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (idx, edge) in file.hyperedges.into_iter().enumerate() {
        if edge.id != idx {
            return Err(GraphIoError::Malformed(format!(
                "hyperedge ids must be contiguous from 0, found {} at position {idx}",
                edge.id
            )));
        }
        for &member in &edge.members {
            if member >= node_count {
                return Err(GraphIoError::Malformed(format!(
                    "hyperedge {} references unknown node {member}",
                    edge.id
                )));
            }
            assignment.entry(member).or_default().push(edge.id);
        }
        area_labels.insert(
            edge.id,
            edge.label
                .ok_or_else(|| GraphIoError::Malformed(format!("hyperedge {} has no label", edge.id)))?,
        );
        provenance
            .areas
            .insert(edge.id, edge.provenance.unwrap_or(Provenance::Fallback));
        hyperedges.push(Hyperedge {
            id: edge.id,
            members: edge.members,
        });
    }

    Ok(EnrichedHypergraph {
        base: SceneHypergraph {
            scene_id: file.scene_id,
            nodes,
            hyperedges,
            assignment,
            task: file.task,
        },
        area_labels,
        cf_scores,
        provenance,
    })
}

/// Read an enriched hypergraph from a file.
pub fn load_graph(path: impl AsRef<Path>) -> Result<EnrichedHypergraph, GraphIoError> {
    let text = std::fs::read_to_string(path)?;
    from_json(&text)
}

/// Write an enriched hypergraph to a file.
pub fn save_graph(graph: &EnrichedHypergraph, path: impl AsRef<Path>) -> Result<(), GraphIoError> {
    std::fs::write(path, to_json(graph))?;
    Ok(())
}
