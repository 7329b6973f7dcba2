//! Spatial hypergraph construction.
//!
//! Object positions are clustered with DBSCAN per image; each cluster
//! becomes one hyperedge and every noise point becomes a singleton
//! hyperedge, so every node belongs to at least one hyperedge. The binary
//! incidence matrix is derived on demand rather than stored.

use crate::scene::{SceneRecord, TaskSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HypergraphError {
    #[error("invalid clustering parameters: {0}")]
    InvalidParams(String),
}

/// DBSCAN parameters: neighborhood radius in pixels and the core-point
/// threshold (neighbor count including the point itself).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    pub epsilon: f64,
    pub min_pts: usize,
}

impl ClusteringParams {
    pub fn new(epsilon: f64, min_pts: usize) -> Result<Self, HypergraphError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(HypergraphError::InvalidParams(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if min_pts < 1 {
            return Err(HypergraphError::InvalidParams(
                "min_pts must be at least 1".into(),
            ));
        }
        Ok(Self { epsilon, min_pts })
    }
}

/// How the neighborhood radius is chosen when building a hypergraph.
///
/// `Relative(s)` resolves to `s * max(image_width, image_height)` per
/// image; the default scale is 0.12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsilonSpec {
    Absolute(f64),
    Relative(f64),
}

/// Clustering settings for [`build_hypergraph`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSettings {
    pub epsilon: EpsilonSpec,
    pub min_pts: usize,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        Self {
            epsilon: EpsilonSpec::Relative(0.12),
            min_pts: 2,
        }
    }
}

impl ClusteringSettings {
    fn params_for_image(&self, width: u32, height: u32) -> Result<ClusteringParams, HypergraphError> {
        let epsilon = match self.epsilon {
            EpsilonSpec::Absolute(e) => e,
            EpsilonSpec::Relative(s) => s * f64::from(width.max(height)),
        };
        ClusteringParams::new(epsilon, self.min_pts)
    }
}

/// One node of the hypergraph: the object identity without geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperNode {
    pub id: usize,
    pub category: String,
    pub attributes: String,
}

/// One hyperedge: a sorted, duplicate-free member list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperedge {
    pub id: usize,
    pub members: Vec<usize>,
}

/// A spatial hypergraph over one scene's detected objects.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneHypergraph {
    pub scene_id: String,
    pub nodes: Vec<HyperNode>,
    pub hyperedges: Vec<Hyperedge>,
    /// Node id -> hyperedge ids, sorted. DBSCAN yields single membership
    /// but the data model allows more.
    pub assignment: BTreeMap<usize, Vec<usize>>,
    /// Task carried along from the scene so downstream prompt assembly can
    /// reach it without re-reading the detection file.
    pub task: Option<TaskSpec>,
}

impl SceneHypergraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.hyperedges.len()
    }
}

/// DBSCAN over 2D points with Euclidean distance.
///
/// A point is a core point when at least `min_pts` points (itself
/// included) lie within distance `epsilon`. Clusters are the connected
/// components of core points under the epsilon-neighborhood relation,
/// plus border points attached to the cluster discovered first in scan
/// order. Returns `(clusters, noise)`; each cluster is a sorted index
/// list, clusters appear in discovery order, and the noise list is sorted.
pub fn cluster_positions(
    points: &[(f64, f64)],
    params: &ClusteringParams,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = points.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let eps2 = params.epsilon * params.epsilon;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist2(points[i], points[j]) <= eps2)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= params.min_pts).collect();

    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if !core[start] || label[start].is_some() {
            continue;
        }
        let cluster_id = clusters.len();
        clusters.push(Vec::new());
        label[start] = Some(cluster_id);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(point) = queue.pop_front() {
            clusters[cluster_id].push(point);
            for &next in &neighbors[point] {
                if label[next].is_none() {
                    label[next] = Some(cluster_id);
                    if core[next] {
                        queue.push_back(next);
                    } else {
                        clusters[cluster_id].push(next);
                    }
                }
            }
        }
    }
    for cluster in &mut clusters {
        cluster.sort_unstable();
    }
    let noise = (0..n).filter(|&i| label[i].is_none()).collect();
    (clusters, noise)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Build the scene hypergraph: per-image DBSCAN, clusters pooled across
/// images, noise points kept as singleton hyperedges.
pub fn build_hypergraph(
    scene: &SceneRecord,
    settings: &ClusteringSettings,
) -> Result<SceneHypergraph, HypergraphError> {
    let nodes: Vec<HyperNode> = scene
        .objects
        .iter()
        .map(|o| HyperNode {
            id: o.id,
            category: o.category.clone(),
            attributes: o.attributes.clone(),
        })
        .collect();

    let mut hyperedges: Vec<Hyperedge> = Vec::new();
    for image in &scene.images {
        let indices: Vec<usize> = scene
            .objects
            .iter()
            .filter(|o| o.image_id == image.id)
            .map(|o| o.id)
            .collect();
        if indices.is_empty() {
            continue;
        }
        let params = settings.params_for_image(image.width, image.height)?;
        let points: Vec<(f64, f64)> = indices.iter().map(|&i| scene.objects[i].position).collect();
        let (clusters, noise) = cluster_positions(&points, &params);
        for cluster in clusters {
            let members: Vec<usize> = cluster.into_iter().map(|local| indices[local]).collect();
            hyperedges.push(Hyperedge {
                id: hyperedges.len(),
                members,
            });
        }
        for local in noise {
            hyperedges.push(Hyperedge {
                id: hyperedges.len(),
                members: vec![indices[local]],
            });
        }
    }

    let mut assignment: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for edge in &hyperedges {
        for &member in &edge.members {
            assignment.entry(member).or_default().push(edge.id);
        }
    }

    Ok(SceneHypergraph {
        scene_id: scene.scene_id.clone(),
        nodes,
        hyperedges,
        assignment,
        task: scene.task.clone(),
    })
}

/// The binary incidence matrix: `N x K`, entry `(i, k)` is 1 iff node `i`
/// belongs to hyperedge `k`. Derived, never mutated in place.
pub fn incidence_of(graph: &SceneHypergraph) -> ndarray::Array2<u8> {
    let mut matrix = ndarray::Array2::zeros((graph.node_count(), graph.edge_count()));
    for edge in &graph.hyperedges {
        for &member in &edge.members {
            matrix[(member, edge.id)] = 1;
        }
    }
    matrix
}
