//! Scene-to-hypergraph toolkit.
//!
//! Converts per-scene object detection records into a spatial hypergraph,
//! enriches it with area-level labels and counterfactual attribute scores,
//! trains node/hyperedge embeddings with a tri-view contrastive objective,
//! exports the result as structured knowledge for prompt assembly, and
//! scores generated action plans against a small symbolic environment.
//!
//! Pipeline: [`scene::load_scene`] -> [`hypergraph::build_hypergraph`] ->
//! [`enrich::enrich`] -> [`triview::train`] / [`export::export_xml`].
//! Plan scoring lives in [`plan`].

pub mod enrich;
pub mod export;
pub mod graph_io;
pub mod hypergraph;
pub mod plan;
pub mod scene;
pub mod template;
pub mod triview;

pub use enrich::{enrich, Annotator, EnrichedHypergraph, Provenance};
pub use hypergraph::{build_hypergraph, cluster_positions, ClusteringParams, SceneHypergraph};
pub use scene::{load_scene, ObjectInstance, SceneRecord, TaskSpec};
pub use triview::{train, TriViewConfig};
