//! Tri-view contrastive hypergraph encoder.
//!
//! Two randomly masked views of an enriched hypergraph are embedded with
//! a frozen deterministic text embedder, projected through trainable MLP
//! heads, and pulled together by three InfoNCE objectives: node-level,
//! area-level, and node-area membership contrast (the latter scored by a
//! bilinear discriminator). Training runs full-batch with Adam and exact
//! reverse-mode gradients; see [`train`] and [`grad_check`].

mod embed;
mod gradcheck;
mod loss;
mod model;
mod train_loop;

pub use embed::{embed_texts, HashEmbedder, TextEmbedder};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{
    area_loss, cosine, membership_loss, membership_loss_per_view, node_loss, total_loss,
    BatchInputs, LossParts,
};
pub use model::{load_params, save_params, MlpHead, ModelParams, ParamsHeader};
pub use train_loop::{
    cross_view_retrieval_accuracy, train, TraceRow, TrainError, TrainOutcome,
};

use crate::enrich::EnrichedHypergraph;
use crate::hypergraph::incidence_of;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Adam settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_stability: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_stability: 1e-8,
        }
    }
}

/// Encoder and training configuration.
///
/// [`TriViewConfig::desk`] (the default) uses small dimensions and a fast
/// learning rate so tests run in seconds; [`TriViewConfig::paper`] uses
/// 512-dimensional embeddings and a 2e-5 learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TriViewConfig {
    pub tau_n: f64,
    pub tau_g: f64,
    pub tau_m: f64,
    pub alpha_g: f64,
    pub alpha_m: f64,
    pub mask_prob_text: f64,
    pub mask_prob_incidence: f64,
    pub d: usize,
    pub d_p: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub steps: usize,
    /// Normalize the membership loss by the number of membership pairs
    /// instead of by 2K.
    pub normalize_by_memberships: bool,
}

impl Default for TriViewConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TriViewConfig {
    /// Desk-scale profile: d = d_p = 32, lr = 1e-3.
    pub fn desk() -> Self {
        Self {
            tau_n: 0.07,
            tau_g: 0.07,
            tau_m: 0.07,
            alpha_g: 1.0,
            alpha_m: 1.0,
            mask_prob_text: 0.2,
            mask_prob_incidence: 0.2,
            d: 32,
            d_p: 32,
            seed: 42,
            optimizer: OptimizerConfig::default(),
            steps: 200,
            normalize_by_memberships: false,
        }
    }

    /// Full-scale profile: d = d_p = 512, lr = 2e-5.
    pub fn paper() -> Self {
        Self {
            d: 512,
            d_p: 512,
            optimizer: OptimizerConfig {
                learning_rate: 2e-5,
                ..OptimizerConfig::default()
            },
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau_n > 0.0 && self.tau_g > 0.0 && self.tau_m > 0.0) {
            return Err("temperatures must be positive".to_string());
        }
        if !(0.0..=1.0).contains(&self.mask_prob_text)
            || !(0.0..=1.0).contains(&self.mask_prob_incidence)
        {
            return Err("mask probabilities must lie in [0, 1]".to_string());
        }
        if self.d == 0 || self.d_p == 0 {
            return Err("dimensions must be positive".to_string());
        }
        if self.alpha_g < 0.0 || self.alpha_m < 0.0 {
            return Err("loss weights must be non-negative".to_string());
        }
        Ok(())
    }
}

/// One masked view of a hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    /// 1 or 2.
    pub view_index: u8,
    pub node_texts: Vec<String>,
    pub edge_texts: Vec<String>,
    /// Masked incidence matrix; elementwise `mask_matrix * H`.
    pub incidence: Array2<u8>,
    pub mask_matrix: Array2<u8>,
}

/// Text embeddings of one view's node and hyperedge texts.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewEmbeddings {
    pub node_embed: Array2<f64>,
    pub edge_embed: Array2<f64>,
}

/// Projections of one view into the contrastive space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedViews {
    pub node_proj: Array2<f64>,
    pub edge_proj: Array2<f64>,
}

/// Draw two independently masked views of the graph.
///
/// Text masking replaces each whitespace-delimited token with `[MASK]`
/// independently with probability `mask_prob_text`; incidence masking
/// zeroes 1-entries independently with probability `mask_prob_incidence`,
/// except entries whose removal would empty a row or column. The first
/// view consumes the RNG before the second, so a fixed seed reproduces
/// both views bit-exactly.
pub fn make_views(
    graph: &EnrichedHypergraph,
    config: &TriViewConfig,
    rng: &mut impl Rng,
) -> (AugmentedView, AugmentedView) {
    let incidence = incidence_of(&graph.base);
    let node_texts: Vec<&str> = graph
        .base
        .nodes
        .iter()
        .map(|n| n.category.as_str())
        .collect();
    let edge_texts: Vec<&str> = graph
        .base
        .hyperedges
        .iter()
        .map(|e| graph.area_labels[&e.id].as_str())
        .collect();
    let view1 = draw_view(1, &node_texts, &edge_texts, &incidence, config, rng);
    let view2 = draw_view(2, &node_texts, &edge_texts, &incidence, config, rng);
    (view1, view2)
}

fn draw_view(
    view_index: u8,
    node_texts: &[&str],
    edge_texts: &[&str],
    incidence: &Array2<u8>,
    config: &TriViewConfig,
    rng: &mut impl Rng,
) -> AugmentedView {
    let node_texts = node_texts
        .iter()
        .map(|t| mask_text(t, config.mask_prob_text, rng))
        .collect();
    let edge_texts = edge_texts
        .iter()
        .map(|t| mask_text(t, config.mask_prob_text, rng))
        .collect();
    let (masked, mask_matrix) = mask_incidence(incidence, config.mask_prob_incidence, rng);
    AugmentedView {
        view_index,
        node_texts,
        edge_texts,
        incidence: masked,
        mask_matrix,
    }
}

/// Replace whitespace-delimited tokens with `[MASK]`, preserving the
/// original whitespace so a zero probability reproduces the input.
fn mask_text(text: &str, prob: f64, rng: &mut impl Rng) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            while matches!(chars.peek(), Some(w) if w.is_whitespace()) {
                out.push(chars.next().expect("peeked"));
            }
        } else {
            let mut token = String::new();
            while matches!(chars.peek(), Some(w) if !w.is_whitespace()) {
                token.push(chars.next().expect("peeked"));
            }
            if rng.random::<f64>() < prob {
                out.push_str("[MASK]");
            } else {
                out.push_str(&token);
            }
        }
    }
    out
}

/// Zero 1-entries of the incidence matrix in row-major order, skipping
/// entries whose removal would zero a row or column. One uniform draw is
/// consumed per 1-entry regardless of the keep decision.
fn mask_incidence(
    incidence: &Array2<u8>,
    prob: f64,
    rng: &mut impl Rng,
) -> (Array2<u8>, Array2<u8>) {
    let mut masked = incidence.clone();
    let mut mask = Array2::ones(incidence.dim());
    let (rows, cols) = incidence.dim();
    let mut row_ones: Vec<usize> = (0..rows)
        .map(|i| incidence.row(i).iter().filter(|&&v| v == 1).count())
        .collect();
    let mut col_ones: Vec<usize> = (0..cols)
        .map(|k| incidence.column(k).iter().filter(|&&v| v == 1).count())
        .collect();
    for i in 0..rows {
        for k in 0..cols {
            if incidence[(i, k)] == 1 {
                let draw = rng.random::<f64>();
                if draw < prob && row_ones[i] > 1 && col_ones[k] > 1 {
                    masked[(i, k)] = 0;
                    mask[(i, k)] = 0;
                    row_ones[i] -= 1;
                    col_ones[k] -= 1;
                }
            }
        }
    }
    (masked, mask)
}

/// Project one view's embeddings through the node and hyperedge heads.
///
/// Panics when the embedding width does not match the heads' input
/// dimension (a contract violation, not a recoverable error).
pub fn project(embeddings: &ViewEmbeddings, params: &ModelParams) -> ProjectedViews {
    ProjectedViews {
        node_proj: params.node_head.forward(&embeddings.node_embed).output,
        edge_proj: params.edge_head.forward(&embeddings.edge_embed).output,
    }
}
