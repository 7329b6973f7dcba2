//! Structured knowledge export and prompt assembly.
//!
//! The canonical XML form is `scene > area* > object*` with attributes
//! `id`, `label`, `category`, `cf_score`; areas and objects are ordered
//! by id, indentation is two spaces, line endings are LF, and scores are
//! printed with two decimals under round-half-even. Equal graphs always
//! render byte-equal output.

use crate::enrich::EnrichedHypergraph;
use crate::scene::TaskSpec;
use crate::template::{bundled, Template, TemplateError};
use std::collections::BTreeMap;

/// One object as it appears in exported knowledge.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberKnowledge {
    pub node_id: usize,
    pub category: String,
    pub cf_score: f64,
}

/// One labeled area with its member objects.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaKnowledge {
    pub area_id: usize,
    pub label: String,
    pub members: Vec<MemberKnowledge>,
}

/// The exportable knowledge of one enriched hypergraph.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergraphKnowledge {
    pub scene_id: String,
    pub areas: Vec<AreaKnowledge>,
    /// Node ids whose counterfactual score reaches the flag threshold.
    pub flags: Vec<usize>,
    /// Canonical XML rendering.
    pub rendered: String,
}

/// Default counterfactual flag threshold.
pub const DEFAULT_CF_THRESHOLD: f64 = 0.5;

/// Render the canonical XML for an enriched hypergraph.
pub fn export_xml(graph: &EnrichedHypergraph) -> String {
    let scene_id = escape_attr(&graph.base.scene_id);
    if graph.base.hyperedges.is_empty() {
        return format!("<scene id=\"{scene_id}\"/>\n");
    }
    let mut out = String::new();
    out.push_str(&format!("<scene id=\"{scene_id}\">\n"));
    for edge in &graph.base.hyperedges {
        let label = escape_attr(&graph.area_labels[&edge.id]);
        out.push_str(&format!("  <area id=\"{}\" label=\"{label}\">\n", edge.id));
        for &member in &edge.members {
            let node = &graph.base.nodes[member];
            out.push_str(&format!(
                "    <object id=\"{}\" category=\"{}\" cf_score=\"{}\"/>\n",
                node.id,
                escape_attr(&node.category),
                format_score(graph.cf_scores[&node.id]),
            ));
        }
        out.push_str("  </area>\n");
    }
    out.push_str("</scene>\n");
    out
}

/// Assemble the exportable knowledge, flagging nodes at or above the
/// counterfactual threshold.
pub fn knowledge_of(graph: &EnrichedHypergraph, cf_threshold: f64) -> HypergraphKnowledge {
    let areas = graph
        .base
        .hyperedges
        .iter()
        .map(|edge| AreaKnowledge {
            area_id: edge.id,
            label: graph.area_labels[&edge.id].clone(),
            members: edge
                .members
                .iter()
                .map(|&m| MemberKnowledge {
                    node_id: m,
                    category: graph.base.nodes[m].category.clone(),
                    cf_score: graph.cf_scores[&m],
                })
                .collect(),
        })
        .collect();
    let flags = graph
        .base
        .nodes
        .iter()
        .filter(|node| graph.cf_scores[&node.id] >= cf_threshold)
        .map(|node| node.id)
        .collect();
    HypergraphKnowledge {
        scene_id: graph.base.scene_id.clone(),
        areas,
        flags,
        rendered: export_xml(graph),
    }
}

/// Deterministic natural-language paraphrase of the knowledge, used by
/// the `narrative` prompt template.
pub fn narrative_text(knowledge: &HypergraphKnowledge) -> String {
    let mut out = String::new();
    let count = knowledge.areas.len();
    out.push_str(&format!(
        "The scene contains {count} area{}.\n",
        if count == 1 { "" } else { "s" }
    ));
    for area in &knowledge.areas {
        let members = area
            .members
            .iter()
            .map(|m| m.category.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        out.push_str(&format!("- Area {} ({}): {members}.\n", area.area_id, area.label));
    }
    if knowledge.flags.is_empty() {
        out.push_str("No objects are flagged as counterfactual.");
    } else {
        let mut flagged = Vec::new();
        for area in &knowledge.areas {
            for member in &area.members {
                if knowledge.flags.contains(&member.node_id) {
                    flagged.push(format!(
                        "{} ({})",
                        member.category,
                        format_score(member.cf_score)
                    ));
                }
            }
        }
        out.push_str(&format!("Flagged as counterfactual: {}.", flagged.join(", ")));
    }
    out
}

/// A prompt assembled from ordered named sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssembledPrompt {
    pub sections: Vec<(String, String)>,
}

impl AssembledPrompt {
    /// Sections joined by blank lines, with a trailing newline.
    pub fn rendered(&self) -> String {
        let mut out = self
            .sections
            .iter()
            .map(|(_, text)| text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n");
        out.push('\n');
        out
    }

    /// Total prompt length in characters.
    pub fn char_len(&self) -> usize {
        self.rendered().chars().count()
    }
}

/// Substitute task and knowledge into a bundled prompt template.
pub fn assemble_prompt(
    task: &TaskSpec,
    knowledge: &HypergraphKnowledge,
    template_id: &str,
) -> Result<AssembledPrompt, TemplateError> {
    assemble_prompt_with(task, knowledge, &bundled(template_id)?)
}

/// As [`assemble_prompt`] with an explicit template.
pub fn assemble_prompt_with(
    task: &TaskSpec,
    knowledge: &HypergraphKnowledge,
    template: &Template,
) -> Result<AssembledPrompt, TemplateError> {
    let guidance = if task.guidance.is_empty() {
        "(none)".to_string()
    } else {
        task.guidance
            .iter()
            .map(|g| format!("- {g}"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("goal", task.goal.clone());
    values.insert("guidance", guidance);
    values.insert("knowledge", knowledge.rendered.trim_end().to_string());
    values.insert("knowledge_text", narrative_text(knowledge));
    values.insert("scene_id", knowledge.scene_id.clone());
    let sections = template.render(&values)?;
    Ok(AssembledPrompt { sections })
}

fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

/// Two-decimal formatting with ties rounded to the even hundredth.
/// Scores are non-negative by construction.
fn format_score(score: f64) -> String {
    let scaled = score * 100.0;
    let floor = scaled.floor();
    let diff = scaled - floor;
    let mut units = floor as i64;
    if diff > 0.5 || (diff == 0.5 && units % 2 != 0) {
        units += 1;
    }
    format!("{}.{:02}", units / 100, units % 100)
}
