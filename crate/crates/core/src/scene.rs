//! Detection-file ingestion.
//!
//! Parses per-scene detection records (JSON) into validated
//! [`SceneRecord`]s. The file schema is part of the contract:
//!
//! ```json
//! {
//!   "scene_id": "kitchen_small",
//!   "images": [{"id": "img0", "width": 640, "height": 480}],
//!   "objects": [
//!     {"id": 0, "image_id": "img0", "bbox": [40.0, 60.0, 80.0, 80.0],
//!      "category": "stove", "attributes": "stainless steel"}
//!   ],
//!   "task": {"goal": "...", "guidance": ["..."]}
//! }
//! ```
//!
//! Object positions are bounding-box centers in pixel coordinates. Ids are
//! renumbered to `0..N-1` in file order after validation; duplicate
//! detections (same category, IoU > 0.9 within one image) are merged,
//! keeping the larger box.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

/// Errors raised while loading or validating a detection file.
#[derive(Debug, Error)]
pub enum SceneError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("validation error: {message}")]
    Validation {
        object_id: Option<u64>,
        field: &'static str,
        message: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
}

fn validation(object_id: Option<u64>, field: &'static str, message: String) -> SceneError {
    SceneError::Validation {
        object_id,
        field,
        message,
    }
}

/// Task description attached to a scene: the goal text plus optional
/// step-level guidance strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub goal: String,
    #[serde(default)]
    pub guidance: Vec<String>,
}

/// One declared source image of a scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneImage {
    pub id: String,
    pub width: u32,
    pub height: u32,
}

/// One detected object: position is the bbox center in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectInstance {
    /// Scene-unique id, contiguous from 0 in file order.
    pub id: usize,
    /// Bbox center (x, y) in pixel coordinates.
    pub position: (f64, f64),
    /// Bounding box as (x, y, width, height) in pixels.
    pub bbox: [f64; 4],
    /// Category label; never empty.
    pub category: String,
    /// Free-text attribute description; may be empty.
    pub attributes: String,
    /// Id of the source image this detection came from.
    pub image_id: String,
}

/// A validated detection record for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRecord {
    pub scene_id: String,
    pub images: Vec<SceneImage>,
    pub objects: Vec<ObjectInstance>,
    pub task: Option<TaskSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawScene {
    scene_id: String,
    #[serde(default)]
    images: Vec<SceneImage>,
    #[serde(default)]
    objects: Vec<RawObject>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<TaskSpec>,
}

#[derive(Serialize, Deserialize)]
struct RawObject {
    id: u64,
    image_id: String,
    bbox: [f64; 4],
    category: String,
    #[serde(default)]
    attributes: String,
}

/// Center of a bounding box `(x, y, width, height)`.
///
/// Fails with a domain error when the extent is not strictly positive.
pub fn bbox_center(bbox: &[f64; 4]) -> Result<(f64, f64), SceneError> {
    let [x, y, w, h] = *bbox;
    if !(w > 0.0 && h > 0.0) {
        return Err(SceneError::Domain(format!(
            "bbox extent must be positive, got width {w} height {h}"
        )));
    }
    Ok((x + w / 2.0, y + h / 2.0))
}

/// Load and validate a detection file.
///
/// Pure in the file bytes: identical bytes always produce an identical
/// [`SceneRecord`].
pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneRecord, SceneError> {
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text)
}

/// Parse a detection document from its raw text.
pub fn parse_scene(text: &str) -> Result<SceneRecord, SceneError> {
    let raw: RawScene = serde_json::from_str(text).map_err(|err| SceneError::Parse {
        offset: byte_offset(text, err.line(), err.column()),
        message: err.to_string(),
    })?;
    validate(raw)
}

/// Byte offset of a 1-based (line, column) location inside `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (idx, l) in text.split('\n').enumerate() {
        if idx + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len() + 1;
    }
    text.len()
}

fn validate(raw: RawScene) -> Result<SceneRecord, SceneError> {
    let mut image_ids = BTreeSet::new();
    for img in &raw.images {
        if img.width == 0 || img.height == 0 {
            return Err(validation(
                None,
                "images",
                format!("image {} has non-positive extent", img.id),
            ));
        }
        if !image_ids.insert(img.id.clone()) {
            return Err(validation(
                None,
                "images",
                format!("duplicate image id {}", img.id),
            ));
        }
    }

    let mut seen_ids = BTreeSet::new();
    for obj in &raw.objects {
        if !seen_ids.insert(obj.id) {
            return Err(validation(Some(obj.id), "id", format!("duplicate id {}", obj.id)));
        }
    }

    let mut kept: Vec<RawObject> = Vec::with_capacity(raw.objects.len());
    for obj in raw.objects {
        let image = raw
            .images
            .iter()
            .find(|img| img.id == obj.image_id)
            .ok_or_else(|| {
                validation(
                    Some(obj.id),
                    "image_id",
                    format!("object {} references undeclared image {}", obj.id, obj.image_id),
                )
            })?;
        let [_, _, w, h] = obj.bbox;
        if !(w > 0.0 && h > 0.0) || !obj.bbox.iter().all(|v| v.is_finite()) {
            return Err(validation(
                Some(obj.id),
                "bbox",
                format!("object {} bbox extent must be positive and finite", obj.id),
            ));
        }
        let (cx, cy) = bbox_center(&obj.bbox).expect("extent checked above");
        if !(0.0..=image.width as f64).contains(&cx) || !(0.0..=image.height as f64).contains(&cy)
        {
            return Err(validation(
                Some(obj.id),
                "bbox",
                format!(
                    "object {} center ({cx}, {cy}) lies outside image {} extent {}x{}",
                    obj.id, image.id, image.width, image.height
                ),
            ));
        }
        if obj.category.is_empty() {
            return Err(validation(
                Some(obj.id),
                "category",
                format!("object {} has an empty category", obj.id),
            ));
        }
        kept.push(obj);
    }

    merge_duplicates(&mut kept);

    let objects = kept
        .into_iter()
        .enumerate()
        .map(|(idx, obj)| ObjectInstance {
            id: idx,
            position: bbox_center(&obj.bbox).expect("validated"),
            bbox: obj.bbox,
            category: obj.category,
            attributes: obj.attributes,
            image_id: obj.image_id,
        })
        .collect();

    Ok(SceneRecord {
        scene_id: raw.scene_id,
        images: raw.images,
        objects,
        task: raw.task,
    })
}

/// Merge duplicate detections to a fixpoint: within one image, an object
/// whose IoU with an earlier kept object of the same category exceeds 0.9
/// is folded into it, the larger box winning. Fixpoint iteration keeps the
/// result stable under re-parsing.
fn merge_duplicates(objects: &mut Vec<RawObject>) {
    loop {
        let mut merged_any = false;
        let mut idx = 1;
        while idx < objects.len() {
            let mut target = None;
            for earlier in 0..idx {
                if objects[earlier].image_id == objects[idx].image_id
                    && objects[earlier].category == objects[idx].category
                    && iou(&objects[earlier].bbox, &objects[idx].bbox) > 0.9
                {
                    target = Some(earlier);
                    break;
                }
            }
            if let Some(earlier) = target {
                if bbox_area(&objects[idx].bbox) > bbox_area(&objects[earlier].bbox) {
                    objects[earlier].bbox = objects[idx].bbox;
                }
                objects.remove(idx);
                merged_any = true;
            } else {
                idx += 1;
            }
        }
        if !merged_any {
            return;
        }
    }
}

fn bbox_area(bbox: &[f64; 4]) -> f64 {
    bbox[2] * bbox[3]
}

fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let x1 = a[0].max(b[0]);
    let y1 = a[1].max(b[1]);
    let x2 = (a[0] + a[2]).min(b[0] + b[2]);
    let y2 = (a[1] + a[3]).min(b[1] + b[3]);
    let inter = (x2 - x1).max(0.0) * (y2 - y1).max(0.0);
    let union = bbox_area(a) + bbox_area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

impl SceneRecord {
    /// Serialize back to the detection-file JSON schema. Parsing the output
    /// again yields an equal record.
    pub fn to_json(&self) -> String {
        let raw = RawScene {
            scene_id: self.scene_id.clone(),
            images: self.images.clone(),
            objects: self
                .objects
                .iter()
                .map(|o| RawObject {
                    id: o.id as u64,
                    image_id: o.image_id.clone(),
                    bbox: o.bbox,
                    category: o.category.clone(),
                    attributes: o.attributes.clone(),
                })
                .collect(),
            task: self.task.clone(),
        };
        let mut out = serde_json::to_string_pretty(&raw).expect("scene serialization");
        out.push('\n');
        out
    }
}
