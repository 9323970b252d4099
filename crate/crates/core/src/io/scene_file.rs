use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{file_error, format_error, write_atomically};
use crate::error::Result;
use crate::gaussian::{GaussianPrimitive, Point3, Quaternion, Scene};

pub const SCENE_FORMAT: &str = "splatvox-scene";
pub const SCENE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    num_classes: usize,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    mean: [f64; 3],
    scale: [f64; 3],
    /// `[w, x, y, z]`
    rotation: [f64; 4],
    opacity: f64,
    semantic_logits: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: String,
    version: u32,
    num_classes: usize,
    count: usize,
    primitives: Vec<Record>,
}

/// Serializes a scene as JSON with the header on the first line and one
/// primitive per following line.
pub fn scene_to_string(scene: &Scene) -> String {
    let header = Header {
        format: SCENE_FORMAT.to_owned(),
        version: SCENE_VERSION,
        num_classes: scene.num_classes(),
        count: scene.len(),
    };
    let head = serde_json::to_string(&header).expect("plain struct");
    let mut out = String::with_capacity(64 + 200 * scene.len());
    out.push_str(&head[..head.len() - 1]);
    out.push_str(",\"primitives\":[");
    for (i, g) in scene.primitives().iter().enumerate() {
        let rec = Record {
            mean: (*g.mean()).into(),
            scale: (*g.scale()).into(),
            rotation: g.rotation().to_array(),
            opacity: g.opacity(),
            semantic_logits: g.semantic_logits().to_vec(),
        };
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        out.push_str(&serde_json::to_string(&rec).expect("finite fields"));
    }
    out.push_str("\n]}\n");
    out
}

/// Parses and validates a scene document; `path` only labels errors.
pub fn parse_scene(text: &str, path: &Path) -> Result<Scene> {
    let doc: Document =
        serde_json::from_str(text).map_err(|e| format_error(path, e.to_string()))?;
    let h = &doc;
    let num_classes = doc.num_classes;
    if h.format != SCENE_FORMAT {
        return Err(format_error(
            path,
            format!("format tag {:?}, expected {SCENE_FORMAT:?}", h.format),
        ));
    }
    if h.version != SCENE_VERSION {
        return Err(format_error(
            path,
            format!("unsupported version {}", h.version),
        ));
    }
    if h.count != doc.primitives.len() {
        return Err(format_error(
            path,
            format!(
                "header declares {} primitives, file has {}",
                h.count,
                doc.primitives.len()
            ),
        ));
    }
    let prims = doc
        .primitives
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            GaussianPrimitive::new(
                Point3::from(r.mean),
                Vector3::from(r.scale),
                Quaternion::from_array(r.rotation),
                r.opacity,
                r.semantic_logits,
            )
            .map_err(|e| format_error(path, format!("primitive {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Scene::new(num_classes, prims).map_err(|e| format_error(path, e.to_string()))
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    parse_scene(
        &std::fs::read_to_string(path).map_err(file_error(path))?,
        path,
    )
}

pub fn write_scene(path: &Path, scene: &Scene) -> Result<()> {
    write_atomically(path, scene_to_string(scene).as_bytes())
}
