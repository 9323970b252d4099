use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{file_error, format_error, write_atomically};
use crate::attention::{FfnWeights, GcaWeights};
use crate::error::Result;

pub const WEIGHTS_FORMAT: &str = "splatvox-gmf-weights";
const WEIGHTS_VERSION: u32 = 1;

/// Attention weights and, optionally, the feed-forward weights that follow.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsFile {
    pub gca: GcaWeights,
    pub ffn: Option<FfnWeights>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    format: String,
    version: u32,
    groups: usize,
    wq: Vec<Vec<f64>>,
    wk: Vec<Vec<f64>>,
    wv: Vec<Vec<f64>>,
    wa: Vec<f64>,
    wo: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ffn: Option<FfnDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FfnDoc {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(name: &str, rows: Vec<Vec<f64>>) -> std::result::Result<Array2<f64>, String> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(format!("{name} has rows of unequal length"));
    }
    Array2::from_shape_vec((r, c), rows.into_iter().flatten().collect())
        .map_err(|e| format!("{name}: {e}"))
}

/// JSON text with matrices as nested row arrays.
pub fn weights_to_string(w: &WeightsFile) -> String {
    let doc = Doc {
        format: WEIGHTS_FORMAT.to_owned(),
        version: WEIGHTS_VERSION,
        groups: w.gca.groups,
        wq: rows(&w.gca.wq),
        wk: rows(&w.gca.wk),
        wv: rows(&w.gca.wv),
        wa: w.gca.wa.to_vec(),
        wo: rows(&w.gca.wo),
        ffn: w.ffn.as_ref().map(|f| FfnDoc {
            w1: rows(&f.w1),
            b1: f.b1.to_vec(),
            w2: rows(&f.w2),
            b2: f.b2.to_vec(),
        }),
    };
    serde_json::to_string(&doc).expect("finite weights")
}

pub fn parse_weights(text: &str, path: &Path) -> Result<WeightsFile> {
    let bad = |reason: String| format_error(path, reason);
    let doc: Doc = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if doc.format != WEIGHTS_FORMAT {
        return Err(bad(format!(
            "format tag {:?}, expected {WEIGHTS_FORMAT:?}",
            doc.format
        )));
    }
    if doc.version != WEIGHTS_VERSION {
        return Err(bad(format!("unsupported version {}", doc.version)));
    }
    let gca = GcaWeights::new(
        matrix("wq", doc.wq).map_err(bad)?,
        matrix("wk", doc.wk).map_err(bad)?,
        matrix("wv", doc.wv).map_err(bad)?,
        Array1::from(doc.wa),
        matrix("wo", doc.wo).map_err(bad)?,
        doc.groups,
    )
    .map_err(|e| bad(e.to_string()))?;
    let ffn = match doc.ffn {
        None => None,
        Some(f) => {
            let w = FfnWeights {
                w1: matrix("w1", f.w1).map_err(bad)?,
                b1: Array1::from(f.b1),
                w2: matrix("w2", f.w2).map_err(bad)?,
                b2: Array1::from(f.b2),
            };
            let probe = Array2::zeros((1, gca.channels()));
            crate::attention::ffn_forward(&probe, &w).map_err(|e| bad(e.to_string()))?;
            Some(w)
        }
    };
    Ok(WeightsFile { gca, ffn })
}

pub fn read_weights(path: &Path) -> Result<WeightsFile> {
    parse_weights(
        &std::fs::read_to_string(path).map_err(file_error(path))?,
        path,
    )
}

pub fn write_weights(path: &Path, w: &WeightsFile) -> Result<()> {
    write_atomically(path, weights_to_string(w).as_bytes())
}
