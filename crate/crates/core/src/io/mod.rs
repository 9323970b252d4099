//! File formats and synthetic scene generation.
//!
//! | file | encoding |
//! |------|----------|
//! | scene | JSON text, one primitive per line |
//! | grid, depth map | `SSCG` little-endian binary |
//! | attention weights | JSON text |

pub mod generate;
mod grid_file;
mod scene_file;
mod weights;

pub use grid_file::{GridFile, GridKind, GridPayload, GRID_HEADER_LEN, GRID_MAGIC, GRID_VERSION};
pub use scene_file::{
    parse_scene, read_scene, scene_to_string, write_scene, SCENE_FORMAT, SCENE_VERSION,
};
pub use weights::{
    parse_weights, read_weights, weights_to_string, write_weights, WeightsFile, WEIGHTS_FORMAT,
};

use std::path::Path;

use crate::error::Error;

pub(crate) fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) fn file_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub(crate) fn write_atomically(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, bytes).map_err(file_error(path))?;
    std::fs::rename(&tmp, path).map_err(file_error(path))?;
    Ok(())
}
