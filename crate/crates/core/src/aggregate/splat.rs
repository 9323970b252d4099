use rayon::prelude::*;

use super::grid::{SemanticProbGrid, VoxelGridSpec};
use super::{dga_occupancy, fuse_into, mixture_semantics_into, pgs_occupancy};
use crate::error::{invalid, mismatch, Result};
use crate::gaussian::Scene;
use crate::spatial::SpatialIndex;

/// Which aggregator to evaluate per voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplatMode {
    Pgs,
    Dga,
}

impl std::str::FromStr for SplatMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgs" => Ok(Self::Pgs),
            "dga" => Ok(Self::Dga),
            other => Err(invalid(format!(
                "unknown splat mode {other:?}, expected pgs or dga"
            ))),
        }
    }
}

impl std::fmt::Display for SplatMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pgs => "pgs",
            Self::Dga => "dga",
        })
    }
}

/// Evaluates the chosen aggregator at every voxel center, on the current
/// rayon pool.
pub fn splat(
    scene: &Scene,
    spec: &VoxelGridSpec,
    mode: SplatMode,
    index: &SpatialIndex,
) -> Result<SemanticProbGrid> {
    spec.validate()?;
    if index.len() != scene.len() {
        return Err(mismatch(format!(
            "spatial index covers {} primitives but the scene has {}",
            index.len(),
            scene.len()
        )));
    }
    let c = scene.num_classes();
    let mut data = vec![0.0; spec.voxel_count() * c];
    // One task per (x, y) column; every voxel is computed independently with
    // a fixed summation order, so the result does not depend on scheduling.
    let column = spec.dims[2] * c;
    data.par_chunks_mut(column).enumerate().for_each_init(
        || (Vec::with_capacity(64), vec![0.0; c - 1]),
        |(ids, sem), (col, out)| {
            let (ix, iy) = (col / spec.dims[1], col % spec.dims[1]);
            for (iz, voxel) in out.chunks_exact_mut(c).enumerate() {
                let x = spec.voxel_center(ix, iy, iz);
                index.neighbors_into(&x, ids);
                let alpha = match mode {
                    SplatMode::Pgs => pgs_occupancy(&x, ids, scene),
                    SplatMode::Dga => dga_occupancy(&x, ids, scene),
                };
                mixture_semantics_into(&x, ids, scene, mode == SplatMode::Pgs, sem);
                fuse_into(alpha, sem, voxel);
            }
        },
    );
    Ok(SemanticProbGrid::from_raw(spec.dims, c, data))
}

/// [`splat`] on a dedicated pool of `threads` workers (0 = rayon's default).
pub fn splat_with_threads(
    scene: &Scene,
    spec: &VoxelGridSpec,
    mode: SplatMode,
    index: &SpatialIndex,
    threads: usize,
) -> Result<SemanticProbGrid> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("cannot build a pool of {threads} threads: {e}")))?;
    pool.install(|| splat(scene, spec, mode, index))
}
