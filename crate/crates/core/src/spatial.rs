//! Uniform spatial binning of primitives, realizing the local neighborhood
//! `N(x)` used by both aggregators.
//!
//! Each primitive gets an influence sphere of radius `κ · max(s)`. It is
//! inserted into every cell that sphere overlaps, so a query only has to
//! visit the one cell containing `x`. Candidates from that cell are then
//! filtered exactly: `N(x) = { i : (x−μᵢ)ᵀΣᵢ⁻¹(x−μᵢ) ≤ κ² }`, i.e. every
//! primitive whose kernel at `x` is at least `exp(−κ²/2)`.

use std::collections::HashMap;

use nalgebra::Matrix3;

use crate::error::{invalid, Result};
use crate::gaussian::{GaussianPrimitive, Point3};

/// Default cutoff, in standard deviations.
pub const DEFAULT_KAPPA: f64 = 3.0;

/// Cell size used when there is nothing to take a median of.
pub const EMPTY_INDEX_CELL_SIZE: f64 = 0.08;

// A primitive whose sphere spans more cells than this along any axis goes
// into a list scanned by every query instead of being binned.
const MAX_CELLS_PER_AXIS: i64 = 64;

// Relative slack on the κ² test so that rounding in the kernel can never
// drop a primitive sitting exactly on the cutoff.
const CUTOFF_SLACK: f64 = 1e-12;

type CellKey = [i64; 3];

#[derive(Debug, Clone)]
struct Entry {
    mean: Point3,
    whitening: Matrix3<f64>,
}

/// Acceleration structure for `N(x)`. Immutable after [`build_index`].
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    kappa: f64,
    cell_size: f64,
    radii: Vec<f64>,
    entries: Vec<Entry>,
    cells: HashMap<CellKey, Vec<u32>>,
    unbinned: Vec<u32>,
}

/// Bins `set` with influence radius `kappa · max(s_i)` per primitive and a
/// cell size equal to the median influence diameter.
pub fn build_index(set: &[GaussianPrimitive], kappa: f64) -> Result<SpatialIndex> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(invalid(format!(
            "kappa must be finite and > 0, got {kappa}"
        )));
    }
    if set.len() > u32::MAX as usize {
        return Err(invalid("too many primitives for the spatial index"));
    }
    for (i, g) in set.iter().enumerate() {
        if g.mean()
            .iter()
            .chain(g.scale().iter())
            .any(|v| !v.is_finite())
        {
            return Err(invalid(format!(
                "primitive {i} has a non-finite mean or scale"
            )));
        }
    }

    let radii: Vec<f64> = set.iter().map(|g| kappa * g.max_scale()).collect();
    let cell_size = median_diameter(&radii).unwrap_or(EMPTY_INDEX_CELL_SIZE);

    let mut cells: HashMap<CellKey, Vec<u32>> = HashMap::new();
    let mut unbinned = Vec::new();
    for (id, (g, &r)) in set.iter().zip(&radii).enumerate() {
        let id = id as u32;
        let lo = cell_of(&g.mean().add_scalar(-r), cell_size);
        let hi = cell_of(&g.mean().add_scalar(r), cell_size);
        if (0..3).any(|k| hi[k] - lo[k] + 1 > MAX_CELLS_PER_AXIS) {
            unbinned.push(id);
            continue;
        }
        for cx in lo[0]..=hi[0] {
            for cy in lo[1]..=hi[1] {
                for cz in lo[2]..=hi[2] {
                    let key = [cx, cy, cz];
                    if sphere_overlaps_cell(g.mean(), r, key, cell_size) {
                        // Ids are visited in ascending order, so every bucket
                        // stays sorted and duplicate-free.
                        cells.entry(key).or_default().push(id);
                    }
                }
            }
        }
    }

    let entries = set
        .iter()
        .map(|g| Entry {
            mean: *g.mean(),
            whitening: *g.whitening(),
        })
        .collect();

    Ok(SpatialIndex {
        kappa,
        cell_size,
        radii,
        entries,
        cells,
        unbinned,
    })
}

fn median_diameter(radii: &[f64]) -> Option<f64> {
    if radii.is_empty() {
        return None;
    }
    let mut d: Vec<f64> = radii.iter().map(|r| 2.0 * r).collect();
    d.sort_by(f64::total_cmp);
    let n = d.len();
    Some(if n % 2 == 1 {
        d[n / 2]
    } else {
        0.5 * (d[n / 2 - 1] + d[n / 2])
    })
}

#[inline]
fn cell_of(p: &Point3, cell_size: f64) -> CellKey {
    [
        (p.x / cell_size).floor() as i64,
        (p.y / cell_size).floor() as i64,
        (p.z / cell_size).floor() as i64,
    ]
}

fn sphere_overlaps_cell(center: &Point3, r: f64, key: CellKey, cell_size: f64) -> bool {
    let mut d2 = 0.0;
    for k in 0..3 {
        let lo = key[k] as f64 * cell_size;
        let hi = lo + cell_size;
        let c = center[k];
        let d = if c < lo {
            lo - c
        } else if c > hi {
            c - hi
        } else {
            0.0
        };
        d2 += d * d;
    }
    // Conservative: keep cells that touch the sphere up to rounding.
    d2 <= r * r * (1.0 + 1e-9)
}

impl SpatialIndex {
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Kernel value below which a primitive is outside `N(x)`: `exp(−κ²/2)`.
    pub fn kernel_cutoff(&self) -> f64 {
        (-0.5 * self.kappa * self.kappa).exp()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Influence radius of primitive `id`.
    pub fn radius(&self, id: usize) -> f64 {
        self.radii[id]
    }

    /// Number of primitives the index was built over.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ids of the cell bucket containing `x`, before the exact cutoff test.
    pub fn cell_candidates(&self, x: &Point3) -> &[u32] {
        self.cells
            .get(&cell_of(x, self.cell_size))
            .map_or(&[], Vec::as_slice)
    }

    /// `N(x)` in ascending id order.
    pub fn neighbors(&self, x: &Point3) -> Vec<usize> {
        let mut out = Vec::new();
        self.neighbors_into(x, &mut out);
        out
    }

    /// Allocation-free variant of [`Self::neighbors`]; clears `out` first.
    pub fn neighbors_into(&self, x: &Point3, out: &mut Vec<usize>) {
        out.clear();
        if !x.iter().all(|v| v.is_finite()) {
            return;
        }
        let limit = self.kappa * self.kappa * (1.0 + CUTOFF_SLACK);
        let accept = |id: u32| {
            let e = &self.entries[id as usize];
            (e.whitening * (x - e.mean)).norm_squared() <= limit
        };
        out.extend(
            self.cell_candidates(x)
                .iter()
                .copied()
                .filter(|&id| accept(id))
                .map(|id| id as usize),
        );
        if !self.unbinned.is_empty() {
            out.extend(
                self.unbinned
                    .iter()
                    .copied()
                    .filter(|&id| accept(id))
                    .map(|id| id as usize),
            );
            out.sort_unstable();
        }
    }
}
