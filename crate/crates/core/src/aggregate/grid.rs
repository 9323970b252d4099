use crate::error::{invalid, mismatch, Result};
use crate::gaussian::Point3;

/// Geometry of the target voxel grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGridSpec {
    /// Corner of voxel (0, 0, 0), in meters.
    pub origin: Point3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
}

impl Default for VoxelGridSpec {
    /// 60×60×36 voxels of 0.08 m, spanning 4.8 × 4.8 × 2.88 m from the origin.
    fn default() -> Self {
        Self {
            origin: Point3::zeros(),
            voxel_size: 0.08,
            dims: [60, 60, 36],
        }
    }
}

impl VoxelGridSpec {
    pub fn new(origin: Point3, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        let spec = Self {
            origin,
            voxel_size,
            dims,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(invalid(format!(
                "voxel size must be > 0, got {}",
                self.voxel_size
            )));
        }
        if self.dims.contains(&0) {
            return Err(invalid(format!(
                "grid dims must be positive, got {:?}",
                self.dims
            )));
        }
        if self.origin.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid origin must be finite"));
        }
        Ok(())
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Side lengths in meters.
    pub fn extent(&self) -> Point3 {
        Point3::new(
            self.dims[0] as f64 * self.voxel_size,
            self.dims[1] as f64 * self.voxel_size,
            self.dims[2] as f64 * self.voxel_size,
        )
    }

    pub fn max_corner(&self) -> Point3 {
        self.origin + self.extent()
    }

    pub fn center(&self) -> Point3 {
        self.origin + self.extent() * 0.5
    }

    #[inline]
    pub fn voxel_center(&self, ix: usize, iy: usize, iz: usize) -> Point3 {
        self.origin
            + Point3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5) * self.voxel_size
    }

    /// Row-major linear index, z fastest.
    #[inline]
    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.dims[1] + iy) * self.dims[2] + iz
    }

    #[inline]
    pub fn voxel_coords(&self, linear: usize) -> [usize; 3] {
        let iz = linear % self.dims[2];
        let rest = linear / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], iz]
    }

    /// Whether `p` lies inside the grid box grown by `margin` on every side.
    pub fn contains_with_margin(&self, p: &Point3, margin: f64) -> bool {
        let lo = self.origin.add_scalar(-margin);
        let hi = self.max_corner().add_scalar(margin);
        (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
    }

    pub fn clamp(&self, p: &Point3) -> Point3 {
        let hi = self.max_corner();
        Point3::from_fn(|k, _| p[k].clamp(self.origin[k], hi[k]))
    }

    /// Voxel containing `p`, if any.
    pub fn voxel_of(&self, p: &Point3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[k] as f64) {
                return None;
            }
            out[k] = f as usize;
        }
        Some(out)
    }
}

/// Dense scalar field over a voxel grid (occupancy probabilities, masks).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3<T> {
    dims: [usize; 3],
    data: Vec<T>,
}

impl<T: Clone> Grid3<T> {
    pub fn filled(dims: [usize; 3], value: T) -> Self {
        Self {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }
}

impl<T> Grid3<T> {
    pub fn from_vec(dims: [usize; 3], data: Vec<T>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(mismatch(format!(
                "grid {dims:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> &T {
        &self.data[(ix * self.dims[1] + iy) * self.dims[2] + iz]
    }
}

pub type ProbabilityGrid = Grid3<f64>;
pub type Mask = Grid3<bool>;

/// Per-voxel categorical distribution over `C` classes, index 0 = empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticProbGrid {
    dims: [usize; 3],
    num_classes: usize,
    data: Vec<f64>,
}

impl SemanticProbGrid {
    /// Every voxel certainly empty.
    pub fn empty(dims: [usize; 3], num_classes: usize) -> Self {
        let voxels: usize = dims.iter().product();
        let mut data = vec![0.0; voxels * num_classes];
        data.iter_mut().step_by(num_classes).for_each(|v| *v = 1.0);
        Self {
            dims,
            num_classes,
            data,
        }
    }

    /// Wraps a flat `[X][Y][Z][C]` buffer, checking the per-voxel invariants.
    pub fn from_vec(dims: [usize; 3], num_classes: usize, data: Vec<f64>) -> Result<Self> {
        let voxels: usize = dims.iter().product();
        if num_classes < 2 {
            return Err(invalid("need at least 2 classes"));
        }
        if data.len() != voxels * num_classes {
            return Err(mismatch(format!(
                "grid {dims:?} × {num_classes} classes needs {} values, got {}",
                voxels * num_classes,
                data.len()
            )));
        }
        for (v, probs) in data.chunks_exact(num_classes).enumerate() {
            if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(invalid(format!(
                    "voxel {v} has a probability outside [0, 1]"
                )));
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(invalid(format!("voxel {v} probabilities sum to {sum}")));
            }
        }
        Ok(Self {
            dims,
            num_classes,
            data,
        })
    }

    pub(crate) fn from_raw(dims: [usize; 3], num_classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>() * num_classes);
        Self {
            dims,
            num_classes,
            data,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn voxels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.num_classes)
    }

    pub fn probs(&self, ix: usize, iy: usize, iz: usize) -> &[f64] {
        let v = (ix * self.dims[1] + iy) * self.dims[2] + iz;
        &self.data[v * self.num_classes..(v + 1) * self.num_classes]
    }

    /// `1 − p(empty)` per voxel.
    pub fn occupancy(&self) -> ProbabilityGrid {
        let data = self.voxels().map(|p| 1.0 - p[0]).collect();
        Grid3 {
            dims: self.dims,
            data,
        }
    }
}

/// Per-voxel class label in `{0, …, C−1}`, 0 = empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    dims: [usize; 3],
    num_classes: usize,
    labels: Vec<u8>,
}

impl LabelGrid {
    pub fn new(dims: [usize; 3], num_classes: usize, labels: Vec<u8>) -> Result<Self> {
        if !(2..=256).contains(&num_classes) {
            return Err(invalid(format!(
                "label grids support 2..=256 classes, got {num_classes}"
            )));
        }
        let n: usize = dims.iter().product();
        if labels.len() != n {
            return Err(mismatch(format!(
                "grid {dims:?} needs {n} labels, got {}",
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(invalid(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            dims,
            num_classes,
            labels,
        })
    }

    pub fn filled(dims: [usize; 3], num_classes: usize, label: u8) -> Result<Self> {
        Self::new(dims, num_classes, vec![label; dims.iter().product()])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, ix: usize, iy: usize, iz: usize) -> u8 {
        self.labels[(ix * self.dims[1] + iy) * self.dims[2] + iz]
    }

    /// Binary occupancy: every non-empty label counts as occupied.
    pub fn occupied(&self) -> Mask {
        Grid3 {
            dims: self.dims,
            data: self.labels.iter().map(|&l| l != 0).collect(),
        }
    }
}

/// Per-voxel argmax; ties go to the lowest class index.
pub fn argmax_labels(grid: &SemanticProbGrid) -> LabelGrid {
    let labels = grid
        .voxels()
        .map(|p| {
            let mut best = 0;
            for (c, &v) in p.iter().enumerate().skip(1) {
                if v > p[best] {
                    best = c;
                }
            }
            best as u8
        })
        .collect();
    LabelGrid {
        dims: grid.dims,
        num_classes: grid.num_classes,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_spec_matches_scene_volume() {
        let spec = VoxelGridSpec::default();
        let e = spec.extent();
        assert!(
            (e.x - 4.8).abs() < 1e-12 && (e.y - 4.8).abs() < 1e-12 && (e.z - 2.88).abs() < 1e-12
        );
        assert_eq!(spec.voxel_count(), 60 * 60 * 36);
    }

    #[test]
    fn spec_validation() {
        assert!(VoxelGridSpec::new(Point3::zeros(), 0.0, [1, 1, 1]).is_err());
        assert!(VoxelGridSpec::new(Point3::zeros(), 0.1, [1, 0, 1]).is_err());
        assert!(VoxelGridSpec::new(Point3::zeros(), 0.1, [1, 2, 3]).is_ok());
    }

    #[test]
    fn linear_index_round_trip() {
        let spec = VoxelGridSpec {
            dims: [4, 5, 6],
            ..Default::default()
        };
        for v in 0..spec.voxel_count() {
            let [x, y, z] = spec.voxel_coords(v);
            assert_eq!(spec.linear_index(x, y, z), v);
        }
        let c = spec.voxel_center(1, 2, 3);
        assert_eq!(spec.voxel_of(&c), Some([1, 2, 3]));
        assert_eq!(spec.voxel_of(&Point3::new(-0.01, 0.0, 0.0)), None);
    }

    #[test]
    fn argmax_examples() {
        let g =
            SemanticProbGrid::from_vec([2, 1, 1], 3, vec![1.0, 0.0, 0.0, 0.2, 0.4, 0.4]).unwrap();
        assert_eq!(argmax_labels(&g).as_slice(), &[0, 1]);
    }

    #[test]
    fn argmax_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (dims, c) = ([5, 4, 3], 6);
        let mut data = Vec::new();
        for _ in 0..60 {
            let raw: Vec<f64> = (0..c)
                .map(|_| rng.random_range(0..4) as f64)
                .map(|v| v + 1.0)
                .collect();
            let s: f64 = raw.iter().sum();
            data.extend(raw.iter().map(|v| v / s));
        }
        let g = SemanticProbGrid::from_vec(dims, c, data.clone()).unwrap();
        let labels = argmax_labels(&g);
        for (v, probs) in data.chunks(c).enumerate() {
            let max = probs.iter().copied().fold(f64::MIN, f64::max);
            let first = probs.iter().position(|&p| p == max).unwrap();
            assert_eq!(labels.as_slice()[v] as usize, first);
        }
    }

    #[test]
    fn prob_grid_validation() {
        assert!(SemanticProbGrid::from_vec([1, 1, 1], 3, vec![0.5, 0.5, 0.5]).is_err());
        assert!(SemanticProbGrid::from_vec([1, 1, 1], 3, vec![0.5, 0.5]).is_err());
        let e = SemanticProbGrid::empty([2, 2, 2], 4);
        assert!(e.voxels().all(|p| p == [1.0, 0.0, 0.0, 0.0]));
        assert!(LabelGrid::new([1, 1, 1], 3, vec![3]).is_err());
    }
}
