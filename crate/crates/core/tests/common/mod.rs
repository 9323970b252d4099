//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is recomputed from the stored primitive fields with
//! nalgebra's quaternion rotation, an explicit matrix inverse and plain
//! (non-log-space) products, without touching the library's cached
//! whitening matrices, spatial index or aggregation helpers.

#![allow(dead_code)]

use nalgebra::{Matrix3, Quaternion as NQuat, UnitQuaternion};
use splatvox::aggregate::{SemanticProbGrid, VoxelGridSpec};
use splatvox::gaussian::{GaussianPrimitive, Point3, Scene};

pub struct Oracle {
    mean: Point3,
    inv_cov: Matrix3<f64>,
    norm: f64,
    opacity: f64,
    semantics: Vec<f64>,
}

impl Oracle {
    pub fn new(g: &GaussianPrimitive) -> Self {
        let q = g.rotation();
        let r =
            UnitQuaternion::from_quaternion(NQuat::new(q.w, q.x, q.y, q.z)).to_rotation_matrix();
        let s2 = Matrix3::from_diagonal(&g.scale().map(|s| s * s));
        let cov = r.matrix() * s2 * r.matrix().transpose();
        let inv_cov = cov.try_inverse().expect("positive definite");
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).powf(1.5) * cov.determinant().sqrt());
        let logits = g.semantic_logits();
        let exps: Vec<f64> = logits.iter().map(|l| l.exp()).collect();
        let total: f64 = exps.iter().sum();
        Self {
            mean: *g.mean(),
            inv_cov,
            norm,
            opacity: g.opacity(),
            semantics: exps.iter().map(|e| e / total).collect(),
        }
    }

    pub fn maha(&self, x: &Point3) -> f64 {
        let d = x - self.mean;
        (d.transpose() * self.inv_cov * d)[(0, 0)]
    }

    pub fn kernel(&self, x: &Point3) -> f64 {
        (-0.5 * self.maha(x)).exp()
    }

    pub fn pdf(&self, x: &Point3) -> f64 {
        self.norm * self.kernel(x)
    }
}

pub fn oracles(scene: &Scene) -> Vec<Oracle> {
    scene.primitives().iter().map(Oracle::new).collect()
}

/// How the brute-force oracle selects contributing primitives.
#[derive(Clone, Copy, PartialEq)]
pub enum Support {
    /// Every primitive within `kappa` standard deviations (Mahalanobis).
    Truncated(f64),
    /// Every primitive, no cut-off.
    Full,
}

/// Fused per-voxel distribution by exhaustive scan.
pub fn brute_force_voxel(
    os: &[Oracle],
    x: &Point3,
    c: usize,
    dga: bool,
    support: Support,
) -> Vec<f64> {
    let ids: Vec<usize> = (0..os.len())
        .filter(|&i| match support {
            Support::Full => true,
            Support::Truncated(k) => os[i].maha(x) <= k * k * (1.0 + 1e-12),
        })
        .collect();
    let mut keep = 1.0;
    for &i in &ids {
        let a = os[i].kernel(x);
        keep *= 1.0 - if dga { a * os[i].opacity } else { a };
    }
    let alpha = 1.0 - keep;
    let mut num = vec![0.0; c - 1];
    let mut den = 0.0;
    for &i in &ids {
        let w = os[i].pdf(x) * if dga { 1.0 } else { os[i].opacity };
        den += w;
        for (n, s) in num.iter_mut().zip(&os[i].semantics) {
            *n += w * s;
        }
    }
    let sem: Vec<f64> = if den < 1e-30 {
        vec![1.0 / (c - 1) as f64; c - 1]
    } else {
        num.iter().map(|n| n / den).collect()
    };
    let mut out = Vec::with_capacity(c);
    out.push(1.0 - alpha);
    out.extend(sem.iter().map(|s| alpha * s));
    out
}

pub fn brute_force_splat(
    scene: &Scene,
    spec: &VoxelGridSpec,
    dga: bool,
    support: Support,
) -> Vec<f64> {
    let os = oracles(scene);
    let c = scene.num_classes();
    let mut out = Vec::with_capacity(spec.voxel_count() * c);
    for ix in 0..spec.dims[0] {
        for iy in 0..spec.dims[1] {
            for iz in 0..spec.dims[2] {
                out.extend(brute_force_voxel(
                    &os,
                    &spec.voxel_center(ix, iy, iz),
                    c,
                    dga,
                    support,
                ));
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn grid_max_diff(grid: &SemanticProbGrid, reference: &[f64]) -> f64 {
    max_abs_diff(grid.as_slice(), reference)
}
