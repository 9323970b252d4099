//! Seeded synthetic scenes.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregate::{LabelGrid, VoxelGridSpec};
use crate::error::{invalid, Result};
use crate::gaussian::{GaussianPrimitive, Point3, Quaternion, Scene};

/// Class used for the cluster in [`SceneKind::ClusterPlusOutlier`].
pub const CLUSTER_CLASS: usize = 1;
/// Class carried by the isolated outlier.
pub const OUTLIER_CLASS: usize = 2;
/// Room classes follow the Occ-ScanNet label order (1 ceiling, 2 floor, 3 wall).
pub const FLOOR_CLASS: usize = 2;
pub const WALL_CLASS: usize = 3;

const DOMINANT_LOGIT: f64 = 10.0;
const CLUSTER_RADIUS: f64 = 0.2;
const CLUSTER_SCALE: (f64, f64) = (0.03, 0.08);
const OUTLIER_SCALE: f64 = 0.05;
/// Outlier distance from the cluster centroid, in units of the largest scale.
pub const OUTLIER_SEPARATION: f64 = 25.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SceneKind {
    /// `count` primitives uniform in the grid box, random orientation.
    Random {
        count: usize,
        spec: VoxelGridSpec,
        scale_range: (f64, f64),
    },
    /// A tight high-opacity cluster and one distant primitive of another class.
    ClusterPlusOutlier {
        cluster_size: usize,
        outlier_opacity: f64,
        center: Point3,
    },
    /// Thin primitives tiling the floor and two walls of the grid box.
    PlanarRoom { spec: VoxelGridSpec },
}

impl SceneKind {
    /// Parses a kind name with default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "random" => Ok(Self::Random {
                count: 200,
                spec: VoxelGridSpec::default(),
                scale_range: (0.01, 0.16),
            }),
            "cluster_plus_outlier" => Ok(Self::ClusterPlusOutlier {
                cluster_size: 50,
                outlier_opacity: 0.01,
                center: default_cluster_center(),
            }),
            "planar_room" => Ok(Self::PlanarRoom {
                spec: VoxelGridSpec::default(),
            }),
            other => Err(invalid(format!(
                "unknown scene kind {other:?}, expected random, cluster_plus_outlier or planar_room"
            ))),
        }
    }
}

pub fn default_cluster_center() -> Point3 {
    Point3::new(1.2, 2.4, 1.44)
}

pub fn generate_scene(kind: &SceneKind, num_classes: usize, seed: u64) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *kind {
        SceneKind::Random {
            count,
            spec,
            scale_range,
        } => random(&mut rng, count, &spec, scale_range, num_classes),
        SceneKind::ClusterPlusOutlier {
            cluster_size,
            outlier_opacity,
            center,
        } => cluster_plus_outlier(&mut rng, cluster_size, outlier_opacity, center, num_classes),
        SceneKind::PlanarRoom { spec } => planar_room(&spec, num_classes),
    }
}

pub(crate) fn random_unit_quaternion(rng: &mut impl Rng) -> Quaternion {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if (1e-4..=1.0).contains(&n2) {
            let n = n2.sqrt();
            return Quaternion::from_array(v.map(|c| c / n));
        }
    }
}

fn one_hot_logits(num_classes: usize, class: usize) -> Vec<f64> {
    let mut l = vec![0.0; num_classes - 1];
    l[class - 1] = DOMINANT_LOGIT;
    l
}

fn random(
    rng: &mut ChaCha8Rng,
    count: usize,
    spec: &VoxelGridSpec,
    (lo, hi): (f64, f64),
    num_classes: usize,
) -> Result<Scene> {
    spec.validate()?;
    if !(lo > 0.0 && lo <= hi) {
        return Err(invalid(format!(
            "scale range must satisfy 0 < min ≤ max, got ({lo}, {hi})"
        )));
    }
    if num_classes < 2 {
        return Err(invalid("need at least 2 classes"));
    }
    let extent = spec.extent();
    let mut prims = Vec::with_capacity(count);
    for _ in 0..count {
        let mean = spec.origin + Point3::from_fn(|k, _| rng.random_range(0.0..extent[k]));
        let scale = Vector3::from_fn(|_, _| rng.random_range(lo..=hi));
        let rotation = random_unit_quaternion(rng);
        let opacity = rng.random_range(0.05..=1.0);
        let logits = (0..num_classes - 1)
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        prims.push(GaussianPrimitive::new(
            mean, scale, rotation, opacity, logits,
        )?);
    }
    Scene::new(num_classes, prims)
}

fn cluster_plus_outlier(
    rng: &mut ChaCha8Rng,
    cluster_size: usize,
    outlier_opacity: f64,
    center: Point3,
    num_classes: usize,
) -> Result<Scene> {
    if cluster_size == 0 {
        return Err(invalid("cluster needs at least one primitive"));
    }
    if num_classes <= OUTLIER_CLASS {
        return Err(invalid(format!(
            "cluster_plus_outlier needs at least {} classes",
            OUTLIER_CLASS + 1
        )));
    }
    let mut prims = Vec::with_capacity(cluster_size + 1);
    for _ in 0..cluster_size {
        let offset = loop {
            let v = Vector3::from_fn(|_, _| rng.random_range(-CLUSTER_RADIUS..CLUSTER_RADIUS));
            if v.norm() <= CLUSTER_RADIUS {
                break v;
            }
        };
        let scale = Vector3::from_fn(|_, _| rng.random_range(CLUSTER_SCALE.0..=CLUSTER_SCALE.1));
        prims.push(GaussianPrimitive::new(
            center + offset,
            scale,
            random_unit_quaternion(rng),
            rng.random_range(0.8..=1.0),
            one_hot_logits(num_classes, CLUSTER_CLASS),
        )?);
    }
    let centroid = prims.iter().map(|g| g.mean()).sum::<Point3>() / cluster_size as f64;
    let max_scale = prims
        .iter()
        .map(GaussianPrimitive::max_scale)
        .fold(OUTLIER_SCALE, f64::max);
    let outlier_mean = centroid + Vector3::new(OUTLIER_SEPARATION * max_scale, 0.0, 0.0);
    prims.push(GaussianPrimitive::new(
        outlier_mean,
        Vector3::repeat(OUTLIER_SCALE),
        Quaternion::IDENTITY,
        outlier_opacity,
        one_hot_logits(num_classes, OUTLIER_CLASS),
    )?);
    Scene::new(num_classes, prims)
}

const ROOM_SPACING_VOXELS: f64 = 2.0;
const ROOM_THICKNESS: f64 = 0.25;
const ROOM_OPACITY: f64 = 0.95;

fn planar_room(spec: &VoxelGridSpec, num_classes: usize) -> Result<Scene> {
    spec.validate()?;
    if num_classes <= WALL_CLASS {
        return Err(invalid(format!(
            "planar_room needs at least {} classes",
            WALL_CLASS + 1
        )));
    }
    let vs = spec.voxel_size;
    let step = ROOM_SPACING_VOXELS * vs;
    let (lo, hi) = (spec.origin, spec.max_corner());
    let along = |a: f64, b: f64| {
        let n = ((b - a) / step).round().max(1.0) as usize;
        (0..n).map(move |i| a + (i as f64 + 0.5) * (b - a) / n as f64)
    };
    let tangent = step * 0.6;
    let normal = vs * ROOM_THICKNESS;

    let mut prims = Vec::new();
    let mut push = |mean: Point3, scale: Vector3<f64>, class: usize| -> Result<()> {
        prims.push(GaussianPrimitive::new(
            mean,
            scale,
            Quaternion::IDENTITY,
            ROOM_OPACITY,
            one_hot_logits(num_classes, class),
        )?);
        Ok(())
    };
    // Floor in the bottom voxel layer.
    for x in along(lo.x, hi.x) {
        for y in along(lo.y, hi.y) {
            push(
                Point3::new(x, y, lo.z + 0.5 * vs),
                Vector3::new(tangent, tangent, normal),
                FLOOR_CLASS,
            )?;
        }
    }
    // Wall in the first x layer and wall in the last y layer.
    for y in along(lo.y, hi.y) {
        for z in along(lo.z, hi.z) {
            push(
                Point3::new(lo.x + 0.5 * vs, y, z),
                Vector3::new(normal, tangent, tangent),
                WALL_CLASS,
            )?;
        }
    }
    for x in along(lo.x, hi.x) {
        for z in along(lo.z, hi.z) {
            push(
                Point3::new(x, hi.y - 0.5 * vs, z),
                Vector3::new(tangent, normal, tangent),
                WALL_CLASS,
            )?;
        }
    }
    Scene::new(num_classes, prims)
}

/// Ground-truth labels of [`SceneKind::PlanarRoom`]: walls win over floor
/// where they meet.
pub fn planar_room_labels(spec: &VoxelGridSpec, num_classes: usize) -> Result<LabelGrid> {
    let [nx, ny, nz] = spec.dims;
    let mut labels = vec![0u8; spec.voxel_count()];
    for ix in 0..nx {
        for iy in 0..ny {
            for iz in 0..nz {
                let l = if ix == 0 || iy == ny - 1 {
                    WALL_CLASS
                } else if iz == 0 {
                    FLOOR_CLASS
                } else {
                    0
                };
                labels[spec.linear_index(ix, iy, iz)] = l as u8;
            }
        }
    }
    LabelGrid::new(spec.dims, num_classes, labels)
}
