//! Gaussian-to-voxel semantic splatting.
//!
//! A scene is a set of anisotropic 3D Gaussians, each carrying an opacity
//! and class logits. [`aggregate::splat`] evaluates them at voxel centers
//! and produces per-voxel class distributions (index 0 is the empty class).
//! Two aggregators are available: [`aggregate::SplatMode::Pgs`] treats
//! opacity as a mixture prior, while [`aggregate::SplatMode::Dga`] uses it
//! only to gate occupancy, so an isolated low-opacity primitive cannot claim
//! a voxel for its class.
//!
//! ```
//! use splatvox::aggregate::{splat, SplatMode, VoxelGridSpec};
//! use splatvox::io::generate::{generate_scene, SceneKind};
//! use splatvox::spatial::{build_index, DEFAULT_KAPPA};
//!
//! let spec = VoxelGridSpec { dims: [8, 8, 4], ..Default::default() };
//! let kind = SceneKind::Random { count: 30, spec, scale_range: (0.02, 0.1) };
//! let scene = generate_scene(&kind, 5, 7)?;
//! let index = build_index(scene.primitives(), DEFAULT_KAPPA)?;
//! let grid = splat(&scene, &spec, SplatMode::Dga, &index)?;
//! for voxel in grid.voxels() {
//!     assert!((voxel.iter().sum::<f64>() - 1.0).abs() < 1e-9);
//! }
//! # Ok::<(), splatvox::Error>(())
//! ```

pub mod aggregate;
pub mod attention;
pub mod depth_init;
mod error;
pub mod gaussian;
pub mod io;
pub mod metrics;
pub mod spatial;

pub use error::{Error, Result};
