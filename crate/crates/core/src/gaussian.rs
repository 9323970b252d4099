//! Anisotropic 3D Gaussian primitives and the closed-form quantities every
//! aggregator consumes: rotation, covariance, kernel, density and the
//! softmax-normalized semantic vector.
//!
//! A primitive is validated once at construction. The whitening transform
//! `S⁻¹Rᵀ` and the density normalizer are cached so the splatting inner loop
//! is a 3×3 product and one `exp`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Point3 = Vector3<f64>;

/// Largest deviation from unit norm that is silently renormalized.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

/// `(2π)^{3/2}`
const TWO_PI_POW_1_5: f64 = 15.749_609_945_722_419;

/// Rotation quaternion, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub fn from_array([w, x, y, z]: [f64; 4]) -> Self {
        Self { w, x, y, z }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Renormalizes a quaternion that is already within
    /// [`QUATERNION_NORM_TOLERANCE`] of unit length; anything further off is
    /// rejected rather than silently reinterpreted.
    pub fn normalized(self) -> Result<Self> {
        let n = self.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(invalid(format!(
                "quaternion {:?} has zero or non-finite norm",
                self.to_array()
            )));
        }
        if (n - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(invalid(format!(
                "quaternion {:?} has norm {n}, expected 1 ± {QUATERNION_NORM_TOLERANCE}",
                self.to_array()
            )));
        }
        // Already unit to machine precision: keep the bits so that
        // normalization is idempotent.
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(self);
        }
        Ok(Self::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    /// Hamilton product `self ⊗ rhs` (apply `rhs` first, then `self`).
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }
}

/// Rotation matrix of a unit quaternion.
pub fn quat_to_rotation(q: &Quaternion) -> Result<Matrix3<f64>> {
    let Quaternion { w, x, y, z } = q.normalized()?;
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Ok(Matrix3::new(
        1.0 - 2.0 * (yy + zz),
        2.0 * (xy - wz),
        2.0 * (xz + wy),
        2.0 * (xy + wz),
        1.0 - 2.0 * (xx + zz),
        2.0 * (yz - wx),
        2.0 * (xz - wy),
        2.0 * (yz + wx),
        1.0 - 2.0 * (xx + yy),
    ))
}

/// Symmetric positive-definite 3×3 covariance, in m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance3(Matrix3<f64>);

impl Covariance3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

fn check_scale(scale: &Vector3<f64>) -> Result<()> {
    if scale.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(invalid(format!(
            "scale components must be finite and > 0, got {:?}",
            scale.as_slice()
        )));
    }
    Ok(())
}

/// `Σ = R S Sᵀ Rᵀ` with `S = diag(scale)`.
pub fn covariance(scale: &Vector3<f64>, rotation: &Quaternion) -> Result<Covariance3> {
    check_scale(scale)?;
    let r = quat_to_rotation(rotation)?;
    let rs = r * Matrix3::from_diagonal(scale);
    let sigma = rs * rs.transpose();
    // Exact symmetry; the two triangles can differ in the last ulp.
    Ok(Covariance3((sigma + sigma.transpose()) * 0.5))
}

/// Softmax-normalized semantic vector over the valid (non-empty) classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticWeights(Vec<f64>);

impl SemanticWeights {
    /// The uniform distribution over `n` valid classes.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Wraps an already-normalized vector. Used by the aggregators, whose
    /// outputs are convex combinations of normalized vectors.
    pub(crate) fn from_normalized(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for SemanticWeights {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Max-shifted softmax of the semantic logits.
pub fn normalized_semantics(logits: &[f64]) -> Result<SemanticWeights> {
    if logits.is_empty() {
        return Err(invalid("semantic logits must have at least one class"));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(invalid(format!(
            "semantic logits must be finite, got {logits:?}"
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(SemanticWeights(out))
}

/// One anisotropic Gaussian with opacity and per-class semantic logits.
///
/// The semantic logits cover the `C − 1` valid classes only; the empty class
/// is introduced by the fusion step.
#[derive(Debug, Clone)]
pub struct GaussianPrimitive {
    mean: Point3,
    scale: Vector3<f64>,
    rotation: Quaternion,
    opacity: f64,
    semantic_logits: Vec<f64>,

    // S⁻¹Rᵀ, so that (x−μ)ᵀΣ⁻¹(x−μ) = |S⁻¹Rᵀ(x−μ)|².
    whitening: Matrix3<f64>,
    // 1 / ((2π)^{3/2} |Σ|^{1/2})
    peak_density: f64,
    semantics: SemanticWeights,
}

impl GaussianPrimitive {
    pub fn new(
        mean: Point3,
        scale: Vector3<f64>,
        rotation: Quaternion,
        opacity: f64,
        semantic_logits: Vec<f64>,
    ) -> Result<Self> {
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid(format!(
                "mean must be finite, got {:?}",
                mean.as_slice()
            )));
        }
        check_scale(&scale)?;
        if !(0.0..=1.0).contains(&opacity) {
            return Err(invalid(format!(
                "opacity must lie in [0, 1], got {opacity}"
            )));
        }
        let rotation = rotation.normalized()?;
        let r = quat_to_rotation(&rotation)?;
        let inv_scale = Matrix3::from_diagonal(&scale.map(|s| 1.0 / s));
        let whitening = inv_scale * r.transpose();
        let sqrt_det = scale.x * scale.y * scale.z;
        let semantics = normalized_semantics(&semantic_logits)?;
        Ok(Self {
            mean,
            scale,
            rotation,
            opacity,
            semantic_logits,
            whitening,
            peak_density: 1.0 / (TWO_PI_POW_1_5 * sqrt_det),
            semantics,
        })
    }

    pub fn mean(&self) -> &Point3 {
        &self.mean
    }

    pub fn scale(&self) -> &Vector3<f64> {
        &self.scale
    }

    pub fn rotation(&self) -> &Quaternion {
        &self.rotation
    }

    pub fn opacity(&self) -> f64 {
        self.opacity
    }

    pub fn semantic_logits(&self) -> &[f64] {
        &self.semantic_logits
    }

    /// Number of valid classes this primitive carries logits for (`C − 1`).
    pub fn num_valid_classes(&self) -> usize {
        self.semantic_logits.len()
    }

    /// Softmax of the semantic logits.
    pub fn semantics(&self) -> &SemanticWeights {
        &self.semantics
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.max()
    }

    pub fn covariance(&self) -> Covariance3 {
        covariance(&self.scale, &self.rotation).expect("validated at construction")
    }

    /// Copy of this primitive with a different opacity.
    pub fn with_opacity(&self, opacity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&opacity) {
            return Err(invalid(format!(
                "opacity must lie in [0, 1], got {opacity}"
            )));
        }
        Ok(Self {
            opacity,
            ..self.clone()
        })
    }

    /// `S⁻¹Rᵀ`, mapping offsets from the mean into the unit-sphere frame.
    pub fn whitening(&self) -> &Matrix3<f64> {
        &self.whitening
    }

    /// Squared Mahalanobis distance `(x−μ)ᵀΣ⁻¹(x−μ)`.
    #[inline]
    pub fn mahalanobis_sq(&self, x: &Point3) -> f64 {
        (self.whitening * (x - self.mean)).norm_squared()
    }

    /// Un-normalized kernel `exp(−½ (x−μ)ᵀΣ⁻¹(x−μ))`, in `(0, 1]`.
    #[inline]
    pub fn kernel(&self, x: &Point3) -> f64 {
        (-0.5 * self.mahalanobis_sq(x)).exp()
    }

    /// Normalized density; `kernel · pdf(mean)`.
    #[inline]
    pub fn pdf(&self, x: &Point3) -> f64 {
        self.kernel(x) * self.peak_density
    }

    /// Density at the mean, `1 / ((2π)^{3/2} |Σ|^{1/2})`.
    pub fn peak_density(&self) -> f64 {
        self.peak_density
    }
}

pub fn gaussian_kernel(x: &Point3, g: &GaussianPrimitive) -> f64 {
    g.kernel(x)
}

pub fn gaussian_pdf(x: &Point3, g: &GaussianPrimitive) -> f64 {
    g.pdf(x)
}

/// A validated primitive set sharing one class count `C` (empty class included).
#[derive(Debug, Clone)]
pub struct Scene {
    num_classes: usize,
    primitives: Vec<GaussianPrimitive>,
}

impl Scene {
    pub fn new(num_classes: usize, primitives: Vec<GaussianPrimitive>) -> Result<Self> {
        if num_classes < 2 {
            return Err(invalid(format!(
                "need at least 2 classes (empty + one valid), got {num_classes}"
            )));
        }
        if let Some((i, p)) = primitives
            .iter()
            .enumerate()
            .find(|(_, p)| p.num_valid_classes() != num_classes - 1)
        {
            return Err(invalid(format!(
                "primitive {i} has {} semantic logits, expected {}",
                p.num_valid_classes(),
                num_classes - 1
            )));
        }
        Ok(Self {
            num_classes,
            primitives,
        })
    }

    pub fn empty(num_classes: usize) -> Result<Self> {
        Self::new(num_classes, Vec::new())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn primitives(&self) -> &[GaussianPrimitive] {
        &self.primitives
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn into_primitives(self) -> Vec<GaussianPrimitive> {
        self.primitives
    }
}
