//! Gaussian-to-voxel aggregation.
//!
//! Two aggregators share the same output shape. Both predict an occupancy
//! `α(x)` and a semantic distribution `e(x)` over the valid classes, and
//! fuse them as `ŷᵉᵐᵖᵗʸ = 1 − α`, `ŷˡ = α · eˡ`.
//!
//! * **PGS** (probabilistic Gaussian superposition) uses the bare kernel for
//!   occupancy, `α = 1 − ∏(1 − αᵢ)`, and opacity as the mixture prior for
//!   semantics, `e = Σ pᵢ aᵢ c̃ᵢ / Σ pⱼ aⱼ`. For an isolated primitive the
//!   prior cancels and its class wins outright, however low its opacity.
//! * **DGA** (decoupled aggregation) gates occupancy by opacity,
//!   `α' = 1 − ∏(1 − αᵢ aᵢ)`, and leaves semantics opacity-free,
//!   `e = Σ pᵢ c̃ᵢ / Σ pⱼ`. A low-confidence outlier then yields low
//!   occupancy and its semantics are suppressed by the fusion.

mod floater;
mod grid;
mod splat;

pub use floater::{floater_experiment, FloaterReport};
pub use grid::{
    argmax_labels, Grid3, LabelGrid, Mask, ProbabilityGrid, SemanticProbGrid, VoxelGridSpec,
};
pub use splat::{splat, splat_with_threads, SplatMode};

use crate::gaussian::{Point3, Scene, SemanticWeights};

/// Semantic denominators below this fall back to the uniform distribution.
pub const SEMANTIC_DENOMINATOR_FLOOR: f64 = 1e-30;

// Factors of ∏(1 − ·) below this switch the product to log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-12;

/// `1 − ∏ factors`.
#[inline]
fn complement_of_product(factors: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut prod = 1.0;
    let mut tiny = false;
    for f in factors.clone() {
        prod *= f;
        tiny |= f < LOG_SPACE_THRESHOLD;
    }
    if tiny {
        let log_sum: f64 = factors.map(f64::ln).sum();
        -log_sum.exp_m1()
    } else {
        1.0 - prod
    }
}

/// PGS occupancy `1 − ∏(1 − α(x; Gᵢ))`. Opacity is not used.
pub fn pgs_occupancy(x: &Point3, ids: &[usize], scene: &Scene) -> f64 {
    let set = scene.primitives();
    complement_of_product(ids.iter().map(|&i| 1.0 - set[i].kernel(x)))
}

/// DGA occupancy `1 − ∏(1 − α(x; Gᵢ) · aᵢ)`.
pub fn dga_occupancy(x: &Point3, ids: &[usize], scene: &Scene) -> f64 {
    let set = scene.primitives();
    complement_of_product(
        ids.iter()
            .map(|&i| 1.0 - set[i].kernel(x) * set[i].opacity()),
    )
}

/// Mixture posterior over classes, written into `out` (length `C − 1`).
/// With `use_opacity` the opacities act as mixture priors (PGS), otherwise
/// only the densities weigh the components (DGA).
fn mixture_semantics_into(
    x: &Point3,
    ids: &[usize],
    scene: &Scene,
    use_opacity: bool,
    out: &mut [f64],
) {
    let set = scene.primitives();
    out.iter_mut().for_each(|v| *v = 0.0);
    let mut denom = 0.0;
    for &i in ids {
        let g = &set[i];
        let mut w = g.pdf(x);
        if use_opacity {
            w *= g.opacity();
        }
        denom += w;
        for (o, c) in out.iter_mut().zip(g.semantics().as_slice()) {
            *o += w * c;
        }
    }
    if denom < SEMANTIC_DENOMINATOR_FLOOR {
        let u = 1.0 / out.len() as f64;
        out.iter_mut().for_each(|v| *v = u);
    } else {
        out.iter_mut().for_each(|v| *v /= denom);
    }
}

/// PGS conditional semantic expectation `Σ p(x|Gᵢ) aᵢ c̃ᵢ / Σ p(x|Gⱼ) aⱼ`.
pub fn pgs_semantics(x: &Point3, ids: &[usize], scene: &Scene) -> SemanticWeights {
    let mut out = vec![0.0; scene.num_classes() - 1];
    mixture_semantics_into(x, ids, scene, true, &mut out);
    SemanticWeights::from_normalized(out)
}

/// DGA conditional semantic distribution `Σ p(x|Gᵢ) c̃ᵢ / Σ p(x|Gⱼ)`.
pub fn dga_semantics(x: &Point3, ids: &[usize], scene: &Scene) -> SemanticWeights {
    let mut out = vec![0.0; scene.num_classes() - 1];
    mixture_semantics_into(x, ids, scene, false, &mut out);
    SemanticWeights::from_normalized(out)
}

/// DGA semantics before the normalizer is simplified:
/// `Σᵢ p(x|Gᵢ) c̃ᵢᵏ / Σⱼ Σₗ p(x|Gⱼ) c̃ⱼˡ`.
///
/// Equal to [`dga_semantics`] because every `c̃ⱼ` sums to one; kept as an
/// independent route for checking that identity.
pub fn dga_semantics_unsimplified(x: &Point3, ids: &[usize], scene: &Scene) -> SemanticWeights {
    let set = scene.primitives();
    let k = scene.num_classes() - 1;
    let numer: Vec<f64> = (0..k)
        .map(|class| {
            ids.iter()
                .map(|&i| set[i].pdf(x) * set[i].semantics()[class])
                .sum()
        })
        .collect();
    let denom: f64 = ids
        .iter()
        .map(|&j| {
            let p = set[j].pdf(x);
            set[j]
                .semantics()
                .as_slice()
                .iter()
                .map(|c| p * c)
                .sum::<f64>()
        })
        .sum();
    if denom < SEMANTIC_DENOMINATOR_FLOOR {
        return SemanticWeights::uniform(k);
    }
    SemanticWeights::from_normalized(numer.into_iter().map(|n| n / denom).collect())
}

/// Fuses occupancy and conditional semantics into a `C`-class distribution
/// with the empty class at index 0.
pub fn fuse(alpha: f64, sem: &SemanticWeights) -> Vec<f64> {
    let mut out = vec![0.0; sem.len() + 1];
    fuse_into(alpha, sem.as_slice(), &mut out);
    out
}

#[inline]
fn fuse_into(alpha: f64, sem: &[f64], out: &mut [f64]) {
    out[0] = 1.0 - alpha;
    for (o, e) in out[1..].iter_mut().zip(sem) {
        *o = alpha * e;
    }
}
