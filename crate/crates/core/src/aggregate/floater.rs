use super::{dga_occupancy, dga_semantics, fuse, pgs_occupancy, pgs_semantics};
use crate::error::{invalid, Result};
use crate::gaussian::Scene;
use crate::io::generate::{default_cluster_center, generate_scene, SceneKind, OUTLIER_CLASS};
use crate::spatial::{build_index, DEFAULT_KAPPA};

const NUM_CLASSES: usize = 12;
const SEED: u64 = 0;

/// Outcome of evaluating both aggregators at an isolated outlier's mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FloaterReport {
    pub cluster_size: usize,
    pub outlier_opacity: f64,
    pub outlier_class: usize,
    /// `p(Gₙ | xᶠ)` with opacity as the prior, over the whole scene.
    pub outlier_responsibility: f64,
    /// PGS semantic mass on the outlier's class.
    pub pgs_posterior: f64,
    pub pgs_occupancy: f64,
    /// PGS fused probability of the outlier's class.
    pub pgs_label_prob: f64,
    pub dga_occupancy: f64,
    /// DGA fused probability of the outlier's class.
    pub dga_occupied_prob: f64,
}

impl FloaterReport {
    /// `key=value` lines, one per field.
    pub fn to_key_values(&self) -> String {
        format!(
            "cluster_size={}\noutlier_opacity={:?}\noutlier_class={}\noutlier_responsibility={:?}\n\
             pgs_posterior={:?}\npgs_occupancy={:?}\npgs_label_prob={:?}\ndga_occupancy={:?}\ndga_occupied_prob={:?}\n",
            self.cluster_size,
            self.outlier_opacity,
            self.outlier_class,
            self.outlier_responsibility,
            self.pgs_posterior,
            self.pgs_occupancy,
            self.pgs_label_prob,
            self.dga_occupancy,
            self.dga_occupied_prob,
        )
    }
}

/// Builds a dense high-opacity cluster plus one isolated outlier of a
/// different class and opacity `outlier_opacity`, then evaluates PGS and DGA
/// at the outlier's mean.
pub fn floater_experiment(cluster_size: usize, outlier_opacity: f64) -> Result<FloaterReport> {
    if cluster_size == 0 {
        return Err(invalid("cluster_size must be at least 1"));
    }
    if !(outlier_opacity > 0.0 && outlier_opacity <= 1.0) {
        return Err(invalid(format!(
            "outlier opacity must lie in (0, 1], got {outlier_opacity}"
        )));
    }
    let kind = SceneKind::ClusterPlusOutlier {
        cluster_size,
        outlier_opacity,
        center: default_cluster_center(),
    };
    let scene = generate_scene(&kind, NUM_CLASSES, SEED)?;
    Ok(evaluate(&scene, outlier_opacity))
}

fn evaluate(scene: &Scene, outlier_opacity: f64) -> FloaterReport {
    let prims = scene.primitives();
    let outlier = prims.len() - 1;
    let x = *prims[outlier].mean();
    let index = build_index(prims, DEFAULT_KAPPA).expect("generated scene is valid");
    let ids = index.neighbors(&x);

    let weights: Vec<f64> = prims.iter().map(|g| g.pdf(&x) * g.opacity()).collect();
    let outlier_responsibility = weights[outlier] / weights.iter().sum::<f64>();

    // Semantic vectors exclude the empty class; fused vectors include it.
    let sem_slot = OUTLIER_CLASS - 1;
    let pgs_sem = pgs_semantics(&x, &ids, scene);
    let pgs_alpha = pgs_occupancy(&x, &ids, scene);
    let dga_alpha = dga_occupancy(&x, &ids, scene);
    let dga_sem = dga_semantics(&x, &ids, scene);

    FloaterReport {
        cluster_size: outlier,
        outlier_opacity,
        outlier_class: OUTLIER_CLASS,
        outlier_responsibility,
        pgs_posterior: pgs_sem[sem_slot],
        pgs_occupancy: pgs_alpha,
        pgs_label_prob: fuse(pgs_alpha, &pgs_sem)[OUTLIER_CLASS],
        dga_occupancy: dga_alpha,
        dga_occupied_prob: fuse(dga_alpha, &dga_sem)[OUTLIER_CLASS],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_opacity_outlier_collapses_pgs_but_not_dga() {
        let r = floater_experiment(50, 0.01).unwrap();
        assert!(r.outlier_responsibility > 0.999);
        assert!(r.pgs_posterior >= 0.99, "{r:?}");
        assert!(r.pgs_label_prob >= 0.99, "{r:?}");
        assert!(r.dga_occupied_prob <= 0.011, "{r:?}");
        assert!((r.dga_occupancy - 0.01).abs() < 1e-12);
    }

    #[test]
    fn confident_primitive_is_kept_by_both() {
        let r = floater_experiment(50, 1.0).unwrap();
        assert!(r.pgs_label_prob >= 0.99, "{r:?}");
        assert!(r.dga_occupied_prob >= 0.99, "{r:?}");
    }

    #[test]
    fn small_clusters_work() {
        let r = floater_experiment(1, 0.2).unwrap();
        assert_eq!(r.cluster_size, 1);
        assert!(r.dga_occupied_prob <= 0.2);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(floater_experiment(0, 0.5).is_err());
        assert!(floater_experiment(5, 0.0).is_err());
        assert!(floater_experiment(5, 1.5).is_err());
    }
}
