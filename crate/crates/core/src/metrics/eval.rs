use crate::aggregate::{LabelGrid, Mask};
use crate::error::{invalid, mismatch, Result};
use crate::gaussian::Point3;

/// Ratio threshold of the δ₁ depth accuracy.
pub const DELTA1_THRESHOLD: f64 = 1.25;

#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    /// Occupied-versus-empty IoU.
    pub iou: f64,
    /// IoU of classes `1..C`; `None` when a class appears in neither grid.
    pub per_class: Vec<Option<f64>>,
    /// Mean of the defined per-class values.
    pub miou: f64,
}

impl IouReport {
    /// `key=value` lines; undefined per-class entries print as `nan`.
    pub fn to_key_values(&self) -> String {
        let mut s = format!("iou={:?}\nmiou={:?}\n", self.iou, self.miou);
        for (i, v) in self.per_class.iter().enumerate() {
            match v {
                Some(v) => s.push_str(&format!("iou_class_{}={v:?}\n", i + 1)),
                None => s.push_str(&format!("iou_class_{}=nan\n", i + 1)),
            }
        }
        s
    }
}

/// Scene-completion IoU and per-class IoU inside `mask`.
///
/// When nothing is occupied in either grid the geometric IoU is 1, and when
/// no valid class is present the mIoU is 1: the prediction agrees with the
/// ground truth everywhere it is scored.
pub fn iou_miou(pred: &LabelGrid, gt: &LabelGrid, mask: &Mask) -> Result<IouReport> {
    if pred.dims() != gt.dims() || mask.dims() != gt.dims() {
        return Err(mismatch(format!(
            "pred {:?}, gt {:?}, mask {:?}",
            pred.dims(),
            gt.dims(),
            mask.dims()
        )));
    }
    if pred.num_classes() != gt.num_classes() {
        return Err(mismatch(format!(
            "pred has {} classes, gt has {}",
            pred.num_classes(),
            gt.num_classes()
        )));
    }
    let c = gt.num_classes();
    let mut inter = vec![0usize; c];
    let mut union = vec![0usize; c];
    let (mut geo_inter, mut geo_union, mut scored) = (0usize, 0usize, 0usize);
    for ((&p, &g), &m) in pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .zip(mask.as_slice())
    {
        if !m {
            continue;
        }
        scored += 1;
        let (po, go) = (p != 0, g != 0);
        geo_inter += usize::from(po && go);
        geo_union += usize::from(po || go);
        if p == g {
            inter[p as usize] += 1;
            union[p as usize] += 1;
        } else {
            union[p as usize] += 1;
            union[g as usize] += 1;
        }
    }
    if scored == 0 {
        return Err(invalid("the evaluation mask selects no voxel"));
    }
    let iou = if geo_union == 0 {
        1.0
    } else {
        geo_inter as f64 / geo_union as f64
    };
    let per_class: Vec<Option<f64>> = (1..c)
        .map(|k| (union[k] > 0).then(|| inter[k] as f64 / union[k] as f64))
        .collect();
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    let miou = if present.is_empty() {
        1.0
    } else {
        present.iter().sum::<f64>() / present.len() as f64
    };
    Ok(IouReport {
        iou,
        per_class,
        miou,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthReport {
    pub rmse: f64,
    /// Fraction of scored pairs with ratio below [`DELTA1_THRESHOLD`].
    pub delta1: f64,
    pub chamfer_l1: f64,
    /// Pairs left out of δ₁ because a depth was zero, negative or not finite.
    pub excluded_pairs: usize,
}

/// RMSE and δ₁ over aligned depth lists, and Chamfer distance between two
/// point sets.
pub fn depth_metrics(
    pred_pts: &[Point3],
    gt_pts: &[Point3],
    pred_d: &[f64],
    gt_d: &[f64],
) -> Result<DepthReport> {
    if pred_d.len() != gt_d.len() {
        return Err(mismatch(format!(
            "{} predicted depths vs {} ground-truth depths",
            pred_d.len(),
            gt_d.len()
        )));
    }
    if pred_d.is_empty() {
        return Err(invalid("depth lists are empty"));
    }
    let se: f64 = pred_d.iter().zip(gt_d).map(|(p, g)| (p - g).powi(2)).sum();
    let rmse = (se / pred_d.len() as f64).sqrt();

    let mut excluded = 0;
    let mut hits = 0usize;
    for (&p, &g) in pred_d.iter().zip(gt_d) {
        if !(p > 0.0 && g > 0.0 && p.is_finite() && g.is_finite()) {
            excluded += 1;
            continue;
        }
        hits += usize::from((p / g).max(g / p) < DELTA1_THRESHOLD);
    }
    let scored = pred_d.len() - excluded;
    if scored == 0 {
        return Err(invalid("no depth pair has two positive depths"));
    }
    Ok(DepthReport {
        rmse,
        delta1: hits as f64 / scored as f64,
        chamfer_l1: chamfer_l1(pred_pts, gt_pts)?,
        excluded_pairs: excluded,
    })
}

/// Average of the two directional mean nearest-neighbor Euclidean distances.
pub fn chamfer_l1(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Chamfer distance needs two non-empty point sets"));
    }
    if a.iter().chain(b).any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(invalid("point sets must be finite"));
    }
    Ok(0.5 * (mean_nearest(a, b) + mean_nearest(b, a)))
}

fn mean_nearest(queries: &[Point3], targets: &[Point3]) -> f64 {
    let mut sorted: Vec<&Point3> = targets.iter().collect();
    sorted.sort_by(|p, q| p.x.total_cmp(&q.x));
    let total: f64 = queries.iter().map(|q| nearest_sorted(q, &sorted)).sum();
    total / queries.len() as f64
}

/// Nearest distance by sweeping outward in x from the query's position.
fn nearest_sorted(q: &Point3, sorted: &[&Point3]) -> f64 {
    let start = sorted.partition_point(|p| p.x < q.x);
    let mut best = f64::INFINITY;
    for p in &sorted[start..] {
        if p.x - q.x >= best {
            break;
        }
        best = best.min((*p - q).norm());
    }
    for p in sorted[..start].iter().rev() {
        if q.x - p.x >= best {
            break;
        }
        best = best.min((*p - q).norm());
    }
    best
}
