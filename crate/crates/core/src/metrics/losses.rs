use crate::aggregate::{LabelGrid, Mask, ProbabilityGrid, SemanticProbGrid};
use crate::error::{invalid, mismatch, Result};

/// Probability clamp applied before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;

/// Weights of the six supervision terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda: [f64; 6],
}

impl LossWeights {
    pub fn new(lambda: [f64; 6]) -> Result<Self> {
        if lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid(format!(
                "loss weights must be finite and non-negative, got {lambda:?}"
            )));
        }
        Ok(Self { lambda })
    }

    /// The published training weights: 10, 20, 0.5, 0.5, 100, 2.
    pub fn published() -> Self {
        Self {
            lambda: [10.0, 20.0, 0.5, 0.5, 100.0, 2.0],
        }
    }

    /// `λ_i` with one-based `i`.
    pub fn get(&self, i: usize) -> f64 {
        self.lambda[i - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLoss {
    pub value: f64,
    /// Set when no voxel was selected; `value` is then zero.
    pub empty_mask: bool,
}

/// Mean over the masked voxels of `−w_c (1 − p_c)^γ ln p_c`, with `c` the
/// ground-truth class and `p` clamped to `[1e-7, 1 − 1e-7]`.
pub fn focal_loss(
    pred: &SemanticProbGrid,
    gt: &LabelGrid,
    gamma: f64,
    class_weights: &[f64],
    mask: Option<&Mask>,
) -> Result<FocalLoss> {
    if pred.dims() != gt.dims() || pred.num_classes() != gt.num_classes() {
        return Err(mismatch(format!(
            "prediction {:?} with {} classes vs ground truth {:?} with {} classes",
            pred.dims(),
            pred.num_classes(),
            gt.dims(),
            gt.num_classes()
        )));
    }
    if class_weights.len() != pred.num_classes() {
        return Err(mismatch(format!(
            "{} class weights for {} classes",
            class_weights.len(),
            pred.num_classes()
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0)
        || class_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
    {
        return Err(invalid(
            "gamma and class weights must be finite and non-negative",
        ));
    }
    if let Some(m) = mask {
        if m.dims() != gt.dims() {
            return Err(mismatch(format!(
                "mask {:?} vs grid {:?}",
                m.dims(),
                gt.dims()
            )));
        }
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, (probs, &label)) in pred.voxels().zip(gt.as_slice()).enumerate() {
        if mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        let c = label as usize;
        let p = probs[c].clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        sum += -class_weights[c] * (1.0 - p).powf(gamma) * p.ln();
        count += 1;
    }
    if count == 0 {
        return Ok(FocalLoss {
            value: 0.0,
            empty_mask: true,
        });
    }
    Ok(FocalLoss {
        value: sum / count as f64,
        empty_mask: false,
    })
}

/// Geometric scale loss with the soft precision, recall and specificity it
/// is built from. A term whose denominator is zero is left out of `value`
/// and reported as `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalGeoLoss {
    pub value: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
}

impl ScalGeoLoss {
    pub fn skipped_terms(&self) -> Vec<&'static str> {
        [
            ("precision", self.precision),
            ("recall", self.recall),
            ("specificity", self.specificity),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.is_none().then_some(name))
        .collect()
    }
}

pub fn scal_geo_loss(occ: &ProbabilityGrid, gt: &Mask) -> Result<ScalGeoLoss> {
    if occ.dims() != gt.dims() {
        return Err(mismatch(format!(
            "occupancy {:?} vs ground truth {:?}",
            occ.dims(),
            gt.dims()
        )));
    }
    if occ.as_slice().iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("occupancy probabilities must lie in [0, 1]"));
    }
    let (mut tp, mut sum_p, mut pos, mut tn, mut neg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&p, &y) in occ.as_slice().iter().zip(gt.as_slice()) {
        sum_p += p;
        if y {
            tp += p;
            pos += 1.0;
        } else {
            tn += 1.0 - p;
            neg += 1.0;
        }
    }
    let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
    let precision = if pos > 0.0 { ratio(tp, sum_p) } else { None };
    let recall = ratio(tp, pos);
    let specificity = ratio(tn, neg);
    let value = [precision, recall, specificity]
        .iter()
        .flatten()
        .map(|t| -t.max(PROB_CLAMP).ln())
        .sum();
    Ok(ScalGeoLoss {
        value,
        precision,
        recall,
        specificity,
    })
}

/// Occupancy predictions of successive encoder layers and their shared
/// ground truth.
#[derive(Debug, Clone)]
pub struct LayerOccupancies {
    layers: Vec<ProbabilityGrid>,
    gt: Mask,
}

impl LayerOccupancies {
    pub fn new(layers: Vec<ProbabilityGrid>, gt: Mask) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("at least one layer is required"));
        }
        if let Some(l) = layers.iter().find(|l| l.dims() != gt.dims()) {
            return Err(mismatch(format!(
                "layer {:?} vs ground truth {:?}",
                l.dims(),
                gt.dims()
            )));
        }
        Ok(Self { layers, gt })
    }

    pub fn layers(&self) -> &[ProbabilityGrid] {
        &self.layers
    }

    pub fn gt(&self) -> &Mask {
        &self.gt
    }
}

/// Per-layer weights: `i / (2n)` for layers `1..n`, and 1 for layer `n`.
pub fn prob_scale_weights(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("at least one layer is required"));
    }
    Ok((1..=n)
        .map(|i| {
            if i == n {
                1.0
            } else {
                i as f64 / (2.0 * n as f64)
            }
        })
        .collect())
}

/// Weighted sum of already computed per-layer losses.
pub fn combine_layer_losses(losses: &[f64]) -> Result<f64> {
    let w = prob_scale_weights(losses.len())?;
    Ok(w.iter().zip(losses).map(|(w, l)| w * l).sum())
}

/// Layer-weighted geometric scale loss, weaker on early layers.
pub fn prob_scale_loss(layers: &LayerOccupancies) -> Result<f64> {
    let losses = layers
        .layers
        .iter()
        .map(|l| Ok(scal_geo_loss(l, &layers.gt)?.value))
        .collect::<Result<Vec<_>>>()?;
    combine_layer_losses(&losses)
}
