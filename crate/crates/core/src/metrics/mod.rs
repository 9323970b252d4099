//! Supervision losses and evaluation scores.

mod eval;
mod losses;

pub use eval::{chamfer_l1, depth_metrics, iou_miou, DepthReport, IouReport, DELTA1_THRESHOLD};
pub use losses::{
    combine_layer_losses, focal_loss, prob_scale_loss, prob_scale_weights, scal_geo_loss,
    FocalLoss, LayerOccupancies, LossWeights, ScalGeoLoss, PROB_CLAMP,
};
