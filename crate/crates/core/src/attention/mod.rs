//! Group cross-attention over multi-scale image features and the point-wise
//! feed-forward layer that follows it.
//!
//! Channels are split into `G` groups of width `D/G`. Each group scores every
//! image scale with one shared attention vector, takes a softmax across the
//! scales, and mixes that group's value channels accordingly. The cost is
//! linear in the number of points.

mod bench;
mod ffn;
mod gca;
mod sample;

pub use bench::{
    complexity_bench, dense_attention, dense_attention_bench, group_time_ratio, log_log_slope,
    BenchRow, BenchTable,
};
pub use ffn::{
    ffn_forward, ffn_forward_with, gelu, gmf_forward, layer_norm_rows, Activation, FfnConfig,
    FfnWeights, GmfConfig,
};
pub use gca::{
    gca_forward, gca_forward_with_attention, gca_reference, FeatureSet, GcaOutput, GcaWeights,
};
pub use sample::sample_bilinear;
