use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::gca::{gca_forward, FeatureSet, GcaWeights};
use crate::error::{invalid, mismatch, Result};

/// Exact GELU, `x·Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Gelu,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Gelu => gelu(x),
            Self::Relu => x.max(0.0),
        }
    }
}

/// Point-wise feed-forward options. The hidden width is taken from the
/// weight shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FfnConfig {
    pub activation: Activation,
    pub residual: bool,
    /// Parameter-free layer normalization of the output rows.
    pub layer_norm: bool,
}

impl Default for FfnConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Gelu,
            residual: true,
            layer_norm: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl FfnWeights {
    /// Seeded uniform weights in `[−1/√D, 1/√D]`, hidden width `4D`, zero
    /// biases.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (d as f64).sqrt();
        let mut mat = |r: usize, c: usize| {
            Array2::from_shape_simple_fn((r, c), || rng.random_range(-bound..=bound))
        };
        let w1 = mat(d, 4 * d);
        let w2 = mat(4 * d, d);
        Self {
            w1,
            b1: Array1::zeros(4 * d),
            w2,
            b2: Array1::zeros(d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w1: Array2::zeros((d, 4 * d)),
            b1: Array1::zeros(4 * d),
            w2: Array2::zeros((4 * d, d)),
            b2: Array1::zeros(d),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        let hidden = self.w1.ncols();
        if self.w1.nrows() != d
            || self.b1.len() != hidden
            || self.w2.dim() != (hidden, d)
            || self.b2.len() != d
        {
            return Err(mismatch(format!(
                "FFN weights w1 {:?}, b1 {}, w2 {:?}, b2 {} do not fit {d} input channels",
                self.w1.dim(),
                self.b1.len(),
                self.w2.dim(),
                self.b2.len()
            )));
        }
        Ok(())
    }
}

/// `x + act(x·w1 + b1)·w2 + b2` per row, with the options in `cfg`.
pub fn ffn_forward_with(x: &Array2<f64>, w: &FfnWeights, cfg: &FfnConfig) -> Result<Array2<f64>> {
    w.check(x.ncols())?;
    let mut hidden = x.dot(&w.w1) + &w.b1;
    hidden.mapv_inplace(|v| cfg.activation.apply(v));
    let mut out = hidden.dot(&w.w2) + &w.b2;
    if cfg.residual {
        out += x;
    }
    if cfg.layer_norm {
        layer_norm_rows(&mut out);
    }
    Ok(out)
}

/// [`ffn_forward_with`] using GELU and a residual connection.
pub fn ffn_forward(x: &Array2<f64>, w: &FfnWeights) -> Result<Array2<f64>> {
    ffn_forward_with(x, w, &FfnConfig::default())
}

const LAYER_NORM_EPS: f64 = 1e-5;

pub fn layer_norm_rows(x: &mut Array2<f64>) {
    for mut row in x.axis_iter_mut(Axis(0)) {
        let n = row.len() as f64;
        let mean = row.sum() / n;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * inv);
    }
}

/// Options for the GCA + FFN block. Nothing wraps the attention layer by
/// default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GmfConfig {
    /// Adds the depth features back after attention.
    pub gca_residual: bool,
    /// Layer-normalizes the attention output.
    pub gca_layer_norm: bool,
    pub ffn: FfnConfig,
}

/// One fusion block: group cross-attention followed by the point-wise FFN.
pub fn gmf_forward(
    feats: &FeatureSet,
    gca: &GcaWeights,
    ffn: &FfnWeights,
    cfg: &GmfConfig,
) -> Result<Array2<f64>> {
    let mut y = gca_forward(feats, gca)?;
    if cfg.gca_residual {
        y += feats.depth();
    }
    if cfg.gca_layer_norm {
        if y.ncols() < 2 {
            return Err(invalid("layer normalization needs at least two channels"));
        }
        layer_norm_rows(&mut y);
    }
    ffn_forward_with(&y, ffn, &cfg.ffn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.8413447460685429).abs() < 1e-15);
        assert!((gelu(-1.0) + 0.15865525393145707).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_are_identity() {
        let x = array![[1.0, -2.0, 0.5], [0.0, 3.0, -1.0]];
        assert_eq!(ffn_forward(&x, &FfnWeights::zeros(3)).unwrap(), x);
    }

    #[test]
    fn scalar_hand_computation() {
        let w = FfnWeights {
            w1: array![[2.0, -1.0, 0.5, 1.0]],
            b1: array![0.5, 0.0, -0.25, 1.0],
            w2: array![[1.0], [2.0], [-1.0], [0.5]],
            b2: array![0.1],
        };
        let x = 0.75;
        let pre = [2.0 * x + 0.5, -x, 0.5 * x - 0.25, x + 1.0];
        let expected =
            x + gelu(pre[0]) + 2.0 * gelu(pre[1]) - gelu(pre[2]) + 0.5 * gelu(pre[3]) + 0.1;
        let out = ffn_forward(&array![[x]], &w).unwrap();
        assert!((out[[0, 0]] - expected).abs() < 1e-9);
    }

    #[test]
    fn gelu_monotone_on_positives() {
        for i in 1..=1000 {
            let x = i as f64 * 0.01;
            assert!(gelu(2.0 * x) >= gelu(x));
        }
    }

    #[test]
    fn shape_mismatch() {
        let x = Array2::zeros((2, 3));
        assert!(ffn_forward(&x, &FfnWeights::zeros(4)).is_err());
    }

    #[test]
    fn options_change_the_output() {
        let x = array![[1.0, 2.0, 3.0, 4.0]];
        let w = FfnWeights::random(4, 1);
        let plain = ffn_forward_with(
            &x,
            &w,
            &FfnConfig {
                residual: false,
                ..Default::default()
            },
        )
        .unwrap();
        let res = ffn_forward(&x, &w).unwrap();
        assert!((&res - &plain - &x).iter().all(|v| v.abs() < 1e-12));
        let normed = ffn_forward_with(
            &x,
            &w,
            &FfnConfig {
                layer_norm: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(normed.row(0).sum().abs() < 1e-9);
        let relu = ffn_forward_with(
            &x,
            &w,
            &FfnConfig {
                activation: Activation::Relu,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(relu, res);
    }

    #[test]
    fn gmf_block_composes() {
        let feats = FeatureSet::random(9, 8, 3, 2);
        let gca = GcaWeights::random(8, 4, 3).unwrap();
        let ffn = FfnWeights::random(8, 4);
        let out = gmf_forward(&feats, &gca, &ffn, &GmfConfig::default()).unwrap();
        let expected = ffn_forward(&gca_forward(&feats, &gca).unwrap(), &ffn).unwrap();
        assert_eq!(out, expected);
        let with_res = gmf_forward(
            &feats,
            &gca,
            &ffn,
            &GmfConfig {
                gca_residual: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_ne!(with_res, out);
    }
}
