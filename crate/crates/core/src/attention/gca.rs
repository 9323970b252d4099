use ndarray::{s, Array1, Array2, Array3, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, mismatch, Result};

/// Sampled features: depth features `N × D` (queries) and one `N × D`
/// image-feature matrix per scale (keys and values).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    depth: Array2<f64>,
    scales: Vec<Array2<f64>>,
}

impl FeatureSet {
    pub fn new(depth: Array2<f64>, scales: Vec<Array2<f64>>) -> Result<Self> {
        if scales.is_empty() {
            return Err(invalid("at least one image scale is required"));
        }
        for (l, f) in scales.iter().enumerate() {
            if f.dim() != depth.dim() {
                return Err(mismatch(format!(
                    "scale {l} features are {:?}, depth features are {:?}",
                    f.dim(),
                    depth.dim()
                )));
            }
        }
        Ok(Self { depth, scales })
    }

    /// Uniform `[-1, 1)` features.
    pub fn random(n: usize, d: usize, l: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = || Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
        let depth = mat();
        let scales = (0..l).map(|_| mat()).collect();
        Self { depth, scales }
    }

    pub fn depth(&self) -> &Array2<f64> {
        &self.depth
    }

    pub fn scales(&self) -> &[Array2<f64>] {
        &self.scales
    }

    pub fn num_points(&self) -> usize {
        self.depth.nrows()
    }

    pub fn channels(&self) -> usize {
        self.depth.ncols()
    }

    pub fn num_scales(&self) -> usize {
        self.scales.len()
    }
}

/// Projections of one group cross-attention layer. The attention vector
/// `wa` (length `D / G`) is shared by every group and scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GcaWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wa: Array1<f64>,
    pub wo: Array2<f64>,
    pub groups: usize,
}

impl GcaWeights {
    pub fn new(
        wq: Array2<f64>,
        wk: Array2<f64>,
        wv: Array2<f64>,
        wa: Array1<f64>,
        wo: Array2<f64>,
        groups: usize,
    ) -> Result<Self> {
        let w = Self {
            wq,
            wk,
            wv,
            wa,
            wo,
            groups,
        };
        w.validate()?;
        Ok(w)
    }

    /// Seeded uniform weights in `[−1/√D, 1/√D]`.
    pub fn random(d: usize, groups: usize, seed: u64) -> Result<Self> {
        check_grouping(d, groups)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (d as f64).sqrt();
        let mut mat = |r: usize, c: usize| {
            Array2::from_shape_simple_fn((r, c), || rng.random_range(-bound..=bound))
        };
        let (wq, wk, wv) = (mat(d, d), mat(d, d), mat(d, d));
        let wa = mat(d / groups, 1)
            .into_shape_with_order(d / groups)
            .expect("column vector");
        let wo = mat(d, d);
        Self::new(wq, wk, wv, wa, wo, groups)
    }

    pub fn zeros(d: usize, groups: usize) -> Result<Self> {
        check_grouping(d, groups)?;
        let z = || Array2::zeros((d, d));
        Self::new(z(), z(), z(), Array1::zeros(d / groups), z(), groups)
    }

    pub fn channels(&self) -> usize {
        self.wq.nrows()
    }

    pub fn group_width(&self) -> usize {
        self.channels() / self.groups
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.wq.nrows();
        check_grouping(d, self.groups)?;
        for (name, m) in [
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("wo", &self.wo),
        ] {
            if m.dim() != (d, d) {
                return Err(mismatch(format!(
                    "{name} is {:?}, expected ({d}, {d})",
                    m.dim()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{name} has non-finite entries")));
            }
        }
        if self.wa.len() != d / self.groups {
            return Err(mismatch(format!(
                "wa has {} entries, expected D/G = {}",
                self.wa.len(),
                d / self.groups
            )));
        }
        if self.wa.iter().any(|v| !v.is_finite()) {
            return Err(invalid("wa has non-finite entries"));
        }
        Ok(())
    }
}

fn check_grouping(d: usize, groups: usize) -> Result<()> {
    if d == 0 || groups == 0 || !d.is_multiple_of(groups) {
        return Err(invalid(format!(
            "channel count {d} must be a positive multiple of the group count {groups}"
        )));
    }
    Ok(())
}

fn check_agreement(feats: &FeatureSet, w: &GcaWeights) -> Result<()> {
    w.validate()?;
    if feats.channels() != w.channels() {
        return Err(mismatch(format!(
            "features have {} channels, weights expect {}",
            feats.channels(),
            w.channels()
        )));
    }
    Ok(())
}

/// Fused features plus the per-(point, group, scale) attention weights.
#[derive(Debug, Clone)]
pub struct GcaOutput {
    pub features: Array2<f64>,
    /// `N × G × L`; sums to one along the last axis.
    pub attention: Array3<f64>,
}

const POINT_BLOCK: usize = 512;

/// Group cross-attention forward pass, `N × D → N × D`.
pub fn gca_forward(feats: &FeatureSet, w: &GcaWeights) -> Result<Array2<f64>> {
    Ok(gca_forward_with_attention(feats, w)?.features)
}

/// [`gca_forward`] that also returns the attention weights.
///
/// Per group `g` and scale `l`: `Q_g`, `K_gˡ`, `V_gˡ` are channel slices of
/// the full projections, the score is `wa · (Q_g + K_gˡ)` (no `1/√D_g`
/// scaling), the softmax runs over scales, and the attended values of all
/// groups are concatenated and projected by `wo`. Points are processed in
/// blocks so the working set stays in cache and memory grows with `N` only
/// through the output.
pub fn gca_forward_with_attention(feats: &FeatureSet, w: &GcaWeights) -> Result<GcaOutput> {
    check_agreement(feats, w)?;
    let (n, d) = (feats.num_points(), feats.channels());
    let (g, dg, l) = (w.groups, w.group_width(), feats.num_scales());

    let mut features = Array2::zeros((n, d));
    let mut attention = Array3::zeros((n, g, l));

    let mut start = 0;
    while start < n {
        let end = (start + POINT_BLOCK).min(n);
        let b = end - start;
        let q = feats.depth.slice(s![start..end, ..]).dot(&w.wq);

        let q = q.as_standard_layout();
        let q = q.as_slice().expect("standard layout");
        let wa = w.wa.as_slice().expect("contiguous");

        let mut values = Vec::with_capacity(l);
        // scores[(r * g + gi) * l + li]
        let mut scores = vec![0.0; b * g * l];
        for (li, f) in feats.scales.iter().enumerate() {
            let block = f.slice(s![start..end, ..]);
            let k = block.dot(&w.wk);
            let k = k.as_slice().expect("fresh product is contiguous");
            for (r, (qr, kr)) in q.chunks_exact(d).zip(k.chunks_exact(d)).enumerate() {
                for (gi, (qg, kg)) in qr.chunks_exact(dg).zip(kr.chunks_exact(dg)).enumerate() {
                    let mut acc = 0.0;
                    for c in 0..dg {
                        acc += wa[c] * (qg[c] + kg[c]);
                    }
                    scores[(r * g + gi) * l + li] = acc;
                }
            }
            values.push(block.dot(&w.wv));
        }

        for row in scores.chunks_exact_mut(l) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            row.iter_mut().for_each(|v| *v /= sum);
        }

        let mut mixed = Array2::<f64>::zeros((b, d));
        let m = mixed.as_slice_mut().expect("fresh array is contiguous");
        for (li, v) in values.iter().enumerate() {
            let v = v.as_slice().expect("fresh product is contiguous");
            for (r, (mr, vr)) in m.chunks_exact_mut(d).zip(v.chunks_exact(d)).enumerate() {
                for (gi, (mg, vg)) in mr.chunks_exact_mut(dg).zip(vr.chunks_exact(dg)).enumerate() {
                    let a = scores[(r * g + gi) * l + li];
                    for (o, x) in mg.iter_mut().zip(vg) {
                        *o += a * x;
                    }
                }
            }
        }

        features
            .slice_mut(s![start..end, ..])
            .assign(&mixed.dot(&w.wo));
        let scores = Array3::from_shape_vec((b, g, l), scores).expect("sized above");
        attention.slice_mut(s![start..end, .., ..]).assign(&scores);
        start = end;
    }
    Ok(GcaOutput {
        features,
        attention,
    })
}

/// Element-by-element loop transcription of the same layer. Slow; used as
/// the oracle for [`gca_forward`].
pub fn gca_reference(feats: &FeatureSet, w: &GcaWeights) -> Result<Array2<f64>> {
    check_agreement(feats, w)?;
    let (n, d) = (feats.num_points(), feats.channels());
    let (groups, dg, l) = (w.groups, w.group_width(), feats.num_scales());

    let project = |x: ArrayView2<f64>, m: &Array2<f64>, row: usize, col: usize| {
        let mut acc = 0.0;
        for k in 0..d {
            acc += x[[row, k]] * m[[k, col]];
        }
        acc
    };

    let mut concat = Array2::<f64>::zeros((n, d));
    for p in 0..n {
        for g in 0..groups {
            let cols = g * dg..(g + 1) * dg;
            let q: Vec<f64> = cols
                .clone()
                .map(|c| project(feats.depth.view(), &w.wq, p, c))
                .collect();
            let mut logits = Vec::with_capacity(l);
            let mut values = Vec::with_capacity(l);
            for f in &feats.scales {
                let k: Vec<f64> = cols
                    .clone()
                    .map(|c| project(f.view(), &w.wk, p, c))
                    .collect();
                let v: Vec<f64> = cols
                    .clone()
                    .map(|c| project(f.view(), &w.wv, p, c))
                    .collect();
                let mut score = 0.0;
                for c in 0..dg {
                    score += w.wa[c] * (q[c] + k[c]);
                }
                logits.push(score);
                values.push(v);
            }
            let exps: Vec<f64> = logits.iter().map(|s| s.exp()).collect();
            let total: f64 = exps.iter().sum();
            for c in 0..dg {
                let mut acc = 0.0;
                for li in 0..l {
                    acc += exps[li] / total * values[li][c];
                }
                concat[[p, g * dg + c]] = acc;
            }
        }
    }

    let mut out = Array2::<f64>::zeros((n, d));
    for p in 0..n {
        for c in 0..d {
            out[[p, c]] = project(concat.view(), &w.wo, p, c);
        }
    }
    Ok(out)
}
