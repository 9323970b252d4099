use ndarray::{Array2, ArrayView3};

use crate::error::{invalid, Result};

/// Bilinear samples of an `H × W × D` feature map at normalized `(u, v)`
/// points, one row per point.
///
/// A point maps to pixel coordinates `(u·(W−1), v·(H−1))`; coordinates
/// outside the map are clamped to its border.
pub fn sample_bilinear(map: ArrayView3<f64>, pts: &[[f64; 2]]) -> Result<Array2<f64>> {
    let (h, w, d) = map.dim();
    if h == 0 || w == 0 || d == 0 {
        return Err(invalid(format!(
            "feature map must be non-empty, got {h}×{w}×{d}"
        )));
    }
    if let Some(p) = pts.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(invalid(format!("non-finite sample point {p:?}")));
    }
    let mut out = Array2::zeros((pts.len(), d));
    for (row, &[u, v]) in pts.iter().enumerate() {
        let px = (u * (w - 1) as f64).clamp(0.0, (w - 1) as f64);
        let py = (v * (h - 1) as f64).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (px.floor() as usize, py.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (tx, ty) = (px - x0 as f64, py - y0 as f64);
        let corners = [
            (y0, x0, (1.0 - tx) * (1.0 - ty)),
            (y0, x1, tx * (1.0 - ty)),
            (y1, x0, (1.0 - tx) * ty),
            (y1, x1, tx * ty),
        ];
        let mut dst = out.row_mut(row);
        for (y, x, wgt) in corners {
            if wgt != 0.0 {
                dst.scaled_add(wgt, &map.slice(ndarray::s![y, x, ..]));
            }
        }
    }
    Ok(out)
}
