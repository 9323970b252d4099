use std::time::Instant;

use ndarray::Array2;

use super::gca::{gca_forward, FeatureSet, GcaWeights};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Fastest of the repeats, in seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln t` against `ln N`.
    pub slope: f64,
}

impl BenchTable {
    fn from_rows(rows: Vec<BenchRow>) -> Result<Self> {
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.seconds)).collect();
        let slope = log_log_slope(&pts)?;
        Ok(Self { rows, slope })
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(invalid("a slope needs at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(invalid("log-log fit needs positive values"));
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("all sizes are equal"));
    }
    Ok(sxy / sxx)
}

fn fastest<F: FnMut()>(repeats: usize, mut f: F) -> f64 {
    (0..repeats.max(1))
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Times [`gca_forward`] for each point count in `ns` on seeded random
/// features and weights.
pub fn complexity_bench(
    ns: &[usize],
    d: usize,
    l: usize,
    g: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchTable> {
    let w = GcaWeights::random(d, g, seed)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let feats = FeatureSet::random(n, d, l, seed ^ n as u64);
        gca_forward(&feats, &w)?;
        let seconds = fastest(repeats, || {
            std::hint::black_box(gca_forward(&feats, &w).expect("validated above"));
        });
        rows.push(BenchRow { n, seconds });
    }
    BenchTable::from_rows(rows)
}

/// Time with `2g` groups divided by time with `g` groups at a fixed size.
pub fn group_time_ratio(
    n: usize,
    d: usize,
    l: usize,
    g: usize,
    repeats: usize,
    seed: u64,
) -> Result<f64> {
    let feats = FeatureSet::random(n, d, l, seed);
    let time = |groups: usize| -> Result<f64> {
        let w = GcaWeights::random(d, groups, seed)?;
        gca_forward(&feats, &w)?;
        Ok(fastest(repeats, || {
            std::hint::black_box(gca_forward(&feats, &w).expect("validated above"));
        }))
    };
    let base = time(g)?;
    Ok(time(2 * g)? / base)
}

/// Single-head dot-product attention in which every point attends to every
/// other point. Quadratic in the point count; a timing comparator only.
pub fn dense_attention(q: &Array2<f64>, k: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let (n, d) = q.dim();
    let mut out = Array2::zeros((n, v.ncols()));
    let mut scores = vec![0.0; k.nrows()];
    for i in 0..n {
        let qi = q.row(i);
        for (j, s) in scores.iter_mut().enumerate() {
            *s = qi.dot(&k.row(j)) / (d as f64).sqrt();
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in scores.iter_mut() {
            *s = (*s - max).exp();
            total += *s;
        }
        let mut row = out.row_mut(i);
        for (j, s) in scores.iter().enumerate() {
            row.scaled_add(s / total, &v.row(j));
        }
    }
    out
}

pub fn dense_attention_bench(
    ns: &[usize],
    d: usize,
    repeats: usize,
    seed: u64,
) -> Result<BenchTable> {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let f = FeatureSet::random(n, d, 2, seed ^ n as u64);
        let (q, kv) = (f.depth(), &f.scales()[0]);
        let seconds = fastest(repeats, || {
            std::hint::black_box(dense_attention(q, kv, kv));
        });
        rows.push(BenchRow { n, seconds });
    }
    BenchTable::from_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let pts: Vec<(f64, f64)> = (1..6)
            .map(|i| (2f64.powi(i), 3.0 * 2f64.powi(2 * i)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(log_log_slope(&pts[..1]).is_err());
        assert!(log_log_slope(&[(1.0, 0.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn dense_attention_uniform_keys() {
        let q = Array2::from_shape_fn((3, 2), |(i, j)| (i + j) as f64);
        let k = Array2::zeros((4, 2));
        let v = Array2::from_shape_fn((4, 1), |(i, _)| i as f64);
        let out = dense_attention(&q, &k, &v);
        assert!(out.iter().all(|&x| (x - 1.5).abs() < 1e-12));
    }

    #[test]
    fn small_bench_runs() {
        let t = complexity_bench(&[64, 128], 8, 2, 2, 1, 0).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.slope.is_finite());
    }
}
