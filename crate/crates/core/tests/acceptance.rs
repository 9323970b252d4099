//! Acceptance gate: one `[PASS]` or `[FAIL]` line per criterion, exit status
//! 1 if any criterion fails.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{brute_force_splat, grid_max_diff, Support};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatvox::aggregate::{
    dga_occupancy, dga_semantics, dga_semantics_unsimplified, splat, SplatMode, VoxelGridSpec,
};
use splatvox::aggregate::{Grid3, LabelGrid};
use splatvox::attention::{
    complexity_bench, gca_forward_with_attention, gca_reference, FeatureSet, GcaWeights,
};
use splatvox::gaussian::{GaussianPrimitive, Point3, Quaternion, Scene};
use splatvox::io::generate::{generate_scene, SceneKind};
use splatvox::io::read_scene;
use splatvox::metrics::{
    combine_layer_losses, depth_metrics, iou_miou, prob_scale_loss, scal_geo_loss, LayerOccupancies,
};
use splatvox::spatial::{build_index, DEFAULT_KAPPA};

type Check<'a> = Box<dyn Fn() -> Result<Outcome, String> + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli(args: &[&str], dir: &Path) -> Result<(HashMap<String, String>, Duration), String> {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_splatvox"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPLATVOX_THREADS")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    let kv = String::from_utf8_lossy(&out.stdout)
        .split_whitespace()
        .filter_map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
        })
        .collect();
    Ok((kv, elapsed))
}

fn num(kv: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    kv.get(key)
        .ok_or_else(|| format!("missing {key}"))?
        .parse()
        .map_err(|e| format!("{key}: {e}"))
}

fn random_primitive(
    rng: &mut ChaCha8Rng,
    around: Point3,
    spread: f64,
    c: usize,
) -> GaussianPrimitive {
    let mean = around + Vector3::from_fn(|_, _| rng.random_range(-spread..spread));
    let scale = Vector3::from_fn(|_, _| rng.random_range(0.02..0.2));
    let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    GaussianPrimitive::new(
        mean,
        scale,
        Quaternion::from_array(q.map(|v| v / n)),
        rng.random_range(0.05..0.95),
        (0..c - 1).map(|_| rng.random_range(-4.0..4.0)).collect(),
    )
    .unwrap()
}

fn c1_floater(dir: &Path) -> Result<Outcome, String> {
    let (kv, t) = cli(
        &["demo-floater", "--opacity", "0.01", "--cluster", "50"],
        dir,
    )?;
    let pgs = num(&kv, "pgs_posterior")?;
    let dga = num(&kv, "dga_occupied_prob")?;
    Ok(outcome(
        pgs >= 0.99 && dga <= 0.011 && t < Duration::from_secs(1),
        format!(
            "pgs_posterior={pgs:.6} dga_class_prob={dga:.6} runtime={:.3}s",
            t.as_secs_f64()
        ),
    ))
}

fn c2_normalization() -> Result<Outcome, String> {
    let t = Instant::now();
    let spec = VoxelGridSpec {
        dims: [20, 20, 12],
        ..Default::default()
    };
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..20 {
        let count = rng.random_range(1..=300);
        let kind = SceneKind::Random {
            count,
            spec,
            scale_range: (0.01, 0.16),
        };
        let scene = generate_scene(&kind, 12, seed).map_err(|e| e.to_string())?;
        let index = build_index(scene.primitives(), DEFAULT_KAPPA).map_err(|e| e.to_string())?;
        for mode in [SplatMode::Pgs, SplatMode::Dga] {
            let grid = splat(&scene, &spec, mode, &index).map_err(|e| e.to_string())?;
            for v in grid.voxels() {
                worst = worst.max((v.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 1e-6 && secs < 30.0,
        format!("max |sum-1|={worst:.2e} runtime={secs:.2}s"),
    ))
}

fn c3_culling() -> Result<Outcome, String> {
    let t = Instant::now();
    let spec = VoxelGridSpec {
        dims: [30, 30, 18],
        ..Default::default()
    };
    let (mut worst, mut untruncated) = (0.0f64, 0.0f64);
    for seed in 0..10 {
        let kind = SceneKind::Random {
            count: 200,
            spec,
            scale_range: (0.01, 0.16),
        };
        let scene = generate_scene(&kind, 12, 300 + seed).map_err(|e| e.to_string())?;
        let index = build_index(scene.primitives(), DEFAULT_KAPPA).map_err(|e| e.to_string())?;
        for (mode, dga) in [(SplatMode::Pgs, false), (SplatMode::Dga, true)] {
            let grid = splat(&scene, &spec, mode, &index).map_err(|e| e.to_string())?;
            let brute = brute_force_splat(&scene, &spec, dga, Support::Truncated(DEFAULT_KAPPA));
            worst = worst.max(grid_max_diff(&grid, &brute));
            if seed == 0 {
                let full = brute_force_splat(&scene, &spec, dga, Support::Full);
                untruncated = untruncated.max(grid_max_diff(&grid, &full));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 1e-6 && secs < 60.0,
        format!(
            "max diff vs exhaustive 3-sigma scan={worst:.2e} (untruncated mixture differs by {untruncated:.2e}) runtime={secs:.2}s"
        ),
    ))
}

fn c4_opacity() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut identical = 0;
    let mut min_slope = f64::INFINITY;
    for _ in 0..100 {
        let x = Point3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        let n = rng.random_range(1..12);
        let prims: Vec<_> = (0..n)
            .map(|_| random_primitive(&mut rng, Point3::zeros(), 0.3, 6))
            .collect();
        let scene = Scene::new(6, prims.clone()).unwrap();
        let ids: Vec<usize> = (0..n).collect();
        let base = dga_semantics(&x, &ids, &scene);
        let shuffled: Vec<_> = prims
            .iter()
            .map(|g| g.with_opacity(rng.random_range(0.0..=1.0)).unwrap())
            .collect();
        let other = dga_semantics(&x, &ids, &Scene::new(6, shuffled).unwrap());
        if base
            .as_slice()
            .iter()
            .zip(other.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits())
        {
            identical += 1;
        }
        let alpha = dga_occupancy(&x, &ids, &scene);
        for i in 0..n {
            let mut bumped = prims.clone();
            bumped[i] = prims[i].with_opacity(prims[i].opacity() + 1e-4).unwrap();
            let a2 = dga_occupancy(&x, &ids, &Scene::new(6, bumped).unwrap());
            min_slope = min_slope.min((a2 - alpha) / 1e-4);
        }
    }
    Ok(outcome(
        identical == 100 && min_slope >= -1e-8,
        format!(
            "bit-identical semantics {identical}/100, min d(occupancy)/d(opacity)={min_slope:.3e}"
        ),
    ))
}

fn c5_derivation() -> Result<Outcome, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = Point3::from_fn(|_, _| rng.random_range(-0.2..0.2));
        let n = rng.random_range(1..15);
        let prims: Vec<_> = (0..n)
            .map(|_| random_primitive(&mut rng, Point3::zeros(), 0.4, 8))
            .collect();
        let scene = Scene::new(8, prims).unwrap();
        let ids: Vec<usize> = (0..n).collect();
        let a = dga_semantics(&x, &ids, &scene);
        let b = dga_semantics_unsimplified(&x, &ids, &scene);
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(outcome(
        worst <= 1e-9,
        format!("max diff={worst:.2e} over 100 instances"),
    ))
}

fn c6_gca() -> Result<Outcome, String> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut worst, mut worst_row) = (0.0f64, 0.0f64);
    for i in 0..100u64 {
        let g = [1, 2, 4, 8][(i % 4) as usize];
        let l = [1, 2, 4][((i / 4) % 3) as usize];
        let d = 8 * rng.random_range(1..=4);
        let n = rng.random_range(1..=48);
        let feats = FeatureSet::random(n, d, l, 1000 + i);
        let w = GcaWeights::random(d, g, 2000 + i).map_err(|e| e.to_string())?;
        let fast = gca_forward_with_attention(&feats, &w).map_err(|e| e.to_string())?;
        let slow = gca_reference(&feats, &w).map_err(|e| e.to_string())?;
        for (a, b) in fast.features.iter().zip(slow.iter()) {
            worst = worst.max((a - b).abs());
        }
        for row in fast.attention.lanes(ndarray::Axis(2)) {
            worst_row = worst_row.max((row.sum() - 1.0).abs());
        }
    }
    let ns: Vec<usize> = (10..=16).map(|p| 1usize << p).collect();
    let table = complexity_bench(&ns, 96, 4, 4, 3, 0).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        worst <= 1e-6 && worst_row <= 1e-6 && (0.8..=1.2).contains(&table.slope) && secs < 120.0,
        format!(
            "max diff={worst:.2e} max |row sum-1|={worst_row:.2e} slope={:.3} runtime={secs:.1}s",
            table.slope
        ),
    ))
}

fn c7_layer_weighting() -> Result<Outcome, String> {
    let ell = 0.8125;
    let four = combine_layer_losses(&[ell; 4]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = Grid3::from_vec(
        [6, 5, 4],
        (0..120).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let y = Grid3::from_vec([6, 5, 4], (0..120).map(|_| rng.random_bool(0.3)).collect()).unwrap();
    let single = prob_scale_loss(&LayerOccupancies::new(vec![p.clone()], y.clone()).unwrap())
        .map_err(|e| e.to_string())?;
    let direct = scal_geo_loss(&p, &y).map_err(|e| e.to_string())?.value;
    let four_grids = prob_scale_loss(&LayerOccupancies::new(vec![p.clone(); 4], y).unwrap())
        .map_err(|e| e.to_string())?;
    let err = (four - 1.75 * ell).abs();
    let err_grids = (four_grids - 1.75 * direct).abs();
    Ok(outcome(
        err <= 1e-12 && err_grids <= 1e-12 && single == direct,
        format!(
            "n=4 error={err:.1e} (grids {err_grids:.1e}), n=1 exact={}",
            single == direct
        ),
    ))
}

fn c8_initialization(dir: &Path) -> Result<Outcome, String> {
    cli(
        &[
            "gen-depth",
            "--height",
            "480",
            "--width",
            "640",
            "--value",
            "2.0",
            "--out",
            "depth.sscg",
        ],
        dir,
    )?;
    let (kv, _) = cli(
        &[
            "init-from-depth",
            "--depth",
            "depth.sscg",
            "--intrinsics",
            "500,500,320,240",
            "--grid",
            "30x40",
            "--out",
            "init.json",
        ],
        dir,
    )?;
    let scene = read_scene(&dir.join("init.json")).map_err(|e| e.to_string())?;
    let in_range = scene
        .primitives()
        .iter()
        .all(|g| g.scale().iter().all(|s| (0.01..=0.16).contains(s)));
    Ok(outcome(
        scene.len() == 1200 && in_range,
        format!(
            "primitives={} (reported {}) scales in [0.01, 0.16]: {in_range}",
            scene.len(),
            kv["primitives"]
        ),
    ))
}

fn c9_metrics() -> Result<Outcome, String> {
    // Same fixture as the unit test: classes {0, 1, 2}, last row masked out.
    let gt = LabelGrid::new(
        [4, 4, 1],
        3,
        vec![1, 1, 0, 0, 1, 2, 2, 0, 0, 2, 2, 0, 2, 2, 2, 2],
    )
    .unwrap();
    let pred = LabelGrid::new(
        [4, 4, 1],
        3,
        vec![1, 0, 0, 2, 1, 2, 1, 0, 0, 2, 2, 2, 0, 0, 0, 0],
    )
    .unwrap();
    let mask = Grid3::from_vec([4, 4, 1], (0..16).map(|i| i < 12).collect()).unwrap();
    let r = iou_miou(&pred, &gt, &mask).map_err(|e| e.to_string())?;
    let fixture = r.iou == 6.0 / 9.0 && r.per_class == vec![Some(0.5), Some(0.5)] && r.miou == 0.5;

    let pts: Vec<Point3> = (0..10)
        .map(|i| Point3::new(i as f64 * 0.1, 0.5, 2.0 - i as f64 * 0.05))
        .collect();
    let d: Vec<f64> = (1..=30).map(|i| i as f64 * 0.2).collect();
    let same = depth_metrics(&pts, &pts, &d, &d).map_err(|e| e.to_string())?;
    let identical = (same.rmse, same.delta1, same.chamfer_l1) == (0.0, 1.0, 0.0);
    let scaled: Vec<f64> = d.iter().map(|v| 1.3 * v).collect();
    let delta = depth_metrics(&pts, &pts, &scaled, &d)
        .map_err(|e| e.to_string())?
        .delta1;
    Ok(outcome(
        fixture && identical && delta == 0.0,
        format!(
            "fixture iou={:.4} miou={} identical=({}, {}, {}) delta1@1.3x={delta}",
            r.iou, r.miou, same.rmse, same.delta1, same.chamfer_l1
        ),
    ))
}

fn c10_efficiency(dir: &Path) -> Result<Outcome, String> {
    cli(
        &[
            "gen-scene",
            "--kind",
            "random",
            "--count",
            "1200",
            "--seed",
            "10",
            "--out",
            "bench.json",
        ],
        dir,
    )?;
    let out = Command::new(env!("CARGO_BIN_EXE_splatvox"))
        .args([
            "bench-splat",
            "--scene",
            "bench.json",
            "--repeat",
            "3",
            "--thread-counts",
            "1,8",
        ])
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let single = text
        .lines()
        .find_map(|l| l.strip_prefix("threads=1 mean_s="))
        .and_then(|r| r.split_whitespace().next())
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or("missing single-thread timing")?;
    let kv: HashMap<String, String> = text
        .split_whitespace()
        .filter_map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
        })
        .collect();
    let speedup = num(&kv, "speedup_vs_first")?;
    let identical = kv.get("identical").map(String::as_str) == Some("true");
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(outcome(
        single < 5.0 && speedup >= 2.0 && identical,
        format!(
            "single-thread mean={single:.3}s speedup@8={speedup:.2}x identical={identical} peak_rss_kib={} cores={cores}",
            kv.get("peak_rss_kib").map_or("?", String::as_str)
        ),
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let dir = dir.path();
    let criteria: Vec<(&str, Check)> = vec![
        ("floater pathology", Box::new(|| c1_floater(dir))),
        ("aggregator normalization", Box::new(c2_normalization)),
        ("culling soundness", Box::new(c3_culling)),
        ("DGA opacity invariance and gating", Box::new(c4_opacity)),
        (
            "simplified vs double-sum semantics",
            Box::new(c5_derivation),
        ),
        ("GCA correctness and complexity", Box::new(c6_gca)),
        (
            "layer weighting of the scale loss",
            Box::new(c7_layer_weighting),
        ),
        (
            "initialization constants",
            Box::new(|| c8_initialization(dir)),
        ),
        ("metrics sanity", Box::new(c9_metrics)),
        ("efficiency reporting", Box::new(|| c10_efficiency(dir))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        failed += usize::from(!o.pass);
        println!(
            "[{}] {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
