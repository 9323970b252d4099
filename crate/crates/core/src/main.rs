use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use splatvox::aggregate::{
    argmax_labels, floater_experiment, splat, Grid3, SplatMode, VoxelGridSpec,
};
use splatvox::attention::{complexity_bench, dense_attention_bench, BenchTable};
use splatvox::depth_init::{init_from_depth, CameraIntrinsics, DepthMap};
use splatvox::gaussian::Point3;
use splatvox::io::generate::{default_cluster_center, generate_scene, SceneKind};
use splatvox::io::{read_scene, write_scene, GridFile, GridKind};
use splatvox::metrics::iou_miou;
use splatvox::spatial::build_index;
use splatvox::{Error, Result};

#[derive(Parser)]
#[command(
    name = "splatvox",
    version,
    about = "Gaussian-to-voxel semantic splatting experiments"
)]
struct Cli {
    /// Worker threads for splatting; 0 picks one per core.
    #[arg(long, global = true, env = "SPLATVOX_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Voxel counts along x, y and z.
    #[arg(long, default_value = "60x60x36", value_parser = parse_dims3)]
    grid_dims: [usize; 3],
    /// Voxel edge length in meters.
    #[arg(long, default_value_t = 0.08)]
    voxel_size: f64,
    /// Minimum corner of the grid, `x,y,z`.
    #[arg(long, default_value = "0,0,0", value_parser = parse_point)]
    origin: Point3,
}

impl GridArgs {
    fn spec(&self) -> Result<VoxelGridSpec> {
        VoxelGridSpec::new(self.origin, self.voxel_size, self.grid_dims)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Splat a scene file into a probability grid and a label grid.
    Splat {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value = "dga")]
        mode: SplatMode,
        /// Neighborhood radius in standard deviations.
        #[arg(long, default_value_t = 3.0)]
        kappa: f64,
        /// Probability grid output.
        #[arg(long)]
        out: PathBuf,
        /// Label grid output; defaults to the probability path plus `.labels`.
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Score a predicted grid against a ground-truth label grid.
    Eval {
        /// Label grid, or probability grid reduced by argmax.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Label grid whose non-zero voxels are scored; all voxels when absent.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        num_classes: usize,
    },
    /// Lift a depth map into an initial scene file.
    InitFromDepth {
        /// Depth map stored as an `SSCG` f32-depth file.
        #[arg(long)]
        depth: PathBuf,
        /// `fx,fy,cx,cy` in pixels.
        #[arg(long, value_parser = parse_intrinsics)]
        intrinsics: [f64; 4],
        /// Reference points, `rows x cols`.
        #[arg(long, default_value = "30x40", value_parser = parse_dims2)]
        grid: [usize; 2],
        #[arg(long, default_value = "0.01:0.16", value_parser = parse_range)]
        scale_range: (f64, f64),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        num_classes: usize,
        #[command(flatten)]
        volume: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate both aggregators at an isolated low-opacity primitive.
    DemoFloater {
        #[arg(long, default_value_t = 0.01)]
        opacity: f64,
        #[arg(long, default_value_t = 50)]
        cluster: usize,
    },
    /// Time group cross-attention over a range of point counts.
    GcaBench {
        /// `a..b` doubles from `a` up to `b`; a comma list is taken as is.
        #[arg(long, default_value = "1024..65536", value_parser = parse_sizes)]
        n: Sizes,
        #[arg(long, default_value_t = 96)]
        d: usize,
        #[arg(long, default_value_t = 4)]
        l: usize,
        #[arg(long, default_value_t = 4)]
        g: usize,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also time quadratic all-pairs attention on these sizes.
        #[arg(long, value_parser = parse_sizes)]
        dense: Option<Sizes>,
    },
    /// Time splatting of a scene file and report latency and peak memory.
    BenchSplat {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = "dga")]
        mode: SplatMode,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        #[arg(long, default_value_t = 3.0)]
        kappa: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Pool sizes to compare, e.g. `1,8`; the first one is the baseline.
        /// Defaults to the global thread setting.
        #[arg(long, value_delimiter = ',')]
        thread_counts: Vec<usize>,
    },
    /// Write a synthetic scene file.
    GenScene {
        /// random, cluster_plus_outlier or planar_room.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        num_classes: usize,
        /// Primitive count for `random`.
        #[arg(long)]
        count: Option<usize>,
        /// Cluster size for `cluster_plus_outlier`.
        #[arg(long)]
        cluster: Option<usize>,
        /// Outlier opacity for `cluster_plus_outlier`.
        #[arg(long)]
        opacity: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a constant depth map as an `SSCG` f32-depth file.
    GenDepth {
        #[arg(long, default_value_t = 480)]
        height: usize,
        #[arg(long, default_value_t = 640)]
        width: usize,
        /// Depth in meters.
        #[arg(long, default_value_t = 2.0)]
        value: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_dims<const N: usize>(s: &str) -> std::result::Result<[usize; N], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != N {
        return Err(format!("expected {N} sizes separated by 'x', got {s:?}"));
    }
    let mut out = [0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
        if *o == 0 {
            return Err(format!("sizes must be positive, got {s:?}"));
        }
    }
    Ok(out)
}

fn parse_dims3(s: &str) -> std::result::Result<[usize; 3], String> {
    parse_dims::<3>(s)
}

fn parse_dims2(s: &str) -> std::result::Result<[usize; 2], String> {
    parse_dims::<2>(s)
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_point(s: &str) -> std::result::Result<Point3, String> {
    parse_floats::<3>(s).map(Point3::from)
}

fn parse_intrinsics(s: &str) -> std::result::Result<[f64; 4], String> {
    parse_floats::<4>(s)
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected min:max, got {s:?}"))?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

#[derive(Clone)]
struct Sizes(Vec<usize>);

fn parse_sizes(s: &str) -> std::result::Result<Sizes, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let sizes = if let Some((a, b)) = s.split_once("..") {
        let (mut n, end) = (num(a)?, num(b)?);
        if n == 0 || n > end {
            return Err(format!("range {s:?} must satisfy 0 < start ≤ end"));
        }
        let mut v = Vec::new();
        while n <= end {
            v.push(n);
            n *= 2;
        }
        v
    } else {
        s.split(',')
            .map(num)
            .collect::<std::result::Result<Vec<_>, _>>()?
    };
    if sizes.contains(&0) {
        return Err("sizes must be positive".into());
    }
    Ok(Sizes(sizes))
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot build a pool of {threads} threads: {e}")))
}

fn default_labels_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

fn read_label_grid(path: &Path, num_classes: usize) -> Result<splatvox::aggregate::LabelGrid> {
    let file = GridFile::read(path)?;
    match file.kind() {
        GridKind::Label => file.to_labels(num_classes),
        GridKind::Prob => Ok(argmax_labels(&file.to_probs()?)),
        GridKind::Depth => Err(Error::InvalidInput(format!(
            "{} holds a depth map, not a grid",
            path.display()
        ))),
    }
}

/// Peak resident set size of this process in KiB, when the platform reports it.
fn peak_rss_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn print_table(prefix: &str, t: &BenchTable) {
    for r in &t.rows {
        println!("{prefix}n={} seconds={:?}", r.n, r.seconds);
    }
    println!("{prefix}slope={:?}", t.slope);
}

fn run(cli: Cli) -> Result<()> {
    let pool = build_pool(cli.threads)?;
    match cli.command {
        Command::Splat {
            scene,
            grid,
            mode,
            kappa,
            out,
            labels_out,
        } => {
            let scene = read_scene(&scene)?;
            let spec = grid.spec()?;
            let index = build_index(scene.primitives(), kappa)?;
            let probs = pool.install(|| splat(&scene, &spec, mode, &index))?;
            let labels = argmax_labels(&probs);
            GridFile::from_probs(&probs, &spec)?.write(&out)?;
            let labels_path = labels_out.unwrap_or_else(|| default_labels_path(&out));
            GridFile::from_labels(&labels, &spec)?.write(&labels_path)?;
            let occupied = labels.as_slice().iter().filter(|&&l| l != 0).count();
            println!(
                "primitives={}\nvoxels={}\noccupied={occupied}",
                scene.len(),
                spec.voxel_count()
            );
            println!(
                "prob_grid={}\nlabel_grid={}",
                out.display(),
                labels_path.display()
            );
        }
        Command::Eval {
            pred,
            gt,
            mask,
            num_classes,
        } => {
            let pred = read_label_grid(&pred, num_classes)?;
            let gt = read_label_grid(&gt, num_classes)?;
            let mask = match mask {
                Some(m) => read_label_grid(&m, 256)?.occupied(),
                None => Grid3::filled(gt.dims(), true),
            };
            print!("{}", iou_miou(&pred, &gt, &mask)?.to_key_values());
        }
        Command::InitFromDepth {
            depth,
            intrinsics: [fx, fy, cx, cy],
            grid,
            scale_range,
            seed,
            num_classes,
            volume,
            out,
        } => {
            let depth = GridFile::read(&depth)?.to_depth()?;
            let k = CameraIntrinsics::new(fx, fy, cx, cy, depth.width(), depth.height())?;
            let spec = volume.spec()?;
            let scene = init_from_depth(
                &depth,
                &k,
                (grid[0], grid[1]),
                &spec,
                num_classes,
                scale_range,
                seed,
            )?;
            write_scene(&out, &scene)?;
            println!(
                "primitives={}\nreference_points={}",
                scene.len(),
                grid[0] * grid[1]
            );
        }
        Command::DemoFloater { opacity, cluster } => {
            print!("{}", floater_experiment(cluster, opacity)?.to_key_values());
        }
        Command::GcaBench {
            n,
            d,
            l,
            g,
            repeat,
            seed,
            dense,
        } => {
            println!("d={d} l={l} g={g}");
            print_table("", &complexity_bench(&n.0, d, l, g, repeat, seed)?);
            if let Some(sizes) = dense {
                print_table("dense_", &dense_attention_bench(&sizes.0, d, repeat, seed)?);
            }
        }
        Command::BenchSplat {
            scene,
            mode,
            repeat,
            kappa,
            grid,
            thread_counts,
        } => {
            let scene = read_scene(&scene)?;
            let spec = grid.spec()?;
            let counts = if thread_counts.is_empty() {
                vec![cli.threads]
            } else {
                thread_counts
            };
            let mut baseline: Option<(f64, Vec<u64>)> = None;
            let mut identical = true;
            println!(
                "primitives={} voxels={} mode={mode}",
                scene.len(),
                spec.voxel_count()
            );
            for threads in counts {
                let pool = build_pool(threads)?;
                let mut times = Vec::with_capacity(repeat.max(1));
                let mut bits = Vec::new();
                for _ in 0..repeat.max(1) {
                    let t = Instant::now();
                    let index = build_index(scene.primitives(), kappa)?;
                    let probs = pool.install(|| splat(&scene, &spec, mode, &index))?;
                    times.push(t.elapsed().as_secs_f64());
                    bits = probs.as_slice().iter().map(|p| p.to_bits()).collect();
                }
                let (mean, stdev) = mean_stdev(&times);
                println!(
                    "threads={} mean_s={mean:?} stdev_s={stdev:?}",
                    pool.current_num_threads()
                );
                match &baseline {
                    None => baseline = Some((mean, bits)),
                    Some((base_mean, base_bits)) => {
                        identical &= *base_bits == bits;
                        println!("speedup_vs_first={:?}", base_mean / mean);
                    }
                }
            }
            println!("identical={identical}");
            match peak_rss_kib() {
                Some(kib) => println!("peak_rss_kib={kib}"),
                None => println!("peak_rss_kib=unknown"),
            }
        }
        Command::GenScene {
            kind,
            seed,
            num_classes,
            count,
            cluster,
            opacity,
            grid,
            out,
        } => {
            let spec = grid.spec()?;
            let kind = match SceneKind::from_name(&kind)? {
                SceneKind::Random {
                    count: c,
                    scale_range,
                    ..
                } => SceneKind::Random {
                    count: count.unwrap_or(c),
                    spec,
                    scale_range,
                },
                SceneKind::ClusterPlusOutlier {
                    cluster_size,
                    outlier_opacity,
                    ..
                } => SceneKind::ClusterPlusOutlier {
                    cluster_size: cluster.unwrap_or(cluster_size),
                    outlier_opacity: opacity.unwrap_or(outlier_opacity),
                    center: default_cluster_center(),
                },
                SceneKind::PlanarRoom { .. } => SceneKind::PlanarRoom { spec },
            };
            let scene = generate_scene(&kind, num_classes, seed)?;
            write_scene(&out, &scene)?;
            println!("primitives={}", scene.len());
        }
        Command::GenDepth {
            height,
            width,
            value,
            out,
        } => {
            GridFile::from_depth(&DepthMap::constant(height, width, value)?)?.write(&out)?;
            println!("pixels={}", height * width);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
