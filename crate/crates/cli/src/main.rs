//! `trisplat` command line: synthetic scenes, training, rendering, density
//! control, plane extraction and evaluation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use trisplat::appearance::{render_appearance, spawn_soup};
use trisplat::control::{orient_normals, prune_pass, split_pass, ContributionStats, GaussianField, VisibilityRecords};
use trisplat::error::Error;
use trisplat::eval::{evaluate, EvalOptions};
use trisplat::io::checkpoint::{read_checkpoint, write_checkpoint};
use trisplat::io::image::{write_image, ColorImage};
use trisplat::io::pfm::{write_pfm, PfmImage};
use trisplat::io::ply::{write_ply, PlyFormat, PointCloud};
use trisplat::io::{read_text, write_bytes};
use trisplat::planar::{extract_lod_planes, sample_oriented_points, LoDSchedule};
use trisplat::render::{render, RenderSettings};
use trisplat::scene::{load_scene, save_scene, SceneBundle};
use trisplat::synthetic::{gen_synthetic, SceneKind, SyntheticOptions};
use trisplat::train::{init_from_points, RunManifest, TrainConfig, Trainer};
use trisplat::TriangleSoup;

#[derive(Parser)]
#[command(name = "trisplat", version, about = "Triangle-soup splatting pipeline")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Coarse,
    Fine,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a ray-traced synthetic scene bundle with ground truth.
    GenSynthetic {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 16)]
        views: usize,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 0.0)]
        point_noise: f64,
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        #[arg(long, default_value_t = 1.0)]
        depth_scale: f64,
        #[arg(long, default_value_t = 0.0)]
        depth_shift: f64,
    },
    /// Trains a soup; writes the checkpoint and `<out>.manifest.json`.
    Train {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        stage: Stage,
        /// key=value file overriding TrainConfig defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Starting checkpoint; without it the soup is initialised from the SfM points.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Renders one camera of a scene.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        camera_id: u32,
        #[arg(long)]
        out_depth: Option<PathBuf>,
        #[arg(long)]
        out_normal: Option<PathBuf>,
        #[arg(long)]
        out_rgb: Option<PathBuf>,
    },
    /// One split pass; the field comes from the spawned surfels when
    /// `--field-from-appearance` is set, otherwise it is empty.
    Densify {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        field_from_appearance: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// One prune pass with statistics gathered over the scene's training views.
    Prune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flips triangles facing away from most cameras that see them.
    OrientNormals {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writes a labelled PLY and a `<out>.txt` plane list for one LoD.
    ExtractPlanes {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
        lod: u8,
        #[arg(long)]
        out: PathBuf,
        /// Sampled points per unit area.
        #[arg(long, default_value_t = 5000.0)]
        density: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Chamfer, plane counts and held-out PSNR; writes text and `<report>.json`.
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        samples: usize,
    },
}

struct Failure {
    class: &'static str,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { class: e.class(), msg: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn failure(class: &'static str, msg: impl Into<String>) -> Failure {
    Failure { class, msg: msg.into() }
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig, Failure> {
    match path {
        Some(p) => Ok(TrainConfig::from_text(&read_text(p)?).map_err(|e| failure(e.class(), format!("{}: {e}", p.display())))?),
        None => Ok(TrainConfig::default()),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn json_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    text.into_bytes()
}

fn settings_for(bundle: &SceneBundle) -> RenderSettings {
    RenderSettings::for_scene(bundle.diagonal())
}

fn train(scene: &Path, stage: Stage, config: Option<&Path>, init: Option<&Path>, out: &Path) -> Outcome {
    let bundle = load_scene(scene)?;
    let config = load_config(config)?;
    let soup = match init {
        Some(p) => read_checkpoint(p)?,
        None => init_from_points(&bundle.points, &config)?,
    };
    let mut trainer = Trainer::new(&bundle, config.clone())?;
    let soup = match stage {
        Stage::Coarse => trainer.coarse(soup)?,
        Stage::Fine => trainer.fine(soup)?,
        Stage::Both => {
            let s = trainer.coarse(soup)?;
            trainer.fine(s)?
        }
    };
    write_checkpoint(out, &soup)?;
    write_manifest(&with_suffix(out, ".manifest.json"), &config, &trainer.manifest)?;
    println!("wrote {} ({} triangles)", out.display(), soup.len());
    Ok(())
}

fn write_manifest(path: &Path, config: &TrainConfig, manifest: &RunManifest) -> Outcome {
    let value = serde_json::json!({ "config": config, "run": manifest });
    Ok(write_bytes(path, &json_bytes(&value))?)
}

fn camera_index(bundle: &SceneBundle, id: u32) -> Result<usize, Failure> {
    bundle.camera_index(id).ok_or_else(|| failure("UnknownCamera", format!("camera {id} not in scene")))
}

fn render_cmd(scene: &Path, checkpoint: &Path, camera_id: u32, depth: Option<&Path>, normal: Option<&Path>, rgb: Option<&Path>) -> Outcome {
    let bundle = load_scene(scene)?;
    let soup = read_checkpoint(checkpoint)?;
    let cam = &bundle.cameras[camera_index(&bundle, camera_id)?];
    let settings = settings_for(&bundle);
    let (w, h) = (cam.width, cam.height);
    if depth.is_some() || normal.is_some() {
        let out = render(&soup, cam, &settings);
        if let Some(p) = depth {
            write_pfm(p, &PfmImage::gray(w, h, &out.depth))?;
        }
        if let Some(p) = normal {
            write_pfm(p, &PfmImage::rgb(w, h, &out.normal))?;
        }
    }
    if let Some(p) = rgb {
        let app = render_appearance(&spawn_soup(&soup), cam, &settings);
        write_image(p, &ColorImage { width: w, height: h, pixels: app.color })?;
    }
    Ok(())
}

fn densify(checkpoint: &Path, from_appearance: bool, config: Option<&Path>, out: &Path) -> Outcome {
    let soup = read_checkpoint(checkpoint)?;
    let density = load_config(config)?.density();
    let field = if from_appearance { GaussianField::new(spawn_soup(&soup), density.normal_spread) } else { GaussianField::empty() };
    let (next, report) = split_pass(&soup, &field, &density);
    write_checkpoint(out, &next)?;
    println!("split {} of {} triangles -> {}", report.split, report.considered, next.len());
    Ok(())
}

fn gather(bundle: &SceneBundle, soup: &TriangleSoup) -> (ContributionStats, VisibilityRecords) {
    let settings = settings_for(bundle);
    let mut stats = ContributionStats::default();
    let mut vis = VisibilityRecords::default();
    for v in bundle.train_indices() {
        let out = render(soup, &bundle.cameras[v], &settings);
        stats.record(soup, &out);
        vis.record(soup, bundle.cameras[v].id, &out);
    }
    (stats, vis)
}

fn prune(checkpoint: &Path, scene: &Path, config: Option<&Path>, out: &Path) -> Outcome {
    let bundle = load_scene(scene)?;
    let soup = read_checkpoint(checkpoint)?;
    let density = load_config(config)?.density();
    let (mut stats, _) = gather(&bundle, &soup);
    let (next, report) = prune_pass(&soup, &mut stats, &density);
    write_checkpoint(out, &next)?;
    println!("removed {} low-contribution and {} unseen triangles -> {}", report.removed_low, report.removed_unseen, report.after);
    Ok(())
}

fn orient(checkpoint: &Path, scene: &Path, out: &Path) -> Outcome {
    let bundle = load_scene(scene)?;
    let soup = read_checkpoint(checkpoint)?;
    let (_, vis) = gather(&bundle, &soup);
    let (next, flips) = orient_normals(&soup, &bundle.cameras, &vis);
    write_checkpoint(out, &next)?;
    println!("flipped {flips} of {} triangles", next.len());
    Ok(())
}

fn extract_planes(checkpoint: &Path, lod: u8, out: &Path, density: f64, seed: u64) -> Outcome {
    let soup = read_checkpoint(checkpoint)?;
    let points = sample_oriented_points(&soup, density, seed);
    let schedule = LoDSchedule::default();
    let levels = extract_lod_planes(&points, &schedule)?;
    let planes = &levels.levels[lod as usize];
    let mut labels = vec![-1i32; points.len()];
    let mut text = format!("lod {lod}\npoints {}\nplanes {}\n", points.len(), planes.len());
    for (i, p) in planes.iter().enumerate() {
        for &k in &p.inliers {
            labels[k] = i as i32;
        }
        let n = p.n();
        text += &format!("plane {i} normal {:.6} {:.6} {:.6} offset {:.6} inliers {} pass {}\n", n.x, n.y, n.z, p.offset, p.inliers.len(), p.pass);
    }
    let cloud = PointCloud {
        positions: points.iter().map(|p| p.position).collect(),
        normals: Some(points.iter().map(|p| p.normal).collect()),
        labels: Some(labels),
        ..Default::default()
    };
    write_ply(out, &cloud, PlyFormat::BinaryLittleEndian)?;
    write_bytes(&with_suffix(out, ".txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn eval_cmd(scene: &Path, checkpoint: &Path, report_path: &Path, samples: usize) -> Outcome {
    let bundle = load_scene(scene)?;
    let soup = read_checkpoint(checkpoint)?;
    let report = evaluate(&bundle, &soup, &LoDSchedule::default(), &EvalOptions { gt_samples: samples, ..EvalOptions::default() })?;
    let text = report.to_text();
    write_bytes(report_path, text.as_bytes())?;
    let json = serde_json::to_value(&report).expect("serializable report");
    write_bytes(&with_suffix(report_path, ".json"), &json_bytes(&json))?;
    print!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| failure("Threads", e.to_string()))?;
    }
    match cli.command {
        Command::GenSynthetic { kind, seed, out, size, views, points, point_noise, outliers, depth_scale, depth_shift } => {
            let kind: SceneKind = kind.parse()?;
            let opts = SyntheticOptions { image_size: size, views, points, point_noise, outlier_fraction: outliers, depth_scale, depth_shift, ..SyntheticOptions::default() };
            let bundle = gen_synthetic(kind, seed, &opts);
            save_scene(&out, &bundle)?;
            println!("wrote {} ({} cameras, {} points)", out.display(), bundle.cameras.len(), bundle.points.len());
            Ok(())
        }
        Command::Train { scene, stage, config, init, out } => train(&scene, stage, config.as_deref(), init.as_deref(), &out),
        Command::Render { scene, checkpoint, camera_id, out_depth, out_normal, out_rgb } => render_cmd(&scene, &checkpoint, camera_id, out_depth.as_deref(), out_normal.as_deref(), out_rgb.as_deref()),
        Command::Densify { checkpoint, field_from_appearance, config, out } => densify(&checkpoint, field_from_appearance, config.as_deref(), &out),
        Command::Prune { checkpoint, scene, config, out } => prune(&checkpoint, &scene, config.as_deref(), &out),
        Command::OrientNormals { checkpoint, scene, out } => orient(&checkpoint, &scene, &out),
        Command::ExtractPlanes { checkpoint, lod, out, density, seed } => extract_planes(&checkpoint, lod, &out, density, seed),
        Command::Eval { scene, checkpoint, report, samples } => eval_cmd(&scene, &checkpoint, &report, samples),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("ERROR Usage: {}", line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("ERROR {}: {}", f.class, f.msg.replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
