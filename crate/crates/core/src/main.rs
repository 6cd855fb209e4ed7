//! Command-line interface for the insertion pipeline.
//!
//! Exit codes: 0 success, 1 input/schema/config error, 2 domain failure
//! (for example no ground plane), 3 internal invariant violation.

use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use rgbd_insert::config::{load_config, PipelineConfig};
use rgbd_insert::envmap::load_envmap_grid;
use rgbd_insert::error::{Error, Result};
use rgbd_insert::ground::{is_horizontal, select_ground};
use rgbd_insert::insertion::{compute_class_stats, load_catalog, load_stats};
use rgbd_insert::pipeline::{
    augment_dataset, augment_scene, run_bench, write_augmented_outputs,
};
use rgbd_insert::plane::extract_planes;
use rgbd_insert::scene::{backproject, load_scene};

#[derive(Parser)]
#[command(
    name = "rgbd-insert",
    version,
    about = "Physically plausible insertion of 3D objects into RGB-D scenes",
    arg_required_else_help = true
)]
struct Cli {
    /// JSON config file; command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print the fully resolved config as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,

    /// Master seed; all randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Placement strategy (constrained, random).
    #[arg(long, global = true)]
    placement: Option<String>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract planes from one scene and flag the ground plane.
    Planes {
        /// Scene manifest JSON.
        #[arg(long)]
        scene: PathBuf,
        /// Output JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute per-category height statistics over a scene list.
    Stats {
        /// Text file listing scene manifests, one per line.
        #[arg(long)]
        scenes: PathBuf,
        /// Categories to summarize.
        #[arg(long, value_delimiter = ',', required = true)]
        categories: Vec<String>,
        /// Output statistics JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Insert one object into one scene.
    Insert {
        /// Scene manifest JSON.
        #[arg(long)]
        scene: PathBuf,
        /// Asset catalog JSON.
        #[arg(long)]
        catalog: PathBuf,
        /// Class statistics JSON (from `stats`).
        #[arg(long)]
        stats: PathBuf,
        /// Environment-map grid file for this scene.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Directory for the augmented outputs.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Augment every scene in a list.
    Augment {
        /// Text file listing scene manifests, one per line.
        #[arg(long)]
        scenes: PathBuf,
        /// Asset catalog JSON.
        #[arg(long)]
        catalog: PathBuf,
        /// Class statistics JSON (from `stats`).
        #[arg(long)]
        stats: PathBuf,
        /// Directory holding one `{stem}.envg` grid per scene.
        #[arg(long)]
        grid_dir: Option<PathBuf>,
        /// Directory for the augmented outputs and summary.
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker count; outputs are identical for any value.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Time the placement search over synthetic rooms.
    Bench {
        /// Number of rooms.
        #[arg(long, default_value_t = 500)]
        count: u32,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion)
                || e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand =>
        {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let _ = e.print();
            std::process::exit(1);
        }
    };
    let code = match std::panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(err)) => {
            eprintln!("error: {}: {err}", err.reason_code());
            err.exit_code()
        }
        Err(_) => {
            eprintln!("error: Internal: unexpected panic");
            3
        }
    };
    std::process::exit(code);
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(placement) = &cli.placement {
        cfg.placement = placement.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Error::InvalidConfig(
            "a subcommand is required: planes, stats, insert, augment, or bench".into(),
        ));
    };
    match command {
        Command::Planes { scene, out } => cmd_planes(&scene, out.as_deref(), &cfg),
        Command::Stats { scenes, categories, out } => cmd_stats(&scenes, &categories, &out),
        Command::Insert { scene, catalog, stats, grid, out_dir } => {
            cmd_insert(&scene, &catalog, &stats, grid.as_deref(), &out_dir, &cfg)
        }
        Command::Augment { scenes, catalog, stats, grid_dir, out_dir, jobs } => {
            cmd_augment(&scenes, &catalog, &stats, grid_dir.as_deref(), &out_dir, jobs, &cfg)
        }
        Command::Bench { count, out } => cmd_bench(count, out.as_deref(), &cfg),
    }
}

fn require_seed(cfg: &PipelineConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| {
        Error::InvalidConfig("a master seed is required: pass --seed or set it in the config".into())
    })
}

/// Scene manifests listed one per line; blank lines and `#` comments are
/// skipped, relative paths resolve against the list file's directory.
fn read_scene_list(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(|line| {
            let p = Path::new(line);
            if p.is_absolute() { p.to_path_buf() } else { base.join(p) }
        })
        .collect())
}

fn write_or_print<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, json)?,
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct PlaneDumpEntry {
    normal: [f64; 3],
    offset: f64,
    mse: f64,
    inlier_count: usize,
    centroid: [f64; 3],
    is_horizontal: bool,
    is_ground: bool,
}

#[derive(Serialize)]
struct PlaneDump {
    planes: Vec<PlaneDumpEntry>,
    ground_index: Option<usize>,
}

fn cmd_planes(scene_path: &Path, out: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let scene = load_scene(scene_path)?;
    let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world)?;
    let planes = extract_planes(&cloud, &cfg.plane)?;
    let ground = select_ground(&planes, &cfg.ground);
    let ground_index = ground
        .as_ref()
        .ok()
        .and_then(|g| planes.iter().position(|p| std::ptr::eq(p, *g)));
    let dump = PlaneDump {
        planes: planes
            .iter()
            .enumerate()
            .map(|(i, p)| PlaneDumpEntry {
                normal: [p.normal.x, p.normal.y, p.normal.z],
                offset: p.offset,
                mse: p.mse,
                inlier_count: p.inlier_count(),
                centroid: [p.centroid.x, p.centroid.y, p.centroid.z],
                is_horizontal: is_horizontal(p, &cfg.ground),
                is_ground: Some(i) == ground_index,
            })
            .collect(),
        ground_index,
    };
    write_or_print(&dump, out)?;
    // The dump is still useful without a ground plane, but the command
    // reports the domain failure through its exit code.
    ground.map(|_| ())
}

fn cmd_stats(scenes_list: &Path, categories: &[String], out: &Path) -> Result<()> {
    let manifests = read_scene_list(scenes_list)?;
    let mut scenes = Vec::with_capacity(manifests.len());
    for manifest in &manifests {
        scenes.push(load_scene(manifest)?);
    }
    let (stats, warnings) = compute_class_stats(&scenes, categories);
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    std::fs::write(out, serde_json::to_string_pretty(&stats)?)?;
    Ok(())
}

fn scene_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_insert(
    scene_path: &Path,
    catalog_path: &Path,
    stats_path: &Path,
    grid_path: Option<&Path>,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<()> {
    let seed = require_seed(cfg)?;
    let scene = load_scene(scene_path)?;
    let catalog = load_catalog(catalog_path)?;
    let stats = load_stats(stats_path)?;
    let grid = grid_path.map(load_envmap_grid).transpose()?;
    let aug = augment_scene(&scene, &catalog, &stats, grid.as_ref(), seed, cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let paths = write_augmented_outputs(out_dir, &scene_stem(scene_path), &aug, &scene)?;
    println!("{}", paths.annotations.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_augment(
    scenes_list: &Path,
    catalog_path: &Path,
    stats_path: &Path,
    grid_dir: Option<&Path>,
    out_dir: &Path,
    jobs: usize,
    cfg: &PipelineConfig,
) -> Result<()> {
    let seed = require_seed(cfg)?;
    let manifests = read_scene_list(scenes_list)?;
    let catalog = load_catalog(catalog_path)?;
    let stats = load_stats(stats_path)?;
    let summary =
        augment_dataset(&manifests, &catalog, &stats, grid_dir, seed, cfg, out_dir, jobs)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_bench(count: u32, out: Option<&Path>, cfg: &PipelineConfig) -> Result<()> {
    let seed = require_seed(cfg)?;
    let report = run_bench(count, seed, cfg)?;
    write_or_print(&report, out)
}
