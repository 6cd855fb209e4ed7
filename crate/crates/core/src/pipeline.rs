//! End-to-end scene augmentation: category/asset selection, constrained
//! placement, environment-map construction, and batch orchestration with
//! deterministic per-scene seeding.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::envmap::{
    build_insertion_envmap, expected_grid_dims, load_envmap_grid, write_pfm, EnvImage, EnvMapGrid,
};
use crate::error::{Error, Result};
use crate::ground::{floor_stats, select_ground, FloorStats};
use crate::insertion::{Asset, ClassStats, InsertionParams};
use crate::plane::extract_planes;
use crate::scene::{
    backproject, load_scene, AnnotationJson, IntrinsicsJson, Obb3D, Scene, TransformJson,
};
use crate::strategy::{create_placement, PlacementContext};

/// Uniform draw over the catalog assets of one category.
pub fn select_asset(rng: &mut dyn RngCore, catalog: &[Asset], category: &str) -> Result<Asset> {
    let matching: Vec<&Asset> = catalog.iter().filter(|a| a.category == category).collect();
    if matching.is_empty() {
        return Err(Error::NoAssetForCategory(category.to_string()));
    }
    Ok(matching[rng.gen_range(0..matching.len())].clone())
}

/// One successful augmentation: the chosen asset, its placement, and the
/// world-frame environment map when a grid was supplied.
#[derive(Debug, Clone)]
pub struct AugmentedScene {
    /// Manifest path of the source scene.
    pub source: String,
    pub seed: u64,
    pub asset: Asset,
    pub params: InsertionParams,
    pub envmap: Option<EnvImage>,
}

/// Runs the full single-scene pipeline: plane extraction, ground selection,
/// floor statistics, category and asset selection, placement, and (when a
/// grid is present) environment-map construction. Exactly one object is
/// inserted. Categories without catalog assets are redrawn up to the pool
/// size before giving up with `NoAssetForCategory`.
pub fn augment_scene(
    scene: &Scene,
    catalog: &[Asset],
    stats: &ClassStats,
    grid: Option<&EnvMapGrid>,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<AugmentedScene> {
    cfg.validate()?;
    if let Some(grid) = grid {
        let expected = expected_grid_dims(scene.intrinsics.width, scene.intrinsics.height);
        if (grid.grid_w, grid.grid_h) != expected {
            return Err(Error::DimensionMismatch(format!(
                "environment grid is {}x{} cells, expected {}x{} for a {}x{} image",
                grid.grid_w, grid.grid_h, expected.0, expected.1,
                scene.intrinsics.width, scene.intrinsics.height
            )));
        }
    }
    let pool: Vec<String> = stats.categories().cloned().collect();
    if pool.is_empty() {
        return Err(Error::InsufficientData("class statistics are empty".into()));
    }

    let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world)?;
    let planes = extract_planes(&cloud, &cfg.plane)?;
    let ground = select_ground(&planes, &cfg.ground)?;
    let floor = floor_stats(ground, &cloud)?;

    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let policy = cfg.policy.build();
    let mut asset = None;
    let mut last_category = String::new();
    for _ in 0..pool.len() {
        let category = policy.select(&mut rng, &pool, &floor)?;
        match select_asset(&mut rng, catalog, &category) {
            Ok(a) => {
                asset = Some(a);
                break;
            }
            Err(Error::NoAssetForCategory(c)) => last_category = c,
            Err(e) => return Err(e),
        }
    }
    let asset = asset.ok_or(Error::NoAssetForCategory(last_category))?;

    let existing: Vec<Obb3D> = scene.annotations.iter().map(|a| a.bbox.clone()).collect();
    let placement = create_placement(&cfg.placement)?;
    let ctx = PlacementContext {
        floor: &floor,
        scene_bounds: cloud.bounds_xy(),
        existing: &existing,
        asset: &asset,
        stats,
        cfg: &cfg.insertion,
    };
    let params = placement.place(&mut rng, &ctx)?;

    let envmap = match grid {
        Some(grid) => Some(build_insertion_envmap(
            grid,
            &params.p,
            &scene.intrinsics,
            &scene.cam_to_world,
            &floor.plane.normal,
            &cfg.lighting,
        )?),
        None => None,
    };

    Ok(AugmentedScene {
        source: scene.source.clone(),
        seed,
        asset,
        params,
        envmap,
    })
}

// --- Output records -----------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxJson {
    center: [f64; 3],
    half_extents: [f64; 3],
    yaw: f64,
}

impl From<&Obb3D> for BoxJson {
    fn from(b: &Obb3D) -> Self {
        Self {
            center: [b.center.x, b.center.y, b.center.z],
            half_extents: [b.half_extents.x, b.half_extents.y, b.half_extents.z],
            yaw: b.yaw,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsertedJson {
    asset_id: String,
    category: String,
    p: [f64; 3],
    s: f64,
    yaw: f64,
    resize: f64,
    collision_score: f64,
    #[serde(rename = "box")]
    bbox: BoxJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightingJson {
    mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    envmap: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentedJson {
    source: String,
    seed: u64,
    inserted: InsertedJson,
    annotations: Vec<AnnotationJson>,
    lighting: LightingJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    intrinsics: IntrinsicsJson,
    cam_to_world: TransformJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RenderManifestJson {
    mesh_ref: String,
    translation: [f64; 3],
    uniform_scale: f64,
    yaw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    envmap: Option<String>,
    background_rgb: String,
    camera: CameraJson,
}

/// Files written for one augmented scene.
#[derive(Debug, Clone)]
pub struct AugmentedPaths {
    pub annotations: PathBuf,
    pub render_manifest: PathBuf,
    pub envmap: Option<PathBuf>,
}

/// Writes `{stem}.aug.json`, `{stem}.render.json`, and — when an
/// environment map was built — `{stem}.pfm` into `out_dir`.
pub fn write_augmented_outputs(
    out_dir: &Path,
    stem: &str,
    aug: &AugmentedScene,
    scene: &Scene,
) -> Result<AugmentedPaths> {
    let envmap_name = aug.envmap.as_ref().map(|_| format!("{stem}.pfm"));
    let p = &aug.params;
    let record = AugmentedJson {
        source: aug.source.clone(),
        seed: aug.seed,
        inserted: InsertedJson {
            asset_id: aug.asset.id.clone(),
            category: aug.asset.category.clone(),
            p: [p.p.x, p.p.y, p.p.z],
            s: p.s,
            yaw: p.o,
            resize: p.r,
            collision_score: p.l,
            bbox: BoxJson::from(&p.bbox),
        },
        annotations: scene.annotations.iter().map(AnnotationJson::from).collect(),
        lighting: LightingJson {
            mode: if envmap_name.is_some() { "envmap" } else { "camera_point_light" }.into(),
            envmap: envmap_name.clone(),
        },
    };
    let render = RenderManifestJson {
        mesh_ref: aug.asset.mesh_ref.clone(),
        translation: [p.p.x, p.p.y, p.p.z],
        uniform_scale: p.s / aug.asset.native_extents.z,
        yaw: p.o,
        envmap: envmap_name.clone(),
        background_rgb: scene.rgb_path.clone(),
        camera: CameraJson {
            intrinsics: (&scene.intrinsics).into(),
            cam_to_world: (&scene.cam_to_world).into(),
        },
    };

    let annotations = out_dir.join(format!("{stem}.aug.json"));
    std::fs::write(&annotations, serde_json::to_vec_pretty(&record)?)?;
    let render_manifest = out_dir.join(format!("{stem}.render.json"));
    std::fs::write(&render_manifest, serde_json::to_vec_pretty(&render)?)?;
    let envmap = match (&aug.envmap, &envmap_name) {
        (Some(map), Some(name)) => {
            let path = out_dir.join(name);
            write_pfm(map, &path)?;
            Some(path)
        }
        _ => None,
    };
    Ok(AugmentedPaths { annotations, render_manifest, envmap })
}

// --- Batch orchestration --------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Percentiles {
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of an unsorted, non-empty sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn percentiles(values: &[f64]) -> Option<Percentiles> {
    if values.is_empty() {
        return None;
    }
    Some(Percentiles {
        p50: percentile(values, 50.0),
        p90: percentile(values, 90.0),
        p99: percentile(values, 99.0),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct SkipJson {
    source: String,
    reason: String,
    detail: String,
}

/// Batch result counts and aggregates; `timing_ms` is the only
/// non-deterministic field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub total: usize,
    pub success: usize,
    pub skipped: BTreeMap<String, usize>,
    pub mean_collision_score: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub timing_ms: Option<Percentiles>,
}

struct SceneOutcome {
    elapsed_ms: f64,
    result: std::result::Result<(f64, u32), String>,
}

fn scene_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn process_scene(
    manifest: &Path,
    catalog: &[Asset],
    stats: &ClassStats,
    grid_dir: Option<&Path>,
    seed: u64,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(f64, u32)> {
    let scene = load_scene(manifest)?;
    let grid = match grid_dir {
        Some(dir) => Some(load_envmap_grid(
            &dir.join(format!("{}.envg", scene_stem(manifest))),
        )?),
        None => None,
    };
    let aug = augment_scene(&scene, catalog, stats, grid.as_ref(), seed, cfg)?;
    write_augmented_outputs(out_dir, &scene_stem(manifest), &aug, &scene)?;
    Ok((aug.params.l, aug.params.iterations))
}

/// Augments every listed scene, in parallel across `jobs` workers, with the
/// per-scene seed `master_seed ^ index`. A scene failure never aborts the
/// batch: it becomes a `{stem}.skip.json` record and a summary count.
/// Outputs are byte-identical regardless of `jobs`.
pub fn augment_dataset(
    manifests: &[PathBuf],
    catalog: &[Asset],
    stats: &ClassStats,
    grid_dir: Option<&Path>,
    master_seed: u64,
    cfg: &PipelineConfig,
    out_dir: &Path,
    jobs: usize,
) -> Result<Summary> {
    cfg.validate()?;
    if jobs == 0 {
        return Err(Error::InvalidConfig("jobs must be at least 1".into()));
    }
    {
        let mut stems = std::collections::BTreeSet::new();
        for manifest in manifests {
            if !stems.insert(scene_stem(manifest)) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate scene stem '{}' would make outputs collide",
                    scene_stem(manifest)
                )));
            }
        }
    }
    std::fs::create_dir_all(out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let outcomes: Vec<SceneOutcome> = pool.install(|| {
        manifests
            .par_iter()
            .enumerate()
            .map(|(index, manifest)| {
                let start = Instant::now();
                let seed = master_seed ^ index as u64;
                let result = process_scene(manifest, catalog, stats, grid_dir, seed, cfg, out_dir);
                let result = match result {
                    Ok(ok) => Ok(ok),
                    Err(err) => {
                        let skip = SkipJson {
                            source: manifest.display().to_string(),
                            reason: err.reason_code().to_string(),
                            detail: err.to_string(),
                        };
                        let path = out_dir.join(format!("{}.skip.json", scene_stem(manifest)));
                        // A failing skip write is itself reported, not fatal.
                        if let Err(io) = serde_json::to_vec_pretty(&skip)
                            .map_err(Error::from)
                            .and_then(|bytes| std::fs::write(&path, bytes).map_err(Error::from))
                        {
                            Err(format!("{}: {io}", err.reason_code()))
                        } else {
                            Err(err.reason_code().to_string())
                        }
                    }
                };
                SceneOutcome { elapsed_ms: start.elapsed().as_secs_f64() * 1e3, result }
            })
            .collect()
    });

    let mut summary = Summary {
        total: outcomes.len(),
        success: 0,
        skipped: BTreeMap::new(),
        mean_collision_score: None,
        mean_iterations: None,
        timing_ms: percentiles(&outcomes.iter().map(|o| o.elapsed_ms).collect::<Vec<_>>()),
    };
    let (mut score_sum, mut iter_sum) = (0.0f64, 0.0f64);
    for outcome in &outcomes {
        match &outcome.result {
            Ok((l, iterations)) => {
                summary.success += 1;
                score_sum += l;
                iter_sum += *iterations as f64;
            }
            Err(reason) => {
                let reason = reason.split(':').next().unwrap_or(reason).to_string();
                *summary.skipped.entry(reason).or_insert(0) += 1;
            }
        }
    }
    if summary.success > 0 {
        summary.mean_collision_score = Some(score_sum / summary.success as f64);
        summary.mean_iterations = Some(iter_sum / summary.success as f64);
    }
    std::fs::write(out_dir.join("summary.json"), serde_json::to_vec_pretty(&summary)?)?;
    Ok(summary)
}

// --- Synthetic benchmark --------------------------------------------------------

/// Placement benchmark over generated rooms: success rate, score and
/// iteration means, and wall-clock percentiles of the placement step alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub placement: String,
    pub count: u32,
    pub success: u32,
    pub success_rate: Option<f64>,
    pub mean_collision_score: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub timing_ms: Option<Percentiles>,
}

/// Runs the configured placement strategy over `count` in-memory rooms with
/// 0..=20 existing boxes each, timing only the placement call. Room `i`
/// uses seed `master_seed ^ i`, so reports are reproducible except for the
/// timing fields.
pub fn run_bench(count: u32, master_seed: u64, cfg: &PipelineConfig) -> Result<BenchReport> {
    use crate::insertion::HeightStats;
    use crate::plane::Plane;
    use nalgebra::{Vector2, Vector3};

    cfg.validate()?;
    let placement = create_placement(&cfg.placement)?;
    let asset = Asset {
        id: "bench-chair".into(),
        category: "chair".into(),
        native_extents: Vector3::new(0.5, 0.5, 1.0),
        mesh_ref: "bench-chair.obj".into(),
    };
    let mut class_stats = BTreeMap::new();
    class_stats.insert("chair".to_string(), HeightStats { mean_height: 0.8, std_height: 0.1 });
    let stats = ClassStats(class_stats);

    let mut scores = Vec::with_capacity(count as usize);
    let mut iterations = Vec::with_capacity(count as usize);
    let mut timings = Vec::with_capacity(count as usize);
    let mut success = 0u32;
    for i in 0..count {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(master_seed ^ i as u64);
        let ex = rng.gen_range(3.0..=5.0);
        let ey = rng.gen_range(3.0..=5.0);
        let c = Vector3::new(ex / 2.0, ey / 2.0, 0.0);
        let floor = FloorStats {
            c,
            sigma_x: ex / 12f64.sqrt(),
            sigma_y: ey / 12f64.sqrt(),
            plane: Plane {
                normal: Vector3::z(),
                offset: 0.0,
                mse: 0.0,
                centroid: c,
                axis_std: Vector3::zeros(),
                inliers: vec![],
            },
        };
        let n_boxes = (i % 21) as usize;
        let existing: Vec<Obb3D> = (0..n_boxes)
            .map(|_| {
                let hx = rng.gen_range(0.15..=0.35);
                let hy = rng.gen_range(0.15..=0.35);
                let hz = rng.gen_range(0.2..=0.4);
                Obb3D {
                    center: Vector3::new(
                        rng.gen_range(0.3..=ex - 0.3),
                        rng.gen_range(0.3..=ey - 0.3),
                        hz,
                    ),
                    half_extents: Vector3::new(hx, hy, hz),
                    yaw: rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI),
                }
            })
            .collect();
        let ctx = PlacementContext {
            floor: &floor,
            scene_bounds: Some((Vector2::new(0.0, 0.0), Vector2::new(ex, ey))),
            existing: &existing,
            asset: &asset,
            stats: &stats,
            cfg: &cfg.insertion,
        };
        let start = Instant::now();
        let params = placement.place(&mut rng, &ctx)?;
        timings.push(start.elapsed().as_secs_f64() * 1e3);
        if params.l == 0.0 {
            success += 1;
        }
        scores.push(params.l);
        iterations.push(params.iterations as f64);
    }

    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(BenchReport {
        placement: placement.name().to_string(),
        count,
        success,
        success_rate: (count > 0).then(|| success as f64 / count as f64),
        mean_collision_score: mean(&scores),
        mean_iterations: mean(&iterations),
        timing_ms: percentiles(&timings),
    })
}
