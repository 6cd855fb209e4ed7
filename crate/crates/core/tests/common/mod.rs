//! Shared fixture builders for the integration test binaries.

#![allow(dead_code)] // each test binary uses only a subset of these helpers

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rgbd_insert::envmap::{expected_grid_dims, save_envmap_grid, EnvImage, EnvMapGrid};
use rgbd_insert::synth::{clutter_room, plane_room, wall_room, write_scene, RoomSpec};

/// Command handle for the compiled CLI binary.
pub fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rgbd-insert"))
}

/// Runs the CLI with the given arguments and returns its captured output.
pub fn run_cli(args: &[&str]) -> Output {
    cli().args(args).output().expect("failed to spawn CLI binary")
}

pub fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes a two-chair asset catalog and returns its path.
pub fn write_catalog(dir: &Path) -> PathBuf {
    let path = dir.join("catalog.json");
    let json = serde_json::json!([
        {
            "id": "chair-a",
            "category": "chair",
            "native_extents": [0.9, 0.9, 1.0],
            "mesh_ref": "meshes/chair_a.obj"
        },
        {
            "id": "chair-b",
            "category": "chair",
            "native_extents": [0.8, 0.7, 1.1],
            "mesh_ref": "meshes/chair_b.obj"
        }
    ]);
    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    path
}

/// Writes a chair height-statistics file and returns its path.
pub fn write_stats(dir: &Path) -> PathBuf {
    let path = dir.join("stats.json");
    let json = serde_json::json!({
        "chair": { "mean_height": 0.5, "std_height": 0.05 }
    });
    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    path
}

/// Writes a pipeline config suitable for the oblique synthetic fixtures
/// (their grazing floor views need a looser depth-continuity gate) and
/// returns its path.
pub fn write_fixture_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let json = serde_json::json!({
        "plane": { "depth_discontinuity": 10.0 }
    });
    std::fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
    path
}

/// Builds a seeded random environment-map grid sized for a `width`x`height`
/// image, with every sample in [0, 1].
pub fn random_grid(width: u32, height: u32, map_w: u32, map_h: u32, seed: u64) -> EnvMapGrid {
    let (gw, gh) = expected_grid_dims(width, height);
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let cells = (0..gw * gh)
        .map(|_| {
            let data = (0..(map_w * map_h * 3)).map(|_| rng.gen_range(0.0f32..=1.0)).collect();
            EnvImage::new(map_w, map_h, data).unwrap()
        })
        .collect();
    EnvMapGrid::from_cells(gw, gh, cells).unwrap()
}

/// Writes `{stem}.envg` for a scene image of the given size; returns the path.
pub fn write_grid_file(
    grid_dir: &Path,
    stem: &str,
    width: u32,
    height: u32,
    seed: u64,
) -> PathBuf {
    let grid = random_grid(width, height, 8, 4, seed);
    let path = grid_dir.join(format!("{stem}.envg"));
    save_envmap_grid(&grid, &path).unwrap();
    path
}

/// A written batch of synthetic scenes: the list file the CLI consumes plus
/// the per-scene manifest paths.
pub struct Batch {
    pub list: PathBuf,
    pub manifests: Vec<PathBuf>,
    pub stems: Vec<String>,
}

/// Writes the given rooms as `scene{i:03}` fixtures under `dir` along with
/// a scene-list file enumerating their manifests.
pub fn write_batch(dir: &Path, rooms: &[RoomSpec]) -> Batch {
    let mut manifests = Vec::new();
    let mut stems = Vec::new();
    for (i, spec) in rooms.iter().enumerate() {
        let stem = format!("scene{i:03}");
        let paths = write_scene(spec, 1000 + i as u64, dir, &stem).unwrap();
        manifests.push(paths.manifest);
        stems.push(stem);
    }
    let list = dir.join("scenes.txt");
    let mut f = std::fs::File::create(&list).unwrap();
    for m in &manifests {
        writeln!(f, "{}", m.file_name().unwrap().to_str().unwrap()).unwrap();
    }
    Batch { list, manifests, stems }
}

/// `count` cluttered rooms with varying box layouts.
pub fn clutter_rooms(count: u64) -> Vec<RoomSpec> {
    (0..count).map(clutter_room).collect()
}

/// One fixture room with a floor and two walls.
pub fn three_plane_room(index: u64) -> RoomSpec {
    plane_room(index)
}

/// The fixture room whose view contains no floor pixels.
pub fn floorless_room() -> RoomSpec {
    wall_room()
}

/// Reads a file fully, panicking with the path on failure.
pub fn read_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Parses a JSON file into a generic value.
pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&read_bytes(path))
        .unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}
