//! Deterministic synthetic RGB-D room scenes with exact ground truth.
//!
//! Rooms are built from analytic surfaces only — a floor rectangle at z = 0,
//! up to two axis planes as walls, and yawed boxes resting on the floor — so
//! every depth sample has a closed-form expected value independent of the
//! geometry code under test. Used by tests and the benchmark commands.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{
    Annotation, AnnotationJson, CameraIntrinsics, DepthImage, Obb3D, RigidTransform, Scene,
    SceneManifestJson,
};

/// Analytic description of a synthetic room.
#[derive(Debug, Clone)]
pub struct RoomSpec {
    /// Floor rectangle [0, x] x [0, y] at z = 0.
    pub floor_extent: (f64, f64),
    /// Heights of the walls in the x = 0 and y = 0 planes; 0 omits a wall.
    pub wall_heights: (f64, f64),
    /// Boxes resting on the floor (bottom at z = 0), with category labels.
    pub clutter: Vec<(String, Obb3D)>,
    pub camera_eye: Vector3<f64>,
    pub camera_target: Vector3<f64>,
    pub intrinsics: CameraIntrinsics,
    /// Gaussian noise applied to each valid depth sample, in meters.
    pub depth_noise_sigma: f64,
}

impl RoomSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |msg: String| Error::InvalidConfig(msg);
        if !(self.floor_extent.0 > 0.0 && self.floor_extent.1 > 0.0) {
            return Err(ok(format!("floor extent must be positive, got {:?}", self.floor_extent)));
        }
        if !(self.wall_heights.0 >= 0.0 && self.wall_heights.1 >= 0.0) {
            return Err(ok(format!(
                "wall heights must be non-negative, got {:?}",
                self.wall_heights
            )));
        }
        if !(self.depth_noise_sigma >= 0.0 && self.depth_noise_sigma.is_finite()) {
            return Err(ok(format!("depth noise must be non-negative, got {}", self.depth_noise_sigma)));
        }
        self.intrinsics.validate()?;
        if (self.camera_eye - self.camera_target).norm() < 1e-9 {
            return Err(ok("camera eye and target coincide".into()));
        }
        for (category, bbox) in &self.clutter {
            bbox.validate()?;
            if category.is_empty() {
                return Err(ok("clutter category must be non-empty".into()));
            }
            if bbox.bottom_z().abs() > 1e-9 {
                return Err(ok(format!(
                    "clutter box bottom must rest at z = 0, got {}",
                    bbox.bottom_z()
                )));
            }
        }
        Ok(())
    }
}

/// Camera pose looking from `eye` toward `target` with world +Z as up:
/// camera +Z forward, +X image-right, +Y image-down.
pub fn look_at(eye: &Vector3<f64>, target: &Vector3<f64>) -> RigidTransform {
    let forward = (target - eye).normalize();
    let mut right = forward.cross(&Vector3::z());
    if right.norm() < 1e-9 {
        // Looking straight up or down: any horizontal right axis works.
        right = Vector3::x();
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    RigidTransform {
        rotation: Matrix3::from_columns(&[right, down, forward]),
        translation: *eye,
    }
}

/// Which analytic surface a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    Floor,
    WallX,
    WallY,
    Box(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct RayHit {
    /// Ray parameter; equals camera-frame depth when the ray direction has
    /// unit camera-frame z.
    pub t: f64,
    pub surface: SurfaceId,
}

const RAY_EPS: f64 = 1e-9;

fn plane_hit(origin: f64, dir: f64) -> Option<f64> {
    if dir.abs() < 1e-15 {
        return None;
    }
    let t = -origin / dir;
    (t > RAY_EPS).then_some(t)
}

fn box_hit(bbox: &Obb3D, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
    // Work in the box frame: rotate by -yaw about Z around the center.
    let (s, c) = bbox.yaw.sin_cos();
    let to_local = |p: &Vector3<f64>| {
        Vector3::new(c * p.x + s * p.y, -s * p.x + c * p.y, p.z)
    };
    let o = to_local(&(origin - bbox.center));
    let d = to_local(dir);
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..3 {
        let h = bbox.half_extents[axis];
        if d[axis].abs() < 1e-15 {
            if o[axis].abs() > h {
                return None;
            }
            continue;
        }
        let t1 = (-h - o[axis]) / d[axis];
        let t2 = (h - o[axis]) / d[axis];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        t_enter = t_enter.max(lo);
        t_exit = t_exit.min(hi);
        if t_enter > t_exit {
            return None;
        }
    }
    (t_enter > RAY_EPS).then_some(t_enter)
}

/// Nearest analytic surface along `origin + t * dir`, if any.
pub fn raycast(spec: &RoomSpec, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;
    let mut consider = |t: Option<f64>, surface: SurfaceId| {
        if let Some(t) = t {
            if best.map_or(true, |b| t < b.t) {
                best = Some(RayHit { t, surface });
            }
        }
    };

    let (ex, ey) = spec.floor_extent;
    if let Some(t) = plane_hit(origin.z, dir.z) {
        let p = origin + t * dir;
        if (0.0..=ex).contains(&p.x) && (0.0..=ey).contains(&p.y) {
            consider(Some(t), SurfaceId::Floor);
        }
    }
    if spec.wall_heights.0 > 0.0 {
        if let Some(t) = plane_hit(origin.x, dir.x) {
            let p = origin + t * dir;
            if (0.0..=ey).contains(&p.y) && (0.0..=spec.wall_heights.0).contains(&p.z) {
                consider(Some(t), SurfaceId::WallX);
            }
        }
    }
    if spec.wall_heights.1 > 0.0 {
        if let Some(t) = plane_hit(origin.y, dir.y) {
            let p = origin + t * dir;
            if (0.0..=ex).contains(&p.x) && (0.0..=spec.wall_heights.1).contains(&p.z) {
                consider(Some(t), SurfaceId::WallY);
            }
        }
    }
    for (i, (_, bbox)) in spec.clutter.iter().enumerate() {
        consider(box_hit(bbox, origin, dir), SurfaceId::Box(i));
    }
    best
}

/// Exact plane equations and boxes a room was built from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub planes: Vec<GtPlane>,
    pub boxes: Vec<AnnotationJson>,
    pub floor_z: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtPlane {
    pub normal: [f64; 3],
    pub offset: f64,
}

fn ground_truth(spec: &RoomSpec) -> GroundTruth {
    let mut planes = vec![GtPlane { normal: [0.0, 0.0, 1.0], offset: 0.0 }];
    if spec.wall_heights.0 > 0.0 {
        planes.push(GtPlane { normal: [1.0, 0.0, 0.0], offset: 0.0 });
    }
    if spec.wall_heights.1 > 0.0 {
        planes.push(GtPlane { normal: [0.0, 1.0, 0.0], offset: 0.0 });
    }
    GroundTruth {
        planes,
        boxes: spec
            .clutter
            .iter()
            .map(|(category, bbox)| {
                AnnotationJson::from(&Annotation { category: category.clone(), bbox: bbox.clone() })
            })
            .collect(),
        floor_z: 0.0,
    }
}

/// Renders the room to an in-memory scene by per-pixel ray casting.
///
/// The ray through pixel (u, v) has camera direction ((u-cx)/fx, (v-cy)/fy, 1),
/// so the hit parameter t is directly the camera-frame depth. Gaussian noise
/// is drawn per valid pixel in row-major order; invalid pixels consume no
/// draws, so the same (spec, seed) always yields identical samples.
pub fn build_scene(spec: &RoomSpec, seed: u64) -> Result<(Scene, GroundTruth)> {
    spec.validate()?;
    let intr = &spec.intrinsics;
    let pose = look_at(&spec.camera_eye, &spec.camera_target);
    let n = (intr.width as usize) * (intr.height as usize);
    let mut values = vec![0.0f64; n];
    let mut valid = vec![false; n];
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let noise = if spec.depth_noise_sigma > 0.0 {
        Some(Normal::new(0.0, spec.depth_noise_sigma).map_err(|e| Error::Internal(e.to_string()))?)
    } else {
        None
    };
    for v in 0..intr.height {
        for u in 0..intr.width {
            let dir_cam = Vector3::new(
                (u as f64 - intr.cx) / intr.fx,
                (v as f64 - intr.cy) / intr.fy,
                1.0,
            );
            let dir_world = pose.rotation * dir_cam;
            if let Some(hit) = raycast(spec, &spec.camera_eye, &dir_world) {
                let mut d = hit.t;
                if let Some(noise) = &noise {
                    d += noise.sample(&mut rng);
                }
                if d > 1e-4 {
                    let i = v as usize * intr.width as usize + u as usize;
                    values[i] = d;
                    valid[i] = true;
                }
            }
        }
    }
    let depth = DepthImage::from_meters(intr.width, intr.height, values, valid)?;
    let scene = Scene {
        intrinsics: intr.clone(),
        cam_to_world: pose,
        depth,
        rgb_path: String::new(),
        annotations: spec
            .clutter
            .iter()
            .map(|(category, bbox)| Annotation { category: category.clone(), bbox: bbox.clone() })
            .collect(),
        source: String::new(),
    };
    Ok((scene, ground_truth(spec)))
}

/// File set produced for one synthetic scene.
#[derive(Debug, Clone)]
pub struct ScenePaths {
    pub manifest: PathBuf,
    pub depth: PathBuf,
    pub rgb: PathBuf,
    pub ground_truth: PathBuf,
}

/// Writes the room as a scene manifest, 16-bit millimeter depth PNG, solid
/// placeholder RGB PNG, and a ground-truth sidecar JSON.
///
/// Depth samples that do not round into [1, 65535] mm become invalid (0).
pub fn write_scene(spec: &RoomSpec, seed: u64, dir: &Path, stem: &str) -> Result<ScenePaths> {
    let (scene, gt) = build_scene(spec, seed)?;
    let intr = &scene.intrinsics;
    let (w, h) = (intr.width, intr.height);

    let mut mm = vec![0u16; (w as usize) * (h as usize)];
    for v in 0..h {
        for u in 0..w {
            if let Some(d) = scene.depth.get(u, v) {
                let q = (d * 1000.0).round();
                if (1.0..=65535.0).contains(&q) {
                    mm[v as usize * w as usize + u as usize] = q as u16;
                }
            }
        }
    }
    let depth_path = dir.join(format!("{stem}.depth.png"));
    let depth_img = image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, mm)
        .ok_or_else(|| Error::Internal("depth buffer size mismatch".into()))?;
    depth_img
        .save_with_format(&depth_path, image::ImageFormat::Png)
        .map_err(Error::Image)?;

    let rgb_path = dir.join(format!("{stem}.rgb.png"));
    let rgb_img = image::RgbImage::from_pixel(w, h, image::Rgb([168u8, 168, 168]));
    rgb_img
        .save_with_format(&rgb_path, image::ImageFormat::Png)
        .map_err(Error::Image)?;

    let manifest = SceneManifestJson {
        rgb: format!("{stem}.rgb.png"),
        depth: format!("{stem}.depth.png"),
        intrinsics: (&scene.intrinsics).into(),
        cam_to_world: (&scene.cam_to_world).into(),
        annotations: scene.annotations.iter().map(AnnotationJson::from).collect(),
    };
    let manifest_path = dir.join(format!("{stem}.json"));
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;

    let gt_path = dir.join(format!("{stem}.gt.json"));
    std::fs::write(&gt_path, serde_json::to_vec_pretty(&gt)?)?;

    Ok(ScenePaths { manifest: manifest_path, depth: depth_path, rgb: rgb_path, ground_truth: gt_path })
}

fn fixture_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 110.0, fy: 110.0, cx: 80.0, cy: 60.0, width: 160, height: 120 }
}

/// Empty room — floor plus both walls — with geometry varied by index.
/// The camera sits in the far corner looking at the walls' corner, so all
/// three planes are visible.
pub fn plane_room(index: u64) -> RoomSpec {
    let ex = 4.0 + 0.5 * (index % 5) as f64;
    let ey = 4.0 + 0.5 * ((index / 5) % 5) as f64;
    let wall = 2.4 + 0.1 * (index % 3) as f64;
    RoomSpec {
        floor_extent: (ex, ey),
        wall_heights: (wall, wall),
        clutter: Vec::new(),
        camera_eye: Vector3::new(
            ex - 0.4 - 0.03 * (index % 7) as f64,
            ey - 0.5 - 0.02 * (index % 11) as f64,
            1.3 + 0.02 * (index % 5) as f64,
        ),
        camera_target: Vector3::new(0.4, 0.5, 0.9),
        intrinsics: fixture_intrinsics(),
        depth_noise_sigma: 0.0,
    }
}

/// Room viewed so that only the x = 0 wall fills the frame: the camera is
/// tilted up enough that no floor pixel is visible, leaving no horizontal
/// plane to select.
pub fn wall_room() -> RoomSpec {
    RoomSpec {
        floor_extent: (4.0, 4.0),
        wall_heights: (2.5, 0.0),
        clutter: Vec::new(),
        camera_eye: Vector3::new(3.0, 2.0, 0.5),
        camera_target: Vector3::new(0.0, 2.0, 2.2),
        intrinsics: fixture_intrinsics(),
        depth_noise_sigma: 0.0,
    }
}

/// 4 m x 4 m floor with three clutter boxes and a mostly empty center,
/// clutter arrangement varied by index. No walls, so the floor dominates
/// the view and insertion space is plentiful.
pub fn clutter_room(index: u64) -> RoomSpec {
    let spin = |k: u64| (index.wrapping_mul(2654435761).wrapping_add(k * 40503) % 1000) as f64 / 1000.0;
    let corner = |k: u64, x0: f64, y0: f64| Obb3D {
        center: Vector3::new(
            x0 + 0.5 * spin(k),
            y0 + 0.5 * spin(k + 1),
            0.25,
        ),
        half_extents: Vector3::new(0.25 + 0.1 * spin(k + 2), 0.25 + 0.1 * spin(k + 3), 0.25),
        yaw: -std::f64::consts::PI + 2.0 * std::f64::consts::PI * spin(k + 4),
    };
    RoomSpec {
        floor_extent: (4.0, 4.0),
        wall_heights: (0.0, 0.0),
        clutter: vec![
            ("box".into(), corner(1, 0.5, 0.5)),
            ("box".into(), corner(7, 2.6, 0.6)),
            ("box".into(), corner(13, 0.6, 2.6)),
        ],
        camera_eye: Vector3::new(2.0, 7.2, 2.2),
        camera_target: Vector3::new(2.0, 2.0, 0.0),
        intrinsics: fixture_intrinsics(),
        depth_noise_sigma: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::{select_ground, HorizontalConfig};
    use crate::plane::{extract_planes, PlaneExtractionConfig};
    use crate::scene::{backproject, load_scene};

    fn down_spec() -> RoomSpec {
        RoomSpec {
            floor_extent: (10.0, 10.0),
            wall_heights: (0.0, 0.0),
            clutter: Vec::new(),
            camera_eye: Vector3::new(5.0, 5.0, 2.0),
            camera_target: Vector3::new(5.0, 5.0, 0.0),
            intrinsics: fixture_intrinsics(),
            depth_noise_sigma: 0.0,
        }
    }

    #[test]
    fn straight_down_camera_sees_constant_depth() {
        let (scene, gt) = build_scene(&down_spec(), 0).unwrap();
        assert_eq!(gt.floor_z, 0.0);
        let mut seen = 0;
        for v in 0..scene.depth.height {
            for u in 0..scene.depth.width {
                if let Some(d) = scene.depth.get(u, v) {
                    assert!((d - 2.0).abs() < 1e-12, "depth {d} at ({u},{v})");
                    seen += 1;
                }
            }
        }
        assert_eq!(seen, 160 * 120);
    }

    #[test]
    fn upward_camera_misses_everything() {
        let mut spec = down_spec();
        spec.camera_target = Vector3::new(5.0, 5.0, 4.0);
        let (scene, _) = build_scene(&spec, 0).unwrap();
        let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world).unwrap();
        assert_eq!((0..cloud.len()).filter(|i| cloud.is_valid(*i)).count(), 0);
    }

    #[test]
    fn noiseless_points_lie_on_their_surfaces() {
        let spec = plane_room(3);
        let (scene, _) = build_scene(&spec, 0).unwrap();
        let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world).unwrap();
        let mut checked = 0;
        for i in 0..cloud.len() {
            if cloud.is_valid(i) {
                let p = cloud.point(i);
                // Every surface in the room is one of the three axis planes.
                let min_dist = p.z.abs().min(p.x.abs()).min(p.y.abs());
                assert!(min_dist < 1e-9, "point {p:?} off-surface by {min_dist}");
                checked += 1;
            }
        }
        assert!(checked > 10_000, "only {checked} valid points");
    }

    #[test]
    fn box_ray_hits_front_face() {
        let bbox = Obb3D {
            center: Vector3::new(0.0, 0.0, 0.5),
            half_extents: Vector3::new(0.5, 0.5, 0.5),
            yaw: 0.0,
        };
        let t = box_hit(&bbox, &Vector3::new(-3.0, 0.0, 0.5), &Vector3::x()).unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        // Rotated 45 degrees: the corner faces the ray at sqrt(0.5).
        let rot = Obb3D { yaw: std::f64::consts::FRAC_PI_4, ..bbox };
        let t = box_hit(&rot, &Vector3::new(-3.0, 0.0, 0.5), &Vector3::x()).unwrap();
        assert!((t - (3.0 - 0.5f64.sqrt())).abs() < 1e-12, "t = {t}");
        assert!(box_hit(&rot, &Vector3::new(-3.0, 2.0, 0.5), &Vector3::x()).is_none());
    }

    #[test]
    fn nearest_surface_wins() {
        let spec = clutter_room(0);
        // A ray pointed at a clutter box from above hits the box, not the
        // floor behind it.
        let bbox = &spec.clutter[0].1;
        let above = bbox.center + Vector3::new(0.0, 0.0, 3.0);
        let hit = raycast(&spec, &above, &Vector3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(hit.surface, SurfaceId::Box(0));
        assert!((hit.t - (3.0 - bbox.half_extents.z)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_bytes_different_seed_different_depths() {
        let mut spec = plane_room(1);
        spec.depth_noise_sigma = 0.005;
        let dir = tempfile::tempdir().unwrap();
        let a = write_scene(&spec, 9, dir.path(), "a").unwrap();
        let b = write_scene(&spec, 9, dir.path(), "b").unwrap();
        assert_eq!(
            std::fs::read(&a.depth).unwrap(),
            std::fs::read(&b.depth).unwrap()
        );
        let c = write_scene(&spec, 10, dir.path(), "c").unwrap();
        assert_ne!(
            std::fs::read(&a.depth).unwrap(),
            std::fs::read(&c.depth).unwrap()
        );
    }

    #[test]
    fn written_scene_round_trips_through_loader() {
        let spec = clutter_room(5);
        let dir = tempfile::tempdir().unwrap();
        let paths = write_scene(&spec, 2, dir.path(), "room").unwrap();
        let loaded = load_scene(&paths.manifest).unwrap();
        assert_eq!(loaded.annotations.len(), 3);
        assert_eq!(loaded.depth.width, 160);
        // Quantization moves each sample by at most half a millimeter.
        let (scene, _) = build_scene(&spec, 2).unwrap();
        for v in 0..120 {
            for u in 0..160 {
                match (scene.depth.get(u, v), loaded.depth.get(u, v)) {
                    (Some(a), Some(b)) => assert!((a - b).abs() <= 5.0001e-4),
                    (None, None) => {}
                    (a, b) => panic!("validity mismatch at ({u},{v}): {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn fixture_config() {
        // Oblique fixture views legitimately have steep within-block depth
        // ranges; the discontinuity gate is for real sensor steps, so the
        // fixtures run with it effectively disabled.
        let cfg = PlaneExtractionConfig { depth_discontinuity: 10.0, ..Default::default() };
        let spec = plane_room(0);
        let (scene, gt) = build_scene(&spec, 0).unwrap();
        let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world).unwrap();
        let planes = extract_planes(&cloud, &cfg).unwrap();
        assert_eq!(planes.len(), gt.planes.len(), "expected the floor and two walls");
        for gt_plane in &gt.planes {
            let n = Vector3::from(gt_plane.normal);
            let best = planes
                .iter()
                .map(|p| p.normal.dot(&n).abs().clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 2f64.to_radians(), "normal {n:?} off by {best} rad");
        }
        let ground = select_ground(&planes, &HorizontalConfig::default()).unwrap();
        assert!(ground.normal.z > 0.99);
        assert!(ground.centroid.z.abs() < 0.01);
    }

    #[test]
    fn clutter_room_keeps_center_clear_and_in_view() {
        for index in [0u64, 17, 42, 99] {
            let spec = clutter_room(index);
            spec.validate().unwrap();
            for (_, bbox) in &spec.clutter {
                let d = (bbox.center.xy() - Vector3::new(2.0, 2.0, 0.0).xy()).norm();
                assert!(d > 0.9, "box at {:?} too close to center (room {index})", bbox.center);
            }
            // The whole floor projects into the image, so any insertion
            // point on it can be lit from a retrieved environment map.
            let (scene, _) = build_scene(&spec, 0).unwrap();
            for (x, y) in [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0), (4.0, 4.0), (2.0, 2.0)] {
                let (u, v) = crate::scene::project_to_pixel(
                    &Vector3::new(x, y, 0.0),
                    &scene.intrinsics,
                    &scene.cam_to_world,
                )
                .unwrap();
                assert!(
                    (0.0..160.0).contains(&u) && (0.0..120.0).contains(&v),
                    "floor corner ({x},{y}) projects to ({u},{v})"
                );
            }
        }
    }

    #[test]
    fn wall_room_has_no_horizontal_plane() {
        let (scene, _) = build_scene(&wall_room(), 0).unwrap();
        let cloud = backproject(&scene.depth, &scene.intrinsics, &scene.cam_to_world).unwrap();
        let cfg = PlaneExtractionConfig { depth_discontinuity: 10.0, ..Default::default() };
        let planes = extract_planes(&cloud, &cfg).unwrap();
        assert!(!planes.is_empty(), "the wall must be recovered");
        for plane in &planes {
            assert!(plane.normal.z.abs() < 0.5, "unexpected horizontal plane {:?}", plane.normal);
        }
        assert!(matches!(
            select_ground(&planes, &HorizontalConfig::default()),
            Err(crate::error::Error::NoGroundPlane)
        ));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = down_spec();
        spec.floor_extent = (0.0, 4.0);
        assert!(spec.validate().is_err());

        let mut spec = down_spec();
        spec.clutter.push((
            "box".into(),
            Obb3D {
                center: Vector3::new(1.0, 1.0, 1.0),
                half_extents: Vector3::new(0.3, 0.3, 0.3),
                yaw: 0.0,
            },
        ));
        assert!(spec.validate().is_err(), "floating box must be rejected");
    }
}
