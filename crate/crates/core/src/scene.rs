//! Scene loading and camera geometry.
//!
//! A scene couples an RGB reference, a metric depth image, pinhole
//! calibration, a gravity-aligned camera pose (world +Z points up), and the
//! existing 3D box annotations. Depth is stored on disk as 16-bit grayscale
//! PNG in millimeters with 0 marking invalid pixels; in memory everything is
//! meters.

use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera parameters in pixel units.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fx.is_finite() && self.fy > 0.0 && self.fy.is_finite()) {
            return Err(Error::SchemaViolation(format!(
                "intrinsics: focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::SchemaViolation(
                "intrinsics: image size must be at least 1x1".into(),
            ));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::SchemaViolation(format!(
                "intrinsics: cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::SchemaViolation(format!(
                "intrinsics: cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }
}

/// Rigid motion: world point = rotation * camera point + translation.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Checks orthonormality and unit determinant within 1e-6.
    pub fn validate(&self) -> Result<()> {
        let residual = self.rotation.transpose() * self.rotation - Matrix3::identity();
        let max_dev = residual.abs().max();
        if max_dev > 1e-6 {
            return Err(Error::InvalidCalibration(format!(
                "rotation is not orthonormal (max deviation {max_dev:.3e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidCalibration(format!(
                "rotation determinant is {det:.9}, expected 1"
            )));
        }
        if !self.translation.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidCalibration("translation is not finite".into()));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Inverse motion; rotation is orthonormal so the transpose inverts it.
    pub fn inverse_apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }
}

/// Per-pixel depth in meters with an explicit validity mask.
#[derive(Debug, Clone)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthImage {
    /// Builds from raw millimeter samples; 0 marks an invalid pixel.
    pub fn from_millimeters(width: u32, height: u32, mm: &[u16]) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if mm.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "depth buffer has {} samples, expected {}",
                mm.len(),
                n
            )));
        }
        let mut values = vec![0.0; n];
        let mut valid = vec![false; n];
        for (i, &v) in mm.iter().enumerate() {
            if v > 0 {
                values[i] = v as f64 / 1000.0;
                valid[i] = true;
            }
        }
        Ok(Self { width, height, values, valid })
    }

    /// Builds from metric samples; entries flagged invalid are ignored.
    pub fn from_meters(width: u32, height: u32, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = (width as usize) * (height as usize);
        if values.len() != n || valid.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "depth buffers have {}/{} samples, expected {}",
                values.len(),
                valid.len(),
                n
            )));
        }
        for i in 0..n {
            if valid[i] && !(values[i].is_finite() && values[i] > 0.0) {
                return Err(Error::SchemaViolation(format!(
                    "depth sample {i} marked valid but is {}",
                    values[i]
                )));
            }
        }
        Ok(Self { width, height, values, valid })
    }

    #[inline]
    fn idx(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = self.idx(u, v);
        self.valid[i].then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Organized grid of world-frame points; world +Z is opposite gravity.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub width: u32,
    pub height: u32,
    points: Vec<Vector3<f64>>,
    /// Camera-frame depth per pixel, kept for discontinuity tests.
    depths: Vec<f64>,
    valid: Vec<bool>,
}

impl PointCloud {
    /// Direct construction for unit tests that need exact geometry.
    #[cfg(test)]
    pub(crate) fn from_parts(
        width: u32,
        height: u32,
        points: Vec<Vector3<f64>>,
        depths: Vec<f64>,
        valid: Vec<bool>,
    ) -> Self {
        let n = (width as usize) * (height as usize);
        assert_eq!(points.len(), n);
        assert_eq!(depths.len(), n);
        assert_eq!(valid.len(), n);
        Self { width, height, points, depths, valid }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> &Vector3<f64> {
        &self.points[idx]
    }

    #[inline]
    pub fn depth(&self, idx: usize) -> f64 {
        self.depths[idx]
    }

    pub fn get(&self, u: u32, v: u32) -> Option<&Vector3<f64>> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v as usize * self.width as usize + u as usize;
        self.valid[i].then(|| &self.points[i])
    }

    /// Axis-aligned XY bounds over all valid points, or None if empty.
    pub fn bounds_xy(&self) -> Option<(Vector2<f64>, Vector2<f64>)> {
        let mut bounds: Option<(Vector2<f64>, Vector2<f64>)> = None;
        for (i, p) in self.points.iter().enumerate() {
            if !self.valid[i] {
                continue;
            }
            match &mut bounds {
                None => bounds = Some((p.xy(), p.xy())),
                Some((lo, hi)) => {
                    lo.x = lo.x.min(p.x);
                    lo.y = lo.y.min(p.y);
                    hi.x = hi.x.max(p.x);
                    hi.y = hi.y.max(p.y);
                }
            }
        }
        bounds
    }
}

/// Gravity-aligned oriented box: free yaw about world Z only.
#[derive(Debug, Clone, PartialEq)]
pub struct Obb3D {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    pub yaw: f64,
}

impl Obb3D {
    pub fn validate(&self) -> Result<()> {
        let finite = self.center.iter().all(|v| v.is_finite())
            && self.half_extents.iter().all(|v| v.is_finite())
            && self.yaw.is_finite();
        if !finite {
            return Err(Error::SchemaViolation("box contains non-finite values".into()));
        }
        if !self.half_extents.iter().all(|v| *v > 0.0) {
            return Err(Error::SchemaViolation(format!(
                "box half extents must be positive, got {:?}",
                self.half_extents.as_slice()
            )));
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&self.yaw) {
            return Err(Error::SchemaViolation(format!(
                "box yaw {} outside [-pi, pi]",
                self.yaw
            )));
        }
        Ok(())
    }

    pub fn bottom_z(&self) -> f64 {
        self.center.z - self.half_extents.z
    }
}

/// A category label attached to an oriented box.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub category: String,
    pub bbox: Obb3D,
}

/// One RGB-D frame with calibration, pose, and annotations.
#[derive(Debug, Clone)]
pub struct Scene {
    pub intrinsics: CameraIntrinsics,
    pub cam_to_world: RigidTransform,
    pub depth: DepthImage,
    /// Opaque reference passed through to render manifests.
    pub rgb_path: String,
    pub annotations: Vec<Annotation>,
    /// Manifest path this scene was loaded from (empty for in-memory scenes).
    pub source: String,
}

// --- JSON mirror types -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl From<&CameraIntrinsics> for IntrinsicsJson {
    fn from(i: &CameraIntrinsics) -> Self {
        Self { fx: i.fx, fy: i.fy, cx: i.cx, cy: i.cy, width: i.width, height: i.height }
    }
}

impl From<&IntrinsicsJson> for CameraIntrinsics {
    fn from(i: &IntrinsicsJson) -> Self {
        Self { fx: i.fx, fy: i.fy, cx: i.cx, cy: i.cy, width: i.width, height: i.height }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformJson {
    /// Row-major 3x3 rotation.
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for TransformJson {
    fn from(t: &RigidTransform) -> Self {
        let r = &t.rotation;
        Self {
            rotation: [
                r[(0, 0)], r[(0, 1)], r[(0, 2)],
                r[(1, 0)], r[(1, 1)], r[(1, 2)],
                r[(2, 0)], r[(2, 1)], r[(2, 2)],
            ],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<&TransformJson> for RigidTransform {
    fn from(t: &TransformJson) -> Self {
        let r = &t.rotation;
        Self {
            rotation: Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]),
            translation: Vector3::new(t.translation[0], t.translation[1], t.translation[2]),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationJson {
    pub category: String,
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    pub yaw: f64,
}

impl From<&Annotation> for AnnotationJson {
    fn from(a: &Annotation) -> Self {
        Self {
            category: a.category.clone(),
            center: [a.bbox.center.x, a.bbox.center.y, a.bbox.center.z],
            half_extents: [
                a.bbox.half_extents.x,
                a.bbox.half_extents.y,
                a.bbox.half_extents.z,
            ],
            yaw: a.bbox.yaw,
        }
    }
}

impl From<&AnnotationJson> for Annotation {
    fn from(a: &AnnotationJson) -> Self {
        Self {
            category: a.category.clone(),
            bbox: Obb3D {
                center: Vector3::new(a.center[0], a.center[1], a.center[2]),
                half_extents: Vector3::new(
                    a.half_extents[0],
                    a.half_extents[1],
                    a.half_extents[2],
                ),
                yaw: a.yaw,
            },
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifestJson {
    pub rgb: String,
    pub depth: String,
    pub intrinsics: IntrinsicsJson,
    pub cam_to_world: TransformJson,
    pub annotations: Vec<AnnotationJson>,
}

// --- Operations --------------------------------------------------------------

/// Loads and validates a scene manifest plus its depth image.
///
/// Relative `depth` paths resolve against the manifest's directory; the `rgb`
/// path is kept verbatim as an opaque reference.
pub fn load_scene(manifest_path: &Path) -> Result<Scene> {
    if !manifest_path.exists() {
        return Err(Error::MissingFile(manifest_path.to_path_buf()));
    }
    let text = std::fs::read_to_string(manifest_path)?;
    let manifest: SceneManifestJson =
        serde_json::from_str(&text).map_err(|e| Error::SchemaViolation(e.to_string()))?;

    let intrinsics = CameraIntrinsics::from(&manifest.intrinsics);
    intrinsics.validate()?;
    let cam_to_world = RigidTransform::from(&manifest.cam_to_world);
    cam_to_world.validate()?;

    let mut annotations = Vec::with_capacity(manifest.annotations.len());
    for (i, a) in manifest.annotations.iter().enumerate() {
        if a.category.is_empty() {
            return Err(Error::SchemaViolation(format!("annotation {i}: empty category")));
        }
        let ann = Annotation::from(a);
        ann.bbox
            .validate()
            .map_err(|e| Error::SchemaViolation(format!("annotation {i}: {e}")))?;
        annotations.push(ann);
    }

    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let depth_path = base.join(&manifest.depth);
    if !depth_path.exists() {
        return Err(Error::MissingFile(depth_path));
    }
    let depth_img = image::open(&depth_path)?;
    let depth = match depth_img {
        image::DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            if w != intrinsics.width || h != intrinsics.height {
                return Err(Error::DimensionMismatch(format!(
                    "depth image is {w}x{h}, intrinsics say {}x{}",
                    intrinsics.width, intrinsics.height
                )));
            }
            DepthImage::from_millimeters(w, h, buf.as_raw())?
        }
        _ => {
            return Err(Error::SchemaViolation(
                "depth image must be a 16-bit grayscale PNG".into(),
            ))
        }
    };

    Ok(Scene {
        intrinsics,
        cam_to_world,
        depth,
        rgb_path: manifest.rgb,
        annotations,
        source: manifest_path.display().to_string(),
    })
}

/// Backprojects a depth image into an organized world-frame point cloud.
///
/// Pixel (u, v) with depth d maps to the camera point
/// ((u - cx)/fx * d, (v - cy)/fy * d, d) and then through the pose.
pub fn backproject(
    depth: &DepthImage,
    intr: &CameraIntrinsics,
    pose: &RigidTransform,
) -> Result<PointCloud> {
    if depth.width != intr.width || depth.height != intr.height {
        return Err(Error::DimensionMismatch(format!(
            "depth is {}x{}, intrinsics say {}x{}",
            depth.width, depth.height, intr.width, intr.height
        )));
    }
    let n = (depth.width as usize) * (depth.height as usize);
    let mut points = vec![Vector3::zeros(); n];
    let mut depths = vec![0.0; n];
    let mut valid = vec![false; n];
    for v in 0..depth.height {
        for u in 0..depth.width {
            let i = v as usize * depth.width as usize + u as usize;
            if let Some(d) = depth.get(u, v) {
                let cam = Vector3::new(
                    (u as f64 - intr.cx) / intr.fx * d,
                    (v as f64 - intr.cy) / intr.fy * d,
                    d,
                );
                points[i] = pose.apply(&cam);
                depths[i] = d;
                valid[i] = true;
            }
        }
    }
    Ok(PointCloud { width: depth.width, height: depth.height, points, depths, valid })
}

/// Projects a world point to continuous pixel coordinates.
///
/// Exact inverse of [`backproject`] on its valid domain; the point must have
/// positive camera-frame depth.
pub fn project_to_pixel(
    point: &Vector3<f64>,
    intr: &CameraIntrinsics,
    pose: &RigidTransform,
) -> Result<(f64, f64)> {
    let cam = pose.inverse_apply(point);
    if cam.z <= 0.0 {
        return Err(Error::BehindCamera);
    }
    Ok((intr.fx * cam.x / cam.z + intr.cx, intr.fy * cam.y / cam.z + intr.cy))
}
