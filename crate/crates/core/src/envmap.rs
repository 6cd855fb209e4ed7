//! Spatially-varying environment-map retrieval and refinement.
//!
//! A scene carries a grid of small LDR half-sphere environment maps, one per
//! 4x4 pixel region. For an insertion the map at the projected insertion
//! pixel is retrieved, completed to a full sphere, sharpened to HDR with a
//! power law, and rotated from the surface-local frame into the world frame.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{project_to_pixel, CameraIntrinsics, RigidTransform};

/// How to fill the unobserved lower hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompletionPolicy {
    /// Repeat the horizon row (the last observed row) downward.
    ReplicateHorizon,
    /// Fill with a fixed value on all channels.
    Constant { value: f64 },
}

/// Gamma and completion choices for environment-map refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LightingConfig {
    /// Exponent applied per channel: out = in^gamma.
    pub gamma: f64,
    pub completion_policy: CompletionPolicy,
}

impl Default for LightingConfig {
    fn default() -> Self {
        Self { gamma: 2.0, completion_policy: CompletionPolicy::ReplicateHorizon }
    }
}

impl LightingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if let CompletionPolicy::Constant { value } = self.completion_policy {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "completion value must be non-negative, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Equirectangular RGB image, float channels, row-major, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl EnvImage {
    pub fn new(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        let expected = (width as usize) * (height as usize) * 3;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "environment map data has {} floats, expected {}",
                data.len(),
                expected
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn constant(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width as usize) * (height as usize) * 3],
        }
    }

    #[inline]
    pub fn get(&self, i: u32, j: u32) -> [f32; 3] {
        let idx = 3 * (j as usize * self.width as usize + i as usize);
        [self.data[idx], self.data[idx + 1], self.data[idx + 2]]
    }

    #[inline]
    pub fn set(&mut self, i: u32, j: u32, value: [f32; 3]) {
        let idx = 3 * (j as usize * self.width as usize + i as usize);
        self.data[idx..idx + 3].copy_from_slice(&value);
    }
}

/// Latitude coverage of an equirectangular map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coverage {
    /// Upper hemisphere only: latitudes in (0, pi/2).
    Half,
    /// Full sphere: latitudes in (-pi/2, pi/2).
    Full,
}

impl Coverage {
    fn latitude_range(self) -> (f64, f64) {
        match self {
            Coverage::Half => (0.0, std::f64::consts::FRAC_PI_2),
            Coverage::Full => (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        }
    }
}

/// Direction at a pixel center: longitude runs along X, latitude along Y
/// (top row nearest the zenith). The frame's +Z is the map's pole axis.
pub fn pixel_to_direction(
    i: u32,
    j: u32,
    width: u32,
    height: u32,
    coverage: Coverage,
) -> Result<Vector3<f64>> {
    if i >= width || j >= height {
        return Err(Error::IndexOutOfRange(i, j));
    }
    let (phi_min, phi_max) = coverage.latitude_range();
    let lambda =
        2.0 * std::f64::consts::PI * (i as f64 + 0.5) / width as f64 - std::f64::consts::PI;
    let phi = phi_max - (phi_max - phi_min) * (j as f64 + 0.5) / height as f64;
    Ok(Vector3::new(
        phi.cos() * lambda.cos(),
        phi.cos() * lambda.sin(),
        phi.sin(),
    ))
}

/// Continuous pixel coordinates of a unit direction; the exact inverse of
/// [`pixel_to_direction`] at pixel centers.
pub fn direction_to_pixel(
    dir: &Vector3<f64>,
    width: u32,
    height: u32,
    coverage: Coverage,
) -> (f64, f64) {
    let (phi_min, phi_max) = coverage.latitude_range();
    let lambda = dir.y.atan2(dir.x);
    let phi = (dir.z / dir.norm()).clamp(-1.0, 1.0).asin();
    let x = (lambda + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * width as f64 - 0.5;
    let y = (phi_max - phi) / (phi_max - phi_min) * height as f64 - 0.5;
    (x, y)
}

/// Bilinear sample with longitude wraparound and latitude clamping.
/// Weights are computed in f64 and the result cast back to f32.
pub fn bilinear_sample(map: &EnvImage, x: f64, y: f64) -> [f32; 3] {
    let w = map.width as i64;
    let h = map.height as i64;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let ix0 = (x0 as i64).rem_euclid(w) as u32;
    let ix1 = (x0 as i64 + 1).rem_euclid(w) as u32;
    let iy0 = (y0 as i64).clamp(0, h - 1) as u32;
    let iy1 = (y0 as i64 + 1).clamp(0, h - 1) as u32;
    let p00 = map.get(ix0, iy0);
    let p10 = map.get(ix1, iy0);
    let p01 = map.get(ix0, iy1);
    let p11 = map.get(ix1, iy1);
    let mut out = [0.0f32; 3];
    for c in 0..3 {
        let top = (1.0 - fx) * p00[c] as f64 + fx * p10[c] as f64;
        let bottom = (1.0 - fx) * p01[c] as f64 + fx * p11[c] as f64;
        out[c] = ((1.0 - fy) * top + fy * bottom) as f32;
    }
    out
}

/// Grid of half-sphere LDR maps, one per 4x4 pixel region of the source
/// image, stored row-major over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvMapGrid {
    pub grid_w: u32,
    pub grid_h: u32,
    pub map_w: u32,
    pub map_h: u32,
    cells: Vec<EnvImage>,
}

/// Cell lattice dimensions for an image: one cell per 4x4 pixel region.
pub fn expected_grid_dims(image_width: u32, image_height: u32) -> (u32, u32) {
    (image_width.div_ceil(4), image_height.div_ceil(4))
}

impl EnvMapGrid {
    pub fn from_cells(grid_w: u32, grid_h: u32, cells: Vec<EnvImage>) -> Result<Self> {
        if cells.len() != (grid_w as usize) * (grid_h as usize) || cells.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} cells, expected {}",
                cells.len(),
                (grid_w as usize) * (grid_h as usize)
            )));
        }
        let map_w = cells[0].width;
        let map_h = cells[0].height;
        if map_w == 0 || map_h == 0 {
            return Err(Error::SchemaViolation("environment maps must be non-empty".into()));
        }
        for cell in &cells {
            if cell.width != map_w || cell.height != map_h {
                return Err(Error::DimensionMismatch(
                    "environment map cells must share one resolution".into(),
                ));
            }
            if !cell.data.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
                return Err(Error::SchemaViolation(
                    "environment map values must lie in [0, 1]".into(),
                ));
            }
        }
        Ok(Self { grid_w, grid_h, map_w, map_h, cells })
    }

    pub fn cell(&self, cx: u32, cy: u32) -> &EnvImage {
        &self.cells[cy as usize * self.grid_w as usize + cx as usize]
    }
}

/// The half-sphere map registered to the 4x4 region containing pixel (u, v).
pub fn retrieve_envmap(grid: &EnvMapGrid, u: f64, v: f64) -> Result<&EnvImage> {
    if !(u >= 0.0 && v >= 0.0) {
        return Err(Error::OutOfBounds(u, v));
    }
    let cx = (u / 4.0).floor() as i64;
    let cy = (v / 4.0).floor() as i64;
    if cx >= grid.grid_w as i64 || cy >= grid.grid_h as i64 {
        return Err(Error::OutOfBounds(u, v));
    }
    Ok(grid.cell(cx as u32, cy as u32))
}

/// Doubles the map downward: observed rows stay bitwise untouched, the new
/// lower-hemisphere rows are filled per the policy.
pub fn complete_latitude(half: &EnvImage, policy: CompletionPolicy) -> EnvImage {
    let w = half.width as usize;
    let h = half.height as usize;
    let mut data = Vec::with_capacity(w * h * 2 * 3);
    data.extend_from_slice(&half.data);
    match policy {
        CompletionPolicy::ReplicateHorizon => {
            let horizon = &half.data[(h - 1) * w * 3..h * w * 3];
            for _ in 0..h {
                data.extend_from_slice(horizon);
            }
        }
        CompletionPolicy::Constant { value } => {
            data.resize(w * h * 2 * 3, value as f32);
        }
    }
    EnvImage { width: half.width, height: half.height * 2, data }
}

/// Per-channel power law, the LDR-to-HDR refinement: out = in^gamma.
pub fn refine_intensity(map: &EnvImage, gamma: f64) -> Result<EnvImage> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidGamma(gamma));
    }
    let data = map.data.iter().map(|v| (*v as f64).powf(gamma) as f32).collect();
    Ok(EnvImage { width: map.width, height: map.height, data })
}

/// Orthonormal frame whose +Z is the given unit normal: columns are
/// (tangent, bitangent, normal), tangent from world X projected onto the
/// plane (world Y when the normal is nearly parallel to X).
pub fn normal_frame(normal: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let norm = normal.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitNormal(norm));
    }
    let x = Vector3::x();
    let t = if x.dot(normal).abs() > 0.999 {
        let y = Vector3::y();
        (y - y.dot(normal) * normal).normalize()
    } else {
        (x - x.dot(normal) * normal).normalize()
    };
    let b = normal.cross(&t);
    Ok(Matrix3::from_columns(&[t, b, *normal]))
}

/// Resamples a full-sphere map under a rotation: each output direction d
/// reads the input at R^T d (bilinear, longitude wrap, latitude clamp).
pub fn rotate_envmap(map: &EnvImage, rotation: &Matrix3<f64>) -> EnvImage {
    let rt = rotation.transpose();
    let mut out = EnvImage::constant(map.width, map.height, 0.0);
    for j in 0..map.height {
        for i in 0..map.width {
            let d_world = pixel_to_direction(i, j, map.width, map.height, Coverage::Full)
                .expect("loop indices are in range");
            let d_local = rt * d_world;
            let (x, y) = direction_to_pixel(&d_local, map.width, map.height, Coverage::Full);
            out.set(i, j, bilinear_sample(map, x, y));
        }
    }
    out
}

/// Rotates a surface-local full map into the world frame. A floor with
/// normal exactly +Z shares the world frame, so that case is returned
/// verbatim with no resampling.
pub fn transform_to_world(map: &EnvImage, normal: &Vector3<f64>) -> Result<EnvImage> {
    let frame = normal_frame(normal)?;
    if normal.x == 0.0 && normal.y == 0.0 && normal.z == 1.0 {
        return Ok(map.clone());
    }
    Ok(rotate_envmap(map, &frame))
}

/// Full retrieval pipeline for one insertion: project the point, pick the
/// registered half map, complete the lower hemisphere, apply the power-law
/// refinement, and rotate into the world frame.
pub fn build_insertion_envmap(
    grid: &EnvMapGrid,
    point: &Vector3<f64>,
    intrinsics: &CameraIntrinsics,
    cam_to_world: &RigidTransform,
    floor_normal: &Vector3<f64>,
    cfg: &LightingConfig,
) -> Result<EnvImage> {
    cfg.validate()?;
    let (u, v) = project_to_pixel(point, intrinsics, cam_to_world)?;
    if !(u >= 0.0 && u < intrinsics.width as f64 && v >= 0.0 && v < intrinsics.height as f64) {
        return Err(Error::OutOfBounds(u, v));
    }
    let half = retrieve_envmap(grid, u, v)?;
    let full = complete_latitude(half, cfg.completion_policy);
    let hdr = refine_intensity(&full, cfg.gamma)?;
    transform_to_world(&hdr, floor_normal)
}

// --- File formats -------------------------------------------------------------

const GRID_MAGIC: &[u8; 4] = b"ENVG";

/// Writes a grid: magic "ENVG", five little-endian u32 (grid_w, grid_h,
/// map_w, map_h, channels = 3), then f32 data cell-row-major, within each
/// cell row-major, RGB interleaved.
pub fn save_envmap_grid(grid: &EnvMapGrid, path: &Path) -> Result<()> {
    let cell_floats = (grid.map_w as usize) * (grid.map_h as usize) * 3;
    let mut bytes = Vec::with_capacity(24 + grid.cells.len() * cell_floats * 4);
    bytes.extend_from_slice(GRID_MAGIC);
    for v in [grid.grid_w, grid.grid_h, grid.map_w, grid.map_h, 3u32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for cell in &grid.cells {
        for v in &cell.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_envmap_grid(path: &Path) -> Result<EnvMapGrid> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    if bytes.len() < 24 || &bytes[0..4] != GRID_MAGIC {
        return Err(Error::SchemaViolation(
            "environment grid file lacks the ENVG header".into(),
        ));
    }
    let mut fields = [0u32; 5];
    for (k, field) in fields.iter_mut().enumerate() {
        let off = 4 + 4 * k;
        *field = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    }
    let [grid_w, grid_h, map_w, map_h, channels] = fields;
    if channels != 3 {
        return Err(Error::SchemaViolation(format!(
            "environment grid must have 3 channels, got {channels}"
        )));
    }
    let cell_floats = (map_w as usize) * (map_h as usize) * 3;
    let n_cells = (grid_w as usize) * (grid_h as usize);
    let expected = 24 + n_cells * cell_floats * 4;
    if bytes.len() != expected {
        return Err(Error::SchemaViolation(format!(
            "environment grid file is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let mut cells = Vec::with_capacity(n_cells);
    let mut off = 24;
    for _ in 0..n_cells {
        let mut data = Vec::with_capacity(cell_floats);
        for _ in 0..cell_floats {
            data.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
            off += 4;
        }
        cells.push(EnvImage { width: map_w, height: map_h, data });
    }
    EnvMapGrid::from_cells(grid_w, grid_h, cells)
}

/// Writes a map as binary PFM: "PF", dimensions, scale -1.0 (little
/// endian), then f32 RGB rows ordered bottom-to-top.
pub fn write_pfm(map: &EnvImage, path: &Path) -> Result<()> {
    let header = format!("PF\n{} {}\n-1.0\n", map.width, map.height);
    let w = map.width as usize;
    let mut bytes = Vec::with_capacity(header.len() + map.data.len() * 4);
    bytes.extend_from_slice(header.as_bytes());
    for j in (0..map.height as usize).rev() {
        for v in &map.data[j * w * 3..(j + 1) * w * 3] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<EnvImage> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)?;
    let bad = |msg: &str| Error::SchemaViolation(format!("PFM: {msg}"));
    // Header: three newline-terminated text lines.
    let mut lines = Vec::new();
    let mut start = 0;
    for _ in 0..3 {
        let end = bytes[start..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| bad("truncated header"))?
            + start;
        lines.push(
            std::str::from_utf8(&bytes[start..end]).map_err(|_| bad("non-text header"))?,
        );
        start = end + 1;
    }
    if lines[0] != "PF" {
        return Err(bad("expected color format marker PF"));
    }
    let mut dims = lines[1].split_whitespace();
    let width: u32 = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing width"))?;
    let height: u32 = dims
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("missing height"))?;
    let scale: f64 = lines[2].trim().parse().map_err(|_| bad("bad scale"))?;
    if scale >= 0.0 {
        return Err(bad("big-endian data is not supported"));
    }
    let w = width as usize;
    let h = height as usize;
    if bytes.len() != start + w * h * 3 * 4 {
        return Err(bad("data size does not match dimensions"));
    }
    let mut data = vec![0.0f32; w * h * 3];
    let mut off = start;
    for j in (0..h).rev() {
        for v in data[j * w * 3..(j + 1) * w * 3].iter_mut() {
            *v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
            off += 4;
        }
    }
    if !data.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(bad("values must be finite and non-negative"));
    }
    EnvImage::new(width, height, data)
}
