//! Horizontal-plane filtering, floor selection, and the floor statistics
//! that define the placement search square.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::scene::PointCloud;

/// Gates for calling a plane "horizontal".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizontalConfig {
    /// Maximum angle between the plane normal and world +Z, degrees.
    pub normal_tolerance_deg: f64,
    /// Upper bound (exclusive) on the inliers' Z standard deviation, meters.
    pub z_std_threshold: f64,
}

impl Default for HorizontalConfig {
    fn default() -> Self {
        Self { normal_tolerance_deg: 10.0, z_std_threshold: 0.05 }
    }
}

impl HorizontalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.normal_tolerance_deg > 0.0 && self.normal_tolerance_deg < 45.0) {
            return Err(Error::InvalidConfig(format!(
                "normal_tolerance_deg must lie in (0, 45), got {}",
                self.normal_tolerance_deg
            )));
        }
        if !(self.z_std_threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "z_std_threshold must be positive, got {}",
                self.z_std_threshold
            )));
        }
        Ok(())
    }
}

/// Floor center and spread: the placement search square is
/// [c_x ± sigma_x] × [c_y ± sigma_y].
#[derive(Debug, Clone)]
pub struct FloorStats {
    /// Mean of the floor plane's inlier points.
    pub c: Vector3<f64>,
    /// Population standard deviation of inlier X coordinates.
    pub sigma_x: f64,
    /// Population standard deviation of inlier Y coordinates.
    pub sigma_y: f64,
    /// The selected floor plane.
    pub plane: Plane,
}

/// Whether a plane faces up within the angular tolerance and has small
/// inlier spread along Z.
pub fn is_horizontal(plane: &Plane, cfg: &HorizontalConfig) -> bool {
    let cos_tol = cfg.normal_tolerance_deg.to_radians().cos();
    plane.normal.z >= cos_tol && plane.axis_std.z < cfg.z_std_threshold
}

/// Keeps planes whose normal is within the angular tolerance of +Z and
/// whose inlier Z spread is below the threshold; order preserved.
pub fn filter_horizontal(planes: &[Plane], cfg: &HorizontalConfig) -> Vec<Plane> {
    planes.iter().filter(|p| is_horizontal(p, cfg)).cloned().collect()
}

/// Picks the floor: the horizontal plane with the lowest centroid Z.
/// Centroids within 1e-9 of each other tie; the larger inlier set wins.
pub fn select_ground<'a>(planes: &'a [Plane], cfg: &HorizontalConfig) -> Result<&'a Plane> {
    let mut best: Option<&Plane> = None;
    for plane in planes.iter().filter(|p| is_horizontal(p, cfg)) {
        match best {
            None => best = Some(plane),
            Some(b) => {
                let dz = plane.centroid.z - b.centroid.z;
                if dz < -1e-9 || (dz.abs() <= 1e-9 && plane.inlier_count() > b.inlier_count()) {
                    best = Some(plane);
                }
            }
        }
    }
    best.ok_or(Error::NoGroundPlane)
}

/// Mean and per-axis population spread of the floor plane's inlier points.
pub fn floor_stats(plane: &Plane, cloud: &PointCloud) -> Result<FloorStats> {
    if plane.inliers.len() < 2 {
        return Err(Error::DegenerateFloor);
    }
    let n = plane.inliers.len() as f64;
    let mut c = Vector3::zeros();
    for &idx in &plane.inliers {
        c += cloud.point(idx);
    }
    c /= n;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for &idx in &plane.inliers {
        let p = cloud.point(idx);
        var_x += (p.x - c.x).powi(2);
        var_y += (p.y - c.y).powi(2);
    }
    Ok(FloorStats {
        c,
        sigma_x: (var_x / n).sqrt(),
        sigma_y: (var_y / n).sqrt(),
        plane: plane.clone(),
    })
}
