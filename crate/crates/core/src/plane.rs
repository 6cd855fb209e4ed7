//! Planar region extraction from organized point clouds.
//!
//! Two-stage scheme: agglomerative clustering over a coarse block graph
//! merges blocks while the merged least-squares fit stays tight, then
//! pixel-wise region growing pulls in boundary pixels and each plane is
//! refit on its final inlier set.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::PointCloud;

/// Tuning for block construction, merging, and region growing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlaneExtractionConfig {
    /// Pixels per side of the initial graph blocks.
    pub block_size: u32,
    /// Worst acceptable mean squared plane-fit error (m^2); merging stops
    /// when no adjacent pair can be combined under this bound.
    pub mse_threshold: f64,
    /// Point-to-plane distance allowed during region growing (m).
    pub grow_distance: f64,
    /// Minimum pixel count for a cluster to survive merging.
    pub min_inliers: usize,
    /// Maximum camera-depth range inside a block (m); blocks spanning a
    /// larger range straddle a depth step and are rejected.
    pub depth_discontinuity: f64,
}

impl Default for PlaneExtractionConfig {
    fn default() -> Self {
        Self {
            block_size: 10,
            mse_threshold: 0.0004,
            grow_distance: 0.02,
            min_inliers: 500,
            depth_discontinuity: 0.05,
        }
    }
}

impl PlaneExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0
            || self.mse_threshold <= 0.0
            || self.grow_distance <= 0.0
            || self.min_inliers == 0
            || self.depth_discontinuity <= 0.0
        {
            return Err(Error::InvalidConfig(
                "plane extraction parameters must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted plane with its supporting pixels.
///
/// The plane equation is `normal . x + offset = 0` with a unit normal whose
/// z component is non-negative (ties resolved toward +x, then +y).
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    /// Mean squared orthogonal distance of the inliers (m^2).
    pub mse: f64,
    /// Mean of the inlier points.
    pub centroid: Vector3<f64>,
    /// Per-axis population standard deviation of the inlier points.
    pub axis_std: Vector3<f64>,
    /// Indices into the organized cloud, ascending.
    pub inliers: Vec<usize>,
}

impl Plane {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }

    /// Unsigned point-to-plane distance.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (self.normal.dot(p) + self.offset).abs()
    }
}

/// Least-squares plane parameters without the supporting pixel set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub normal: Vector3<f64>,
    pub offset: f64,
    pub mse: f64,
}

/// Eigenvalues ascending with matching eigenvectors.
fn sorted_eigen(cov: Matrix3<f64>) -> ([f64; 3], [Vector3<f64>; 3]) {
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    (
        [
            eig.eigenvalues[order[0]],
            eig.eigenvalues[order[1]],
            eig.eigenvalues[order[2]],
        ],
        [
            eig.eigenvectors.column(order[0]).into_owned(),
            eig.eigenvectors.column(order[1]).into_owned(),
            eig.eigenvectors.column(order[2]).into_owned(),
        ],
    )
}

/// Plane through `mean` from a point covariance; None when the points are
/// effectively collinear (or fewer than 3), which leaves the normal
/// undetermined.
fn plane_from_cov(n: f64, mean: &Vector3<f64>, cov: Matrix3<f64>) -> Option<PlaneFit> {
    if n < 3.0 {
        return None;
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let (vals, vecs) = sorted_eigen(sym);
    if vals[2] <= 0.0 || vals[1] <= 1e-12 * vals[2] {
        return None;
    }
    let mut normal = vecs[0] / vecs[0].norm();
    let flip = if normal.z != 0.0 {
        normal.z < 0.0
    } else if normal.x != 0.0 {
        normal.x < 0.0
    } else {
        normal.y < 0.0
    };
    if flip {
        normal = -normal;
    }
    // Squash negative zeros so serialized planes compare bit-stable.
    normal.x += 0.0;
    normal.y += 0.0;
    normal.z += 0.0;
    let offset = -normal.dot(mean);
    Some(PlaneFit { normal, offset, mse: vals[0].max(0.0) })
}

/// Least-squares plane through a point set.
///
/// The normal is the smallest principal direction of the centered
/// covariance; mse is the mean squared orthogonal distance.
pub fn fit_plane(points: &[Vector3<f64>]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector3<f64>>() / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        scatter += d * d.transpose();
    }
    plane_from_cov(n, &mean, scatter / n)
        .ok_or_else(|| Error::DegenerateInput("points are collinear".into()))
}

/// Streaming first/second moments of a point set; merging two sets is
/// addition, which is what makes best-first cluster merging cheap.
#[derive(Debug, Clone, Copy)]
struct MomentStats {
    n: f64,
    sum: Vector3<f64>,
    sq: Matrix3<f64>,
}

impl MomentStats {
    fn new() -> Self {
        Self { n: 0.0, sum: Vector3::zeros(), sq: Matrix3::zeros() }
    }

    fn push(&mut self, p: &Vector3<f64>) {
        self.n += 1.0;
        self.sum += p;
        self.sq += p * p.transpose();
    }

    fn merged(&self, other: &Self) -> Self {
        Self { n: self.n + other.n, sum: self.sum + other.sum, sq: self.sq + other.sq }
    }

    fn mean(&self) -> Vector3<f64> {
        self.sum / self.n
    }

    fn cov(&self) -> Matrix3<f64> {
        let m = self.mean();
        let c = self.sq / self.n - m * m.transpose();
        (c + c.transpose()) * 0.5
    }

    /// Smallest eigenvalue of the covariance: the plane-fit mse.
    fn mse(&self) -> f64 {
        let (vals, _) = sorted_eigen(self.cov());
        vals[0].max(0.0)
    }

    fn fit(&self) -> Option<PlaneFit> {
        plane_from_cov(self.n, &self.mean(), self.cov())
    }

    fn axis_std(&self) -> Vector3<f64> {
        let c = self.cov();
        Vector3::new(
            c[(0, 0)].max(0.0).sqrt(),
            c[(1, 1)].max(0.0).sqrt(),
            c[(2, 2)].max(0.0).sqrt(),
        )
    }
}

/// One accepted block: its pixels, moments, and cached fit (None when the
/// block is too flat-degenerate to define a normal).
struct BlockNode {
    stats: MomentStats,
    pixels: Vec<usize>,
    #[allow(dead_code)]
    fit: Option<PlaneFit>,
}

/// Coarse graph over accepted blocks with rook adjacency.
pub struct BlockGraph {
    nodes: Vec<BlockNode>,
    edges: Vec<BTreeSet<usize>>,
}

impl BlockGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(|e| e.len()).sum::<usize>() / 2
    }
}

/// Tiles the cloud into non-overlapping `block_size` squares and keeps the
/// blocks that are fully valid, span no depth step, and fit a plane within
/// `mse_threshold`. Partial blocks at the right/bottom edges are ignored.
pub fn build_block_graph(cloud: &PointCloud, cfg: &PlaneExtractionConfig) -> BlockGraph {
    let bs = cfg.block_size as usize;
    let bw = cloud.width as usize / bs;
    let bh = cloud.height as usize / bs;
    let mut grid: Vec<Option<usize>> = vec![None; bw * bh];
    let mut nodes = Vec::new();

    for by in 0..bh {
        for bx in 0..bw {
            let mut stats = MomentStats::new();
            let mut pixels = Vec::with_capacity(bs * bs);
            let mut depth_min = f64::INFINITY;
            let mut depth_max = f64::NEG_INFINITY;
            let mut complete = true;
            'block: for dy in 0..bs {
                for dx in 0..bs {
                    let u = bx * bs + dx;
                    let v = by * bs + dy;
                    let idx = v * cloud.width as usize + u;
                    if !cloud.is_valid(idx) {
                        complete = false;
                        break 'block;
                    }
                    stats.push(cloud.point(idx));
                    let d = cloud.depth(idx);
                    depth_min = depth_min.min(d);
                    depth_max = depth_max.max(d);
                    pixels.push(idx);
                }
            }
            if !complete || depth_max - depth_min > cfg.depth_discontinuity {
                continue;
            }
            if stats.mse() > cfg.mse_threshold {
                continue;
            }
            grid[by * bw + bx] = Some(nodes.len());
            let fit = stats.fit();
            nodes.push(BlockNode { stats, pixels, fit });
        }
    }

    let mut edges = vec![BTreeSet::new(); nodes.len()];
    for by in 0..bh {
        for bx in 0..bw {
            let Some(a) = grid[by * bw + bx] else { continue };
            if bx + 1 < bw {
                if let Some(b) = grid[by * bw + bx + 1] {
                    edges[a].insert(b);
                    edges[b].insert(a);
                }
            }
            if by + 1 < bh {
                if let Some(b) = grid[(by + 1) * bw + bx] {
                    edges[a].insert(b);
                    edges[b].insert(a);
                }
            }
        }
    }
    BlockGraph { nodes, edges }
}

#[derive(Debug, Clone, Copy)]
struct MergeCand {
    mse: f64,
    a: usize,
    b: usize,
}

impl PartialEq for MergeCand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for MergeCand {}
impl PartialOrd for MergeCand {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MergeCand {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.mse
            .total_cmp(&other.mse)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }
}

struct ClusterNode {
    stats: MomentStats,
    pixels: Vec<usize>,
    neighbors: BTreeSet<usize>,
    min_pixel: usize,
    alive: bool,
}

/// Best-first merging of adjacent blocks: always combine the adjacent pair
/// whose merged fit has minimal mse, while that mse stays within the
/// threshold. Surviving clusters with enough pixels become coarse planes.
///
/// Merged nodes get fresh ids, so queue entries naming a consumed node are
/// recognized as stale and skipped when popped.
pub fn ahc_merge(graph: &BlockGraph, cfg: &PlaneExtractionConfig) -> Vec<Plane> {
    let mut arena: Vec<ClusterNode> = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, node)| ClusterNode {
            stats: node.stats,
            pixels: node.pixels.clone(),
            neighbors: graph.edges[i].clone(),
            min_pixel: node.pixels.first().copied().unwrap_or(usize::MAX),
            alive: true,
        })
        .collect();

    let mut heap: BinaryHeap<Reverse<MergeCand>> = BinaryHeap::new();
    for a in 0..arena.len() {
        for &b in &arena[a].neighbors {
            if a < b {
                let mse = arena[a].stats.merged(&arena[b].stats).mse();
                heap.push(Reverse(MergeCand { mse, a, b }));
            }
        }
    }

    while let Some(Reverse(cand)) = heap.pop() {
        if !arena[cand.a].alive || !arena[cand.b].alive {
            continue;
        }
        if cand.mse > cfg.mse_threshold {
            break;
        }
        let new_id = arena.len();
        let stats = arena[cand.a].stats.merged(&arena[cand.b].stats);
        let mut pixels = std::mem::take(&mut arena[cand.a].pixels);
        pixels.append(&mut arena[cand.b].pixels);
        let mut neighbors: BTreeSet<usize> = std::mem::take(&mut arena[cand.a].neighbors);
        neighbors.extend(std::mem::take(&mut arena[cand.b].neighbors));
        neighbors.remove(&cand.a);
        neighbors.remove(&cand.b);
        let min_pixel = arena[cand.a].min_pixel.min(arena[cand.b].min_pixel);
        arena[cand.a].alive = false;
        arena[cand.b].alive = false;
        for &nb in &neighbors {
            arena[nb].neighbors.remove(&cand.a);
            arena[nb].neighbors.remove(&cand.b);
            arena[nb].neighbors.insert(new_id);
            let mse = stats.merged(&arena[nb].stats).mse();
            heap.push(Reverse(MergeCand { mse, a: nb.min(new_id), b: nb.max(new_id) }));
        }
        arena.push(ClusterNode { stats, pixels, neighbors, min_pixel, alive: true });
    }

    let mut clusters: Vec<&ClusterNode> = arena
        .iter()
        .filter(|n| n.alive && n.pixels.len() >= cfg.min_inliers)
        .collect();
    clusters.sort_by_key(|n| n.min_pixel);

    clusters
        .into_iter()
        .filter_map(|node| {
            let fit = node.stats.fit()?;
            let mut inliers = node.pixels.clone();
            inliers.sort_unstable();
            Some(Plane {
                normal: fit.normal,
                offset: fit.offset,
                mse: fit.mse,
                centroid: node.stats.mean(),
                axis_std: node.stats.axis_std(),
                inliers,
            })
        })
        .collect()
}

/// Rebuilds a plane from its final pixel set with a fresh least-squares fit;
/// falls back to the previous equation if the refit is degenerate.
fn refit_plane(inliers: Vec<usize>, cloud: &PointCloud, previous: &Plane) -> Plane {
    let mut stats = MomentStats::new();
    let points: Vec<Vector3<f64>> = inliers.iter().map(|&i| *cloud.point(i)).collect();
    for p in &points {
        stats.push(p);
    }
    match fit_plane(&points) {
        Ok(fit) => Plane {
            normal: fit.normal,
            offset: fit.offset,
            mse: fit.mse,
            centroid: stats.mean(),
            axis_std: stats.axis_std(),
            inliers,
        },
        Err(_) => {
            let mse = points
                .iter()
                .map(|p| (previous.normal.dot(p) + previous.offset).powi(2))
                .sum::<f64>()
                / points.len().max(1) as f64;
            Plane {
                normal: previous.normal,
                offset: previous.offset,
                mse,
                centroid: stats.mean(),
                axis_std: stats.axis_std(),
                inliers,
            }
        }
    }
}

/// Grows each plane outward pixel by pixel: unassigned valid pixels
/// 8-adjacent to an assigned pixel join the plane (among those within
/// `grow_distance`) with the smallest point-to-plane distance, lower plane
/// index on ties. Passes are synchronous — every candidate of a pass is
/// judged against the incoming plane equations — and repeat to a fixpoint.
/// Each plane is then refit on its grown inlier set, and the refined list is
/// ordered by descending inlier count, then lexicographic normal.
pub fn region_grow(
    planes: &[Plane],
    cloud: &PointCloud,
    cfg: &PlaneExtractionConfig,
) -> Vec<Plane> {
    const NONE: u32 = u32::MAX;
    let n = cloud.len();
    let mut assignment: Vec<u32> = vec![NONE; n];
    let mut frontier: Vec<usize> = Vec::new();
    for (pi, plane) in planes.iter().enumerate() {
        for &idx in &plane.inliers {
            assignment[idx] = pi as u32;
            frontier.push(idx);
        }
    }
    // A pixel's distances never change across passes, so one failed
    // evaluation is final and the flag doubles as a per-pass dedup.
    let mut evaluated = vec![false; n];
    let w = cloud.width as i64;
    let h = cloud.height as i64;
    const NEIGHBORS: [(i64, i64); 8] =
        [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

    while !frontier.is_empty() {
        let mut candidates = Vec::new();
        for &idx in &frontier {
            let u = (idx as i64) % w;
            let v = (idx as i64) / w;
            for (du, dv) in NEIGHBORS {
                let (nu, nv) = (u + du, v + dv);
                if nu < 0 || nv < 0 || nu >= w || nv >= h {
                    continue;
                }
                let nidx = (nv * w + nu) as usize;
                if assignment[nidx] != NONE || evaluated[nidx] || !cloud.is_valid(nidx) {
                    continue;
                }
                evaluated[nidx] = true;
                candidates.push(nidx);
            }
        }
        let mut next = Vec::new();
        for idx in candidates {
            let p = cloud.point(idx);
            let mut best: Option<(usize, f64)> = None;
            for (pi, plane) in planes.iter().enumerate() {
                let d = plane.distance(p);
                if d > cfg.grow_distance {
                    continue;
                }
                match best {
                    None => best = Some((pi, d)),
                    Some((_, bd)) if d < bd - 1e-12 => best = Some((pi, d)),
                    _ => {}
                }
            }
            if let Some((pi, _)) = best {
                assignment[idx] = pi as u32;
                next.push(idx);
            }
        }
        frontier = next;
    }

    let mut inlier_lists: Vec<Vec<usize>> = vec![Vec::new(); planes.len()];
    for idx in 0..n {
        let a = assignment[idx];
        if a != NONE {
            inlier_lists[a as usize].push(idx);
        }
    }

    let mut refined: Vec<Plane> = inlier_lists
        .into_iter()
        .zip(planes)
        .map(|(inliers, previous)| refit_plane(inliers, cloud, previous))
        .collect();
    refined.sort_by(|a, b| {
        b.inliers
            .len()
            .cmp(&a.inliers.len())
            .then(a.normal.x.total_cmp(&b.normal.x))
            .then(a.normal.y.total_cmp(&b.normal.y))
            .then(a.normal.z.total_cmp(&b.normal.z))
    });
    refined
}

/// Full extraction: block graph, best-first merging, region growing, refit.
pub fn extract_planes(cloud: &PointCloud, cfg: &PlaneExtractionConfig) -> Result<Vec<Plane>> {
    cfg.validate()?;
    let graph = build_block_graph(cloud, cfg);
    let coarse = ahc_merge(&graph, cfg);
    Ok(region_grow(&coarse, cloud, cfg))
}
