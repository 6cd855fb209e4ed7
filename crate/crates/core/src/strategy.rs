//! Pluggable placement strategies and category-selection policies.
//!
//! Both families are trait objects behind name-keyed registries so the CLI
//! and config can swap variants: placement "constrained" (the default
//! collision-aware search) vs "random" (an unconstrained baseline for
//! degradation studies), and category policies "uniform_random" vs
//! "floor_size_gated".

use std::collections::BTreeMap;

use nalgebra::Vector2;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ground::FloorStats;
use crate::insertion::{
    collision_score, constrained_search, footprint, scaled_obb, Asset, ClassStats,
    InsertionConfig, InsertionParams,
};
use crate::scene::Obb3D;

/// Everything a placement strategy may consult for one insertion.
pub struct PlacementContext<'a> {
    pub floor: &'a FloorStats,
    /// XY bounding box of the scene's valid points, if any.
    pub scene_bounds: Option<(Vector2<f64>, Vector2<f64>)>,
    pub existing: &'a [Obb3D],
    pub asset: &'a Asset,
    pub stats: &'a ClassStats,
    pub cfg: &'a InsertionConfig,
}

pub trait PlacementStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn place(&self, rng: &mut dyn RngCore, ctx: &PlacementContext) -> Result<InsertionParams>;
}

/// The collision-aware sampling search.
pub struct ConstrainedPlacement;

impl PlacementStrategy for ConstrainedPlacement {
    fn name(&self) -> &'static str {
        "constrained"
    }

    fn place(&self, rng: &mut dyn RngCore, ctx: &PlacementContext) -> Result<InsertionParams> {
        let mut rng = rng;
        constrained_search(&mut rng, ctx.floor, ctx.existing, ctx.asset, ctx.stats, ctx.cfg)
    }
}

/// Baseline with every constraint disabled: a single draw, position uniform
/// over the whole scene footprint, no collision minimization. The collision
/// score of the one candidate is still recorded for evaluation.
pub struct RandomPlacement;

impl PlacementStrategy for RandomPlacement {
    fn name(&self) -> &'static str {
        "random"
    }

    fn place(&self, rng: &mut dyn RngCore, ctx: &PlacementContext) -> Result<InsertionParams> {
        ctx.cfg.validate()?;
        let height_stats = ctx
            .stats
            .get(&ctx.asset.category)
            .ok_or_else(|| Error::UnknownCategory(ctx.asset.category.clone()))?;
        let (lo, hi) = ctx.scene_bounds.unwrap_or((
            Vector2::new(ctx.floor.c.x - ctx.floor.sigma_x, ctx.floor.c.y - ctx.floor.sigma_y),
            Vector2::new(ctx.floor.c.x + ctx.floor.sigma_x, ctx.floor.c.y + ctx.floor.sigma_y),
        ));
        let mut rng = rng;
        let p_x = rng.gen_range(lo.x..=hi.x);
        let p_y = rng.gen_range(lo.y..=hi.y);
        let normal = Normal::new(height_stats.mean_height, height_stats.std_height)
            .map_err(|e| Error::Internal(format!("height distribution: {e}")))?;
        let mut s = normal.sample(&mut rng).max(ctx.cfg.min_height);
        let r = rng.gen_range(1.0..=ctx.cfg.r_max);
        s /= r;
        let o = rng.gen_range(-std::f64::consts::PI..=std::f64::consts::PI);
        let p = nalgebra::Vector3::new(p_x, p_y, ctx.floor.c.z);
        let bbox = scaled_obb(ctx.asset, &p, s, o);
        let existing: Vec<_> = ctx.existing.iter().map(footprint).collect();
        let l = collision_score(&footprint(&bbox), &existing)?;
        Ok(InsertionParams { p, s, o, r, l, iterations: 1, bbox })
    }
}

pub fn placement_names() -> &'static [&'static str] {
    &["constrained", "random"]
}

pub fn create_placement(name: &str) -> Result<Box<dyn PlacementStrategy>> {
    match name {
        "constrained" => Ok(Box::new(ConstrainedPlacement)),
        "random" => Ok(Box::new(RandomPlacement)),
        other => Err(Error::InvalidConfig(format!(
            "unknown placement strategy '{other}' (available: {})",
            placement_names().join(", ")
        ))),
    }
}

/// How to pick the category to insert.
pub trait CategoryPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    /// Draws one category. `categories` must be non-empty.
    fn select(&self, rng: &mut dyn RngCore, categories: &[String], floor: &FloorStats)
        -> Result<String>;
}

fn pick_uniform(rng: &mut dyn RngCore, categories: &[String]) -> Result<String> {
    if categories.is_empty() {
        return Err(Error::Internal("category pool is empty".into()));
    }
    Ok(categories[rng.gen_range(0..categories.len())].clone())
}

pub struct UniformRandomPolicy;

impl CategoryPolicy for UniformRandomPolicy {
    fn name(&self) -> &'static str {
        "uniform_random"
    }

    fn select(
        &self,
        rng: &mut dyn RngCore,
        categories: &[String],
        _floor: &FloorStats,
    ) -> Result<String> {
        pick_uniform(rng, categories)
    }
}

/// Skips categories whose minimum floor-area threshold exceeds the search
/// square's area (4 sigma_x sigma_y); unlisted categories always qualify.
/// Falls back to the full list when the filter leaves nothing.
pub struct FloorSizeGatedPolicy {
    pub area_thresholds: BTreeMap<String, f64>,
}

impl CategoryPolicy for FloorSizeGatedPolicy {
    fn name(&self) -> &'static str {
        "floor_size_gated"
    }

    fn select(
        &self,
        rng: &mut dyn RngCore,
        categories: &[String],
        floor: &FloorStats,
    ) -> Result<String> {
        let area = 4.0 * floor.sigma_x * floor.sigma_y;
        let eligible: Vec<String> = categories
            .iter()
            .filter(|c| self.area_thresholds.get(*c).map_or(true, |t| *t <= area))
            .cloned()
            .collect();
        if eligible.is_empty() {
            pick_uniform(rng, categories)
        } else {
            pick_uniform(rng, &eligible)
        }
    }
}

/// Serializable selection of a category policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    UniformRandom,
    FloorSizeGated { area_thresholds: BTreeMap<String, f64> },
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self::UniformRandom
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if let Self::FloorSizeGated { area_thresholds } = self {
            for (category, threshold) in area_thresholds {
                if !(threshold.is_finite() && *threshold > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "area threshold for '{category}' must be positive, got {threshold}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Box<dyn CategoryPolicy> {
        match self {
            Self::UniformRandom => Box::new(UniformRandomPolicy),
            Self::FloorSizeGated { area_thresholds } => Box::new(FloorSizeGatedPolicy {
                area_thresholds: area_thresholds.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insertion::HeightStats;
    use crate::plane::Plane;
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn floor_at(c: Vector3<f64>, sigma_x: f64, sigma_y: f64) -> FloorStats {
        FloorStats {
            c,
            sigma_x,
            sigma_y,
            plane: Plane {
                normal: Vector3::z(),
                offset: -c.z,
                mse: 0.0,
                centroid: c,
                axis_std: Vector3::zeros(),
                inliers: vec![],
            },
        }
    }

    fn chair() -> Asset {
        Asset {
            id: "chair-0".into(),
            category: "chair".into(),
            native_extents: Vector3::new(0.9, 0.9, 1.0),
            mesh_ref: "chair.obj".into(),
        }
    }

    fn chair_stats() -> ClassStats {
        let mut m = BTreeMap::new();
        m.insert("chair".into(), HeightStats { mean_height: 0.9, std_height: 0.1 });
        ClassStats(m)
    }

    #[test]
    fn registry_knows_both_strategies() {
        for name in placement_names() {
            assert_eq!(create_placement(name).unwrap().name(), *name);
        }
        let Err(err) = create_placement("teleport") else {
            panic!("unknown strategy must be rejected");
        };
        assert!(err.to_string().contains("constrained, random"), "{err}");
    }

    #[test]
    fn constrained_strategy_matches_direct_search() {
        let floor = floor_at(Vector3::new(1.0, 2.0, 0.1), 0.8, 0.7);
        let asset = chair();
        let stats = chair_stats();
        let cfg = InsertionConfig::default();
        let existing = vec![Obb3D {
            center: Vector3::new(1.0, 2.0, 0.35),
            half_extents: Vector3::new(0.3, 0.3, 0.25),
            yaw: 0.3,
        }];
        let ctx = PlacementContext {
            floor: &floor,
            scene_bounds: None,
            existing: &existing,
            asset: &asset,
            stats: &stats,
            cfg: &cfg,
        };
        let strategy = create_placement("constrained").unwrap();
        let mut rng_a = Xoshiro256PlusPlus::seed_from_u64(77);
        let via_trait = strategy.place(&mut rng_a, &ctx).unwrap();
        let mut rng_b = Xoshiro256PlusPlus::seed_from_u64(77);
        let direct =
            constrained_search(&mut rng_b, &floor, &existing, &asset, &stats, &cfg).unwrap();
        assert_eq!(via_trait, direct);
    }

    #[test]
    fn random_strategy_is_single_unscored_draw() {
        let floor = floor_at(Vector3::new(2.0, 2.0, 0.0), 1.0, 1.0);
        let asset = chair();
        let stats = chair_stats();
        let cfg = InsertionConfig::default();
        let bounds = (Vector2::new(0.0, 0.0), Vector2::new(4.0, 4.0));
        let ctx = PlacementContext {
            floor: &floor,
            scene_bounds: Some(bounds),
            existing: &[],
            asset: &asset,
            stats: &stats,
            cfg: &cfg,
        };
        let strategy = create_placement("random").unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let params = strategy.place(&mut rng, &ctx).unwrap();
        assert_eq!(params.iterations, 1);
        assert_eq!(params.l, 0.0);
        assert!((0.0..=4.0).contains(&params.p.x) && (0.0..=4.0).contains(&params.p.y));

        let mut rng2 = Xoshiro256PlusPlus::seed_from_u64(3);
        let replay = strategy.place(&mut rng2, &ctx).unwrap();
        assert_eq!(params, replay);
    }

    #[test]
    fn random_strategy_positions_cover_full_bounds() {
        // With bounds four sigma wide, positions outside the constrained
        // search square must appear.
        let floor = floor_at(Vector3::new(2.0, 2.0, 0.0), 0.5, 0.5);
        let asset = chair();
        let stats = chair_stats();
        let cfg = InsertionConfig::default();
        let ctx = PlacementContext {
            floor: &floor,
            scene_bounds: Some((Vector2::new(0.0, 0.0), Vector2::new(4.0, 4.0))),
            existing: &[],
            asset: &asset,
            stats: &stats,
            cfg: &cfg,
        };
        let strategy = RandomPlacement;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let mut outside = 0;
        for _ in 0..500 {
            let params = strategy.place(&mut rng, &ctx).unwrap();
            if (params.p.x - 2.0).abs() > 0.5 || (params.p.y - 2.0).abs() > 0.5 {
                outside += 1;
            }
        }
        assert!(outside > 200, "only {outside} of 500 outside the square");
    }

    #[test]
    fn uniform_policy_singleton_and_uniformity() {
        let floor = floor_at(Vector3::zeros(), 1.0, 1.0);
        let policy = PolicyConfig::UniformRandom.build();
        assert_eq!(policy.name(), "uniform_random");
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(1);
        let single = vec!["sofa".to_string()];
        assert_eq!(policy.select(&mut rng, &single, &floor).unwrap(), "sofa");

        let categories: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let mut counts = BTreeMap::new();
        for _ in 0..100_000 {
            let c = policy.select(&mut rng, &categories, &floor).unwrap();
            *counts.entry(c).or_insert(0usize) += 1;
        }
        for (category, count) in &counts {
            let freq = *count as f64 / 100_000.0;
            assert!((freq - 0.1).abs() <= 0.01, "{category}: {freq}");
        }
        assert_eq!(counts.len(), 10);
    }

    #[test]
    fn gate_excludes_oversized_categories() {
        // Search square area = 4 * 1 * 1 = 4 m^2; bed needs 6.
        let floor = floor_at(Vector3::zeros(), 1.0, 1.0);
        let mut thresholds = BTreeMap::new();
        thresholds.insert("bed".to_string(), 6.0);
        let policy = FloorSizeGatedPolicy { area_thresholds: thresholds };
        let categories = vec!["bed".to_string(), "chair".to_string()];
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        for _ in 0..200 {
            assert_eq!(policy.select(&mut rng, &categories, &floor).unwrap(), "chair");
        }
    }

    #[test]
    fn gate_falls_back_to_full_list() {
        let floor = floor_at(Vector3::zeros(), 0.2, 0.2);
        let mut thresholds = BTreeMap::new();
        thresholds.insert("bed".to_string(), 6.0);
        thresholds.insert("chair".to_string(), 2.0);
        let policy = FloorSizeGatedPolicy { area_thresholds: thresholds };
        let categories = vec!["bed".to_string(), "chair".to_string()];
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            seen.insert(policy.select(&mut rng, &categories, &floor).unwrap());
        }
        assert_eq!(seen.len(), 2, "fallback must draw from the full list");
    }

    #[test]
    fn policy_config_serde_and_validation() {
        let uniform: PolicyConfig = serde_json::from_str(r#"{"name":"uniform_random"}"#).unwrap();
        assert_eq!(uniform, PolicyConfig::UniformRandom);

        let gated: PolicyConfig = serde_json::from_str(
            r#"{"name":"floor_size_gated","area_thresholds":{"bed":6.0}}"#,
        )
        .unwrap();
        gated.validate().unwrap();
        assert_eq!(gated.build().name(), "floor_size_gated");
        let round = serde_json::to_string(&gated).unwrap();
        assert_eq!(serde_json::from_str::<PolicyConfig>(&round).unwrap(), gated);

        let bad: PolicyConfig = serde_json::from_str(
            r#"{"name":"floor_size_gated","area_thresholds":{"bed":-1.0}}"#,
        )
        .unwrap();
        assert!(bad.validate().is_err());

        assert!(serde_json::from_str::<PolicyConfig>(r#"{"name":"psychic"}"#).is_err());
    }
}
