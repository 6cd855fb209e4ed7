//! Physically plausible insertion of external 3D objects into RGB-D indoor
//! scenes: plane extraction, ground selection, collision-aware placement
//! search, lighting environment retrieval, and dataset augmentation.

pub mod config;
pub mod envmap;
pub mod error;
pub mod ground;
pub mod insertion;
pub mod pipeline;
pub mod plane;
pub mod scene;
pub mod strategy;
pub mod synth;

pub use error::{Error, Result};
