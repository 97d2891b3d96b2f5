//! Scene, manifest and config loading; frame and point-cloud writing.

mod config;
mod frame;
mod manifest;
mod ply;

pub use config::{
    load_config, BindingConfig, BindingMode, Boundary, CameraConfig, DomainSpec, FieldKind, FieldModelConfig,
    PgasConfig, RenderConfig, RigidMode, SimConfig,
};
pub use frame::{frame_file_name, load_frame, save_frame};
pub use manifest::{load_manifest, ForceKind, ForceSpec, ObjectManifest, SceneManifest};
pub use ply::{load_splat_ply, parse_splat_ply, save_splat_ply, splat_ply_bytes, write_points_ply, PointRecord};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::gaussians::GaussianSplat;
use crate::math::Vec3;

/// A segmented scene: splats in file order, each tagged with its object id.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianScene {
    pub splats: Vec<GaussianSplat>,
}

impl GaussianScene {
    pub fn new(splats: Vec<GaussianSplat>) -> Result<Self> {
        if splats.is_empty() {
            return Err(Error::validation("scene", "scene has no splats"));
        }
        Ok(GaussianScene { splats })
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.splats.iter().map(|s| s.object_id).collect()
    }

    /// Distinct object ids, ascending.
    pub fn objects(&self) -> BTreeSet<u32> {
        self.splats.iter().map(|s| s.object_id).collect()
    }

    /// Indices of the splats belonging to `object_id`, in storage order.
    pub fn indices_of(&self, object_id: u32) -> Vec<usize> {
        (0..self.splats.len()).filter(|&i| self.splats[i].object_id == object_id).collect()
    }

    /// Axis-aligned box around all centers.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        self.splats.iter().fold((Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)), |(lo, hi), s| {
            (lo.inf(&s.center), hi.sup(&s.center))
        })
    }
}
