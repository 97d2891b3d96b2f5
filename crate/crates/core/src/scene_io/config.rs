use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gaussians::ShRotation;
use crate::math::Vec3;
use crate::perception::ProviderConfig;
use crate::sampling::{CurvatureMode, PgasParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Boundary nodes lose all velocity.
    #[default]
    Sticky,
    /// Boundary nodes lose the velocity component into the wall.
    Slip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RigidMode {
    /// Rigid objects are not simulated; their cells pin the grid.
    #[default]
    Collider,
    /// Rigid objects are simulated with a very high modulus.
    Stiff,
}

/// Cubic simulation domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub origin: [f64; 3],
    /// Edge length of the cube.
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgasConfig {
    pub v_max: f64,
    pub v_min: f64,
    pub k: f64,
    pub e_ref: f64,
    pub curvature_mode: CurvatureMode,
    pub local_neighbors: usize,
    pub curvature_gain: Option<f64>,
    pub faithful: bool,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for PgasConfig {
    fn default() -> Self {
        let p = PgasParams::default();
        PgasConfig {
            v_max: p.v_max,
            v_min: p.v_min,
            k: p.k,
            e_ref: p.e_ref,
            curvature_mode: p.curvature_mode,
            local_neighbors: p.local_neighbors,
            curvature_gain: p.curvature_gain,
            faithful: p.faithful,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Uniform,
    #[default]
    Builtin,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldModelConfig {
    pub kind: FieldKind,
    pub spread: f64,
    /// Multiplier CSV for `kind = "file"`; `{object_id}` in the name is substituted.
    pub path: Option<PathBuf>,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for FieldModelConfig {
    fn default() -> Self {
        FieldModelConfig { kind: FieldKind::Builtin, spread: 0.2, path: None, extra: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingMode {
    /// Local rigid fits; covariances are rotated only.
    #[default]
    Rigid,
    /// Covariances additionally follow the weighted mean deformation gradient.
    Stretch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BindingConfig {
    pub neighbors: usize,
    /// Kernel bandwidth; `None` uses the object's mean sampling radius.
    pub bandwidth: Option<f64>,
    pub mode: BindingMode,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for BindingConfig {
    fn default() -> Self {
        BindingConfig { neighbors: 8, bandwidth: None, mode: BindingMode::Rigid, extra: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub width: u32,
    pub height: u32,
    pub background: [f64; 3],
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { width: 320, height: 240, background: [1.0; 3], extra: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "default_up")]
    pub up: [f64; 3],
    #[serde(default = "default_fov")]
    pub fov_y_deg: f64,
}

fn default_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_fov() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub grid_resolution: usize,
    pub substeps_per_frame: usize,
    pub dt_substep: f64,
    pub frames: usize,
    pub gravity: [f64; 3],
    /// Height along the up axis (opposite gravity) below which grid nodes are boundary.
    pub ground_height: Option<f64>,
    pub boundary: Boundary,
    /// Per-substep factor on velocity relative to each object's mean velocity.
    pub damping: f64,
    /// External-force application radius in grid cells.
    pub force_radius_cells: f64,
    /// Explicit domain; `None` fits a cube around the scene.
    pub domain: Option<DomainSpec>,
    /// Padding around the scene bounds, as a fraction of the largest side.
    pub domain_padding: f64,
    pub rigid_mode: RigidMode,
    pub rng_seed: u64,
    pub base_radius: f64,
    pub pgas: PgasConfig,
    pub field_model: FieldModelConfig,
    pub binding: BindingConfig,
    pub sh_rotation: ShRotation,
    pub render: RenderConfig,
    pub camera: Option<CameraConfig>,
    pub perception: ProviderConfig,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            grid_resolution: 64,
            substeps_per_frame: 768,
            dt_substep: 4.34e-5,
            frames: 24,
            gravity: [0.0, 0.0, -9.8],
            ground_height: None,
            boundary: Boundary::Sticky,
            damping: 0.9995,
            force_radius_cells: 2.0,
            domain: None,
            domain_padding: 0.25,
            rigid_mode: RigidMode::Collider,
            rng_seed: 0,
            base_radius: 0.02,
            pgas: PgasConfig::default(),
            field_model: FieldModelConfig::default(),
            binding: BindingConfig::default(),
            sh_rotation: ShRotation::Exact,
            render: RenderConfig::default(),
            camera: None,
            perception: ProviderConfig::default(),
            extra: BTreeMap::new(),
        }
    }
}

impl SimConfig {
    pub fn frame_duration(&self) -> f64 {
        self.substeps_per_frame as f64 * self.dt_substep
    }

    pub fn gravity_vec(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }

    pub fn pgas_params(&self) -> PgasParams {
        PgasParams {
            base_radius: self.base_radius,
            v_max: self.pgas.v_max,
            v_min: self.pgas.v_min,
            k: self.pgas.k,
            e_ref: self.pgas.e_ref,
            curvature_mode: self.pgas.curvature_mode,
            local_neighbors: self.pgas.local_neighbors,
            curvature_gain: self.pgas.curvature_gain,
            faithful: self.pgas.faithful,
            rng_seed: self.rng_seed,
        }
    }

    /// Dotted paths of keys the loader did not recognize.
    pub fn unknown_keys(&self) -> Vec<String> {
        let nested = [
            ("pgas", &self.pgas.extra),
            ("field_model", &self.field_model.extra),
            ("binding", &self.binding.extra),
            ("render", &self.render.extra),
            ("perception", &self.perception.extra),
        ];
        let mut out: Vec<String> = self.extra.keys().cloned().collect();
        for (prefix, map) in nested {
            out.extend(map.keys().map(|k| format!("{prefix}.{k}")));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_resolution < 8 {
            return Err(Error::validation("grid_resolution", "must be >= 8"));
        }
        if self.substeps_per_frame < 1 {
            return Err(Error::validation("substeps_per_frame", "must be >= 1"));
        }
        if !(self.dt_substep > 0.0 && self.dt_substep.is_finite()) {
            return Err(Error::validation("dt_substep", "must be > 0"));
        }
        if self.gravity.iter().any(|g| !g.is_finite()) {
            return Err(Error::validation("gravity", "must be finite"));
        }
        if self.ground_height.is_some_and(|h| !h.is_finite()) {
            return Err(Error::validation("ground_height", "must be finite"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::validation("damping", "must lie in (0, 1]"));
        }
        if !(self.force_radius_cells > 0.0) {
            return Err(Error::validation("force_radius_cells", "must be > 0"));
        }
        if let Some(d) = &self.domain {
            if !(d.extent > 0.0 && d.extent.is_finite()) || d.origin.iter().any(|o| !o.is_finite()) {
                return Err(Error::validation("domain", "extent must be positive and origin finite"));
            }
        }
        if !(self.domain_padding >= 0.0) {
            return Err(Error::validation("domain_padding", "must be >= 0"));
        }
        self.pgas_params().validate()?;
        if !(0.0..0.5).contains(&self.field_model.spread) {
            return Err(Error::validation("field_model.spread", "must lie in [0, 0.5)"));
        }
        if self.field_model.kind == FieldKind::File && self.field_model.path.is_none() {
            return Err(Error::validation("field_model.path", "required when kind is \"file\""));
        }
        if self.binding.neighbors < 1 {
            return Err(Error::validation("binding.neighbors", "must be >= 1"));
        }
        if self.binding.bandwidth.is_some_and(|h| !(h > 0.0)) {
            return Err(Error::validation("binding.bandwidth", "must be > 0"));
        }
        if self.render.width == 0 || self.render.height == 0 {
            return Err(Error::validation("render", "width and height must be > 0"));
        }
        if let Some(c) = &self.camera {
            if !(c.fov_y_deg > 0.0 && c.fov_y_deg < 180.0) {
                return Err(Error::validation("camera.fov_y_deg", "must lie in (0, 180)"));
            }
        }
        self.perception.validate()?;
        Ok(())
    }

    /// Parse JSON text; whitespace-only input yields the defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = if text.trim().is_empty() {
            SimConfig::default()
        } else {
            serde_json::from_str(text).map_err(|e| Error::validation("config", e.to_string()))?
        };
        for key in cfg.unknown_keys() {
            log::warn!("ignoring unknown config key `{key}`");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
    let mut cfg = SimConfig::from_json(&text)?;
    if let (Some(p), Some(dir)) = (&cfg.field_model.path, path.parent()) {
        if p.is_relative() {
            cfg.field_model.path = Some(dir.join(p));
        }
    }
    Ok(cfg)
}
