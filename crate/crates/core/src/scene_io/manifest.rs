use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::GaussianScene;
use crate::error::{Error, Result};
use crate::materials::MaterialProperties;
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForceKind {
    /// `magnitude` is an impulse in N·s delivered on one substep.
    Impulse,
    /// `magnitude` is a force in N applied over `duration`.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSpec {
    pub kind: ForceKind,
    pub application_point: [f64; 3],
    pub direction: [f64; 3],
    pub magnitude: f64,
    #[serde(default)]
    pub start_time: f64,
    #[serde(default)]
    pub duration: f64,
}

impl ForceSpec {
    pub fn point(&self) -> Vec3 {
        Vec3::from(self.application_point)
    }

    pub fn direction(&self) -> Vec3 {
        Vec3::from(self.direction)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if self.application_point.iter().chain(&self.direction).any(|v| !v.is_finite()) {
            return Err(Error::validation(format!("{field}.application_point"), "must be finite"));
        }
        if (self.direction().norm() - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!("{field}.direction"), "must be a unit vector"));
        }
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(Error::validation(format!("{field}.magnitude"), "must be >= 0"));
        }
        if !(self.start_time >= 0.0 && self.start_time.is_finite()) {
            return Err(Error::validation(format!("{field}.start_time"), "must be >= 0"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(Error::validation(format!("{field}.duration"), "must be >= 0"));
        }
        if self.kind == ForceKind::Constant && self.duration <= 0.0 {
            return Err(Error::validation(format!("{field}.duration"), "constant forces need duration > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectManifest {
    pub object_id: u32,
    pub tag: String,
    #[serde(default)]
    pub canonical_image: Option<PathBuf>,
    #[serde(default)]
    pub property_override: Option<MaterialProperties>,
    #[serde(default)]
    pub forces: Vec<ForceSpec>,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

/// Objects to simulate. Scene objects without an entry stay static.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SceneManifest {
    pub objects: Vec<ObjectManifest>,
    #[serde(flatten, skip_serializing)]
    pub extra: BTreeMap<String, Value>,
}

impl SceneManifest {
    pub fn object(&self, id: u32) -> Option<&ObjectManifest> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    pub fn validate(&self, scene: &GaussianScene) -> Result<()> {
        let present = scene.objects();
        let mut seen = BTreeSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            let field = format!("objects[{i}]");
            if !present.contains(&o.object_id) {
                return Err(Error::validation(
                    format!("{field}.object_id"),
                    format!("object {} does not exist in the scene", o.object_id),
                ));
            }
            if !seen.insert(o.object_id) {
                return Err(Error::validation(
                    format!("{field}.object_id"),
                    format!("object {} listed twice", o.object_id),
                ));
            }
            if o.tag.trim().is_empty() {
                return Err(Error::validation(format!("{field}.tag"), "must be nonempty"));
            }
            if let Some(p) = &o.property_override {
                p.validate().map_err(|e| Error::validation(format!("{field}.property_override"), e.to_string()))?;
            }
            for (j, f) in o.forces.iter().enumerate() {
                f.validate(&format!("{field}.forces[{j}]"))?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, base_dir: Option<&Path>, scene: &GaussianScene) -> Result<Self> {
        let mut m: SceneManifest =
            serde_json::from_str(text).map_err(|e| Error::validation("manifest", e.to_string()))?;
        for k in m.extra.keys() {
            log::warn!("ignoring unknown manifest key `{k}`");
        }
        for o in &m.objects {
            for k in o.extra.keys() {
                log::warn!("ignoring unknown key `{k}` on manifest object {}", o.object_id);
            }
        }
        if let Some(dir) = base_dir {
            for o in &mut m.objects {
                if let Some(img) = &o.canonical_image {
                    if img.is_relative() {
                        o.canonical_image = Some(dir.join(img));
                    }
                }
            }
        }
        m.validate(scene)?;
        Ok(m)
    }
}

/// Load and validate a manifest against `scene`; relative image paths
/// resolve against the manifest's directory.
pub fn load_manifest(path: &Path, scene: &GaussianScene) -> Result<SceneManifest> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
    SceneManifest::from_json(&text, path.parent(), scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussians::{GaussianSplat, ShCoeffs};
    use crate::math::Quat;

    fn scene() -> GaussianScene {
        let s = GaussianSplat {
            center: Vec3::zeros(),
            rotation: Quat::identity(),
            scale: Vec3::repeat(0.01),
            opacity: 0.5,
            sh: ShCoeffs::dc([0.0; 3]),
            object_id: 1,
        };
        GaussianScene::new(vec![s]).unwrap()
    }

    fn field_of(text: &str) -> String {
        match SceneManifest::from_json(text, None, &scene()) {
            Err(Error::Validation { field, .. }) => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parses_forces_and_defaults() {
        let m = SceneManifest::from_json(
            r#"{"objects": [{"object_id": 1, "tag": "rubber duck",
                "forces": [{"kind": "impulse", "application_point": [0,0,0], "direction": [1,0,0], "magnitude": 2}]}]}"#,
            None,
            &scene(),
        )
        .unwrap();
        assert_eq!(m.objects[0].forces[0].start_time, 0.0);
        assert!(m.object(1).is_some() && m.object(2).is_none());
    }

    #[test]
    fn rejects_bad_entries() {
        assert_eq!(field_of(r#"{"objects": [{"object_id": 99, "tag": "x"}]}"#), "objects[0].object_id");
        assert_eq!(
            field_of(
                r#"{"objects": [{"object_id": 1, "tag": "x", "forces": [{"kind": "constant",
                "application_point": [0,0,0], "direction": [0,0,1], "magnitude": 1, "duration": -1}]}]}"#
            ),
            "objects[0].forces[0].duration"
        );
        assert_eq!(
            field_of(
                r#"{"objects": [{"object_id": 1, "tag": "x", "forces": [{"kind": "impulse",
                "application_point": [0,0,0], "direction": [0,0,2], "magnitude": 1}]}]}"#
            ),
            "objects[0].forces[0].direction"
        );
    }
}
