#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatsim_core::gaussians::{GaussianSplat, ShCoeffs};
use splatsim_core::scene_io::{save_splat_ply, GaussianScene};
use splatsim_core::{Quat, Vec3};

/// Splats filling a box, with jittered centers.
pub fn box_splats(
    lo: Vec3,
    hi: Vec3,
    per_axis: [usize; 3],
    object_id: u32,
    rgb: [f64; 3],
    seed: u64,
) -> Vec<GaussianSplat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = (hi - lo).component_div(&Vec3::new(per_axis[0] as f64, per_axis[1] as f64, per_axis[2] as f64));
    let mut out = Vec::new();
    for i in 0..per_axis[0] {
        for j in 0..per_axis[1] {
            for k in 0..per_axis[2] {
                let jitter = Vec3::from_fn(|_, _| rng.random_range(-0.2..0.2));
                let c = lo
                    + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5).component_mul(&step)
                    + jitter.component_mul(&step);
                out.push(GaussianSplat {
                    center: c,
                    rotation: Quat::from_euler_angles(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.3),
                    scale: step * 0.6,
                    opacity: 0.9,
                    sh: ShCoeffs::from_color(rgb),
                    object_id,
                });
            }
        }
    }
    out
}

/// A soft cube (object 0) resting above a static slab (object 1).
pub fn cube_on_slab() -> GaussianScene {
    let mut splats =
        box_splats(Vec3::new(-0.1, -0.1, 0.02), Vec3::new(0.1, 0.1, 0.22), [10, 10, 10], 0, [0.9, 0.2, 0.2], 1);
    splats.extend(box_splats(
        Vec3::new(-0.3, -0.3, -0.04),
        Vec3::new(0.3, 0.3, 0.0),
        [15, 15, 1],
        1,
        [0.3, 0.3, 0.3],
        2,
    ));
    GaussianScene::new(splats).unwrap()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub scene: PathBuf,
    pub manifest: PathBuf,
    pub config: PathBuf,
}

impl Fixture {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub const MANIFEST: &str = r#"{
  "objects": [
    {
      "object_id": 0,
      "tag": "rubber toy",
      "forces": [
        {"kind": "impulse", "application_point": [0.1, 0.0, 0.12], "direction": [-1.0, 0.0, 0.0], "magnitude": 0.5}
      ]
    }
  ]
}"#;

pub const SMALL_CONFIG: &str = r#"{
  "grid_resolution": 32,
  "substeps_per_frame": 20,
  "dt_substep": 1e-4,
  "frames": 3,
  "base_radius": 0.03,
  "field_model": {"kind": "builtin"},
  "render": {"width": 64, "height": 48}
}"#;

pub fn fixture(scene: &GaussianScene, manifest: &str, config: &str) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let f = Fixture {
        scene: dir.path().join("scene.ply"),
        manifest: dir.path().join("manifest.json"),
        config: dir.path().join("config.json"),
        dir,
    };
    save_splat_ply(scene, &f.scene).unwrap();
    std::fs::write(&f.manifest, manifest).unwrap();
    std::fs::write(&f.config, config).unwrap();
    f
}

pub fn run_for(f: &Fixture, out: &Path) -> splatsim::PipelineRun {
    let mut run = splatsim::PipelineRun::new(&f.scene, out);
    run.manifest = Some(f.manifest.clone());
    run.config = Some(f.config.clone());
    run.seed = Some(7);
    run.threads = Some(2);
    run
}

/// The report without its timing block.
pub fn report_sans_timings(out: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("timings");
    v
}
