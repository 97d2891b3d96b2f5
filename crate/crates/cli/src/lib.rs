//! Pipeline orchestration behind the `splatsim` command.
//!
//! Every command writes `report.json` into the output directory, even when it
//! fails; the failing stage and object are recorded there and mapped to the
//! process exit status by [`RunReport::exit_code`].

mod report;

pub use report::{exit_code, Failure, ObjectReport, ObjectRole, RunReport};

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use splatsim_core::binding::{apply_binding, build_binding, fit_all, ObjectBinding};
use splatsim_core::gaussians::{CameraSpec, GaussianSplat};
use splatsim_core::materials::{load_field_model, mpdp_field, FieldModel, MaterialProperties, PropertyField};
use splatsim_core::mpm::{initialize, ColliderInput, Domain, ObjectInput, SimParams, SimState, STIFF_MODULUS};
use splatsim_core::perception::{
    perceive_object, OfflineProvider, PropertyCache, Provider, RemoteProvider, UreqTransport,
};
use splatsim_core::renderer::render;
use splatsim_core::sampling::{pgas_sample, DrivingSample};
use splatsim_core::scene_io::{
    frame_file_name, load_config, load_manifest, load_splat_ply, save_frame, write_points_ply, BindingMode, FieldKind,
    GaussianScene, ObjectManifest, PointRecord, RigidMode, SceneManifest, SimConfig,
};
use splatsim_core::{Error, SimError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProviderMode {
    #[default]
    Offline,
    Remote,
}

/// Inputs and switches for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub scene: PathBuf,
    pub manifest: Option<PathBuf>,
    /// `None` uses the default configuration.
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub provider: ProviderMode,
    /// Overrides `rng_seed`.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
    /// Overrides `frames`.
    pub frames: Option<usize>,
    /// Also write driving particles of every frame as PLY.
    pub dump_particles: bool,
    /// Skip the on-disk perception cache.
    pub no_cache: bool,
}

impl PipelineRun {
    pub fn new(scene: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineRun {
            scene: scene.into(),
            manifest: None,
            config: None,
            out: out.into(),
            provider: ProviderMode::Offline,
            seed: None,
            threads: None,
            frames: None,
            dump_particles: false,
            no_cache: false,
        }
    }
}

/// An error tagged with the stage (and object, when known) that raised it.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}`{}: {source}", .object_id.map(|id| format!(" (object {id})")).unwrap_or_default())]
pub struct StageError {
    pub stage: &'static str,
    pub object_id: Option<u32>,
    #[source]
    pub source: Error,
}

fn at(stage: &'static str, object_id: Option<u32>) -> impl FnOnce(Error) -> StageError {
    move |source| StageError { stage, object_id, source }
}

type StageResult<T> = Result<T, StageError>;

pub const REPORT_FILE: &str = "report.json";
pub const FRAMES_DIR: &str = "frames";
pub const PROPERTIES_DIR: &str = "properties";
pub const SAMPLES_DIR: &str = "samples";
pub const PARTICLES_DIR: &str = "particles";
pub const CACHE_DIR: &str = "cache";
pub const RENDER_FILE: &str = "render.png";

/// Loaded inputs shared by all commands.
struct Inputs {
    config: SimConfig,
    scene: GaussianScene,
    manifest: Option<SceneManifest>,
}

/// Per-object result of perception, MPDP and sampling.
struct Prepared {
    object_id: u32,
    /// Scene indices of the object's splats.
    splats: Vec<usize>,
    properties: Option<MaterialProperties>,
    field: Option<PropertyField>,
    sample: Option<DrivingSample>,
}

struct Session<'a> {
    run: &'a PipelineRun,
    report: RunReport,
}

impl Session<'_> {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> StageResult<T>) -> StageResult<T> {
        let t = Instant::now();
        let out = f(self);
        self.report.time(stage, t.elapsed().as_secs_f64());
        out
    }

    fn out_path(&mut self, relative: &str) -> PathBuf {
        self.report.outputs.push(relative.to_string());
        self.run.out.join(relative)
    }

    fn load(&mut self, need_manifest: bool) -> StageResult<Inputs> {
        self.timed("load", |s| {
            let run = s.run;
            let mut config = match &run.config {
                Some(p) => load_config(p).map_err(at("load", None))?,
                None => SimConfig::default(),
            };
            // A relative field file is looked up next to the config.
            if let (Some(field), Some(dir)) =
                (config.field_model.path.as_mut(), run.config.as_ref().and_then(|p| p.parent()))
            {
                if field.is_relative() {
                    *field = dir.join(&*field);
                }
            }
            if let Some(seed) = run.seed {
                config.rng_seed = seed;
            }
            if let Some(frames) = run.frames {
                config.frames = frames;
            }
            config.validate().map_err(at("load", None))?;
            s.report.seed = Some(config.rng_seed);
            s.report.config_hash = Some(config_hash(&config));
            let scene = load_splat_ply(&run.scene).map_err(at("load", None))?;
            let manifest = match &run.manifest {
                Some(p) => Some(load_manifest(p, &scene).map_err(at("load", None))?),
                None if need_manifest => {
                    return Err(at("load", None)(Error::validation("manifest", "this command needs --manifest")));
                }
                None => None,
            };
            s.report.objects = scene
                .objects()
                .into_iter()
                .map(|id| {
                    let entry = manifest.as_ref().and_then(|m| m.object(id));
                    ObjectReport {
                        object_id: id,
                        tag: entry.map(|o| o.tag.clone()),
                        role: if entry.is_some() { ObjectRole::Simulated } else { ObjectRole::Static },
                        splat_count: scene.indices_of(id).len(),
                        properties: None,
                        property_override: entry.is_some_and(|o| o.property_override.is_some()),
                        field_provenance: None,
                        sample_count: None,
                        mean_radius: None,
                        binding_bandwidth: None,
                    }
                })
                .collect();
            Ok(Inputs { config, scene, manifest })
        })
    }

    fn provider(&mut self, config: &SimConfig) -> StageResult<Box<dyn Provider>> {
        let provider: Box<dyn Provider> = match self.run.provider {
            ProviderMode::Offline => Box::new(OfflineProvider::default()),
            ProviderMode::Remote => Box::new(
                RemoteProvider::new(config.perception.clone(), Box::new(UreqTransport)).map_err(at("load", None))?,
            ),
        };
        self.report.provider = Some(provider.fingerprint());
        Ok(provider)
    }

    /// Perception for every manifest object, in parallel; errors surface in
    /// object order.
    fn perceive(&mut self, inputs: &Inputs) -> StageResult<Vec<(u32, MaterialProperties)>> {
        let provider = self.provider(&inputs.config)?;
        let cache = (!self.run.no_cache).then(|| PropertyCache::new(self.run.out.join(CACHE_DIR)));
        let manifest = inputs.manifest.as_ref().expect("perception runs with a manifest");
        self.timed("perceive", |s| {
            let mut objects: Vec<&ObjectManifest> = manifest.objects.iter().collect();
            objects.sort_by_key(|o| o.object_id);
            let results: Vec<StageResult<(u32, MaterialProperties)>> = objects
                .par_iter()
                .map(|o| {
                    let err = at("perceive", Some(o.object_id));
                    let image = match &o.canonical_image {
                        Some(p) => Some(
                            std::fs::read(p)
                                .map_err(|e| Error::io(format!("reading image {}", p.display()), e))
                                .map_err(at("perceive", Some(o.object_id)))?,
                        ),
                        None => None,
                    };
                    let props = perceive_object(
                        image.as_deref(),
                        &o.tag,
                        o.property_override.as_ref(),
                        provider.as_ref(),
                        cache.as_ref(),
                    )
                    .map_err(err)?;
                    Ok((o.object_id, props))
                })
                .collect();
            let props = results.into_iter().collect::<StageResult<Vec<_>>>()?;
            for (id, p) in &props {
                let rigid_collider = p.rigid && inputs.config.rigid_mode == RigidMode::Collider;
                if let Some(o) = s.report.object_mut(*id) {
                    o.properties = Some(p.clone());
                    o.role = if rigid_collider { ObjectRole::Collider } else { ObjectRole::Simulated };
                }
            }
            Ok(props)
        })
    }

    /// Perception, MPDP and PGAS for every object.
    fn prepare(&mut self, inputs: &Inputs) -> StageResult<Vec<Prepared>> {
        let props = self.perceive(inputs)?;
        let config = &inputs.config;
        let scene = &inputs.scene;
        let roles: Vec<(u32, ObjectRole)> = self.report.objects.iter().map(|o| (o.object_id, o.role)).collect();
        // Per object: (prepared, mpdp seconds, pgas seconds).
        let results: Vec<StageResult<(Prepared, f64, f64)>> = roles
            .par_iter()
            .map(|&(id, role)| {
                let splats = scene.indices_of(id);
                let properties = props.iter().find(|(pid, _)| *pid == id).map(|(_, p)| p.clone());
                let mut prepared = Prepared { object_id: id, splats, properties, field: None, sample: None };
                if role != ObjectRole::Simulated {
                    return Ok((prepared, 0.0, 0.0));
                }
                let t = Instant::now();
                let mut mean = prepared.properties.clone().expect("simulated objects are perceived");
                if mean.rigid {
                    mean.young_modulus = mean.young_modulus.max(STIFF_MODULUS);
                }
                let centers: Vec<Vec3> = prepared.splats.iter().map(|&i| scene.splats[i].center).collect();
                let model = field_model(config, id).map_err(at("mpdp", Some(id)))?;
                let field = mpdp_field(&centers, &mean, &model).map_err(at("mpdp", Some(id)))?;
                let mpdp_secs = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let mut params = config.pgas_params();
                params.rng_seed = config.rng_seed.wrapping_add(id as u64);
                let sample = pgas_sample(&centers, &field.young_modulus, &params).map_err(at("pgas", Some(id)))?;
                prepared.field = Some(field.restrict(&sample.indices, &mean).map_err(at("mpdp", Some(id)))?);
                prepared.sample = Some(sample);
                prepared.properties = Some(mean);
                Ok((prepared, mpdp_secs, t.elapsed().as_secs_f64()))
            })
            .collect();
        self.report.time("mpdp", 0.0);
        self.report.time("pgas", 0.0);
        let mut prepared = Vec::with_capacity(results.len());
        for r in results {
            let (p, mpdp_secs, pgas_secs) = r?;
            self.report.time("mpdp", mpdp_secs);
            self.report.time("pgas", pgas_secs);
            prepared.push(p);
        }
        for p in &prepared {
            if let (Some(o), Some(sample), Some(field)) =
                (self.report.objects.iter_mut().find(|o| o.object_id == p.object_id), &p.sample, &p.field)
            {
                o.field_provenance = Some(field.provenance);
                o.sample_count = Some(sample.len());
                o.mean_radius = Some(sample.mean_radius());
            }
        }
        Ok(prepared)
    }

    fn write_samples(&mut self, prepared: &[Prepared]) -> StageResult<()> {
        self.timed("save", |s| {
            for p in prepared {
                let Some(sample) = &p.sample else { continue };
                let rel = format!("{SAMPLES_DIR}/object_{}.ply", p.object_id);
                let path = s.out_path(&rel);
                write_points_ply(&path, &sample_records(p, sample, &sample.positions))
                    .map_err(at("save", Some(p.object_id)))?;
            }
            Ok(())
        })
    }
}

fn sample_records(p: &Prepared, sample: &DrivingSample, positions: &[Vec3]) -> Vec<PointRecord> {
    positions
        .iter()
        .zip(&sample.indices)
        .zip(&sample.radii)
        .map(|((x, &i), &r)| PointRecord {
            position: *x,
            object_id: p.object_id,
            source_index: p.splats[i] as u32,
            radius: r,
        })
        .collect()
}

fn field_model(config: &SimConfig, object_id: u32) -> splatsim_core::Result<FieldModel> {
    Ok(match config.field_model.kind {
        FieldKind::Uniform => FieldModel::Uniform,
        FieldKind::Builtin => FieldModel::Builtin { spread: config.field_model.spread },
        FieldKind::File => {
            let path =
                config.field_model.path.as_ref().ok_or_else(|| Error::validation("field_model.path", "missing"))?;
            let path = path.to_string_lossy().replace("{object_id}", &object_id.to_string());
            load_field_model(Path::new(&path))?
        }
    })
}

/// SHA-256 of the configuration serialized as JSON.
pub fn config_hash(config: &SimConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// The configured camera, or one framing the whole scene from the front
/// right and above.
pub fn scene_camera(config: &SimConfig, scene: &GaussianScene) -> splatsim_core::Result<CameraSpec> {
    let (w, h) = (config.render.width, config.render.height);
    if let Some(c) = &config.camera {
        return CameraSpec::look_at(Vec3::from(c.eye), Vec3::from(c.target), Vec3::from(c.up), c.fov_y_deg, w, h);
    }
    let (lo, hi) = scene.bounds();
    let center = (lo + hi) * 0.5;
    let radius = ((hi - lo).norm() * 0.5).max(1e-3);
    let fov = 50.0f64;
    let distance = 1.2 * radius / (0.5 * fov.to_radians()).sin();
    let up = Vec3::z();
    let dir = Vec3::new(0.6, -1.0, 0.5).normalize();
    CameraSpec::look_at(center + dir * distance, center, up, fov, w, h)
}

/// Run `body` on a pool with the requested thread count, then write the
/// report whatever the outcome.
fn execute(run: &PipelineRun, command: &str, body: impl FnOnce(&mut Session) -> StageResult<()> + Send) -> RunReport {
    let mut session = Session { run, report: RunReport::new(command) };
    let result = (|| {
        std::fs::create_dir_all(&run.out)
            .map_err(|e| Error::io(format!("creating {}", run.out.display()), e))
            .map_err(at("load", None))?;
        let threads = run.threads.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| at("load", None)(Error::validation("threads", e.to_string())))?;
        session.report.threads = pool.current_num_threads();
        pool.install(|| body(&mut session))
    })();
    let mut report = session.report;
    match result {
        Ok(()) => report.status = "ok".into(),
        Err(e) => {
            log::error!("{e}");
            report.fail(&e);
        }
    }
    if let Err(e) = report.write(&run.out.join(REPORT_FILE)) {
        log::error!("could not write {}: {e}", run.out.join(REPORT_FILE).display());
        eprintln!("{}", report.to_json());
    }
    report
}

fn ensure_dir(dir: &Path, stage: &'static str) -> StageResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| at(stage, None)(Error::io(format!("creating {}", dir.display()), e)))
}

/// Write each manifest object's mean properties to `properties/object_<id>.json`.
pub fn cmd_perceive(run: &PipelineRun) -> RunReport {
    execute(run, "perceive", |s| {
        let inputs = s.load(true)?;
        let props = s.perceive(&inputs)?;
        ensure_dir(&run.out.join(PROPERTIES_DIR), "save")?;
        s.timed("save", |s| {
            for (id, p) in &props {
                let path = s.out_path(&format!("{PROPERTIES_DIR}/object_{id}.json"));
                let text = serde_json::to_string_pretty(p).expect("properties serialize") + "\n";
                std::fs::write(&path, text)
                    .map_err(|e| at("save", Some(*id))(Error::io(format!("writing {}", path.display()), e)))?;
            }
            Ok(())
        })
    })
}

/// Write each simulated object's driving particles to `samples/object_<id>.ply`.
pub fn cmd_sample(run: &PipelineRun) -> RunReport {
    execute(run, "sample", |s| {
        let inputs = s.load(true)?;
        let prepared = s.prepare(&inputs)?;
        ensure_dir(&run.out.join(SAMPLES_DIR), "save")?;
        s.write_samples(&prepared)
    })
}

/// Render the undeformed scene to `render.png`.
pub fn cmd_render(run: &PipelineRun) -> RunReport {
    execute(run, "render", |s| {
        let inputs = s.load(false)?;
        let camera = scene_camera(&inputs.config, &inputs.scene).map_err(at("render", None))?;
        let bg = inputs.config.render.background;
        let image = s.timed("render", |_| Ok(render(&inputs.scene.splats, &camera, bg)))?;
        s.timed("save", |s| {
            let path = s.out_path(RENDER_FILE);
            save_frame(&image, &path).map_err(at("save", None))
        })
    })
}

/// A simulated object's link between its particles and its splats.
struct Driven {
    object_id: u32,
    range: std::ops::Range<usize>,
    rest: Vec<Vec3>,
    binding: ObjectBinding,
}

fn sim_error_object(state: &SimState, err: &SimError) -> Option<u32> {
    let index = match err {
        SimError::OutOfDomain { index, .. } | SimError::Cfl { index, .. } | SimError::Inverted { index, .. } => *index,
        _ => return None,
    };
    state.objects.iter().find(|(_, r)| r.contains(&index)).map(|(id, _)| *id)
}

/// The full pipeline: perceive, MPDP, PGAS, initialize, then per frame
/// advance, bind, render and save `frames/frame_<i>.png`.
pub fn cmd_simulate(run: &PipelineRun) -> RunReport {
    execute(run, "simulate", |s| {
        let inputs = s.load(true)?;
        let config = &inputs.config;
        let scene = &inputs.scene;
        let prepared = s.prepare(&inputs)?;
        let camera = scene_camera(config, scene).map_err(at("render", None))?;

        let (mut state, driven) = s.timed("initialize", |s| {
            let mut objects = Vec::new();
            let mut colliders = Vec::new();
            for p in &prepared {
                match (&p.sample, &p.field) {
                    (Some(sample), Some(field)) => {
                        let centers = p.splats.iter().map(|&i| scene.splats[i].center).collect();
                        let forces = inputs
                            .manifest
                            .as_ref()
                            .and_then(|m| m.object(p.object_id))
                            .map_or(Vec::new(), |o| o.forces.clone());
                        objects.push(ObjectInput {
                            object_id: p.object_id,
                            positions: sample.positions.clone(),
                            field: field.clone(),
                            volume_points: centers,
                            forces,
                        });
                    }
                    _ => colliders.push(ColliderInput {
                        object_id: p.object_id,
                        points: p.splats.iter().map(|&i| scene.splats[i].center).collect(),
                    }),
                }
            }
            let domain = match &config.domain {
                Some(d) => Domain { origin: Vec3::from(d.origin), extent: d.extent },
                None => {
                    let (lo, hi) = scene.bounds();
                    Domain::fit(lo, hi, config.domain_padding)
                }
            };
            let state = initialize(&objects, &colliders, SimParams::from_config(config), domain)
                .map_err(at("initialize", None))?;
            let mut driven = Vec::new();
            for p in &prepared {
                let Some(sample) = &p.sample else { continue };
                let range = state.object_range(p.object_id).expect("every sampled object is simulated");
                let rest: Vec<Vec3> = state.particles[range.clone()].iter().map(|q| q.x).collect();
                let h = config.binding.bandwidth.unwrap_or_else(|| sample.mean_radius());
                let centers: Vec<Vec3> = p.splats.iter().map(|&i| scene.splats[i].center).collect();
                let binding =
                    build_binding(p.object_id, p.splats.clone(), &centers, &rest, config.binding.neighbors, h)
                        .map_err(at("bind", Some(p.object_id)))?;
                if let Some(o) = s.report.object_mut(p.object_id) {
                    o.binding_bandwidth = Some(h);
                }
                driven.push(Driven { object_id: p.object_id, range, rest, binding });
            }
            Ok((state, driven))
        })?;

        ensure_dir(&run.out.join(FRAMES_DIR), "save")?;
        if run.dump_particles {
            ensure_dir(&run.out.join(PARTICLES_DIR), "save")?;
        }
        let mut splats: Vec<GaussianSplat> = scene.splats.clone();
        let bg = config.render.background;
        for frame in 0..config.frames {
            s.timed("simulate", |_| {
                state.advance_frame().map_err(|e| {
                    let object = sim_error_object(&state, &e);
                    at("simulate", object)(e.into())
                })
            })?;
            s.report.simulated_time = state.time;
            s.timed("bind", |_| {
                for d in &driven {
                    let current: Vec<Vec3> = state.particles[d.range.clone()].iter().map(|q| q.x).collect();
                    let fits = fit_all(&d.binding, &d.rest, &current);
                    let gradients: Option<Vec<_>> = (config.binding.mode == BindingMode::Stretch)
                        .then(|| state.particles[d.range.clone()].iter().map(|q| q.f).collect());
                    apply_binding(
                        &scene.splats,
                        &mut splats,
                        &d.binding,
                        &fits,
                        gradients.as_deref(),
                        config.sh_rotation,
                    );
                }
                Ok(())
            })?;
            let image = s.timed("render", |_| Ok(render(&splats, &camera, bg)))?;
            s.timed("save", |s| {
                let path = s.out_path(&format!("{FRAMES_DIR}/{}", frame_file_name(frame)));
                save_frame(&image, &path).map_err(at("save", None))?;
                if run.dump_particles {
                    let path =
                        s.out_path(&format!("{PARTICLES_DIR}/{}", frame_file_name(frame).replace(".png", ".ply")));
                    let mut records = Vec::new();
                    for (d, p) in driven.iter().zip(prepared.iter().filter(|p| p.sample.is_some())) {
                        let sample = p.sample.as_ref().expect("filtered");
                        let current: Vec<Vec3> = state.particles[d.range.clone()].iter().map(|q| q.x).collect();
                        records.extend(sample_records(p, sample, &current));
                    }
                    write_points_ply(&path, &records).map_err(at("save", None))?;
                }
                Ok(())
            })?;
            s.report.frames_completed = frame + 1;
            log::info!("frame {} of {} written", frame + 1, config.frames);
        }
        for d in &driven {
            log::debug!("object {} drove {} particles", d.object_id, d.range.len());
        }
        Ok(())
    })
}
