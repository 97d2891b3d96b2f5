mod common;

use common::*;
use splatsim::{cmd_perceive, cmd_render, cmd_sample, cmd_simulate, scene_camera, ProviderMode};
use splatsim_core::perception::{MaterialCatalog, OfflineProvider, Provider};
use splatsim_core::renderer::render;
use splatsim_core::sampling::pgas_sample;
use splatsim_core::scene_io::{load_frame, load_splat_ply, SimConfig};

#[test]
fn simulate_writes_frames_and_report() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    let report = cmd_simulate(&run_for(&f, &out));
    assert!(report.succeeded(), "{:?}", report.failure);
    for i in 0..3 {
        assert!(out.join(format!("frames/frame_{i:05}.png")).is_file());
    }
    assert!(!out.join("frames/frame_00003.png").exists());
    assert_eq!(report.frames_completed, 3);
    let v = report_sans_timings(&out);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["objects"][0]["role"], "simulated");
    assert_eq!(v["objects"][1]["role"], "static");
    assert!(v["objects"][0]["sample_count"].as_u64().unwrap() > 10);
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    for stage in ["load", "perceive", "mpdp", "pgas", "initialize", "simulate", "bind", "render", "save"] {
        assert!(report.timings.contains_key(stage), "{stage}");
    }
}

#[test]
fn frames_show_motion() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    assert!(cmd_simulate(&run_for(&f, &out)).succeeded());
    let (_, _, first) = load_frame(&out.join("frames/frame_00000.png")).unwrap();
    let (_, _, last) = load_frame(&out.join("frames/frame_00002.png")).unwrap();
    assert_ne!(first, last);
}

#[test]
fn missing_api_key_fails_before_simulation() {
    let f = fixture(
        &cube_on_slab(),
        MANIFEST,
        &SMALL_CONFIG.replace(
            "\"frames\": 3,",
            "\"frames\": 3, \"perception\": {\"api_key_env\": \"SPLATSIM_TEST_UNSET_KEY\"},",
        ),
    );
    let out = f.path("out");
    let mut run = run_for(&f, &out);
    run.provider = ProviderMode::Remote;
    let report = cmd_simulate(&run);
    assert_eq!(report.exit_code(), 3);
    let failure = report.failure.unwrap();
    assert!(failure.message.contains("SPLATSIM_TEST_UNSET_KEY"), "{}", failure.message);
    assert!(!report.timings.contains_key("simulate"));
    assert!(!out.join("frames").exists());
    assert!(out.join("report.json").is_file());
}

#[test]
fn missing_manifest_is_a_validation_error_with_report() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    let mut run = run_for(&f, &out);
    run.manifest = None;
    let report = cmd_simulate(&run);
    assert_eq!(report.exit_code(), 2);
    assert_eq!(report_sans_timings(&out)["failure"]["stage"], "load");
}

#[test]
fn bad_config_reports_the_field() {
    let f = fixture(&cube_on_slab(), MANIFEST, r#"{"grid_resolution": 4}"#);
    let out = f.path("out");
    let report = cmd_simulate(&run_for(&f, &out));
    assert_eq!(report.exit_code(), 2);
    assert!(report.failure.unwrap().message.contains("grid_resolution"));
}

#[test]
fn simulation_failure_keeps_partial_frames() {
    // A huge impulse drives the cube through the domain wall within a few frames.
    let manifest = MANIFEST.replace("\"magnitude\": 0.5", "\"magnitude\": 40.0");
    let config = SMALL_CONFIG.replace("\"frames\": 3", "\"frames\": 40");
    let f = fixture(&cube_on_slab(), &manifest, &config);
    let out = f.path("out");
    let report = cmd_simulate(&run_for(&f, &out));
    assert_eq!(report.exit_code(), 4, "{:?}", report.failure);
    let failure = report.failure.as_ref().unwrap();
    assert_eq!(failure.stage, "simulate");
    assert_eq!(failure.object_id, Some(0));
    for i in 0..report.frames_completed {
        assert!(out.join(format!("frames/frame_{i:05}.png")).is_file());
    }
}

#[test]
fn perceive_twice_is_identical() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let (a, b) = (f.path("a"), f.path("b"));
    assert!(cmd_perceive(&run_for(&f, &a)).succeeded());
    assert!(cmd_perceive(&run_for(&f, &b)).succeeded());
    let pa = std::fs::read(a.join("properties/object_0.json")).unwrap();
    let pb = std::fs::read(b.join("properties/object_0.json")).unwrap();
    assert_eq!(pa, pb);
    let v: serde_json::Value = serde_json::from_slice(&pa).unwrap();
    assert_eq!(v["material_name"], "rubber");
    assert!(!a.join("properties/object_1.json").exists());
}

#[test]
fn sample_count_matches_library() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    let report = cmd_sample(&run_for(&f, &out));
    assert!(report.succeeded(), "{:?}", report.failure);
    let count = report.objects[0].sample_count.unwrap();

    let scene = load_splat_ply(&f.scene).unwrap();
    let mut config = SimConfig::from_json(SMALL_CONFIG).unwrap();
    config.rng_seed = 7;
    let mut params = config.pgas_params();
    params.rng_seed = 7;
    let centers: Vec<_> = scene.indices_of(0).iter().map(|&i| scene.splats[i].center).collect();
    let provider = OfflineProvider::new(MaterialCatalog::builtin());
    let cand = provider.propose_materials(None, "rubber toy", 1).unwrap();
    let mean = provider.estimate_properties(None, "rubber toy", &cand[0]).unwrap();
    let field = splatsim_core::materials::mpdp_field(
        &centers,
        &mean,
        &splatsim_core::materials::FieldModel::Builtin { spread: 0.2 },
    )
    .unwrap();
    let sample = pgas_sample(&centers, &field.young_modulus, &params).unwrap();
    assert_eq!(count, sample.len());

    let ply = std::fs::read(out.join("samples/object_0.ply")).unwrap();
    let header = String::from_utf8_lossy(&ply[..200]);
    assert!(header.contains(&format!("element vertex {count}\n")));
}

#[test]
fn render_matches_library() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    let mut run = run_for(&f, &out);
    run.manifest = None;
    assert!(cmd_render(&run).succeeded());
    let scene = load_splat_ply(&f.scene).unwrap();
    let config = SimConfig::from_json(SMALL_CONFIG).unwrap();
    let cam = scene_camera(&config, &scene).unwrap();
    let image = render(&scene.splats, &cam, config.render.background);
    let (w, h, rgb) = load_frame(&out.join("render.png")).unwrap();
    assert_eq!((w, h), (64, 48));
    assert_eq!(rgb, image.to_rgb8());
}

#[test]
fn particle_dump_has_every_frame() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    let mut run = run_for(&f, &out);
    run.dump_particles = true;
    run.frames = Some(2);
    assert!(cmd_simulate(&run).succeeded());
    assert!(out.join("particles/frame_00000.ply").is_file());
    assert!(out.join("particles/frame_00001.ply").is_file());
}

#[test]
fn cache_is_reused_and_optional() {
    let f = fixture(&cube_on_slab(), MANIFEST, SMALL_CONFIG);
    let out = f.path("out");
    assert!(cmd_perceive(&run_for(&f, &out)).succeeded());
    assert!(std::fs::read_dir(out.join("cache")).unwrap().count() >= 1);
    let other = f.path("other");
    let mut run = run_for(&f, &other);
    run.no_cache = true;
    assert!(cmd_perceive(&run).succeeded());
    assert!(!other.join("cache").exists());
}

const RIGID_MANIFEST: &str = r#"{
  "objects": [
    {"object_id": 0, "tag": "rubber toy"},
    {"object_id": 1, "tag": "ceramic plate"}
  ]
}"#;

#[test]
fn rigid_objects_follow_rigid_mode() {
    let f = fixture(&cube_on_slab(), RIGID_MANIFEST, SMALL_CONFIG);
    let out = f.path("collider");
    let report = cmd_simulate(&run_for(&f, &out));
    assert!(report.succeeded(), "{:?}", report.failure);
    assert_eq!(report_sans_timings(&out)["objects"][1]["role"], "collider");
    assert!(report.objects[1].sample_count.is_none());

    let stiff = SMALL_CONFIG.replace("\"frames\": 3,", "\"frames\": 3, \"rigid_mode\": \"stiff\",");
    let f = fixture(&cube_on_slab(), RIGID_MANIFEST, &stiff);
    let out = f.path("stiff");
    let report = cmd_sample(&run_for(&f, &out));
    assert!(report.succeeded(), "{:?}", report.failure);
    assert_eq!(report_sans_timings(&out)["objects"][1]["role"], "simulated");
    assert!(report.objects[1].sample_count.unwrap() > 0);
    assert!(report.objects[1].properties.as_ref().unwrap().rigid);
}

#[test]
fn field_file_is_found_next_to_the_config() {
    let config =
        SMALL_CONFIG.replace("{\"kind\": \"builtin\"}", "{\"kind\": \"file\", \"path\": \"field_{object_id}.csv\"}");
    let f = fixture(&cube_on_slab(), MANIFEST, &config);
    let mut csv = String::from("index,rho_mult,E_mult,nu_mult\n");
    for i in 0..1000 {
        csv.push_str(&format!("{i},1,{},1\n", 1.0 + (i % 3) as f64 * 0.1));
    }
    std::fs::write(f.path("field_0.csv"), csv).unwrap();
    let out = f.path("out");
    let report = cmd_sample(&run_for(&f, &out));
    assert!(report.succeeded(), "{:?}", report.failure);
    assert_eq!(report_sans_timings(&out)["objects"][0]["field_provenance"], "mpdp_file");

    std::fs::remove_file(f.path("field_0.csv")).unwrap();
    let report = cmd_sample(&run_for(&f, &f.path("missing")));
    assert_eq!(report.exit_code(), 5);
    assert_eq!(report.failure.unwrap().object_id, Some(0));
}
