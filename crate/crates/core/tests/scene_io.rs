use std::path::Path;

use proptest::prelude::*;
use splatsim_core::gaussians::{GaussianSplat, ShCoeffs};
use splatsim_core::scene_io::{parse_splat_ply, splat_ply_bytes, GaussianScene};
use splatsim_core::{Quat, Vec3};

/// A deliberately naive reader: every property is looked up by name in a
/// map built from the header, with no shared code with the library.
fn reference_parse(bytes: &[u8]) -> Vec<std::collections::HashMap<String, f64>> {
    let end = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
    let header = std::str::from_utf8(&bytes[..end]).unwrap();
    let mut count = 0;
    let mut props = Vec::new();
    for line in header.lines() {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["element", "vertex", n] => count = n.parse().unwrap(),
            ["property", ty, name] => props.push((ty.to_string(), name.to_string())),
            _ => {}
        }
    }
    let mut rows = Vec::new();
    let mut at = end;
    for _ in 0..count {
        let mut row = std::collections::HashMap::new();
        for (ty, name) in &props {
            let (v, w) = match ty.as_str() {
                "float" => (f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64, 4),
                "double" => (f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()), 8),
                "uchar" => (bytes[at] as f64, 1),
                "uint" => (u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64, 4),
                other => panic!("fixture uses unexpected type {other}"),
            };
            row.insert(name.clone(), v);
            at += w;
        }
        rows.push(row);
    }
    rows
}

/// Three splats with properties in a non-standard order and mixed types.
fn fixture() -> Vec<u8> {
    let names = [
        ("rot_0", "float"),
        ("rot_1", "float"),
        ("rot_2", "float"),
        ("rot_3", "float"),
        ("x", "double"),
        ("y", "double"),
        ("z", "double"),
        ("object_id", "uchar"),
        ("opacity", "float"),
        ("f_dc_0", "float"),
        ("f_dc_1", "float"),
        ("f_dc_2", "float"),
        ("scale_0", "float"),
        ("scale_1", "float"),
        ("scale_2", "float"),
    ];
    let mut out = String::from("ply\nformat binary_little_endian 1.0\ncomment fixture\nelement vertex 3\n");
    for (n, t) in names {
        out.push_str(&format!("property {t} {n}\n"));
    }
    for i in 0..9 {
        out.push_str(&format!("property float f_rest_{i}\n"));
    }
    out.push_str("end_header\n");
    let mut bytes = out.into_bytes();
    let rows: [[f64; 15]; 3] = [
        [2.0, 0.0, 0.0, 0.0, 0.5, -1.25, 3.0, 4.0, 0.0, 0.1, 0.2, 0.3, 0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0, 1.0, -2.0, 0.0, 1e-3, 7.0, 2.5, -1.0, 0.0, 1.0, -3.0, -2.0, 0.5],
        [0.3, -0.4, 0.0, 1.2, 10.0, 20.0, 30.0, 255.0, -4.0, 0.0, 0.0, 0.0, 1.0, 2.0, -1.0],
    ];
    for (r, row) in rows.iter().enumerate() {
        for (v, (_, t)) in row.iter().zip(names) {
            match t {
                "float" => bytes.extend_from_slice(&(*v as f32).to_le_bytes()),
                "double" => bytes.extend_from_slice(&v.to_le_bytes()),
                _ => bytes.push(*v as u8),
            }
        }
        for i in 0..9 {
            bytes.extend_from_slice(&((r * 9 + i) as f32 * 0.01).to_le_bytes());
        }
    }
    bytes
}

#[test]
fn library_agrees_with_reference_parser() {
    let bytes = fixture();
    let scene = parse_splat_ply(&bytes, Path::new("fixture.ply")).unwrap();
    let rows = reference_parse(&bytes);
    assert_eq!(scene.len(), 3);
    for (s, r) in scene.splats.iter().zip(&rows) {
        assert_eq!(s.center, Vec3::new(r["x"], r["y"], r["z"]));
        assert_eq!(s.object_id, r["object_id"] as u32);
        let q = [r["rot_0"], r["rot_1"], r["rot_2"], r["rot_3"]];
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = s.rotation.quaternion();
        for (a, b) in [got.w, got.i, got.j, got.k].iter().zip(q) {
            assert!((a - b / norm).abs() < 1e-12);
        }
        for (a, key) in s.scale.iter().zip(["scale_0", "scale_1", "scale_2"]) {
            assert!((a - r[key].exp()).abs() < 1e-12 * a);
        }
        assert!((s.opacity - 1.0 / (1.0 + (-r["opacity"]).exp())).abs() < 1e-12);
        let c = s.sh.coeffs();
        assert_eq!(s.sh.degree(), 1);
        for ch in 0..3 {
            assert_eq!(c[0][ch], r[&format!("f_dc_{ch}")]);
            for k in 0..3 {
                assert_eq!(c[k + 1][ch], r[&format!("f_rest_{}", ch * 3 + k)]);
            }
        }
    }
    let first = &scene.splats[0];
    assert_eq!(first.scale, Vec3::repeat(1.0));
    assert_eq!(first.opacity, 0.5);
    assert_eq!(first.rotation, Quat::identity());
}

fn splat_strategy(degree: usize) -> impl Strategy<Value = GaussianSplat> {
    let n = (degree + 1) * (degree + 1);
    (
        prop::array::uniform3(-100.0..100.0f64),
        prop::array::uniform4(-1.0..1.0f64),
        prop::array::uniform3(1e-4..10.0f64),
        0.001..0.999f64,
        prop::collection::vec(prop::array::uniform3(-2.0..2.0f64), n),
        0u32..1000,
    )
        .prop_filter("non-degenerate quaternion", |(_, q, ..)| q.iter().map(|v| v * v).sum::<f64>() > 1e-2)
        .prop_map(move |(c, q, s, o, sh, id)| GaussianSplat {
            center: Vec3::from(c),
            rotation: Quat::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3])),
            scale: Vec3::from(s),
            opacity: o,
            sh: ShCoeffs::new(degree, sh).unwrap(),
            object_id: id,
        })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn save_then_load_roundtrips(
        splats in (0usize..4).prop_flat_map(|d| prop::collection::vec(splat_strategy(d), 1..6))
    ) {
        let scene = GaussianScene::new(splats).unwrap();
        let back = parse_splat_ply(&splat_ply_bytes(&scene).unwrap(), Path::new("mem.ply")).unwrap();
        prop_assert_eq!(back.len(), scene.len());
        for (a, b) in scene.splats.iter().zip(&back.splats) {
            for i in 0..3 {
                prop_assert!(rel(a.center[i], b.center[i]) < 1e-6);
                prop_assert!(rel(a.scale[i], b.scale[i]) < 1e-6);
            }
            prop_assert!(rel(a.opacity, b.opacity) < 1e-6);
            prop_assert!(a.rotation.angle_to(&b.rotation) < 1e-6);
            for (x, y) in a.sh.coeffs().iter().zip(b.sh.coeffs()) {
                for ch in 0..3 {
                    prop_assert!((x[ch] - y[ch]).abs() <= 1e-6 * x[ch].abs().max(1.0));
                }
            }
            prop_assert_eq!(a.object_id, b.object_id);
        }
    }
}

#[test]
fn parsing_is_deterministic_and_order_preserving() {
    let bytes = fixture();
    let a = parse_splat_ply(&bytes, Path::new("a.ply")).unwrap();
    let b = parse_splat_ply(&bytes, Path::new("a.ply")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.object_ids(), vec![4, 7, 255]);
}

#[test]
fn missing_object_id_defaults_to_zero() {
    let header = "ply\nformat binary_little_endian 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nproperty float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\nproperty float opacity\nproperty float scale_0\nproperty float scale_1\nproperty float scale_2\nproperty float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\nend_header\n";
    let mut bytes = header.as_bytes().to_vec();
    for _ in 0..2 {
        for v in [0.0f32, 0.0, 0.0, 0.1, 0.1, 0.1, 0.0, -2.0, -2.0, -2.0, 1.0, 0.0, 0.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let scene = parse_splat_ply(&bytes, Path::new("plain.ply")).unwrap();
    assert_eq!(scene.object_ids(), vec![0, 0]);
    assert_eq!(scene.splats[0].sh.degree(), 0);
}
