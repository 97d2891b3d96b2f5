//! Binary little-endian splat PLY, in the layout produced by common
//! Gaussian-splatting trainers plus an optional `object_id` property.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::GaussianScene;
use crate::error::{Error, Result};
use crate::gaussians::{GaussianSplat, ShCoeffs};
use crate::math::{Quat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    count: usize,
    props: Vec<(String, Scalar, usize)>,
    stride: usize,
    data_start: usize,
}

fn header_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::PlyHeader { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut count = None;
    let mut in_vertex = false;
    let mut props = Vec::new();
    let mut stride = 0;
    loop {
        line_no += 1;
        let end = bytes[pos..]
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| header_error(path, line_no, "header ends before `end_header`"))?;
        let raw = &bytes[pos..pos + end];
        pos += end + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| header_error(path, line_no, "header line is not UTF-8"))?
            .trim_end_matches('\r')
            .trim();
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["ply"] if line_no == 1 => {}
            _ if line_no == 1 => return Err(header_error(path, 1, "missing `ply` magic")),
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", other, ..] => {
                return Err(header_error(path, line_no, format!("unsupported format `{other}`")));
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", "vertex", n] => {
                let n: usize = n.parse().map_err(|_| header_error(path, line_no, format!("bad vertex count `{n}`")))?;
                count = Some(n);
                in_vertex = true;
            }
            ["element", name, n] => {
                if *n != "0" {
                    return Err(header_error(path, line_no, format!("unsupported element `{name}`")));
                }
                in_vertex = false;
            }
            ["property", "list", ..] => {
                return Err(header_error(path, line_no, "list properties are not supported"));
            }
            ["property", ty, name] => {
                if !in_vertex {
                    continue;
                }
                let scalar = Scalar::parse(ty)
                    .ok_or_else(|| header_error(path, line_no, format!("unknown property type `{ty}`")))?;
                if props.iter().any(|(n, _, _)| n == name) {
                    return Err(header_error(path, line_no, format!("duplicate property `{name}`")));
                }
                props.push((name.to_string(), scalar, stride));
                stride += scalar.size();
            }
            ["end_header"] => break,
            _ => return Err(header_error(path, line_no, format!("unrecognized header line `{line}`"))),
        }
    }
    let count = count.ok_or_else(|| header_error(path, line_no, "no `element vertex` declared"))?;
    Ok(Header { count, props, stride, data_start: pos })
}

pub fn load_splat_ply(path: &Path) -> Result<GaussianScene> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_splat_ply(&bytes, path)
}

/// Parse PLY bytes; `path` is only used in error messages.
pub fn parse_splat_ply(bytes: &[u8], path: &Path) -> Result<GaussianScene> {
    let header = parse_header(bytes, path)?;
    let lookup: HashMap<&str, (Scalar, usize)> = header.props.iter().map(|(n, s, o)| (n.as_str(), (*s, *o))).collect();
    let need = |name: &str| {
        lookup.get(name).copied().ok_or_else(|| header_error(path, 0, format!("missing required property `{name}`")))
    };
    let pos = [need("x")?, need("y")?, need("z")?];
    let dc = [need("f_dc_0")?, need("f_dc_1")?, need("f_dc_2")?];
    let opacity = need("opacity")?;
    let scale = [need("scale_0")?, need("scale_1")?, need("scale_2")?];
    let rot = [need("rot_0")?, need("rot_1")?, need("rot_2")?, need("rot_3")?];
    let object_id = lookup.get("object_id").copied();
    let rest_count = header.props.iter().filter(|(n, _, _)| n.starts_with("f_rest_")).count();
    let degree = match rest_count {
        0 => 0,
        9 => 1,
        24 => 2,
        45 => 3,
        n => return Err(header_error(path, 0, format!("{n} f_rest properties do not match an SH degree"))),
    };
    let rest: Vec<(Scalar, usize)> = (0..rest_count).map(|i| need(&format!("f_rest_{i}"))).collect::<Result<_>>()?;
    let per_channel = rest_count / 3;

    let body = &bytes[header.data_start..];
    if body.len() < header.count * header.stride {
        return Err(Error::PlyData {
            path: path.to_path_buf(),
            index: body.len() / header.stride.max(1),
            message: format!("file truncated: expected {} splats", header.count),
        });
    }
    let mut splats = Vec::with_capacity(header.count);
    for index in 0..header.count {
        let row = &body[index * header.stride..(index + 1) * header.stride];
        let get = |(s, o): (Scalar, usize)| s.read(&row[o..]);
        let data_err = |message: &str| Error::PlyData { path: path.to_path_buf(), index, message: message.into() };
        let values: Vec<f64> = pos
            .iter()
            .chain(&dc)
            .chain(&scale)
            .chain(&rot)
            .chain(std::iter::once(&opacity))
            .chain(&rest)
            .map(|p| get(*p))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(data_err("non-finite field value"));
        }
        let q = nalgebra::Quaternion::new(get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3]));
        if q.norm() < 1e-12 {
            return Err(data_err("zero-length rotation quaternion"));
        }
        let scale = Vec3::new(get(scale[0]).exp(), get(scale[1]).exp(), get(scale[2]).exp());
        if scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(data_err("scale underflows or overflows"));
        }
        let mut coeffs = vec![[0.0; 3]; (degree + 1) * (degree + 1)];
        coeffs[0] = [get(dc[0]), get(dc[1]), get(dc[2])];
        for (c, channel) in (0..3).map(|c| (c, &rest[c * per_channel..(c + 1) * per_channel])) {
            for (k, p) in channel.iter().enumerate() {
                coeffs[k + 1][c] = get(*p);
            }
        }
        let logit = get(opacity);
        splats.push(GaussianSplat {
            center: Vec3::new(get(pos[0]), get(pos[1]), get(pos[2])),
            rotation: Quat::from_quaternion(q),
            scale,
            opacity: (1.0 / (1.0 + (-logit).exp())).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON),
            sh: ShCoeffs::new(degree, coeffs)?,
            object_id: match object_id {
                Some(p) => get(p) as u32,
                None => 0,
            },
        });
    }
    GaussianScene::new(splats)
}

/// Encode a scene as splat PLY bytes (float32 fields, uint `object_id`).
pub fn splat_ply_bytes(scene: &GaussianScene) -> Result<Vec<u8>> {
    let degree = scene.splats[0].sh.degree();
    if scene.splats.iter().any(|s| s.sh.degree() != degree) {
        return Err(Error::validation("scene", "all splats must share one SH degree to be written"));
    }
    let rest = (degree + 1) * (degree + 1) - 1;
    let mut out = Vec::new();
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", scene.len());
    let mut names: Vec<String> =
        ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"].iter().map(|s| s.to_string()).collect();
    names.extend((0..3 * rest).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"].iter().map(|s| s.to_string()),
    );
    for n in &names {
        header.push_str(&format!("property float {n}\n"));
    }
    header.push_str("property uint object_id\nend_header\n");
    out.extend_from_slice(header.as_bytes());
    for s in &scene.splats {
        let q = s.rotation.quaternion();
        let c = s.sh.coeffs();
        let mut row: Vec<f64> = vec![s.center.x, s.center.y, s.center.z, 0.0, 0.0, 0.0, c[0][0], c[0][1], c[0][2]];
        for ch in 0..3 {
            row.extend((1..=rest).map(|k| c[k][ch]));
        }
        row.push((s.opacity / (1.0 - s.opacity)).ln());
        row.extend(s.scale.iter().map(|v| v.ln()));
        row.extend([q.w, q.i, q.j, q.k]);
        for v in row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&s.object_id.to_le_bytes());
    }
    Ok(out)
}

pub fn save_splat_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    let bytes = splat_ply_bytes(scene)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// One entry of a driving-particle dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointRecord {
    pub position: Vec3,
    pub object_id: u32,
    /// Index of the source splat.
    pub source_index: u32,
    pub radius: f64,
}

/// Write points as a binary PLY with `x y z radius object_id source_index`.
pub fn write_points_ply(path: &Path, points: &[PointRecord]) -> Result<()> {
    let mut out = Vec::new();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n\
         property float radius\nproperty uint object_id\nproperty uint source_index\nend_header\n",
        points.len()
    )
    .expect("writing to a Vec cannot fail");
    for p in points {
        for v in [p.position.x, p.position.y, p.position.z, p.radius] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&p.object_id.to_le_bytes());
        out.extend_from_slice(&p.source_index.to_le_bytes());
    }
    let path: PathBuf = path.to_path_buf();
    std::fs::write(&path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ply(props: &[&str], rows: &[Vec<f32>]) -> Vec<u8> {
        let mut out = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", rows.len());
        for p in props {
            out.push_str(&format!("property float {p}\n"));
        }
        out.push_str("end_header\n");
        let mut bytes = out.into_bytes();
        for r in rows {
            for v in r {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    const BASIC: [&str; 14] = [
        "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1",
        "rot_2", "rot_3",
    ];

    #[test]
    fn decodes_log_scale_logit_opacity_and_normalizes_rotation() {
        let bytes = ply(&BASIC, &[vec![1.0, 2.0, 3.0, 0.1, 0.2, 0.3, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]]);
        let scene = parse_splat_ply(&bytes, Path::new("t.ply")).unwrap();
        let s = &scene.splats[0];
        assert_eq!(s.scale, Vec3::repeat(1.0));
        assert_eq!(s.opacity, 0.5);
        assert_eq!(s.rotation, Quat::identity());
        assert_eq!(s.object_id, 0);
        assert_eq!(s.center, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn header_errors_name_the_line() {
        let mut bytes = ply(&BASIC, &[]);
        let text = String::from_utf8(bytes.clone()).unwrap().replace("property float rot_0", "property float16 rot_0");
        bytes = text.into_bytes();
        match parse_splat_ply(&bytes, Path::new("t.ply")) {
            Err(Error::PlyHeader { line, .. }) => assert_eq!(line, 14),
            other => panic!("{other:?}"),
        }
        let ascii = b"ply\nformat ascii 1.0\nend_header\n";
        assert!(matches!(parse_splat_ply(ascii, Path::new("a")), Err(Error::PlyHeader { line: 2, .. })));
    }

    #[test]
    fn nan_is_rejected_with_index() {
        let good = vec![0.0f32; 14];
        let mut bad = good.clone();
        bad[1] = f32::NAN;
        let mut rows = vec![good.clone(), bad];
        rows[0][10] = 1.0;
        rows[1][10] = 1.0;
        match parse_splat_ply(&ply(&BASIC, &rows), Path::new("t.ply")) {
            Err(Error::PlyData { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_is_an_error() {
        assert!(parse_splat_ply(&ply(&BASIC[..13], &[]), Path::new("t.ply")).is_err());
    }
}
