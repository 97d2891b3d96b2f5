//! Real spherical harmonics in the usual splatting sign convention
//! (degrees 0..=3), evaluation and rotation.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math::{Quat, Vec3};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
const SH_C1: f64 = 0.488_602_511_902_919_9;
const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: usize = 3;

/// RGB coefficients, `(degree + 1)²` terms ordered by band then `m = -l..=l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffs {
    degree: usize,
    coeffs: Vec<[f64; 3]>,
}

impl ShCoeffs {
    pub fn new(degree: usize, coeffs: Vec<[f64; 3]>) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::validation("sh", format!("degree {degree} exceeds {MAX_DEGREE}")));
        }
        if coeffs.len() != (degree + 1) * (degree + 1) {
            return Err(Error::validation(
                "sh",
                format!("degree {degree} needs {} terms, got {}", (degree + 1) * (degree + 1), coeffs.len()),
            ));
        }
        Ok(ShCoeffs { degree, coeffs })
    }

    /// Degree-0 coefficients only.
    pub fn dc(rgb: [f64; 3]) -> Self {
        ShCoeffs { degree: 0, coeffs: vec![rgb] }
    }

    /// DC coefficients that evaluate to `rgb` (before clamping).
    pub fn from_color(rgb: [f64; 3]) -> Self {
        Self::dc(rgb.map(|c| (c - 0.5) / SH_C0))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[[f64; 3]] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.coeffs
    }
}

/// All 16 basis values at `d`; entries past the requested degree are unused.
pub fn sh_basis(d: &Vec3) -> [f64; 16] {
    let (x, y, z) = (d.x, d.y, d.z);
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    [
        SH_C0,
        -SH_C1 * y,
        SH_C1 * z,
        -SH_C1 * x,
        SH_C2[0] * xy,
        SH_C2[1] * yz,
        SH_C2[2] * (2.0 * zz - xx - yy),
        SH_C2[3] * xz,
        SH_C2[4] * (xx - yy),
        SH_C3[0] * y * (3.0 * xx - yy),
        SH_C3[1] * xy * z,
        SH_C3[2] * y * (4.0 * zz - xx - yy),
        SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        SH_C3[4] * x * (4.0 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy),
        SH_C3[6] * x * (xx - 3.0 * yy),
    ]
}

/// Σ Cᵢ Yᵢ(d) per channel, with no offset or clamping.
pub fn eval_sh_raw(sh: &ShCoeffs, dir: &Vec3) -> [f64; 3] {
    let basis = sh_basis(dir);
    let mut out = [0.0; 3];
    for (b, c) in basis.iter().zip(&sh.coeffs) {
        for ch in 0..3 {
            out[ch] += b * c[ch];
        }
    }
    out
}

/// View-dependent colour: raw value plus 0.5, clamped at zero.
pub fn eval_sh(sh: &ShCoeffs, dir: &Vec3) -> [f64; 3] {
    eval_sh_raw(sh, dir).map(|c| (c + 0.5).max(0.0))
}

/// How bands above degree 1 are treated under rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShRotation {
    #[default]
    Exact,
    Truncate,
}

/// Coefficients of the rotated radiance field, i.e. the `sh'` with
/// `eval(sh', q·d) == eval(sh, d)` for all directions `d`.
pub fn rotate_sh(sh: &ShCoeffs, q: &Quat, mode: ShRotation) -> ShCoeffs {
    if sh.degree == 0 || *q == Quat::identity() {
        let mut out = sh.clone();
        if mode == ShRotation::Truncate {
            truncate_high_bands(&mut out);
        }
        return out;
    }
    let r = q.to_rotation_matrix().into_inner();
    let mut out = sh.clone();

    // Band 1 is a vector: f(d) = C1 · (v · d) with v = (-c3, -c1, c2).
    for ch in 0..3 {
        let v = Vec3::new(-sh.coeffs[3][ch], -sh.coeffs[1][ch], sh.coeffs[2][ch]);
        let w = r * v;
        out.coeffs[1][ch] = -w.y;
        out.coeffs[2][ch] = w.z;
        out.coeffs[3][ch] = -w.x;
    }

    if mode == ShRotation::Truncate {
        truncate_high_bands(&mut out);
        return out;
    }
    for l in 2..=sh.degree {
        let d = band_rotation(l, q);
        let off = l * l;
        let n = 2 * l + 1;
        for ch in 0..3 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += d[(i, j)] * sh.coeffs[off + j][ch];
                }
                out.coeffs[off + i][ch] = acc;
            }
        }
    }
    out
}

fn truncate_high_bands(sh: &mut ShCoeffs) {
    for c in sh.coeffs.iter_mut().skip(4) {
        *c = [0.0; 3];
    }
}

/// Sample directions and the pseudo-inverse of the band-`l` basis evaluated on them.
struct BandFit {
    dirs: Vec<Vec3>,
    pinv: DMatrix<f64>,
}

fn band_fit(l: usize) -> &'static BandFit {
    static FITS: [OnceLock<BandFit>; MAX_DEGREE + 1] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    FITS[l].get_or_init(|| {
        let dirs = fibonacci_sphere(3 * (2 * l + 1));
        let pinv = band_matrix(l, &dirs).pseudo_inverse(1e-12).expect("basis matrix pseudo-inverse");
        BandFit { dirs, pinv }
    })
}

fn band_matrix(l: usize, dirs: &[Vec3]) -> DMatrix<f64> {
    let n = 2 * l + 1;
    DMatrix::from_fn(dirs.len(), n, |row, col| sh_basis(&dirs[row])[l * l + col])
}

/// Wigner-style block D with `c'_l = D c_l`, built by fitting the rotated
/// band on a fixed direction set: Y(E) c' = Y(Rᵀ E) c.
fn band_rotation(l: usize, q: &Quat) -> DMatrix<f64> {
    let fit = band_fit(l);
    let inv = q.inverse();
    let rotated: Vec<Vec3> = fit.dirs.iter().map(|e| inv * e).collect();
    &fit.pinv * band_matrix(l, &rotated)
}

fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect()
}
