use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MaterialProperties;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::sampling::surface_variation;
use crate::spatial::SpatialHash;

/// Upper clip applied to per-particle Poisson ratios.
pub const MAX_POISSON: f64 = 0.49;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldProvenance {
    Uniform,
    MpdpBuiltin,
    MpdpFile,
}

/// Source of per-particle multipliers.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Uniform,
    /// Smooth function of local curvature, height and distance to the
    /// centroid. The coefficient of variation of the E multiplier is at
    /// most `spread`; ρ and ν use half and a quarter of it.
    Builtin {
        spread: f64,
    },
    /// Multipliers `[rho, E, nu]` keyed by point index.
    File(BTreeMap<usize, [f64; 3]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyField {
    pub density: Vec<f64>,
    pub young_modulus: Vec<f64>,
    pub poisson_ratio: Vec<f64>,
    pub provenance: FieldProvenance,
}

impl PropertyField {
    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// The values at `indices`, rescaled so every property keeps the mean
    /// given by `mean`.
    pub fn restrict(&self, indices: &[usize], mean: &MaterialProperties) -> Result<PropertyField> {
        if indices.is_empty() {
            return Err(Error::validation("indices", "restriction needs at least one particle"));
        }
        let pick = |col: &[f64]| -> Vec<f64> { indices.iter().map(|&i| col[i]).collect() };
        let mut rho = pick(&self.density);
        let mut e = pick(&self.young_modulus);
        let mut nu = pick(&self.poisson_ratio);
        renormalize(&mut rho).map_err(|m| Error::validation("density", m))?;
        renormalize(&mut e).map_err(|m| Error::validation("young_modulus", m))?;
        if mean.poisson_ratio > 0.0 {
            renormalize(&mut nu).map_err(|m| Error::validation("poisson_ratio", m))?;
        }
        Ok(PropertyField {
            density: rho.iter().map(|m| mean.density * m).collect(),
            young_modulus: e.iter().map(|m| mean.young_modulus * m).collect(),
            poisson_ratio: if mean.poisson_ratio > 0.0 {
                clip_poisson(&nu, mean.poisson_ratio)
            } else {
                vec![0.0; nu.len()]
            },
            provenance: self.provenance,
        })
    }
}

#[derive(Debug, Deserialize)]
struct FieldRow {
    index: usize,
    rho_mult: f64,
    #[serde(rename = "E_mult")]
    e_mult: f64,
    nu_mult: f64,
}

/// Read a multiplier CSV with header `index,rho_mult,E_mult,nu_mult`.
pub fn load_field_model(path: &Path) -> Result<FieldModel> {
    let file =
        std::fs::File::open(path).map_err(|e| Error::io(format!("reading field model {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = BTreeMap::new();
    for (line, record) in reader.deserialize::<FieldRow>().enumerate() {
        let row = record.map_err(|e| Error::validation("field_model.path", format!("{}: {e}", path.display())))?;
        let m = [row.rho_mult, row.e_mult, row.nu_mult];
        if m.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(
                "field_model.path",
                format!("{}: row {}: multipliers must be finite and non-negative", path.display(), line + 1),
            ));
        }
        if rows.insert(row.index, m).is_some() {
            return Err(Error::validation(
                "field_model.path",
                format!("{}: duplicate index {}", path.display(), row.index),
            ));
        }
    }
    Ok(FieldModel::File(rows))
}

/// Per-particle properties `multiplier ⊙ mean`, with each multiplier column
/// renormalized to unit mean.
pub fn mpdp_field(positions: &[Vec3], mean: &MaterialProperties, model: &FieldModel) -> Result<PropertyField> {
    mean.validate()?;
    let n = positions.len();
    if n == 0 {
        return Err(Error::validation("positions", "property field needs at least one particle"));
    }
    let (mut cols, provenance) = match model {
        FieldModel::Uniform => ([vec![1.0; n], vec![1.0; n], vec![1.0; n]], FieldProvenance::Uniform),
        FieldModel::Builtin { spread } => {
            if !(0.0..0.5).contains(spread) {
                return Err(Error::validation("field_model.spread", "must lie in [0, 0.5)"));
            }
            (builtin_multipliers(positions, *spread), FieldProvenance::MpdpBuiltin)
        }
        FieldModel::File(rows) => (file_multipliers(rows, n)?, FieldProvenance::MpdpFile),
    };
    for (c, name) in cols.iter_mut().zip(["rho_mult", "E_mult", "nu_mult"]) {
        renormalize(c).map_err(|m| Error::validation(format!("field_model.{name}"), m))?;
    }
    let [rho_m, e_m, nu_m] = cols;
    let density: Vec<f64> = rho_m.iter().map(|m| mean.density * m).collect();
    let young_modulus: Vec<f64> = e_m.iter().map(|m| mean.young_modulus * m).collect();
    if let Some(i) = density.iter().chain(&young_modulus).position(|v| !(*v > 0.0)) {
        return Err(Error::validation(
            "field_model",
            format!("particle {} gets a zero density or modulus multiplier", i % n),
        ));
    }
    let poisson_ratio = clip_poisson(&nu_m, mean.poisson_ratio);
    Ok(PropertyField { density, young_modulus, poisson_ratio, provenance })
}

fn file_multipliers(rows: &BTreeMap<usize, [f64; 3]>, n: usize) -> Result<[Vec<f64>; 3]> {
    if rows.len() != n || rows.keys().next_back().is_some_and(|k| *k + 1 != n) {
        return Err(Error::validation(
            "field_model.path",
            format!(
                "file lists {} particles with indices up to {:?}, expected 0..{n}",
                rows.len(),
                rows.keys().next_back()
            ),
        ));
    }
    let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for m in rows.values() {
        for a in 0..3 {
            cols[a].push(m[a]);
        }
    }
    Ok(cols)
}

fn renormalize(col: &mut [f64]) -> std::result::Result<(), String> {
    let mean = col.iter().sum::<f64>() / col.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err("multipliers have zero mean".into());
    }
    for v in col.iter_mut() {
        *v /= mean;
    }
    Ok(())
}

/// ν_i = min(MAX_POISSON, a · ν̄ · m_i), with `a ≥ 1` chosen so the mean stays ν̄.
fn clip_poisson(mult: &[f64], nu_mean: f64) -> Vec<f64> {
    let raw: Vec<f64> = mult.iter().map(|m| nu_mean * m).collect();
    if raw.iter().all(|v| *v <= MAX_POISSON) {
        return raw;
    }
    if nu_mean >= MAX_POISSON {
        log::warn!("mean Poisson ratio {nu_mean} is at the clip limit; using a uniform field");
        return vec![nu_mean; mult.len()];
    }
    let n = mult.len() as f64;
    let mean_at = |a: f64| raw.iter().map(|v| (a * v).min(MAX_POISSON)).sum::<f64>() / n;
    let (mut lo, mut hi) = (1.0, 2.0);
    while mean_at(hi) < nu_mean {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < nu_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    raw.iter().map(|v| (hi * v).min(MAX_POISSON)).collect()
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    for x in v.iter_mut() {
        *x = if sd > 1e-12 * (1.0 + mean.abs()) { (*x - mean) / sd } else { 0.0 };
    }
}

fn builtin_multipliers(positions: &[Vec3], spread: f64) -> [Vec<f64>; 3] {
    let n = positions.len();
    let centroid = positions.iter().fold(Vec3::zeros(), |a, p| a + p) / n as f64;
    let mut curvature = if n >= 5 {
        let k = 16.min(n - 1);
        let hash = SpatialHash::for_knn(positions, k + 1);
        positions
            .iter()
            .map(|p| surface_variation(hash.knn(p, k + 1).into_iter().map(|(i, _)| hash.point(i))))
            .collect()
    } else {
        vec![0.0; n]
    };
    let mut height: Vec<f64> = positions.iter().map(|p| p.z).collect();
    let mut radial: Vec<f64> = positions.iter().map(|p| (p - centroid).norm()).collect();
    standardize(&mut curvature);
    standardize(&mut height);
    standardize(&mut radial);
    // Curved, low and central regions come out stiffer.
    let mut s: Vec<f64> = (0..n).map(|i| curvature[i] - height[i] - radial[i]).collect();
    standardize(&mut s);
    let t: Vec<f64> = s.iter().map(|x| x.tanh()).collect();
    let t_mean = t.iter().sum::<f64>() / n as f64;
    let column = |scale: f64| t.iter().map(|x| 1.0 + scale * (x - t_mean)).collect::<Vec<f64>>();
    [column(0.5 * spread), column(spread), column(0.25 * spread)]
}
