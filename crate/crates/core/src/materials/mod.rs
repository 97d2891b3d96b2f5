//! Material records, elastic-constant conversion and per-particle property
//! fields built by scaling a unit-mean multiplier field.

mod field;

pub use field::{load_field_model, mpdp_field, FieldModel, FieldProvenance, PropertyField, MAX_POISSON};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProperties {
    /// kg/m³
    pub density: f64,
    /// Pa
    pub young_modulus: f64,
    pub poisson_ratio: f64,
    #[serde(default)]
    pub rigid: bool,
    #[serde(default)]
    pub material_name: String,
}

impl MaterialProperties {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::validation("density", format!("{} is not a positive density", self.density)));
        }
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return Err(Error::validation(
                "young_modulus",
                format!("{} is not a positive modulus", self.young_modulus),
            ));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::validation("poisson_ratio", format!("{} is outside [0, 0.5)", self.poisson_ratio)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LameParameters {
    pub mu: f64,
    pub lambda: f64,
}

pub fn lame_from_young_poisson(e: f64, nu: f64) -> Result<LameParameters> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(Error::validation("young_modulus", format!("{e} is not a positive modulus")));
    }
    if nu >= 0.5 {
        return Err(Error::validation("poisson_ratio", format!("{nu} reaches the incompressible limit")));
    }
    if !(nu >= 0.0) {
        return Err(Error::validation("poisson_ratio", format!("{nu} is negative")));
    }
    Ok(LameParameters { mu: e / (2.0 * (1.0 + nu)), lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)) })
}
