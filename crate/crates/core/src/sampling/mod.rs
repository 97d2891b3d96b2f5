//! Curvature estimation and physically/geometrically adaptive Poisson-disk
//! selection of driving particles.

mod curvature;
mod pgas;

pub use curvature::{estimate_curvature, surface_variation, CurvatureField};
pub use pgas::{adapt_radius, clamp_curvature, pgas_sample, radius_from_clamped, DrivingSample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurvatureMode {
    /// One value from the covariance of the whole object.
    Global,
    /// Per point, over its k nearest neighbours.
    #[default]
    Local,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgasParams {
    /// Base Poisson-disk radius `r`, world units.
    pub base_radius: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub k: f64,
    /// Young's modulus (Pa) that maps to a unit stiffness factor.
    pub e_ref: f64,
    pub curvature_mode: CurvatureMode,
    pub local_neighbors: usize,
    /// Multiplier on raw curvature before clamping. `None` means `3 * v_max`.
    pub curvature_gain: Option<f64>,
    /// Clamp raw curvature directly (gain 1), regardless of `curvature_gain`.
    pub faithful: bool,
    pub rng_seed: u64,
}

impl Default for PgasParams {
    fn default() -> Self {
        PgasParams {
            base_radius: 0.02,
            v_max: 10.0,
            v_min: 1.0,
            k: 10f64.sqrt(),
            e_ref: 1e6,
            curvature_mode: CurvatureMode::Local,
            local_neighbors: 30,
            curvature_gain: None,
            faithful: false,
            rng_seed: 0,
        }
    }
}

impl PgasParams {
    pub fn gain(&self) -> f64 {
        if self.faithful {
            1.0
        } else {
            self.curvature_gain.unwrap_or(3.0 * self.v_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_radius > 0.0) {
            return Err(Error::validation("base_radius", "must be > 0"));
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return Err(Error::validation("pgas.v_min", "need 0 < v_min <= v_max"));
        }
        if !(self.k > 0.0) {
            return Err(Error::validation("pgas.k", "must be > 0"));
        }
        if !(self.e_ref > 0.0) {
            return Err(Error::validation("pgas.e_ref", "must be > 0"));
        }
        if !(self.gain() > 0.0) {
            return Err(Error::validation("pgas.curvature_gain", "must be > 0"));
        }
        if self.local_neighbors < 3 {
            return Err(Error::validation("pgas.local_neighbors", "must be >= 3"));
        }
        Ok(())
    }
}
