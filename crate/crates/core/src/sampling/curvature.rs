use rayon::prelude::*;

use super::{CurvatureMode, PgasParams};
use crate::error::{Error, Result};
use crate::math::{sorted_symmetric_eigenvalues, Mat3, Vec3};
use crate::spatial::SpatialHash;

/// Raw surface variation per point, in [0, 1/3].
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureField {
    pub raw: Vec<f64>,
}

impl CurvatureField {
    /// K̂ per point for the given parameters.
    pub fn clamped(&self, params: &PgasParams) -> Vec<f64> {
        self.raw.iter().map(|k| super::clamp_curvature(*k, params)).collect()
    }
}

/// λ_min / (λ₁ + λ₂ + λ₃) of the covariance of `points` about their mean.
/// Zero for degenerate (coincident) sets.
pub fn surface_variation(points: impl IntoIterator<Item = Vec3>) -> f64 {
    let pts: Vec<Vec3> = points.into_iter().collect();
    if pts.is_empty() {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let mut cov = Mat3::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let [l1, l2, l3] = sorted_symmetric_eigenvalues(&cov);
    let trace = l1 + l2 + l3;
    if !(trace > 0.0) {
        return 0.0;
    }
    (l3.max(0.0) / trace).clamp(0.0, 1.0 / 3.0)
}

pub fn estimate_curvature(points: &[Vec3], params: &PgasParams) -> Result<CurvatureField> {
    match params.curvature_mode {
        CurvatureMode::Global => {
            if points.len() < 4 {
                return Err(Error::validation("points", "global curvature needs at least 4 points"));
            }
            let k = surface_variation(points.iter().copied());
            Ok(CurvatureField { raw: vec![k; points.len()] })
        }
        CurvatureMode::Local => {
            let k = params.local_neighbors;
            if points.len() < k + 1 {
                return Err(Error::validation(
                    "points",
                    format!("local curvature needs at least {} points, got {}", k + 1, points.len()),
                ));
            }
            Ok(CurvatureField { raw: local_curvature(points, k) })
        }
    }
}

/// Surface variation of each point together with its `k` nearest neighbours.
pub(crate) fn local_curvature(points: &[Vec3], k: usize) -> Vec<f64> {
    let hash = SpatialHash::for_knn(points, k + 1);
    points.par_iter().map(|p| surface_variation(hash.knn(p, k + 1).into_iter().map(|(i, _)| hash.point(i)))).collect()
}
