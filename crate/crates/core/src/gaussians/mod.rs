//! Anisotropic Gaussian primitives and their math.

mod camera;
mod sh;

pub use camera::{CameraSpec, ProjectedCovariance, COVARIANCE_FLOOR, NEAR_PLANE};
pub use sh::{eval_sh, eval_sh_raw, rotate_sh, sh_basis, ShCoeffs, ShRotation, SH_C0};

use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec3};

/// One splat. Scales and opacity are linear (not log/logit).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplat {
    pub center: Vec3,
    pub rotation: Quat,
    pub scale: Vec3,
    pub opacity: f64,
    pub sh: ShCoeffs,
    pub object_id: u32,
}

impl GaussianSplat {
    /// Σ = R S Sᵀ Rᵀ.
    pub fn covariance(&self) -> Mat3 {
        covariance(&self.rotation, &self.scale)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.rotation.quaternion();
        if ((q.norm() - 1.0).abs()) > 1e-6 {
            return Err(Error::validation("rotation", "quaternion is not unit length"));
        }
        if !self.scale.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::validation("scale", "scales must be positive and finite"));
        }
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(Error::validation("opacity", "opacity must lie in (0, 1)"));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::validation("center", "non-finite coordinate"));
        }
        Ok(())
    }
}

pub fn covariance(rotation: &Quat, scale: &Vec3) -> Mat3 {
    let r = rotation.to_rotation_matrix().into_inner();
    let rs = r * Mat3::from_diagonal(scale);
    let cov = rs * rs.transpose();
    // Symmetrize away rounding in the product.
    (cov + cov.transpose()) * 0.5
}

/// Split an SPD covariance back into a rotation and per-axis scales.
pub fn decompose_covariance(cov: &Mat3) -> (Quat, Vec3) {
    let eig = nalgebra::SymmetricEigen::new(*cov);
    let mut r = eig.eigenvectors;
    if r.determinant() < 0.0 {
        r.column_mut(2).neg_mut();
    }
    let scale = eig.eigenvalues.map(|l| l.max(1e-30).sqrt());
    let rot = nalgebra::Rotation3::from_matrix_unchecked(r);
    (Quat::from_rotation_matrix(&rot), scale)
}
