use nalgebra::{Isometry3, Matrix2, Matrix2x3, Rotation3, Translation3};

use crate::error::{Error, Result};
use crate::math::{Mat3, Quat, Vec3};

/// Added to each diagonal entry of a projected covariance, in px².
pub const COVARIANCE_FLOOR: f64 = 0.3;
/// Camera-space depth below which splats are culled.
pub const NEAR_PLANE: f64 = 0.01;

/// Pinhole camera. Camera space is x right, y down, z forward; pixel
/// coordinates are continuous with pixel `(i, j)` centred at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub world_to_camera: Isometry3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectedCovariance {
    Visible(Matrix2<f64>),
    Culled,
}

impl CameraSpec {
    /// Camera at `eye` looking at `target`, with vertical field of view in degrees.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_y_deg: f64, width: u32, height: u32) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() <= 0.0 {
            return Err(Error::validation("camera", "eye and target coincide"));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::validation("camera.up", "up vector is parallel to the view direction"));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rot = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let rotation = Rotation3::from_matrix_unchecked(rot);
        let t = -(rot * eye);
        let fy = 0.5 * height as f64 / (0.5 * fov_y_deg.to_radians()).tan();
        let cam = CameraSpec {
            fx: fy,
            fy,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            world_to_camera: Isometry3::from_parts(Translation3::from(t), Quat::from_rotation_matrix(&rotation)),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::validation("camera.intrinsics", "focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("camera.size", "image size must be nonzero"));
        }
        let r = self.rotation();
        if (r.transpose() * r - Mat3::identity()).norm() > 1e-6 {
            return Err(Error::validation("camera.world_to_camera", "rotation is not orthonormal"));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Mat3 {
        self.world_to_camera.rotation.to_rotation_matrix().into_inner()
    }

    /// Camera centre in world coordinates.
    pub fn position(&self) -> Vec3 {
        self.world_to_camera.inverse().translation.vector
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.world_to_camera.transform_point(&(*p).into()).coords
    }

    /// Pixel coordinates of a camera-space point.
    pub fn project(&self, pc: &Vec3) -> [f64; 2] {
        [self.fx * pc.x / pc.z + self.cx, self.fy * pc.y / pc.z + self.cy]
    }

    /// Σ′ = J W Σ Wᵀ Jᵀ with J the perspective Jacobian at `mean`, plus the floor.
    pub fn project_covariance(&self, cov: &Mat3, mean: &Vec3) -> ProjectedCovariance {
        let pc = self.to_camera(mean);
        if pc.z <= NEAR_PLANE {
            return ProjectedCovariance::Culled;
        }
        let z = pc.z;
        let j =
            Matrix2x3::new(self.fx / z, 0.0, -self.fx * pc.x / (z * z), 0.0, self.fy / z, -self.fy * pc.y / (z * z));
        let t = j * self.rotation();
        let mut out = t * cov * t.transpose();
        out = (out + out.transpose()) * 0.5;
        out[(0, 0)] += COVARIANCE_FLOOR;
        out[(1, 1)] += COVARIANCE_FLOOR;
        ProjectedCovariance::Visible(out)
    }
}
