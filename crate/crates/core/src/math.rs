//! Small linear-algebra helpers shared across modules.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Polar decomposition F = R S, returning the rotation factor R.
///
/// Scaled Newton iteration; exact for rotations (including the identity).
/// Falls back to an SVD when F is singular or the iteration stalls.
pub fn polar_rotation(f: &Mat3) -> Mat3 {
    let mut x = *f;
    for _ in 0..32 {
        let Some(inv) = x.try_inverse() else {
            return polar_rotation_svd(f);
        };
        let gamma = (inv.norm() / x.norm()).sqrt();
        let next = (x * gamma + inv.transpose() / gamma) * 0.5;
        let delta = (next - x).norm();
        x = next;
        if delta <= 1e-14 * x.norm() {
            return x;
        }
    }
    polar_rotation_svd(f)
}

fn polar_rotation_svd(f: &Mat3) -> Mat3 {
    let svd = f.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        let smallest = argmin(&svd.singular_values);
        u.column_mut(smallest).neg_mut();
        r = u * v_t;
    }
    r
}

pub(crate) fn argmin(values: &Vector3<f64>) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if values[i] < values[best] {
            best = i;
        }
    }
    best
}

/// Eigenvalues of a symmetric 3x3 matrix, sorted descending.
pub fn sorted_symmetric_eigenvalues(m: &Mat3) -> [f64; 3] {
    let eig = m.symmetric_eigenvalues();
    let mut vals = [eig[0], eig[1], eig[2]];
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

pub fn to_array(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub fn from_array(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}
