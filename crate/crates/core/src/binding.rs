//! Carry driving-particle motion onto Gaussians: every splat follows the
//! weighted best-fit rigid motion of its nearest same-object particles.

use nalgebra::Rotation3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussians::{decompose_covariance, rotate_sh, GaussianSplat, ShRotation};
use crate::math::{Mat3, Quat, Vec3};
use crate::spatial::SpatialHash;

/// Neighbor sets and weights for the splats of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectBinding {
    pub object_id: u32,
    /// Scene indices of the bound splats.
    pub splats: Vec<usize>,
    /// Per bound splat: indices into the object's driving particles.
    pub neighbors: Vec<Vec<u32>>,
    /// Per bound splat: weights summing to one, aligned with `neighbors`.
    pub weights: Vec<Vec<f64>>,
}

/// Bind `centers` (the rest centers of `splats`) to their `k` nearest driving
/// particles with Gaussian weights of bandwidth `h`.
pub fn build_binding(
    object_id: u32,
    splats: Vec<usize>,
    centers: &[Vec3],
    driving_rest: &[Vec3],
    k: usize,
    h: f64,
) -> Result<ObjectBinding> {
    if driving_rest.is_empty() {
        return Err(Error::Binding { object_id, message: "object has no driving particles".into() });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Binding { object_id, message: format!("bandwidth {h} must be positive") });
    }
    if k == 0 {
        return Err(Error::Binding { object_id, message: "neighbor count must be >= 1".into() });
    }
    assert_eq!(splats.len(), centers.len());
    let k = k.min(driving_rest.len());
    let hash = SpatialHash::for_knn(driving_rest, k);
    let inv = 1.0 / (2.0 * h * h);
    let (neighbors, weights): (Vec<Vec<u32>>, Vec<Vec<f64>>) = centers
        .par_iter()
        .map(|c| {
            let nn = hash.knn(c, k);
            let d_min = nn[0].1;
            // Shift by the nearest distance so distant splats do not underflow.
            let raw: Vec<f64> = nn.iter().map(|(_, d2)| (-(d2 - d_min) * inv).exp()).collect();
            let total: f64 = raw.iter().sum();
            (nn.iter().map(|(i, _)| *i as u32).collect(), raw.iter().map(|w| w / total).collect())
        })
        .unzip();
    Ok(ObjectBinding { object_id, splats, neighbors, weights })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidFit {
    pub fn identity() -> Self {
        RigidFit { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == Mat3::identity() && self.translation == Vec3::zeros()
    }
}

/// Weighted Kabsch fit taking rest neighbor positions onto current ones.
pub fn fit_rigid(neighbors: &[u32], weights: &[f64], rest: &[Vec3], current: &[Vec3]) -> RigidFit {
    if neighbors.iter().all(|&i| rest[i as usize] == current[i as usize]) {
        return RigidFit::identity();
    }
    let mut p_bar = Vec3::zeros();
    let mut q_bar = Vec3::zeros();
    for (&i, &w) in neighbors.iter().zip(weights) {
        p_bar += rest[i as usize] * w;
        q_bar += current[i as usize] * w;
    }
    let mut h = Mat3::zeros();
    for (&i, &w) in neighbors.iter().zip(weights) {
        h += (rest[i as usize] - p_bar) * (current[i as usize] - q_bar).transpose() * w;
    }
    let svd = h.svd(true, true);
    let s = svd.singular_values;
    let (smax, smid) = {
        let mut v = [s[0], s[1], s[2]];
        v.sort_by(|a, b| b.total_cmp(a));
        (v[0], v[1])
    };
    if !(smid > 1e-9 * smax) {
        return RigidFit { rotation: Mat3::identity(), translation: q_bar - p_bar };
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let mut r = v * u.transpose();
    if r.determinant() < 0.0 {
        let mut v = v;
        let smallest = (0..3).min_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap_or(2);
        v.column_mut(smallest).neg_mut();
        r = v * u.transpose();
    }
    // Snap round-off rotations so pure translations keep SH untouched.
    if (r - Mat3::identity()).amax() <= 1e-9 {
        r = Mat3::identity();
    }
    RigidFit { rotation: r, translation: q_bar - r * p_bar }
}

/// Fits for every bound splat of an object.
pub fn fit_all(binding: &ObjectBinding, rest: &[Vec3], current: &[Vec3]) -> Vec<RigidFit> {
    binding.neighbors.par_iter().zip(binding.weights.par_iter()).map(|(n, w)| fit_rigid(n, w, rest, current)).collect()
}

/// Move one splat by a fit. An exact identity fit returns the splat unchanged.
pub fn apply_fit(splat: &GaussianSplat, fit: &RigidFit, sh_mode: ShRotation) -> GaussianSplat {
    if fit.is_identity() {
        return splat.clone();
    }
    let q = Quat::from_rotation_matrix(&Rotation3::from_matrix_unchecked(fit.rotation));
    GaussianSplat {
        center: fit.rotation * splat.center + fit.translation,
        rotation: q * splat.rotation,
        scale: splat.scale,
        opacity: splat.opacity,
        sh: if fit.rotation == Mat3::identity() { splat.sh.clone() } else { rotate_sh(&splat.sh, &q, sh_mode) },
        object_id: splat.object_id,
    }
}

/// Deform every bound splat of `binding`: `out[i]` is rebuilt from `rest[i]`.
///
/// With `deformation` (per driving particle F), covariances follow the
/// weighted mean gradient instead of the rigid rotation.
pub fn apply_binding(
    rest: &[GaussianSplat],
    out: &mut [GaussianSplat],
    binding: &ObjectBinding,
    fits: &[RigidFit],
    deformation: Option<&[Mat3]>,
    sh_mode: ShRotation,
) {
    let moved: Vec<GaussianSplat> = binding
        .splats
        .par_iter()
        .enumerate()
        .map(|(b, &s)| {
            let mut g = apply_fit(&rest[s], &fits[b], sh_mode);
            if let Some(fs) =
                deformation.filter(|fs| binding.neighbors[b].iter().any(|&i| fs[i as usize] != Mat3::identity()))
            {
                let mut f_bar = Mat3::zeros();
                for (&i, &w) in binding.neighbors[b].iter().zip(&binding.weights[b]) {
                    f_bar += fs[i as usize] * w;
                }
                let cov = f_bar * rest[s].covariance() * f_bar.transpose();
                let (rot, scale) = decompose_covariance(&((cov + cov.transpose()) * 0.5));
                g.rotation = rot;
                g.scale = scale;
            }
            g
        })
        .collect();
    for (&s, g) in binding.splats.iter().zip(moved) {
        out[s] = g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussians::ShCoeffs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0))).collect()
    }

    #[test]
    fn single_coincident_neighbor_gets_all_weight() {
        let d = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(1.0, 0.0, 0.0)];
        let b = build_binding(0, vec![0], &[d[0]], &d, 1, 0.1).unwrap();
        assert_eq!((b.neighbors[0].clone(), b.weights[0].clone()), (vec![0], vec![1.0]));
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let d = vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        let b = build_binding(0, vec![0], &[Vec3::zeros()], &d, 2, 0.5).unwrap();
        assert_eq!(b.weights[0], vec![0.5, 0.5]);
    }

    #[test]
    fn no_driving_particles_names_object() {
        let err = build_binding(7, vec![0], &[Vec3::zeros()], &[], 4, 1.0).unwrap_err();
        assert!(err.to_string().contains("object 7"));
    }

    #[test]
    fn shuffled_storage_gives_same_binding() {
        let d = cloud(50, 3);
        let centers = cloud(20, 4);
        let perm: Vec<usize> = (0..50).rev().collect();
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| d[i]).collect();
        let a = build_binding(0, (0..20).collect(), &centers, &d, 6, 0.3).unwrap();
        let b = build_binding(0, (0..20).collect(), &centers, &shuffled, 6, 0.3).unwrap();
        for s in 0..20 {
            let mut wa: Vec<(u32, f64)> = a.neighbors[s].iter().copied().zip(a.weights[s].iter().copied()).collect();
            let mut wb: Vec<(u32, f64)> =
                b.neighbors[s].iter().map(|&i| perm[i as usize] as u32).zip(b.weights[s].iter().copied()).collect();
            wa.sort_by_key(|x| x.0);
            wb.sort_by_key(|x| x.0);
            for (x, y) in wa.iter().zip(&wb) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fit_examples() {
        let rest = cloud(8, 5);
        let idx: Vec<u32> = (0..8).collect();
        let w = vec![0.125; 8];
        assert!(fit_rigid(&idx, &w, &rest, &rest).is_identity());
        let r = Rotation3::from_axis_angle(&Vec3::z_axis(), 37f64.to_radians()).into_inner();
        let cur: Vec<Vec3> = rest.iter().map(|p| r * p).collect();
        let fit = fit_rigid(&idx, &w, &rest, &cur);
        assert!((fit.rotation - r).norm() < 1e-9);
        let shifted: Vec<Vec3> = rest.iter().map(|p| p + Vec3::new(1.0, 2.0, 3.0)).collect();
        let fit = fit_rigid(&idx, &w, &rest, &shifted);
        assert!((fit.rotation - Mat3::identity()).norm() < 1e-12);
        assert!((fit.translation - Vec3::new(1.0, 2.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn collinear_neighbors_fall_back_to_translation() {
        let rest: Vec<Vec3> = (0..4).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let cur: Vec<Vec3> = rest.iter().map(|p| p + Vec3::new(0.0, 1.0, 0.0)).collect();
        let cur_rot: Vec<Vec3> = rest.iter().map(|p| Vec3::new(0.0, p.x, 0.0)).collect();
        let idx: Vec<u32> = (0..4).collect();
        let fit = fit_rigid(&idx, &[0.25; 4], &rest, &cur);
        assert_eq!(fit.rotation, Mat3::identity());
        let fit = fit_rigid(&idx, &[0.25; 4], &rest, &cur_rot);
        assert!((fit.rotation.transpose() * fit.rotation - Mat3::identity()).norm() < 1e-12);
    }

    #[test]
    fn identity_fit_is_bit_exact() {
        let s = GaussianSplat {
            center: Vec3::new(0.1, 0.2, 0.3),
            rotation: Quat::from_euler_angles(0.1, 0.2, 0.3),
            scale: Vec3::new(0.1, 0.2, 0.3),
            opacity: 0.7,
            sh: ShCoeffs::new(1, vec![[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9], [1.0, 1.1, 1.2]]).unwrap(),
            object_id: 2,
        };
        assert_eq!(apply_fit(&s, &RigidFit::identity(), ShRotation::Exact), s);
        let t = RigidFit { rotation: Mat3::identity(), translation: Vec3::new(1.0, 0.0, 0.0) };
        let moved = apply_fit(&s, &t, ShRotation::Exact);
        assert_eq!(moved.sh, s.sh);
        assert_eq!(moved.rotation, s.rotation);
    }
}
