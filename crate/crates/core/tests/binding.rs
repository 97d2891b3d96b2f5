use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use splatsim_core::binding::{apply_binding, build_binding, fit_all};
use splatsim_core::gaussians::{eval_sh_raw, GaussianSplat, ShCoeffs, ShRotation};
use splatsim_core::{Mat3, Quat, Vec3};

fn random_splats(n: usize, object_id: u32, rng: &mut ChaCha8Rng) -> Vec<GaussianSplat> {
    (0..n)
        .map(|_| GaussianSplat {
            center: Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
            rotation: Quat::from_euler_angles(
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(-3.0..3.0),
            ),
            scale: Vec3::from_fn(|_, _| rng.random_range(0.005..0.05)),
            opacity: 0.8,
            sh: ShCoeffs::new(
                2,
                (0..9)
                    .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
                    .collect(),
            )
            .unwrap(),
            object_id,
        })
        .collect()
}

fn random_points(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    (0..n).map(|_| Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5))).collect()
}

fn max_abs(m: &Mat3) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn global_rigid_motion_is_reproduced(
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in -3.1..3.1f64,
        t in prop::array::uniform3(-2.0..2.0f64),
        seed in any::<u64>(),
    ) {
        let axis = Vec3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let rot = Quat::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let r = rot.to_rotation_matrix().into_inner();
        let t = Vec3::from(t);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rest = random_splats(40, 0, &mut rng);
        let driving = random_points(60, &mut rng);
        let current: Vec<Vec3> = driving.iter().map(|p| r * p + t).collect();
        let centers: Vec<Vec3> = rest.iter().map(|s| s.center).collect();
        let binding = build_binding(0, (0..rest.len()).collect(), &centers, &driving, 8, 0.1).unwrap();
        let fits = fit_all(&binding, &driving, &current);
        let mut out = rest.clone();
        apply_binding(&rest, &mut out, &binding, &fits, None, ShRotation::Exact);
        for (a, b) in rest.iter().zip(&out) {
            prop_assert!((b.center - (r * a.center + t)).norm() < 1e-9);
            let want = r * a.covariance() * r.transpose();
            let cov = b.covariance();
            prop_assert!(max_abs(&(cov - want)) < 1e-9 * max_abs(&want).max(1e-12));
            prop_assert!(cov.symmetric_eigenvalues().iter().all(|&e| e > 0.0));
            // View-dependent color moves with the splat.
            for d in [Vec3::x(), Vec3::new(0.3, -0.8, 0.5).normalize()] {
                let before = eval_sh_raw(&a.sh, &d);
                let after = eval_sh_raw(&b.sh, &(r * d));
                for c in 0..3 {
                    prop_assert!((before[c] - after[c]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn objects_only_follow_their_own_particles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut scene = random_splats(20, 0, &mut rng);
    let second: Vec<GaussianSplat> = random_splats(20, 1, &mut rng)
        .into_iter()
        .map(|mut s| {
            s.center += Vec3::new(0.1, 0.0, 0.0);
            s
        })
        .collect();
    scene.extend(second);
    let (idx0, idx1): (Vec<usize>, Vec<usize>) = (0..scene.len()).partition(|&i| scene[i].object_id == 0);
    let drive0 = random_points(30, &mut rng);
    let drive1: Vec<Vec3> = random_points(30, &mut rng);
    let c0: Vec<Vec3> = idx0.iter().map(|&i| scene[i].center).collect();
    let c1: Vec<Vec3> = idx1.iter().map(|&i| scene[i].center).collect();
    let b0 = build_binding(0, idx0.clone(), &c0, &drive0, 6, 0.1).unwrap();
    let b1 = build_binding(1, idx1.clone(), &c1, &drive1, 6, 0.1).unwrap();

    // Only object 1 moves.
    let shift = Vec3::new(0.0, 0.0, 0.25);
    let moved1: Vec<Vec3> = drive1.iter().map(|p| p + shift).collect();
    let mut out = scene.clone();
    apply_binding(&scene, &mut out, &b0, &fit_all(&b0, &drive0, &drive0), None, ShRotation::Exact);
    apply_binding(&scene, &mut out, &b1, &fit_all(&b1, &drive1, &moved1), None, ShRotation::Exact);
    for &i in &idx0 {
        assert_eq!(out[i], scene[i]);
    }
    for &i in &idx1 {
        let err = (out[i].center - scene[i].center - shift).norm();
        assert!(err < 1e-12, "{err}");
        assert_eq!(out[i].sh, scene[i].sh);
    }
}

#[test]
fn stretch_mode_follows_uniform_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rest = random_splats(30, 0, &mut rng);
    let driving = random_points(50, &mut rng);
    let f = Mat3::new(1.4, 0.1, 0.0, 0.0, 0.9, 0.0, 0.05, 0.0, 1.1);
    let current: Vec<Vec3> = driving.iter().map(|p| f * p).collect();
    let centers: Vec<Vec3> = rest.iter().map(|s| s.center).collect();
    let binding = build_binding(0, (0..rest.len()).collect(), &centers, &driving, 8, 0.1).unwrap();
    let fits = fit_all(&binding, &driving, &current);
    let grads = vec![f; driving.len()];
    let mut out = rest.clone();
    apply_binding(&rest, &mut out, &binding, &fits, Some(&grads), ShRotation::Exact);
    for (a, b) in rest.iter().zip(&out) {
        let want = f * a.covariance() * f.transpose();
        assert!(max_abs(&(b.covariance() - want)) < 1e-9 * max_abs(&want), "{}", b.covariance() - want);
    }
}

#[test]
fn rest_pose_is_untouched() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rest = random_splats(25, 0, &mut rng);
    let driving = random_points(40, &mut rng);
    let centers: Vec<Vec3> = rest.iter().map(|s| s.center).collect();
    let binding = build_binding(0, (0..rest.len()).collect(), &centers, &driving, 8, 0.1).unwrap();
    let fits = fit_all(&binding, &driving, &driving);
    let grads = vec![Mat3::identity(); driving.len()];
    let mut out = rest.clone();
    apply_binding(&rest, &mut out, &binding, &fits, Some(&grads), ShRotation::Exact);
    assert_eq!(out, rest);
}
