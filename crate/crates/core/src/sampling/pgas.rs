use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::curvature::{local_curvature, surface_variation};
use super::{CurvatureMode, PgasParams};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::spatial::SpatialHash;

/// Accepted driving particles, ordered by source index.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingSample {
    pub indices: Vec<usize>,
    pub positions: Vec<Vec3>,
    /// Adapted radius r̂ at each accepted point.
    pub radii: Vec<f64>,
}

impl DrivingSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn mean_radius(&self) -> f64 {
        if self.radii.is_empty() {
            return 0.0;
        }
        self.radii.iter().sum::<f64>() / self.radii.len() as f64
    }
}

/// K̂ = clamp(K · gain, V_min, V_max).
pub fn clamp_curvature(k_raw: f64, params: &PgasParams) -> f64 {
    (k_raw * params.gain()).clamp(params.v_min, params.v_max)
}

/// r̂ = min(r, k · sqrt((E / E_ref) / K̂) · r).
pub fn radius_from_clamped(e: f64, k_hat: f64, params: &PgasParams) -> f64 {
    let r = params.base_radius;
    r.min(params.k * ((e / params.e_ref) / k_hat).sqrt() * r)
}

pub fn adapt_radius(e: f64, k_raw: f64, params: &PgasParams) -> f64 {
    radius_from_clamped(e, clamp_curvature(k_raw, params), params)
}

/// Seeded dart-throwing over `points`: a candidate is kept when its distance
/// to every kept point exceeds the larger of the two adapted radii.
pub fn pgas_sample(points: &[Vec3], e_field: &[f64], params: &PgasParams) -> Result<DrivingSample> {
    params.validate()?;
    if points.is_empty() {
        return Err(Error::validation("points", "cannot sample an empty point set"));
    }
    if e_field.len() != points.len() {
        return Err(Error::validation("E_field", format!("{} values for {} points", e_field.len(), points.len())));
    }
    if let Some(i) = e_field.iter().position(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::validation("E_field", format!("entry {i} is not a positive finite modulus")));
    }
    let curvature = curvature_for_sampling(points, params);
    let radii: Vec<f64> = e_field.iter().zip(&curvature).map(|(e, k)| adapt_radius(*e, *k, params)).collect();
    Ok(dart_throw(points, &radii, params.rng_seed))
}

fn curvature_for_sampling(points: &[Vec3], params: &PgasParams) -> Vec<f64> {
    let n = points.len();
    match params.curvature_mode {
        CurvatureMode::Global if n >= 4 => vec![surface_variation(points.iter().copied()); n],
        CurvatureMode::Local if n > params.local_neighbors => local_curvature(points, params.local_neighbors),
        CurvatureMode::Local if n >= 5 => {
            log::warn!("only {n} points; local curvature uses {} neighbours", n - 1);
            local_curvature(points, n - 1)
        }
        _ => vec![0.0; n],
    }
}

/// Dart throwing with given per-point radii.
pub(crate) fn dart_throw(points: &[Vec3], radii: &[f64], seed: u64) -> DrivingSample {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let max_r = radii.iter().copied().fold(0.0, f64::max);
    let mut hash = SpatialHash::new(max_r.max(f64::MIN_POSITIVE.sqrt()));
    let mut accepted: Vec<usize> = Vec::new();
    for &c in &order {
        let p = points[c];
        let mut ok = true;
        hash.for_each_within(&p, max_r, |slot, d2| {
            let other = accepted[slot];
            let bound = radii[c].max(radii[other]);
            if d2 <= bound * bound {
                ok = false;
            }
        });
        if ok {
            hash.insert(p);
            accepted.push(c);
        }
    }
    accepted.sort_unstable();
    DrivingSample {
        positions: accepted.iter().map(|&i| points[i]).collect(),
        radii: accepted.iter().map(|&i| radii[i]).collect(),
        indices: accepted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params() -> PgasParams {
        PgasParams { base_radius: 1.0, ..Default::default() }
    }

    #[test]
    fn radius_examples() {
        let p = params();
        for k_hat in [1.0, 2.5, 10.0] {
            assert_eq!(radius_from_clamped(1e6, k_hat, &p), 1.0);
        }
        assert!((radius_from_clamped(1e3, 1.0, &p) - 0.1).abs() < 1e-12);
        assert!((radius_from_clamped(1e3, 10.0, &p) - 0.001f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn curvature_clamp() {
        let p = params();
        assert_eq!(clamp_curvature(0.0, &p), 1.0);
        assert_eq!(clamp_curvature(1.0 / 3.0, &p), 10.0);
        assert!((clamp_curvature(0.1, &p) - 3.0).abs() < 1e-12);
        let faithful = PgasParams { faithful: true, ..p };
        assert_eq!(clamp_curvature(1.0 / 3.0, &faithful), 1.0);
    }

    #[test]
    fn sparse_grid_is_fully_accepted() {
        let pts: Vec<Vec3> =
            (0..1000).map(|i| Vec3::new((i % 10) as f64, ((i / 10) % 10) as f64, (i / 100) as f64) * 1.5).collect();
        let s = pgas_sample(&pts, &vec![1e7; pts.len()], &params()).unwrap();
        assert_eq!(s.len(), pts.len());
    }

    #[test]
    fn coincident_points_keep_one() {
        let pts = vec![Vec3::new(0.1, 0.2, 0.3); 2];
        let s = pgas_sample(&pts, &[1e6, 1e6], &params()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn single_point_is_the_sample() {
        let s = pgas_sample(&[Vec3::zeros()], &[5.0], &params()).unwrap();
        assert_eq!(s.indices, vec![0]);
    }

    #[test]
    fn rejects_bad_moduli() {
        assert!(pgas_sample(&[Vec3::zeros()], &[0.0], &params()).is_err());
        assert!(pgas_sample(&[Vec3::zeros()], &[], &params()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spacing_and_coverage(seed in 0u64..1000, n in 2usize..300, soft in 1e2f64..1e7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..n).map(|_| Vec3::from_fn(|_, _| rand::Rng::random_range(&mut rng, 0.0..4.0))).collect();
            let e: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { soft } else { 1e6 }).collect();
            let p = PgasParams { rng_seed: seed, ..params() };
            let s = pgas_sample(&pts, &e, &p).unwrap();
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    let d = (s.positions[a] - s.positions[b]).norm();
                    prop_assert!(d > s.radii[a].max(s.radii[b]));
                }
            }
            let curv = curvature_for_sampling(&pts, &p);
            for (i, q) in pts.iter().enumerate() {
                let ri = adapt_radius(e[i], curv[i], &p);
                let covered = s.positions.iter().zip(&s.radii).any(|(x, r)| (x - q).norm() <= ri.max(*r));
                prop_assert!(covered);
            }
            prop_assert_eq!(&s, &pgas_sample(&pts, &e, &p).unwrap());
        }
    }
}
