//! Voxel occupancy with morphological closing and interior filling.
//!
//! Used to estimate the volume an object occupies from a (possibly hollow,
//! possibly sparse) point set, and to mark grid cells covered by rigid
//! colliders.

use crate::math::Vec3;
use crate::spatial::SpatialHash;

#[derive(Debug, Clone)]
pub struct Occupancy {
    /// Voxel edge length.
    pub h: f64,
    /// Global voxel index of local `(0, 0, 0)`.
    lo: [i64; 3],
    dims: [usize; 3],
    filled: Vec<bool>,
}

impl Occupancy {
    /// Voxelize `points` on the lattice `origin + h * idx`, close gaps up to
    /// `closing` voxels wide, and fill enclosed cavities.
    pub fn closed(points: &[Vec3], origin: Vec3, h: f64, closing: usize) -> Self {
        assert!(h > 0.0);
        if points.is_empty() {
            return Occupancy { h, lo: [0; 3], dims: [0; 3], filled: vec![] };
        }
        let keys: Vec<[i64; 3]> = points
            .iter()
            .map(|p| {
                let q = (p - origin) / h;
                [q.x.floor() as i64, q.y.floor() as i64, q.z.floor() as i64]
            })
            .collect();
        let mut kmin = keys[0];
        let mut kmax = keys[0];
        for k in &keys {
            for a in 0..3 {
                kmin[a] = kmin[a].min(k[a]);
                kmax[a] = kmax[a].max(k[a]);
            }
        }
        let pad = closing as i64 + 1;
        let lo = [kmin[0] - pad, kmin[1] - pad, kmin[2] - pad];
        let dims = [
            (kmax[0] - kmin[0] + 1 + 2 * pad) as usize,
            (kmax[1] - kmin[1] + 1 + 2 * pad) as usize,
            (kmax[2] - kmin[2] + 1 + 2 * pad) as usize,
        ];
        let mut grid = vec![false; dims[0] * dims[1] * dims[2]];
        let at = |i: usize, j: usize, k: usize| (i * dims[1] + j) * dims[2] + k;
        for key in &keys {
            let i = (key[0] - lo[0]) as usize;
            let j = (key[1] - lo[1]) as usize;
            let k = (key[2] - lo[2]) as usize;
            grid[at(i, j, k)] = true;
        }

        let dilated = morph(&grid, dims, closing, true);
        // Exterior = empty voxels reachable from the padded corner.
        let mut exterior = vec![false; grid.len()];
        let mut stack = vec![(0usize, 0usize, 0usize)];
        exterior[0] = true;
        while let Some((i, j, k)) = stack.pop() {
            let mut push = |i: usize, j: usize, k: usize, stack: &mut Vec<_>| {
                let idx = at(i, j, k);
                if !dilated[idx] && !exterior[idx] {
                    exterior[idx] = true;
                    stack.push((i, j, k));
                }
            };
            if i > 0 {
                push(i - 1, j, k, &mut stack);
            }
            if i + 1 < dims[0] {
                push(i + 1, j, k, &mut stack);
            }
            if j > 0 {
                push(i, j - 1, k, &mut stack);
            }
            if j + 1 < dims[1] {
                push(i, j + 1, k, &mut stack);
            }
            if k > 0 {
                push(i, j, k - 1, &mut stack);
            }
            if k + 1 < dims[2] {
                push(i, j, k + 1, &mut stack);
            }
        }
        let solid: Vec<bool> = exterior.iter().map(|e| !e).collect();
        let filled = morph(&solid, dims, closing, false);
        Occupancy { h, lo, dims, filled }
    }

    pub fn count(&self) -> usize {
        self.filled.iter().filter(|f| **f).count()
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.h.powi(3)
    }

    /// Global indices of filled voxels.
    pub fn voxels(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        let [_, dy, dz] = self.dims;
        self.filled.iter().enumerate().filter(|(_, f)| **f).map(move |(idx, _)| {
            let k = idx % dz;
            let j = (idx / dz) % dy;
            let i = idx / (dy * dz);
            [self.lo[0] + i as i64, self.lo[1] + j as i64, self.lo[2] + k as i64]
        })
    }
}

/// Separable cube dilation (`grow`) or erosion with the given radius.
fn morph(src: &[bool], dims: [usize; 3], radius: usize, grow: bool) -> Vec<bool> {
    if radius == 0 {
        return src.to_vec();
    }
    let mut cur = src.to_vec();
    let strides = [dims[1] * dims[2], dims[2], 1];
    for axis in 0..3 {
        let mut next = cur.clone();
        let n = dims[axis];
        for (idx, out) in next.iter_mut().enumerate() {
            let coord = (idx / strides[axis]) % n;
            let mut acc = !grow;
            for d in -(radius as i64)..=(radius as i64) {
                let c = coord as i64 + d;
                // Out-of-range counts as empty for both operations.
                let v =
                    if c < 0 || c >= n as i64 { false } else { cur[(idx as i64 + d * strides[axis] as i64) as usize] };
                if grow {
                    acc |= v;
                } else {
                    acc &= v;
                }
            }
            *out = acc;
        }
        cur = next;
    }
    cur
}

/// Median distance from a point to its nearest neighbor, over at most ~2000
/// evenly strided points. `None` for fewer than two distinct points.
pub fn median_spacing(points: &[Vec3]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let hash = SpatialHash::for_knn(points, 8);
    let stride = (points.len() / 2000).max(1);
    let mut dists: Vec<f64> = points
        .iter()
        .step_by(stride)
        .filter_map(|p| hash.knn(p, 8).into_iter().map(|(_, d2)| d2).find(|d2| *d2 > 0.0).map(f64::sqrt))
        .collect();
    if dists.is_empty() {
        return None;
    }
    dists.sort_by(f64::total_cmp);
    Some(dists[dists.len() / 2])
}
