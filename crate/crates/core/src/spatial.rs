//! Uniform-grid spatial hash used for nearest-neighbor and radius queries.

use std::collections::HashMap;

use crate::math::Vec3;

type CellKey = [i64; 3];

#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    cells: HashMap<CellKey, Vec<u32>>,
    points: Vec<Vec3>,
    lo: CellKey,
    hi: CellKey,
}

impl SpatialHash {
    /// Empty hash with the given cell edge length.
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        SpatialHash { cell, cells: HashMap::new(), points: Vec::new(), lo: [i64::MAX; 3], hi: [i64::MIN; 3] }
    }

    /// Build over a static point set with a cell size tuned for `k`-nearest queries.
    pub fn for_knn(points: &[Vec3], k: usize) -> Self {
        let cell = knn_cell_size(points, k);
        let mut hash = SpatialHash::new(cell);
        for p in points {
            hash.insert(*p);
        }
        hash
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> Vec3 {
        self.points[index]
    }

    fn key(&self, p: &Vec3) -> CellKey {
        [(p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64, (p.z / self.cell).floor() as i64]
    }

    /// Insert a point; returns its index (insertion order).
    pub fn insert(&mut self, p: Vec3) -> usize {
        let index = self.points.len();
        let key = self.key(&p);
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(key[a]);
            self.hi[a] = self.hi[a].max(key[a]);
        }
        self.cells.entry(key).or_default().push(index as u32);
        self.points.push(p);
        index
    }

    /// Visit every stored point whose distance to `p` is at most `radius`.
    pub fn for_each_within(&self, p: &Vec3, radius: f64, mut visit: impl FnMut(usize, f64)) {
        let r2 = radius * radius;
        let lo = self.key(&(p - Vec3::repeat(radius)));
        let hi = self.key(&(p + Vec3::repeat(radius)));
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    if let Some(bucket) = self.cells.get(&[i, j, k]) {
                        for &idx in bucket {
                            let d2 = (self.points[idx as usize] - p).norm_squared();
                            if d2 <= r2 {
                                visit(idx as usize, d2);
                            }
                        }
                    }
                }
            }
        }
    }

    /// The `k` nearest stored points to `p` as `(index, squared distance)`,
    /// ordered by distance with ties broken by index.
    pub fn knn(&self, p: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut found: Vec<(usize, f64)> = Vec::new();
        if k == 0 || self.points.is_empty() {
            return found;
        }
        let center = self.key(p);
        let max_ring =
            (0..3).map(|a| (center[a] - self.lo[a]).abs().max((self.hi[a] - center[a]).abs())).max().unwrap_or(0);
        let mut ring = 0i64;
        loop {
            self.visit_ring(center, ring, |idx| {
                found.push((idx, (self.points[idx] - p).norm_squared()));
            });
            if found.len() >= k {
                found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                found.truncate(k);
                // Any point in a farther ring is at least `ring * cell` away.
                let bound = ring as f64 * self.cell;
                if found[k - 1].1 <= bound * bound {
                    return found;
                }
            }
            if ring >= max_ring {
                break;
            }
            ring += 1;
        }
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        found.truncate(k);
        found
    }

    fn visit_ring(&self, c: CellKey, ring: i64, mut visit: impl FnMut(usize)) {
        let mut visit_cell = |key: CellKey| {
            if let Some(bucket) = self.cells.get(&key) {
                for &idx in bucket {
                    visit(idx as usize);
                }
            }
        };
        if ring == 0 {
            visit_cell(c);
            return;
        }
        for i in -ring..=ring {
            for j in -ring..=ring {
                if i.abs() == ring || j.abs() == ring {
                    for k in -ring..=ring {
                        visit_cell([c[0] + i, c[1] + j, c[2] + k]);
                    }
                } else {
                    visit_cell([c[0] + i, c[1] + j, c[2] - ring]);
                    visit_cell([c[0] + i, c[1] + j, c[2] + ring]);
                }
            }
        }
    }
}

fn knn_cell_size(points: &[Vec3], k: usize) -> f64 {
    if points.len() < 2 {
        return 1.0;
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let ext = hi - lo;
    let max_side = ext.max();
    if max_side <= 0.0 {
        return 1.0;
    }
    // Flat or thin clouds: treat missing extents as a fraction of the largest.
    let floor = max_side * 1e-3;
    let volume = ext.x.max(floor) * ext.y.max(floor) * ext.z.max(floor);
    let target = (k.max(1) as f64).min(points.len() as f64);
    let cell = (volume * target / points.len() as f64).cbrt();
    cell.clamp(max_side / 256.0, max_side)
}
