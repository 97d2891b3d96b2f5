use rayon::prelude::*;

use super::forces::apply_forces;
use super::{MpmGrid, SimState};
use crate::error::SimError;
use crate::math::{polar_rotation, Mat3, Vec3};
use crate::scene_io::Boundary;

/// Width in cells of the x-slabs scattered in parallel. A particle stencil
/// spans three cells, so particles starting at slab offsets 0..=5 stay
/// inside their slab; the rest are scattered in a second pass over slabs
/// shifted by half a width.
const SLAB: usize = 8;

/// Per-particle quantities shared by the scatter and gather passes.
struct Prep {
    base: [usize; 3],
    /// Position relative to `base`, in cells; each component in [0.5, 1.5).
    fx: Vec3,
    w: [[f64; 3]; 3],
    mass: f64,
    /// Momentum at the base node: `m v - A fx` with `A` the affine matrix in cell units.
    b: Vec3,
    a: Mat3,
}

fn weights(fx: f64) -> [f64; 3] {
    [0.5 * (1.5 - fx).powi(2), 0.75 - (fx - 1.0).powi(2), 0.5 * (fx - 0.5).powi(2)]
}

/// Fixed-corotated Kirchhoff stress.
pub(super) fn kirchhoff(f: &Mat3, mu: f64, lambda: f64) -> Mat3 {
    let j = f.determinant();
    let r = polar_rotation(f);
    (f - r) * f.transpose() * (2.0 * mu) + Mat3::identity() * (lambda * j * (j - 1.0))
}

pub(super) fn substep(state: &mut SimState) -> Result<(), SimError> {
    let dt = state.params.dt;
    cfl_check(state)?;
    let prep = prepare(state);
    let region = active_region(&prep, state.grid.n);
    if let Some(stale) = state.grid.active.replace(region) {
        clear(&mut state.grid, stale);
    }
    clear(&mut state.grid, region);
    scatter(&mut state.grid, &prep);
    let t0 = state.substeps as f64 * dt;
    update_grid(state, region);
    apply_forces(state, t0);
    apply_boundaries(state, region);
    gather(state, &prep)?;
    damp(state);
    state.substeps += 1;
    state.time = state.substeps as f64 * dt;
    Ok(())
}

fn cfl_check(state: &SimState) -> Result<(), SimError> {
    let dt = state.params.dt;
    let dx = state.grid.dx;
    let bad = state.particles.par_iter().enumerate().filter(|(_, p)| !(p.v.norm() * dt < dx)).map(|(i, _)| i).min();
    match bad {
        Some(index) => Err(SimError::Cfl { index, travel: state.particles[index].v.norm() * dt, dx }),
        None => Ok(()),
    }
}

fn prepare(state: &SimState) -> Vec<Prep> {
    let grid = &state.grid;
    let dx = grid.dx;
    let origin = grid.origin;
    let dt = state.params.dt;
    let stress_scale = 4.0 * dt / (dx * dx);
    state
        .particles
        .par_iter()
        .map(|p| {
            let q = (p.x - origin) / dx;
            let base = [(q.x - 0.5).floor() as usize, (q.y - 0.5).floor() as usize, (q.z - 0.5).floor() as usize];
            let fx = q - Vec3::new(base[0] as f64, base[1] as f64, base[2] as f64);
            let stress = if p.f == Mat3::identity() { Mat3::zeros() } else { kirchhoff(&p.f, p.mu, p.lambda) };
            let a = (p.c * p.mass - stress * (stress_scale * p.volume0)) * dx;
            Prep {
                base,
                fx,
                w: [weights(fx.x), weights(fx.y), weights(fx.z)],
                mass: p.mass,
                b: p.v * p.mass - a * fx,
                a,
            }
        })
        .collect()
}

/// Node index box `[lo, hi]` (inclusive) touched by any particle.
fn active_region(prep: &[Prep], n: usize) -> ([usize; 3], [usize; 3]) {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0; 3];
    for p in prep {
        for a in 0..3 {
            lo[a] = lo[a].min(p.base[a]);
            hi[a] = hi[a].max(p.base[a] + 2);
        }
    }
    for a in 0..3 {
        hi[a] = hi[a].min(n - 1);
    }
    (lo, hi)
}

fn clear(grid: &mut MpmGrid, (lo, hi): ([usize; 3], [usize; 3])) {
    let n = grid.n;
    grid.nodes.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        if i < lo[0] || i > hi[0] {
            return;
        }
        for j in lo[1]..=hi[1] {
            slab[j * n + lo[2]..=j * n + hi[2]].fill([0.0; 4]);
        }
    });
}

fn scatter_one(nodes: &mut [[f64; 4]], x0: usize, n: usize, p: &Prep) {
    let a0 = p.a.column(0).into_owned();
    let a1 = p.a.column(1).into_owned();
    let a2 = p.a.column(2).into_owned();
    for di in 0..3 {
        let ti = p.b + a0 * di as f64;
        let wi = p.w[0][di];
        let row = (p.base[0] + di - x0) * n;
        for dj in 0..3 {
            let tij = ti + a1 * dj as f64;
            let wij = wi * p.w[1][dj];
            let col = (row + p.base[1] + dj) * n + p.base[2];
            for dk in 0..3 {
                let t = tij + a2 * dk as f64;
                let w = wij * p.w[2][dk];
                let node = &mut nodes[col + dk];
                node[0] += w * p.mass;
                node[1] += w * t.x;
                node[2] += w * t.y;
                node[3] += w * t.z;
            }
        }
    }
}

/// Deterministic parallel particle-to-grid transfer: every node receives
/// its contributions in particle-index order regardless of thread count.
fn scatter(grid: &mut MpmGrid, prep: &[Prep]) {
    let n = grid.n;
    let slabs = n.div_ceil(SLAB);
    let mut first: Vec<Vec<u32>> = vec![Vec::new(); slabs];
    let mut second: Vec<Vec<u32>> = vec![Vec::new(); slabs];
    for (i, p) in prep.iter().enumerate() {
        let b = p.base[0];
        if b % SLAB <= SLAB - 3 {
            first[b / SLAB].push(i as u32);
        } else {
            second[b / SLAB].push(i as u32);
        }
    }
    let slab_len = SLAB * n * n;
    grid.nodes.par_chunks_mut(slab_len).zip(first.par_iter()).enumerate().for_each(|(s, (nodes, list))| {
        for &i in list {
            scatter_one(nodes, s * SLAB, n, &prep[i as usize]);
        }
    });
    let half = SLAB / 2;
    let (_, shifted) = grid.nodes.split_at_mut(half * n * n);
    shifted.par_chunks_mut(slab_len).zip(second.par_iter()).enumerate().for_each(|(s, (nodes, list))| {
        for &i in list {
            scatter_one(nodes, half + s * SLAB, n, &prep[i as usize]);
        }
    });
}

/// Momentum → velocity, plus gravity, on the active region.
fn update_grid(state: &mut SimState, (lo, hi): ([usize; 3], [usize; 3])) {
    let n = state.grid.n;
    let g = state.params.gravity * state.params.dt;
    state.grid.nodes.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        if i < lo[0] || i > hi[0] {
            return;
        }
        for j in lo[1]..=hi[1] {
            for node in &mut slab[j * n + lo[2]..=j * n + hi[2]] {
                let m = node[0];
                if m > 0.0 {
                    node[1] = node[1] / m + g.x;
                    node[2] = node[2] / m + g.y;
                    node[3] = node[3] / m + g.z;
                } else {
                    *node = [0.0; 4];
                }
            }
        }
    });
}

fn apply_boundaries(state: &mut SimState, (lo, hi): ([usize; 3], [usize; 3])) {
    let grid = &mut state.grid;
    let n = grid.n;
    let (dx, origin) = (grid.dx, grid.origin);
    let up = state.params.up();
    let ground = state.params.ground_height;
    let slip = state.params.boundary == Boundary::Slip;
    let collider = &grid.collider;
    grid.nodes.par_chunks_mut(n * n).enumerate().for_each(|(i, slab)| {
        if i < lo[0] || i > hi[0] {
            return;
        }
        for j in lo[1]..=hi[1] {
            for k in lo[2]..=hi[2] {
                let node = &mut slab[j * n + k];
                if node[0] <= 0.0 {
                    continue;
                }
                if collider[(i * n + j) * n + k] {
                    node[1..].fill(0.0);
                    continue;
                }
                let idx = [i, j, k];
                for a in 0..3 {
                    if idx[a] < 2 || idx[a] >= n - 2 {
                        if slip {
                            node[1 + a] = 0.0;
                        } else {
                            node[1..].fill(0.0);
                        }
                    }
                }
                if let Some(h) = ground {
                    let x = origin + Vec3::new(i as f64, j as f64, k as f64) * dx;
                    if x.dot(&up) < h {
                        if slip {
                            let v = Vec3::new(node[1], node[2], node[3]);
                            let v = v - up * v.dot(&up);
                            node[1..].copy_from_slice(v.as_slice());
                        } else {
                            node[1..].fill(0.0);
                        }
                    }
                }
            }
        }
    });
}

fn gather(state: &mut SimState, prep: &[Prep]) -> Result<(), SimError> {
    let grid = &state.grid;
    let n = grid.n;
    let dx = grid.dx;
    let dt = state.params.dt;
    let nodes = &grid.nodes;
    let first_error = state
        .particles
        .par_iter_mut()
        .zip(prep.par_iter())
        .enumerate()
        .filter_map(|(index, (p, pr))| {
            let mut v = Vec3::zeros();
            // Σ w v_i offᵀ, with off the integer node offset.
            let mut b = Mat3::zeros();
            for di in 0..3 {
                for dj in 0..3 {
                    let wij = pr.w[0][di] * pr.w[1][dj];
                    let col = ((pr.base[0] + di) * n + pr.base[1] + dj) * n + pr.base[2];
                    for dk in 0..3 {
                        let w = wij * pr.w[2][dk];
                        let node = &nodes[col + dk];
                        let vi = Vec3::new(node[1], node[2], node[3]) * w;
                        v += vi;
                        b.column_mut(0).axpy(di as f64, &vi, 1.0);
                        b.column_mut(1).axpy(dj as f64, &vi, 1.0);
                        b.column_mut(2).axpy(dk as f64, &vi, 1.0);
                    }
                }
            }
            let c = (b - v * pr.fx.transpose()) * (4.0 / dx);
            p.v = v;
            p.c = c;
            p.x += v * dt;
            p.f = (Mat3::identity() + c * dt) * p.f;
            let det = p.f.determinant();
            if !(det > 0.0) {
                return Some((index, SimError::Inverted { index, det }));
            }
            if !grid.contains(&p.x) {
                return Some((index, SimError::OutOfDomain { index, position: [p.x.x, p.x.y, p.x.z] }));
            }
            None
        })
        .min_by_key(|(i, _)| *i);
    match first_error {
        Some((_, e)) => Err(e),
        None => Ok(()),
    }
}

/// Scale each particle's velocity about its object's mean velocity; momentum
/// and rigid translation are untouched.
fn damp(state: &mut SimState) {
    let d = state.params.damping;
    if d == 1.0 {
        return;
    }
    for (_, range) in &state.objects {
        let ps = &mut state.particles[range.clone()];
        let (mut mom, mut mass) = (Vec3::zeros(), 0.0);
        for p in ps.iter() {
            mom += p.v * p.mass;
            mass += p.mass;
        }
        let mean = mom / mass;
        ps.par_iter_mut().for_each(|p| {
            p.v = mean + (p.v - mean) * d;
            p.c *= d;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_partition_unity_and_reproduce_linear() {
        for fx in [0.5, 0.77, 1.0, 1.3, 1.4999] {
            let w = weights(fx);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let first: f64 = (0..3).map(|i| w[i] * (i as f64 - fx)).sum();
            assert!(first.abs() < 1e-15);
        }
    }

    #[test]
    fn stress_free_at_identity_and_rotation() {
        assert_eq!(kirchhoff(&Mat3::identity(), 3.0, 2.0), Mat3::zeros());
        let r = crate::math::Quat::from_euler_angles(0.3, -0.2, 0.9).to_rotation_matrix().into_inner();
        assert!(kirchhoff(&r, 3.0, 2.0).norm() < 1e-12);
    }
}
