use super::{Domain, MpmGrid, MpmParticle, ObjectForce, SimParams, SimState};
use crate::error::{Error, Result, SimError};
use crate::materials::{lame_from_young_poisson, PropertyField};
use crate::math::{Mat3, Vec3};
use crate::scene_io::ForceSpec;
use crate::voxel::{median_spacing, Occupancy};

/// Young's modulus floor for rigid objects simulated in `stiff` mode.
pub const STIFF_MODULUS: f64 = 1e9;

/// A deformable object entering the simulation.
#[derive(Debug, Clone)]
pub struct ObjectInput {
    pub object_id: u32,
    /// Driving-particle rest positions.
    pub positions: Vec<Vec3>,
    /// Per-particle properties, aligned with `positions`.
    pub field: PropertyField,
    /// Dense samples of the object (typically every splat center) used to
    /// estimate its occupied volume; empty means `positions`.
    pub volume_points: Vec<Vec3>,
    pub forces: Vec<ForceSpec>,
}

/// A kinematic object whose occupied cells pin the grid.
#[derive(Debug, Clone)]
pub struct ColliderInput {
    pub object_id: u32,
    pub points: Vec<Vec3>,
}

/// Occupied volume of a point set, voxelized on the grid lattice.
fn occupancy(points: &[Vec3], origin: Vec3, dx: f64) -> Occupancy {
    let h = median_spacing(points).map_or(dx, |s| s.max(dx));
    Occupancy::closed(points, origin, h, 1)
}

pub fn initialize(
    objects: &[ObjectInput],
    colliders: &[ColliderInput],
    params: SimParams,
    domain: Domain,
) -> Result<SimState> {
    if params.grid_resolution < 8 {
        return Err(Error::validation("grid_resolution", "must be >= 8"));
    }
    let mut grid = MpmGrid::new(params.grid_resolution, domain);
    let mut order: Vec<&ObjectInput> = objects.iter().collect();
    order.sort_by_key(|o| o.object_id);

    let mut particles = Vec::new();
    let mut ranges = Vec::new();
    let mut forces = Vec::new();
    for obj in order {
        if obj.positions.is_empty() {
            return Err(SimError::EmptyDrivingSet.into());
        }
        if obj.field.len() != obj.positions.len() {
            return Err(Error::validation(
                "field",
                format!(
                    "object {}: {} properties for {} particles",
                    obj.object_id,
                    obj.field.len(),
                    obj.positions.len()
                ),
            ));
        }
        let dense = if obj.volume_points.is_empty() { &obj.positions } else { &obj.volume_points };
        let volume = occupancy(dense, grid.origin, grid.dx).volume();
        let volume0 = volume / obj.positions.len() as f64;
        let start = particles.len();
        for (i, x) in obj.positions.iter().enumerate() {
            if !grid.contains(x) {
                return Err(SimError::OutOfDomain { index: start + i, position: [x.x, x.y, x.z] }.into());
            }
            let lame = lame_from_young_poisson(obj.field.young_modulus[i], obj.field.poisson_ratio[i])
                .map_err(|e| SimError::Material(format!("object {} particle {i}: {e}", obj.object_id)))?;
            particles.push(MpmParticle {
                x: *x,
                v: Vec3::zeros(),
                f: Mat3::identity(),
                c: Mat3::zeros(),
                mass: obj.field.density[i] * volume0,
                volume0,
                mu: lame.mu,
                lambda: lame.lambda,
                object_id: obj.object_id,
            });
        }
        ranges.push((obj.object_id, start..particles.len()));
        forces.extend(obj.forces.iter().map(|f| ObjectForce { object_id: obj.object_id, spec: f.clone() }));
    }
    if particles.is_empty() {
        return Err(SimError::EmptyDrivingSet.into());
    }
    for c in colliders {
        mark_collider(&mut grid, &c.points);
    }
    Ok(SimState { particles, grid, params, time: 0.0, frame: 0, substeps: 0, objects: ranges, forces })
}

fn mark_collider(grid: &mut MpmGrid, points: &[Vec3]) {
    if points.is_empty() {
        return;
    }
    let occ = occupancy(points, grid.origin, grid.dx);
    let n = grid.n as i64;
    let ratio = occ.h / grid.dx;
    for v in occ.voxels() {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for a in 0..3 {
            lo[a] = ((v[a] as f64 * ratio).ceil() as i64).max(0);
            hi[a] = (((v[a] + 1) as f64 * ratio).ceil() as i64 - 1).min(n - 1);
        }
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let idx = grid.index(i as usize, j as usize, k as usize);
                    grid.collider[idx] = true;
                }
            }
        }
    }
}
