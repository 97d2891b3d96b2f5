//! MLS-MPM elasticity: particles carry mass, velocity, affine velocity and a
//! deformation gradient; each substep scatters to a background grid, applies
//! forces and boundaries there, and gathers back.

mod energy;
mod forces;
mod init;
mod step;

pub use energy::{elastic_energy, kinetic_energy, linear_momentum, psi};
pub use init::{initialize, ColliderInput, ObjectInput, STIFF_MODULUS};

use std::ops::Range;

use crate::error::{Result, SimError};
use crate::math::{Mat3, Vec3};
use crate::scene_io::{Boundary, ForceSpec, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MpmParticle {
    pub x: Vec3,
    pub v: Vec3,
    /// Deformation gradient.
    pub f: Mat3,
    /// Affine velocity field.
    pub c: Mat3,
    pub mass: f64,
    pub volume0: f64,
    pub mu: f64,
    pub lambda: f64,
    pub object_id: u32,
}

/// Substep parameters extracted from a [`SimConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub grid_resolution: usize,
    pub dt: f64,
    pub substeps_per_frame: usize,
    pub gravity: Vec3,
    pub ground_height: Option<f64>,
    pub boundary: Boundary,
    pub damping: f64,
    pub force_radius_cells: f64,
}

impl SimParams {
    pub fn from_config(cfg: &SimConfig) -> Self {
        SimParams {
            grid_resolution: cfg.grid_resolution,
            dt: cfg.dt_substep,
            substeps_per_frame: cfg.substeps_per_frame,
            gravity: cfg.gravity_vec(),
            ground_height: cfg.ground_height,
            boundary: cfg.boundary,
            damping: cfg.damping,
            force_radius_cells: cfg.force_radius_cells,
        }
    }

    /// Unit vector opposite gravity (`+z` without gravity).
    pub fn up(&self) -> Vec3 {
        let n = self.gravity.norm();
        if n > 0.0 {
            -self.gravity / n
        } else {
            Vec3::z()
        }
    }
}

/// Cubic simulation domain `[origin, origin + extent]³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub origin: Vec3,
    pub extent: f64,
}

impl Domain {
    /// Cube centered on the box `[lo, hi]`, grown by `padding` times its
    /// largest side on every face.
    pub fn fit(lo: Vec3, hi: Vec3, padding: f64) -> Self {
        let side = (hi - lo).max().max(1e-6);
        let extent = side * (1.0 + 2.0 * padding);
        let center = (lo + hi) * 0.5;
        Domain { origin: center - Vec3::repeat(0.5 * extent), extent }
    }
}

/// Background grid. Node `(i, j, k)` sits at `origin + dx * (i, j, k)` and is
/// stored at `(i * n + j) * n + k`.
#[derive(Debug, Clone)]
pub struct MpmGrid {
    pub n: usize,
    pub dx: f64,
    pub origin: Vec3,
    /// `[mass, momentum.x, momentum.y, momentum.z]`, or velocity after the grid update.
    pub nodes: Vec<[f64; 4]>,
    /// Nodes pinned by rigid colliders.
    pub collider: Vec<bool>,
    /// Node box written by the last substep, cleared before the next one.
    active: Option<([usize; 3], [usize; 3])>,
}

impl MpmGrid {
    pub fn new(n: usize, domain: Domain) -> Self {
        MpmGrid {
            n,
            dx: domain.extent / n as f64,
            origin: domain.origin,
            nodes: vec![[0.0; 4]; n * n * n],
            collider: vec![false; n * n * n],
            active: None,
        }
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.dx
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n[0]).sum()
    }

    /// Whether `x` keeps its whole 3×3×3 stencil inside the grid.
    pub fn contains(&self, x: &Vec3) -> bool {
        let lo = self.dx;
        let hi = (self.n as f64 - 2.0) * self.dx;
        let q = x - self.origin;
        q.iter().all(|c| *c >= lo && *c <= hi)
    }
}

/// An object's forces, resolved to the simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectForce {
    pub object_id: u32,
    pub spec: ForceSpec,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub particles: Vec<MpmParticle>,
    pub grid: MpmGrid,
    pub params: SimParams,
    /// Simulated time in seconds.
    pub time: f64,
    pub frame: usize,
    pub substeps: u64,
    /// Particle index range of each simulated object, in id order.
    pub objects: Vec<(u32, Range<usize>)>,
    pub forces: Vec<ObjectForce>,
}

impl SimState {
    pub fn object_range(&self, object_id: u32) -> Option<Range<usize>> {
        self.objects.iter().find(|(id, _)| *id == object_id).map(|(_, r)| r.clone())
    }

    /// One MLS-MPM substep.
    pub fn substep(&mut self) -> Result<(), SimError> {
        step::substep(self)
    }

    /// `substeps_per_frame` substeps; the frame counter advances on success.
    pub fn advance_frame(&mut self) -> Result<(), SimError> {
        for _ in 0..self.params.substeps_per_frame {
            self.substep()?;
        }
        self.frame += 1;
        Ok(())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.particles.iter().map(|p| p.x).collect()
    }

    /// Mass-weighted center of the given particles.
    pub fn center_of_mass(&self, range: Range<usize>) -> Vec3 {
        let ps = &self.particles[range];
        let m: f64 = ps.iter().map(|p| p.mass).sum();
        ps.iter().fold(Vec3::zeros(), |a, p| a + p.x * p.mass) / m
    }
}

/// Run `frames` frames, stopping at the first error.
pub fn run(state: &mut SimState, frames: usize) -> Result<()> {
    for _ in 0..frames {
        state.advance_frame()?;
    }
    Ok(())
}
