//! Turn static, segmented Gaussian-splat scenes into physically simulated
//! animations.
//!
//! The pipeline, stage by stage:
//!
//! 1. [`perception`] assigns each object a mean density, Young's modulus and
//!    Poisson ratio, either from a vision-language provider or an offline
//!    material catalog.
//! 2. [`materials`] spreads those means over the object with a unit-mean
//!    multiplier field.
//! 3. [`sampling`] picks a sparse set of *driving particles* with a Poisson-disk
//!    radius that shrinks for soft and highly curved regions.
//! 4. [`mpm`] advances the driving particles with an MLS-MPM elasticity solver.
//! 5. [`binding`] carries the particle motion back onto every Gaussian through
//!    weighted local rigid fits.
//! 6. [`renderer`] splats the deformed scene into frames that [`scene_io`]
//!    writes to disk.

// NaN must fail validation, so `!(x > 0.0)` is the intended spelling.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod binding;
pub mod error;
pub mod gaussians;
pub mod materials;
pub mod math;
pub mod mpm;
pub mod perception;
pub mod renderer;
pub mod sampling;
pub mod scene_io;
pub mod spatial;
pub mod voxel;

pub use error::{Error, ErrorKind, Result, SimError};
pub use math::{Mat3, Quat, Vec3};
