use super::SimState;
use crate::math::Vec3;
use crate::scene_io::ForceKind;

/// Quadratic B-spline of a distance in kernel units; support 1.5.
fn kernel(s: f64) -> f64 {
    if s < 0.5 {
        0.75 - s * s
    } else if s < 1.5 {
        0.5 * (1.5 - s).powi(2)
    } else {
        0.0
    }
}

/// Add the momentum delivered during `[t0, t0 + dt)` by every active force,
/// spread over massive nodes within the application radius with weights
/// that sum to one.
pub(super) fn apply_forces(state: &mut SimState, t0: f64) {
    let dt = state.params.dt;
    let grid = &mut state.grid;
    let n = grid.n as i64;
    let radius = state.params.force_radius_cells * grid.dx;
    let h = radius / 1.5;
    for force in &state.forces {
        let spec = &force.spec;
        let amount = match spec.kind {
            ForceKind::Impulse if spec.start_time >= t0 && spec.start_time < t0 + dt => spec.magnitude,
            ForceKind::Constant if t0 >= spec.start_time && t0 < spec.start_time + spec.duration => spec.magnitude * dt,
            _ => continue,
        };
        let p = spec.point();
        let lo = ((p - grid.origin).add_scalar(-radius) / grid.dx).map(|c| (c.floor() as i64).clamp(0, n - 1));
        let hi = ((p - grid.origin).add_scalar(radius) / grid.dx).map(|c| (c.ceil() as i64).clamp(0, n - 1));
        let mut targets: Vec<(usize, f64)> = Vec::new();
        for i in lo.x..=hi.x {
            for j in lo.y..=hi.y {
                for k in lo.z..=hi.z {
                    let idx = grid.index(i as usize, j as usize, k as usize);
                    if grid.nodes[idx][0] <= 0.0 {
                        continue;
                    }
                    let d = (grid.node_position(i as usize, j as usize, k as usize) - p).norm();
                    let w = kernel(d / h);
                    if w > 0.0 {
                        targets.push((idx, w));
                    }
                }
            }
        }
        let total: f64 = targets.iter().map(|(_, w)| w).sum();
        if total <= 0.0 {
            log::warn!(
                "force on object {} at {:?} reaches no material; skipped",
                force.object_id,
                spec.application_point
            );
            continue;
        }
        let impulse: Vec3 = spec.direction() * amount;
        for (idx, w) in targets {
            let node = &mut grid.nodes[idx];
            let dv = impulse * (w / total / node[0]);
            node[1] += dv.x;
            node[2] += dv.y;
            node[3] += dv.z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_is_continuous_and_compact() {
        assert_eq!(kernel(1.5), 0.0);
        assert!((kernel(0.5 - 1e-12) - kernel(0.5)).abs() < 1e-9);
        assert_eq!(kernel(0.0), 0.75);
    }
}
