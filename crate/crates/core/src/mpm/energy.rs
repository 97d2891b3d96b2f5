use super::MpmParticle;
use crate::math::{polar_rotation, Mat3, Vec3};

/// Fixed-corotated strain energy density.
pub fn psi(f: &Mat3, mu: f64, lambda: f64) -> f64 {
    let j = f.determinant();
    let r = polar_rotation(f);
    mu * (f - r).norm_squared() + 0.5 * lambda * (j - 1.0).powi(2)
}

pub fn elastic_energy(particles: &[MpmParticle]) -> f64 {
    particles.iter().map(|p| p.volume0 * psi(&p.f, p.mu, p.lambda)).sum()
}

pub fn kinetic_energy(particles: &[MpmParticle]) -> f64 {
    particles.iter().map(|p| 0.5 * p.mass * p.v.norm_squared()).sum()
}

pub fn linear_momentum(particles: &[MpmParticle]) -> Vec3 {
    particles.iter().fold(Vec3::zeros(), |a, p| a + p.v * p.mass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_density() {
        assert_eq!(psi(&Mat3::identity(), 1.0, 1.0), 0.0);
        // Uniform stretch s: R = I, ψ = 3μ(s-1)² + λ/2 (s³-1)².
        let s = 1.1;
        let want = 3.0 * 2.0 * (s - 1.0f64).powi(2) + 0.5 * 3.0 * (s * s * s - 1.0f64).powi(2);
        assert!((psi(&(Mat3::identity() * s), 2.0, 3.0) - want).abs() < 1e-12);
    }
}
