//! Contact environment: a stiff horizontal plate below the follower home
//! with unilateral normal contact and Coulomb-capped tangential friction.

use serde::{Deserialize, Serialize};

use crate::se3::Vec6;
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvPlate {
    /// Absolute height of the plate surface (m, world z).
    pub surface_z: f64,
    /// Contact stiffness (N/m); much stiffer than the virtual stiffness so
    /// compliance recovery stays sharp.
    pub stiffness: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
    /// Viscous regularization speed for the friction direction (m/s).
    pub vel_reg: f64,
}

impl EnvPlate {
    /// Normal force for a TCP height (N, upward positive).
    pub fn normal_force(&self, tcp_z: f64) -> f64 {
        self.stiffness * (self.surface_z - tcp_z).max(0.0)
    }

    /// Full contact wrench on the TCP for a pose/velocity sample: unilateral
    /// normal spring plus regularized Coulomb friction opposing sliding.
    pub fn wrench(&self, tcp_pos: &Vector3<f64>, tcp_vel: &Vector3<f64>) -> Vec6 {
        let fz = self.normal_force(tcp_pos.z);
        if fz <= 0.0 {
            return Vec6::zeros();
        }
        let vt = Vector3::new(tcp_vel.x, tcp_vel.y, 0.0);
        let speed = vt.norm();
        let ft = if speed > 0.0 {
            -vt * (self.friction * fz / (speed + self.vel_reg))
        } else {
            Vector3::zeros()
        };
        Vec6::new(ft.x, ft.y, fz, 0.0, 0.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn plate() -> EnvPlate {
        EnvPlate { surface_z: 0.208, stiffness: 5e4, friction: 0.3, vel_reg: 1e-3 }
    }

    #[test]
    fn above_the_plate_no_wrench() {
        let w = plate().wrench(&Vector3::new(0.0, 0.0, 0.30), &Vector3::zeros());
        assert_eq!(w, Vec6::zeros());
    }

    #[test]
    fn linear_normal_law() {
        // 0.1 mm penetration at 5e4 N/m is 5 N.
        let w = plate().wrench(&Vector3::new(0.0, 0.0, 0.208 - 1e-4), &Vector3::zeros());
        assert_relative_eq!(w[2], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn friction_opposes_sliding_and_saturates_at_coulomb_cap() {
        let p = plate();
        let pos = Vector3::new(0.0, 0.0, 0.208 - 1e-4);
        let fast = p.wrench(&pos, &Vector3::new(0.2, 0.0, 0.0));
        assert!(fast[0] < 0.0);
        assert!(fast[0].abs() <= 0.3 * 5.0 + 1e-12);
        assert_relative_eq!(fast[0].abs(), 0.3 * 5.0, epsilon = 0.01);
        // Near zero slip the regularization keeps the force small and smooth.
        let slow = p.wrench(&pos, &Vector3::new(1e-4, 0.0, 0.0));
        assert!(slow[0].abs() < 0.3 * 5.0 * 0.2);
    }
}
