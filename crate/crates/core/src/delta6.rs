//! Compliant 6-DOF series-elastic end-effector model.
//!
//! The device sits between the manipulator flange and the TCP and deflects
//! under load, which is how it senses the external wrench: each axis acts as
//! a linear spring, so `wrench = stiffness (.) deflection`. The inverse map
//! (wrench to deflection) runs through a damped Newton root solver on the
//! forward-map residual so that a nonlinear forward map can be substituted
//! later without touching callers.
//!
//! The spring is treated as quasi-static: deflection equilibrates within one
//! control tick and carries no internal dynamics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{self, FrameState, PoseXyz, Vec6};

/// Default tolerance on the inverse-map residual (infinity norm).
pub const DEFAULT_INVERSE_TOL: f64 = 1e-8;
/// Default iteration budget for the inverse-map solver.
pub const DEFAULT_INVERSE_MAX_ITER: usize = 50;

/// Spring and geometry parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta6Params {
    /// Translational stiffness per axis (N/m).
    pub k_trans: nalgebra::Vector3<f64>,
    /// Rotational stiffness per axis (N*m/rad).
    pub k_rot: nalgebra::Vector3<f64>,
    /// Flange-to-TCP pose at zero load.
    pub neutral: PoseXyz,
    /// Symmetric deflection range per axis (m, rad).
    pub deflection_limits: Vec6,
}

impl Default for Delta6Params {
    fn default() -> Self {
        // Rotational stiffness 0.64 N*m/rad; translational stiffness and the
        // neutral offset are placeholders for the physical device and sit in
        // the scenario config.
        Self {
            k_trans: nalgebra::Vector3::repeat(2000.0),
            k_rot: nalgebra::Vector3::repeat(0.64),
            neutral: PoseXyz::new(nalgebra::Vector3::new(0.0, 0.0, -0.05), nalgebra::Vector3::zeros()),
            deflection_limits: Vec6::new(0.02, 0.02, 0.02, 0.5, 0.5, 0.5),
        }
    }
}

impl Delta6Params {
    /// Per-axis stiffness as a 6-vector `[k_trans; k_rot]`.
    pub fn stiffness(&self) -> Vec6 {
        se3::vec6_from_parts(self.k_trans, self.k_rot)
    }

    /// Largest wrench magnitude reachable per axis.
    pub fn max_wrench(&self) -> Vec6 {
        self.stiffness().component_mul(&self.deflection_limits)
    }

    /// Clamp a desired wrench into the reachable set, axis by axis.
    pub fn saturate_wrench(&self, wrench: &Vec6) -> Vec6 {
        let max = self.max_wrench();
        let mut out = *wrench;
        for i in 0..6 {
            out[i] = out[i].clamp(-max[i], max[i]);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.stiffness();
        for i in 0..6 {
            if !(k[i] > 0.0 && k[i].is_finite()) {
                return Err(Error::Config(format!("delta6 stiffness[{i}] must be positive")));
            }
            if !(self.deflection_limits[i] > 0.0 && self.deflection_limits[i].is_finite()) {
                return Err(Error::Config(format!("delta6 deflection_limits[{i}] must be positive")));
            }
        }
        Ok(())
    }
}

/// Deflection relative to the neutral pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delta6State {
    pub deflection: Vec6,
}

impl Delta6State {
    pub fn zero() -> Self {
        Self { deflection: Vec6::zeros() }
    }

    pub fn new(deflection: Vec6) -> Self {
        Self { deflection }
    }

    /// Hard-stop the deflection into the mechanical range.
    pub fn clamped(&self, params: &Delta6Params) -> Self {
        let mut d = self.deflection;
        for i in 0..6 {
            let lim = params.deflection_limits[i];
            d[i] = d[i].clamp(-lim, lim);
        }
        Self { deflection: d }
    }
}

fn check_limits(deflection: &Vec6, params: &Delta6Params) -> Result<()> {
    for i in 0..6 {
        let lim = params.deflection_limits[i];
        if deflection[i].abs() > lim {
            return Err(Error::DeflectionLimit { axis: i, value: deflection[i], limit: lim });
        }
    }
    Ok(())
}

/// Raw forward map without the limit check; the solver iterates on this.
fn forward_map(deflection: &Vec6, params: &Delta6Params) -> Vec6 {
    params.stiffness().component_mul(deflection)
}

/// Wrench (TCP frame) produced by a deflection within limits.
pub fn forward_wrench(state: &Delta6State, params: &Delta6Params) -> Result<Vec6> {
    check_limits(&state.deflection, params)?;
    Ok(forward_map(&state.deflection, params))
}

/// Inverse-map solve with solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct InverseSolve {
    pub state: Delta6State,
    pub iterations: usize,
    pub residual: f64,
}

/// Deflection rendering a desired wrench, via damped Newton on the residual
/// `forward(deflection) - desired`.
///
/// On the linear spring model the full Newton step lands exactly, so the
/// solver converges in one iteration from any start.
pub fn solve_inverse_wrench(
    desired: &Vec6,
    params: &Delta6Params,
    tol: f64,
    max_iter: usize,
) -> Result<InverseSolve> {
    let k = params.stiffness();
    let mut d = Vec6::zeros();
    let mut residual = forward_map(&d, params) - desired;
    let mut res_norm = residual.amax();
    let mut iterations = 0;
    while res_norm > tol {
        if iterations >= max_iter {
            return Err(Error::NoConvergence { iterations, residual: res_norm });
        }
        // Newton step on the diagonal Jacobian d(forward)/d(deflection) = k.
        let full_step = residual.component_div(&k);
        let mut damping = 1.0;
        loop {
            let candidate = d - full_step * damping;
            let cand_res = forward_map(&candidate, params) - desired;
            let cand_norm = cand_res.amax();
            if cand_norm < res_norm || damping < 1.0 / 64.0 {
                d = candidate;
                residual = cand_res;
                res_norm = cand_norm;
                break;
            }
            damping *= 0.5;
        }
        iterations += 1;
    }
    for i in 0..6 {
        let lim = params.deflection_limits[i];
        if d[i].abs() > lim {
            return Err(Error::Unreachable { axis: i, needed: d[i], limit: lim });
        }
    }
    Ok(InverseSolve { state: Delta6State::new(d), iterations, residual: res_norm })
}

/// Deflection rendering a desired wrench (defaults: tol 1e-8, 50 iterations).
pub fn inverse_wrench(
    desired: &Vec6,
    params: &Delta6Params,
    tol: f64,
    max_iter: usize,
) -> Result<Delta6State> {
    Ok(solve_inverse_wrench(desired, params, tol, max_iter)?.state)
}

/// Relative flange-to-TCP frame state for a deflection: neutral composed with
/// the deflection as a small pose offset, zero rates (quasi-static spring).
pub fn deflection_to_pose(state: &Delta6State, params: &Delta6Params) -> Result<FrameState> {
    check_limits(&state.deflection, params)?;
    let rel = se3::to_transform(&params.neutral)
        .compose(&se3::to_transform(&PoseXyz::from_vec6(&state.deflection)));
    Ok(FrameState::from_pose(se3::from_transform(&rel)?))
}

/// Deflection encoded by a measured relative flange-to-TCP state.
pub fn pose_to_deflection(rel: &FrameState, params: &Delta6Params) -> Result<Delta6State> {
    let offset = se3::to_transform(&params.neutral).inverse().compose(&se3::to_transform(&rel.pose));
    let d = se3::from_transform(&offset)?.as_vec6();
    check_limits(&d, params)?;
    Ok(Delta6State::new(d))
}

/// Like [`pose_to_deflection`] but hard-stopped into the mechanical range
/// instead of erroring; sensing path used inside the control loops.
pub fn pose_to_deflection_saturated(rel: &FrameState, params: &Delta6Params) -> Result<Delta6State> {
    let offset = se3::to_transform(&params.neutral).inverse().compose(&se3::to_transform(&rel.pose));
    let d = se3::from_transform(&offset)?.as_vec6();
    Ok(Delta6State::new(d).clamped(params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    #[test]
    fn zero_deflection_gives_zero_wrench() {
        let p = Delta6Params::default();
        let w = forward_wrench(&Delta6State::zero(), &p).unwrap();
        assert_eq!(w, Vec6::zeros());
    }

    #[test]
    fn rotational_stiffness_arithmetic() {
        let p = Delta6Params::default();
        let mut d = Vec6::zeros();
        d[3] = 0.1;
        let w = forward_wrench(&Delta6State::new(d), &p).unwrap();
        assert_relative_eq!(w[3], 0.064, epsilon = 1e-15);
    }

    #[test]
    fn translational_stiffness_arithmetic() {
        let p = Delta6Params::default();
        let mut d = Vec6::zeros();
        d[2] = 0.002;
        let w = forward_wrench(&Delta6State::new(d), &p).unwrap();
        assert_relative_eq!(w[2], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_wrench_rejects_out_of_range_deflection() {
        let p = Delta6Params::default();
        let mut d = Vec6::zeros();
        d[0] = 0.03;
        assert!(matches!(
            forward_wrench(&Delta6State::new(d), &p),
            Err(Error::DeflectionLimit { axis: 0, .. })
        ));
    }

    #[test]
    fn inverse_of_zero_wrench_is_zero() {
        let p = Delta6Params::default();
        let s = inverse_wrench(&Vec6::zeros(), &p, DEFAULT_INVERSE_TOL, DEFAULT_INVERSE_MAX_ITER)
            .unwrap();
        assert_eq!(s.deflection, Vec6::zeros());
    }

    #[test]
    fn inverse_matches_analytic_linear_inverse() {
        let p = Delta6Params::default();
        let w = Vec6::new(0.0, 0.0, 4.0, 0.0, 0.0, 0.0);
        let s = inverse_wrench(&w, &p, DEFAULT_INVERSE_TOL, DEFAULT_INVERSE_MAX_ITER).unwrap();
        assert_relative_eq!(s.deflection[2], 0.002, epsilon = 1e-12);
    }

    #[test]
    fn unreachable_wrench_is_reported() {
        let p = Delta6Params::default();
        // 20 mm limit at 2000 N/m caps the axis at 40 N.
        let w = Vec6::new(0.0, 50.0, 0.0, 0.0, 0.0, 0.0);
        assert!(matches!(
            inverse_wrench(&w, &p, DEFAULT_INVERSE_TOL, DEFAULT_INVERSE_MAX_ITER),
            Err(Error::Unreachable { axis: 1, .. })
        ));
    }

    #[test]
    fn newton_converges_in_one_iteration_on_linear_model() {
        let p = Delta6Params::default();
        let w = Vec6::new(1.0, -2.0, 3.0, 0.01, -0.02, 0.03);
        let solve = solve_inverse_wrench(&w, &p, DEFAULT_INVERSE_TOL, DEFAULT_INVERSE_MAX_ITER)
            .unwrap();
        assert_eq!(solve.iterations, 1);
        assert!(solve.residual <= DEFAULT_INVERSE_TOL);
    }

    proptest! {
        #[test]
        fn inverse_forward_identity_within_limits(
            dx in -0.015f64..0.015, dy in -0.015f64..0.015, dz in -0.015f64..0.015,
            rx in -0.4f64..0.4, ry in -0.4f64..0.4, rz in -0.4f64..0.4,
        ) {
            let p = Delta6Params::default();
            let d = Vec6::new(dx, dy, dz, rx, ry, rz);
            let w = forward_wrench(&Delta6State::new(d), &p).unwrap();
            let back = inverse_wrench(&w, &p, DEFAULT_INVERSE_TOL, DEFAULT_INVERSE_MAX_ITER).unwrap();
            let w2 = forward_wrench(&back, &p).unwrap();
            prop_assert!((w2 - w).amax() <= 1e-8);
        }

        #[test]
        fn forward_map_is_odd(dz in -0.015f64..0.015, ry in -0.4f64..0.4) {
            let p = Delta6Params::default();
            let d = Vec6::new(0.0, 0.0, dz, 0.0, ry, 0.0);
            let w_pos = forward_wrench(&Delta6State::new(d), &p).unwrap();
            let w_neg = forward_wrench(&Delta6State::new(-d), &p).unwrap();
            prop_assert!((w_pos + w_neg).amax() < 1e-12);
        }
    }

    #[test]
    fn zero_deflection_pose_is_neutral() {
        let p = Delta6Params::default();
        let rel = deflection_to_pose(&Delta6State::zero(), &p).unwrap();
        assert_relative_eq!(rel.pose.as_vec6(), p.neutral.as_vec6(), epsilon = 1e-15);
        assert_eq!(rel.vel, Vec6::zeros());
    }

    #[test]
    fn z_deflection_translates_neutral() {
        let p = Delta6Params::default();
        let mut d = Vec6::zeros();
        d[2] = 0.002;
        let rel = deflection_to_pose(&Delta6State::new(d), &p).unwrap();
        let expected = p.neutral.position + Vector3::new(0.0, 0.0, 0.002);
        assert_relative_eq!(rel.pose.position, expected, epsilon = 1e-15);
    }

    #[test]
    fn pose_deflection_round_trip() {
        let p = Delta6Params::default();
        let d = Vec6::new(0.001, -0.002, 0.0015, 0.05, -0.03, 0.08);
        let rel = deflection_to_pose(&Delta6State::new(d), &p).unwrap();
        let back = pose_to_deflection(&rel, &p).unwrap();
        assert_relative_eq!(back.deflection, d, epsilon = 1e-12);
    }

    #[test]
    fn neutral_pose_maps_to_zero_deflection() {
        let p = Delta6Params::default();
        let rel = FrameState::from_pose(p.neutral);
        let d = pose_to_deflection(&rel, &p).unwrap();
        assert_relative_eq!(d.deflection, Vec6::zeros(), epsilon = 1e-15);
    }

    #[test]
    fn shifted_pose_maps_to_matching_deflection() {
        let p = Delta6Params::default();
        let mut pose = p.neutral;
        pose.position.x += 0.001;
        let d = pose_to_deflection(&FrameState::from_pose(pose), &p).unwrap();
        assert_relative_eq!(d.deflection[0], 0.001, epsilon = 1e-15);
        assert_relative_eq!(d.deflection.norm(), 0.001, epsilon = 1e-12);
    }

    #[test]
    fn saturate_wrench_clamps_per_axis() {
        let p = Delta6Params::default();
        let w = Vec6::new(100.0, -100.0, 10.0, 1.0, -1.0, 0.1);
        let s = p.saturate_wrench(&w);
        assert_relative_eq!(s[0], 40.0, epsilon = 1e-12);
        assert_relative_eq!(s[1], -40.0, epsilon = 1e-12);
        assert_relative_eq!(s[2], 10.0, epsilon = 1e-12);
        assert_relative_eq!(s[3], 0.32, epsilon = 1e-12);
    }
}
