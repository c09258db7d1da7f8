//! Follower-side stiffness-damping impedance realized as a position-based
//! outer loop with a 6-D PID wrench-to-pose mapping.
//!
//! Per control tick the loop reconstructs the desired TCP pose from the held
//! teleoperation setpoint, computes a reference wrench from the pose error
//! and the low-pass filtered velocity error, and drives the measured-wrench
//! error through a PID whose output increments the commanded wrist loading.
//! Composing the incremented relative state with the measured flange and
//! wrist states yields the next-tick flange command.

use serde::{Deserialize, Serialize};

use crate::delta6::{self, Delta6Params, Delta6State};
use crate::error::Result;
use crate::filters::LowPassState;
use crate::se3::{self, FrameState, PoseXyz, Vec6};

/// Follower loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerParams {
    /// Virtual stiffness per axis (N/m, N*m/rad).
    pub stiffness: Vec6,
    /// Virtual damping per axis (N*s/m, N*m*s/rad).
    pub damping: Vec6,
    /// Velocity-error low-pass time constant (s).
    pub tau_v: f64,
    /// PID gains mapping wrench error to a pose increment (m/N, rad/(N*m)).
    pub kp: Vec6,
    pub ki: Vec6,
    pub kd: Vec6,
    /// Integrator clamp per axis (N*s, N*m*s).
    pub i_limit: Vec6,
    /// Loop rate (Hz).
    pub rate_hz: f64,
    /// TCP pose captured at scenario start.
    pub home: PoseXyz,
}

impl FollowerParams {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        for i in 0..6 {
            if !(self.stiffness[i] > 0.0) {
                return Err(Error::Config(format!("follower stiffness[{i}] must be positive")));
            }
            if self.damping[i] < 0.0 {
                return Err(Error::Config(format!("follower damping[{i}] must be >= 0")));
            }
            if !(self.i_limit[i] > 0.0) {
                return Err(Error::Config(format!("follower i_limit[{i}] must be positive")));
            }
        }
        if !(self.tau_v > 0.0) {
            return Err(Error::Config("follower tau_v must be positive".into()));
        }
        if !(self.rate_hz > 0.0) {
            return Err(Error::Config("follower rate must be positive".into()));
        }
        Ok(())
    }
}

/// Follower loop state.
#[derive(Debug, Clone)]
pub struct FollowerState {
    /// Desired TCP pose reconstructed from the channel.
    pub target: PoseXyz,
    /// Velocity-error low-pass.
    pub vel_err_lp: LowPassState,
    /// PID integrator (integral of wrench error).
    pub integ: Vec6,
    /// Previous wrench error, for the derivative term.
    pub prev_wrench_err: Vec6,
    /// Previous measured TCP pose, for the finite difference.
    pub prev_pose: Option<PoseXyz>,
    /// Previous desired TCP pose, for the finite difference.
    pub prev_target: Option<PoseXyz>,
    /// Watchdog latch: target frozen at the measured pose while set.
    pub frozen: bool,
    /// Impedance reference wrench computed on the last tick.
    pub last_w_ref: Vec6,
}

/// Follower impedance loop.
#[derive(Debug, Clone)]
pub struct Follower {
    pub params: FollowerParams,
    pub state: FollowerState,
}

/// Desired TCP pose from a held setpoint: the follower home composed with the
/// inverse of the encoded payload, matching the leader-side encoding so that
/// the round trip reproduces home-relative motion.
pub fn reconstruct_target(setpoint: &Vec6, home: &PoseXyz) -> Result<PoseXyz> {
    let t = se3::to_transform(home)
        .compose(&se3::to_transform(&PoseXyz::from_vec6(setpoint)).inverse());
    se3::from_transform(&t)
}

/// Reference wrench from the pose deviation and the filtered velocity error:
/// `stiffness (.) e_p + damping (.) e_v`, with `e_p` the deviation of the
/// measured pose from the target expressed as a 6-vector in the target frame.
pub fn impedance_reference(
    pose: &PoseXyz,
    target: &PoseXyz,
    vel_err: &Vec6,
    params: &FollowerParams,
) -> Result<Vec6> {
    let e_p = pose_deviation(pose, target)?;
    Ok(params.stiffness.component_mul(&e_p) + params.damping.component_mul(vel_err))
}

/// Deviation of `pose` from `target` as a 6-vector, `vec(T(target)^-1 * T(pose))`.
pub fn pose_deviation(pose: &PoseXyz, target: &PoseXyz) -> Result<Vec6> {
    let rel = se3::to_transform(target).inverse().compose(&se3::to_transform(pose));
    Ok(se3::from_transform(&rel)?.as_vec6())
}

/// Next-tick flange command per the composition chain: the commanded relative
/// state is the measured one shifted by the increment, and the flange command
/// keeps the measured TCP fixed under that new relative state.
pub fn follower_command(
    flange: &FrameState,
    wrist_rel: &FrameState,
    increment: &Vec6,
    d6: &Delta6Params,
) -> Result<FrameState> {
    let shifted = se3::to_transform(&wrist_rel.pose)
        .compose(&se3::to_transform(&PoseXyz::from_vec6(increment)));
    let target_rel = FrameState::from_pose(se3::from_transform(&shifted)?);
    // Reject commands outside the mechanical deflection range.
    delta6::pose_to_deflection(&target_rel, d6)?;
    let tcp = se3::compose_plus(flange, wrist_rel)?;
    se3::compose_minus(&tcp, &target_rel)
}

impl Follower {
    pub fn new(params: FollowerParams) -> Result<Self> {
        params.validate()?;
        let state = FollowerState {
            target: params.home,
            vel_err_lp: LowPassState::new(params.tau_v),
            integ: Vec6::zeros(),
            prev_wrench_err: Vec6::zeros(),
            prev_pose: None,
            prev_target: None,
            frozen: false,
            last_w_ref: Vec6::zeros(),
        };
        Ok(Self { params, state })
    }

    /// PID update on the wrench error: integrator accumulates and clamps
    /// before use, derivative is a backward difference.
    pub fn pid_step(&mut self, wrench_err: &Vec6, dt: f64) -> Vec6 {
        let s = &mut self.state;
        s.integ += wrench_err * dt;
        for i in 0..6 {
            let lim = self.params.i_limit[i];
            s.integ[i] = s.integ[i].clamp(-lim, lim);
        }
        let deriv = (wrench_err - s.prev_wrench_err) / dt;
        s.prev_wrench_err = *wrench_err;
        self.params.kp.component_mul(wrench_err)
            + self.params.ki.component_mul(&s.integ)
            + self.params.kd.component_mul(&deriv)
    }

    /// Full pipeline at the impedance rate.
    ///
    /// `setpoint` is the latest held channel payload (None until the first
    /// delivery); `frozen` engages the watchdog fallback, pinning the target
    /// at the measured pose. Returns the flange command and the measured
    /// external wrench for the haptic back-stream.
    pub fn tick(
        &mut self,
        sensor: &Delta6State,
        flange: &FrameState,
        setpoint: Option<&Vec6>,
        frozen: bool,
        d6: &Delta6Params,
        dt: f64,
    ) -> Result<(FrameState, Vec6)> {
        let sensor = sensor.clamped(d6);
        let w_ext = delta6::forward_wrench(&sensor, d6)?;
        let wrist_rel = delta6::deflection_to_pose(&sensor, d6)?;
        let measured = se3::compose_plus(flange, &wrist_rel)?;

        if frozen {
            if !self.state.frozen {
                self.state.frozen = true;
                self.state.target = measured.pose;
            }
        } else {
            self.state.frozen = false;
            if let Some(sp) = setpoint {
                self.state.target = reconstruct_target(sp, &self.params.home)?;
            }
        }

        // Finite-differenced measured and desired rates, filtered together.
        let v_meas = match self.state.prev_pose {
            Some(prev) => (measured.pose.as_vec6() - prev.as_vec6()) / dt,
            None => Vec6::zeros(),
        };
        let v_des = match self.state.prev_target {
            Some(prev) => (self.state.target.as_vec6() - prev.as_vec6()) / dt,
            None => Vec6::zeros(),
        };
        self.state.prev_pose = Some(measured.pose);
        self.state.prev_target = Some(self.state.target);
        let vel_err = self.state.vel_err_lp.step(&(v_meas - v_des), dt);

        let w_ref = impedance_reference(&measured.pose, &self.state.target, &vel_err, &self.params)?;
        self.state.last_w_ref = w_ref;
        // Restoring error: positive when the virtual spring-damper calls for
        // more wrench than the wrist currently measures, which loads the
        // springs further and (in free space) advances the TCP toward the
        // target. Verified by the steady-state compliance acceptance test.
        let w_err = w_ref - w_ext;
        let mut increment = self.pid_step(&w_err, dt);

        // Saturate the commanded relative state into the deflection range.
        let shifted = se3::to_transform(&wrist_rel.pose)
            .compose(&se3::to_transform(&PoseXyz::from_vec6(&increment)));
        let shifted_rel = FrameState::from_pose(se3::from_transform(&shifted)?);
        if delta6::pose_to_deflection(&shifted_rel, d6).is_err() {
            let defl = delta6::pose_to_deflection_saturated(&shifted_rel, d6)?;
            let reachable = delta6::deflection_to_pose(&defl, d6)?;
            let back = se3::to_transform(&wrist_rel.pose)
                .inverse()
                .compose(&se3::to_transform(&reachable.pose));
            increment = se3::from_transform(&back)?.as_vec6();
        }

        let cmd = follower_command(flange, &wrist_rel, &increment, d6)?;
        Ok((cmd, w_ext))
    }

    /// Reference wrench the loop would hold at the current deviation.
    pub fn reference_wrench(&self, measured: &PoseXyz) -> Result<Vec6> {
        impedance_reference(measured, &self.state.target, &self.state.vel_err_lp.y, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    /// Table gains are given in mm/N and mrad/(N*m); scale to SI.
    fn table_params() -> FollowerParams {
        FollowerParams {
            stiffness: Vec6::new(300.0, 300.0, 500.0, 2.4, 2.4, 1.2),
            damping: Vec6::new(2.0, 2.0, 3.0, 0.2, 0.2, 0.1),
            tau_v: 0.03,
            kp: Vec6::new(0.1, 0.1, 0.25, 20.0, 20.0, 40.0) * 1e-3,
            ki: Vec6::new(0.01, 0.01, 0.02, 5.0, 5.0, 10.0) * 1e-3,
            kd: Vec6::zeros(),
            i_limit: Vec6::new(0.5, 0.5, 0.5, 0.05, 0.05, 0.05),
            rate_hz: 150.0,
            home: PoseXyz::new(Vector3::new(0.45, 0.0, 0.40), Vector3::zeros()),
        }
    }

    #[test]
    fn zero_setpoint_reconstructs_home() {
        let home = table_params().home;
        let t = reconstruct_target(&Vec6::zeros(), &home).unwrap();
        assert_relative_eq!(t.as_vec6(), home.as_vec6(), epsilon = 1e-14);
    }

    #[test]
    fn setpoint_from_moved_leader_shifts_target() {
        use crate::leader::leader_setpoint;
        let home_l = PoseXyz::new(Vector3::new(0.35, 0.0, 0.30), Vector3::zeros());
        let home_f = table_params().home;
        let mut leader_now = home_l;
        leader_now.position.z += 0.010;
        let sp = leader_setpoint(&leader_now, &home_l).unwrap();
        let target = reconstruct_target(&sp, &home_f).unwrap();
        assert_relative_eq!(target.position.z, home_f.position.z + 0.010, epsilon = 1e-14);
    }

    #[test]
    fn held_setpoint_keeps_target_unchanged() {
        let home = table_params().home;
        let sp = Vec6::new(0.0, 0.0, -0.01, 0.0, 0.0, 0.0);
        let a = reconstruct_target(&sp, &home).unwrap();
        let b = reconstruct_target(&sp, &home).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impedance_reference_zero_at_target() {
        let p = table_params();
        let w = impedance_reference(&p.home, &p.home, &Vec6::zeros(), &p).unwrap();
        assert_relative_eq!(w, Vec6::zeros(), epsilon = 1e-14);
    }

    #[test]
    fn stiffness_term_recovers_prescribed_k() {
        let p = table_params();
        let mut pose = p.home;
        pose.position.z += 0.008;
        let w = impedance_reference(&pose, &p.home, &Vec6::zeros(), &p).unwrap();
        assert_relative_eq!(w[2].abs(), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn damping_term_scales_velocity_error() {
        let p = table_params();
        let mut v = Vec6::zeros();
        v[2] = 0.2;
        let w = impedance_reference(&p.home, &p.home, &v, &p).unwrap();
        assert_relative_eq!(w[2].abs(), 0.6, epsilon = 1e-12);
    }

    #[test]
    fn pid_arithmetic_on_first_tick() {
        let mut f = Follower::new(table_params()).unwrap();
        let dt = 1.0 / 150.0;
        let w_err = Vec6::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0);
        let inc = f.pid_step(&w_err, dt);
        let expected = 0.25e-3 * 1.0 + 0.02e-3 * (1.0 * dt);
        assert_relative_eq!(inc[2], expected, epsilon = 1e-15);
    }

    #[test]
    fn pid_zero_error_zero_output() {
        let mut f = Follower::new(table_params()).unwrap();
        let inc = f.pid_step(&Vec6::zeros(), 1.0 / 150.0);
        assert_eq!(inc, Vec6::zeros());
    }

    #[test]
    fn integrator_saturates_under_persistent_error() {
        let mut f = Follower::new(table_params()).unwrap();
        let dt = 1.0 / 150.0;
        let w_err = Vec6::new(10.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            f.pid_step(&w_err, dt);
            assert!(f.state.integ[0] <= f.params.i_limit[0] + 1e-15);
        }
        assert_relative_eq!(f.state.integ[0], f.params.i_limit[0], epsilon = 1e-12);
    }

    #[test]
    fn zero_increment_command_is_current_flange() {
        let d6 = Delta6Params::default();
        let flange = FrameState::from_pose(PoseXyz::new(
            Vector3::new(0.45, 0.0, 0.45),
            Vector3::zeros(),
        ));
        let rel = FrameState::from_pose(d6.neutral);
        let cmd = follower_command(&flange, &rel, &Vec6::zeros(), &d6).unwrap();
        assert_relative_eq!(cmd.pose.as_vec6(), flange.pose.as_vec6(), epsilon = 1e-12);
    }

    #[test]
    fn positive_increment_shifts_flange_opposite() {
        let d6 = Delta6Params::default();
        let flange = FrameState::from_pose(PoseXyz::new(
            Vector3::new(0.45, 0.0, 0.45),
            Vector3::zeros(),
        ));
        let rel = FrameState::from_pose(d6.neutral);
        let inc = Vec6::new(0.0, 0.0, 0.001, 0.0, 0.0, 0.0);
        let cmd = follower_command(&flange, &rel, &inc, &d6).unwrap();
        // Commanding +1 mm more relative offset drops the flange 1 mm to keep
        // the TCP in place, loading the spring.
        assert_relative_eq!(cmd.pose.position.z, flange.pose.position.z - 0.001, epsilon = 1e-12);
    }

    #[test]
    fn command_chain_preserves_tcp() {
        // At every step: commanded flange (+) commanded relative = measured TCP.
        let d6 = Delta6Params::default();
        let mut rng_vals = [0.0007, -0.0004, 0.0011, 0.002, -0.001, 0.0005];
        let flange = FrameState::from_pose(PoseXyz::new(
            Vector3::new(0.45, 0.02, 0.45),
            Vector3::new(0.01, -0.02, 0.03),
        ));
        let mut d = Vec6::zeros();
        d[2] = 0.001;
        let rel = delta6::deflection_to_pose(&Delta6State::new(d), &d6).unwrap();
        for _ in 0..6 {
            let inc = Vec6::from_iterator(rng_vals.iter().copied());
            let cmd = follower_command(&flange, &rel, &inc, &d6).unwrap();
            let shifted = se3::to_transform(&rel.pose)
                .compose(&se3::to_transform(&PoseXyz::from_vec6(&inc)));
            let target_rel = FrameState::from_pose(se3::from_transform(&shifted).unwrap());
            let tcp_from_cmd = se3::compose_plus(&cmd, &target_rel).unwrap();
            let tcp_measured = se3::compose_plus(&flange, &rel).unwrap();
            assert_relative_eq!(
                tcp_from_cmd.pose.as_vec6(),
                tcp_measured.pose.as_vec6(),
                epsilon = 1e-10
            );
            rng_vals.rotate_left(1);
        }
    }

    #[test]
    fn rest_at_home_holds_pose() {
        let d6 = Delta6Params::default();
        let p = table_params();
        let mut f = Follower::new(p).unwrap();
        // Flange parked so that TCP sits exactly at home with a neutral wrist.
        let flange_pose = se3::compose_minus(
            &FrameState::from_pose(f.params.home),
            &FrameState::from_pose(d6.neutral),
        )
        .unwrap();
        let dt = 1.0 / 150.0;
        for _ in 0..50 {
            let (cmd, w) = f
                .tick(&Delta6State::zero(), &flange_pose, None, false, &d6, dt)
                .unwrap();
            assert_relative_eq!(cmd.pose.as_vec6(), flange_pose.pose.as_vec6(), epsilon = 1e-10);
            assert_eq!(w, Vec6::zeros());
        }
    }

    #[test]
    fn watchdog_freeze_pins_target_at_measured_pose() {
        let d6 = Delta6Params::default();
        let mut f = Follower::new(table_params()).unwrap();
        let flange_pose = se3::compose_minus(
            &FrameState::from_pose(f.params.home),
            &FrameState::from_pose(d6.neutral),
        )
        .unwrap();
        let dt = 1.0 / 150.0;
        let sp = Vec6::new(0.0, 0.0, -0.05, 0.0, 0.0, 0.0);
        let _ = f.tick(&Delta6State::zero(), &flange_pose, Some(&sp), false, &d6, dt).unwrap();
        assert_relative_eq!(f.state.target.position.z, f.params.home.position.z + 0.05, epsilon = 1e-12);
        // Fallback: the stale setpoint must be ignored and the target pinned
        // at the measured TCP pose.
        let _ = f.tick(&Delta6State::zero(), &flange_pose, Some(&sp), true, &d6, dt).unwrap();
        assert_relative_eq!(f.state.target.as_vec6(), f.params.home.as_vec6(), epsilon = 1e-12);
    }
}
