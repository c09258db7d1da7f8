//! Stand-in for the manipulator inner loop: a per-axis second-order servo
//! tracking the commanded flange pose, with velocity and acceleration
//! limiting, or an ideal pass-through for delay-isolation test modes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::se3::{FrameState, PoseXyz, Vec6};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Servo natural frequency (Hz).
    pub natural_freq_hz: f64,
    /// Servo damping ratio.
    pub damping_ratio: f64,
    /// Servo rate (Hz).
    pub rate_hz: f64,
    /// Per-axis speed limit (m/s, rad/s).
    pub vel_limit: Vec6,
    /// Per-axis acceleration limit (m/s^2, rad/s^2).
    pub acc_limit: Vec6,
    /// Pass the command through unchanged (test mode).
    pub ideal: bool,
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.natural_freq_hz > 0.0) {
            return Err(Error::Config("plant natural_freq must be positive".into()));
        }
        if !(self.damping_ratio > 0.0) {
            return Err(Error::Config("plant damping_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// Servo state: the flange frame it currently realizes.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    pub state: FrameState,
}

impl Plant {
    pub fn new(params: PlantParams, initial: PoseXyz) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, state: FrameState::from_pose(initial) })
    }

    /// One servo update toward `cmd` over `dt`.
    ///
    /// Damping acts on the absolute velocity, so a step command settles
    /// without overshoot at critical damping and a ramp is followed with a
    /// lag of `2*zeta/omega_n`. The update is the exact zero-order-hold
    /// solution of the second-order law, so it stays faithful for any
    /// natural-frequency/rate combination; velocity and acceleration limits
    /// clamp the exact step afterwards.
    pub fn step(&mut self, cmd: &FrameState, dt: f64) {
        if self.params.ideal {
            self.state = *cmd;
            return;
        }
        let wn = 2.0 * std::f64::consts::PI * self.params.natural_freq_hz;
        let zeta = self.params.damping_ratio;
        let mut q = self.state.pose.as_vec6();
        let mut v = self.state.vel;
        let r = cmd.pose.as_vec6();
        let mut a = Vec6::zeros();
        for i in 0..6 {
            let (dq, v_new) = second_order_zoh(q[i] - r[i], v[i], wn, zeta, dt);
            let dv = (v_new - v[i]).clamp(
                -self.params.acc_limit[i] * dt,
                self.params.acc_limit[i] * dt,
            );
            let v_clamped =
                (v[i] + dv).clamp(-self.params.vel_limit[i], self.params.vel_limit[i]);
            let q_new = if v_clamped == v_new {
                r[i] + dq
            } else {
                // A limit bound; fall back to rate-limited motion.
                q[i] + v_clamped * dt
            };
            a[i] = (v_clamped - v[i]) / dt;
            q[i] = q_new;
            v[i] = v_clamped;
        }
        self.state = FrameState { pose: PoseXyz::from_vec6(&q), vel: v, acc: a };
    }
}

/// Exact evolution of `e'' + 2*zeta*wn*e' + wn^2*e = 0` over `dt` from
/// `(e0, v0)`; returns the new `(e, v)`.
fn second_order_zoh(e0: f64, v0: f64, wn: f64, zeta: f64, dt: f64) -> (f64, f64) {
    if (zeta - 1.0).abs() < 1e-9 {
        // Repeated real pole at -wn.
        let x = wn * dt;
        let decay = (-x).exp();
        let e = decay * (e0 * (1.0 + x) + v0 * dt);
        let v = decay * (v0 * (1.0 - x) - e0 * wn * x);
        (e, v)
    } else if zeta > 1.0 {
        // Two real poles.
        let s = wn * (zeta * zeta - 1.0).sqrt();
        let p1 = -zeta * wn + s;
        let p2 = -zeta * wn - s;
        let c1 = (v0 - p2 * e0) / (p1 - p2);
        let c2 = e0 - c1;
        let e = c1 * (p1 * dt).exp() + c2 * (p2 * dt).exp();
        let v = c1 * p1 * (p1 * dt).exp() + c2 * p2 * (p2 * dt).exp();
        (e, v)
    } else {
        // Damped oscillation.
        let wd = wn * (1.0 - zeta * zeta).sqrt();
        let decay = (-zeta * wn * dt).exp();
        let (sn, cs) = (wd * dt).sin_cos();
        let a = e0;
        let b = (v0 + zeta * wn * e0) / wd;
        let e = decay * (a * cs + b * sn);
        let v = decay * ((b * wd - a * zeta * wn) * cs - (a * wd + b * zeta * wn) * sn);
        (e, v)
    }
}
