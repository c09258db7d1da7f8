//! 1-DOF gripper channel stub with complementary read/write semantics: the
//! leader writes a force reference and reads the gripper opening; the
//! follower-side servo converts the held force reference into a position
//! reference for a spring-contact gripper and reads the interaction force.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperParams {
    /// Fully open jaw separation (m).
    pub max_open: f64,
    /// Force-servo gain (m per N*s).
    pub servo_gain: f64,
    /// Jaw first-order time constant (s).
    pub time_const: f64,
    /// Contact stiffness against the grasped object (N/m).
    pub k_contact: f64,
    /// Width of the rigid stub object between the jaws, if any (m).
    pub object_width: Option<f64>,
}

impl Default for GripperParams {
    fn default() -> Self {
        Self {
            max_open: 0.08,
            servo_gain: 0.01,
            time_const: 0.05,
            k_contact: 1e4,
            object_width: Some(0.03),
        }
    }
}

/// Follower-side gripper hardware plus its force-to-position servo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperSim {
    pub params: GripperParams,
    /// Jaw opening (m).
    pub opening: f64,
    /// Position reference the servo currently commands (m).
    pub cmd_opening: f64,
    /// Measured interaction force (N).
    pub force: f64,
}

impl GripperSim {
    pub fn new(params: GripperParams) -> Self {
        Self { params, opening: params.max_open, cmd_opening: params.max_open, force: 0.0 }
    }

    /// Follower application logic at the control rate: move the position
    /// reference to close the gap between the measured force and the held
    /// force reference. A zero (or negative) reference opens fully.
    pub fn servo(&mut self, force_ref: f64, dt: f64) {
        if force_ref <= 0.0 {
            self.cmd_opening = self.params.max_open;
            return;
        }
        self.cmd_opening += self.params.servo_gain * (self.force - force_ref) * dt / self.params.time_const;
        self.cmd_opening = self.cmd_opening.clamp(0.0, self.params.max_open);
    }

    /// Gripper hardware at the servo rate: first-order jaw motion plus the
    /// spring contact against the stub object.
    pub fn step(&mut self, dt: f64) {
        let alpha = dt / (self.params.time_const + dt);
        self.opening += alpha * (self.cmd_opening - self.opening);
        self.force = match self.params.object_width {
            Some(w) => self.params.k_contact * (w - self.opening).max(0.0),
            None => 0.0,
        };
    }
}
