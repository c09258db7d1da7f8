//! Deterministic bilateral teleoperation simulator.
//!
//! A leader-side damping-only Cartesian admittance and a follower-side
//! stiffness-damping impedance are cascaded over an emulated lossy, delayed
//! message channel. Both arms carry a compliant 6-DOF spring wrist that acts
//! as the force/torque sensor, making each manipulator an end-effector
//! series elastic actuator. A fixed-step multi-rate scheduler runs servo
//! plants, control loops and teleoperation messaging at their own rates and
//! logs every signal into analysis-ready trace files.
//!
//! Modules map one-to-one onto the cascade:
//!
//! - [`se3`]: pose parameterization, composition operators, Euler-rate
//!   integration;
//! - [`delta6`]: the compliant wrist (deflection/wrench maps, inverse force
//!   mapping);
//! - [`filters`]: RBJ notch bank and first-order low-pass;
//! - [`leader`] / [`follower`]: the two control loops;
//! - [`netem`]: the emulated channel with latest-sample hold and watchdog;
//! - [`sim`]: scheduler, servo plants, contact environment, gripper,
//!   scripted operators, trace logging;
//! - [`session`]: bilateral wiring of all of the above;
//! - [`analysis`]: frequency-response, compliance and energy post-processing;
//! - [`config`]: scenario configuration.

pub mod analysis;
pub mod config;
pub mod delta6;
pub mod error;
pub mod filters;
pub mod follower;
pub mod leader;
pub mod netem;
pub mod se3;
pub mod session;
pub mod sim;

pub use error::{Error, Result};
pub use se3::{FrameState, PoseXyz, Transform, Vec6};
