//! Leader-side damping-only Cartesian admittance with a notch-filtered
//! haptic reference and a spring-loading flange command.
//!
//! Per control tick the loop measures the operator wrench from the wrist
//! deflection, filters the streamed-back follower wrench through the 6-D
//! notch bank, integrates the damped wrench error into a desired TCP state,
//! and composes the flange command that simultaneously realizes that TCP
//! target and loads the wrist springs to render the haptic reference.

use serde::{Deserialize, Serialize};

use crate::delta6::{self, Delta6Params, Delta6State};
use crate::error::Result;
use crate::filters::{notch_design, NotchBank, NotchParams};
use crate::se3::{self, FrameState, PoseXyz, Vec6};

/// Leader loop parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderParams {
    /// Cartesian damping per axis (N*s/m, N*m*s/rad).
    pub damping: Vec6,
    /// Haptic-reference notch design.
    pub notch: NotchParams,
    /// Loop rate (Hz).
    pub rate_hz: f64,
    /// TCP pose captured at scenario start.
    pub home: PoseXyz,
}

impl LeaderParams {
    pub fn validate(&self) -> Result<()> {
        for i in 0..6 {
            if !(self.damping[i] > 0.0) {
                return Err(crate::error::Error::Config(format!(
                    "leader damping[{i}] must be positive"
                )));
            }
        }
        if !(self.rate_hz > 0.0) {
            return Err(crate::error::Error::Config("leader rate must be positive".into()));
        }
        self.notch.validate()
    }
}

/// Leader loop state.
#[derive(Debug, Clone)]
pub struct LeaderState {
    /// Desired TCP state (admittance output).
    pub target: FrameState,
    /// Notch delay states.
    pub notch: NotchBank,
    /// Haptic reference actually applied this tick (post-filter, post-ramp).
    pub haptic_ref: Vec6,
}

/// Leader admittance loop.
#[derive(Debug, Clone)]
pub struct Leader {
    pub params: LeaderParams,
    pub state: LeaderState,
}

impl Leader {
    pub fn new(params: LeaderParams) -> Result<Self> {
        params.validate()?;
        let notch = notch_design(&params.notch)?;
        let target = FrameState::from_pose(params.home);
        Ok(Self { params, state: LeaderState { target, notch, haptic_ref: Vec6::zeros() } })
    }

    /// One damping-only admittance update.
    ///
    /// Filters the raw feedback wrench, scales it by `feedback_scale` (the
    /// watchdog ramp; 1.0 in normal operation), converts the wrench error to
    /// a commanded twist through the damping, and integrates the desired TCP
    /// pose. The returned state carries the twist as its velocity.
    pub fn admittance_step(
        &mut self,
        w_hand: &Vec6,
        w_fb: &Vec6,
        feedback_scale: f64,
        dt: f64,
    ) -> Result<FrameState> {
        let filtered = self.state.notch.step(w_fb);
        let haptic = filtered * feedback_scale;
        self.state.haptic_ref = haptic;
        let twist = (w_hand - haptic).component_div(&self.params.damping);
        let pose = se3::integrate_pose(&self.state.target.pose, &twist, dt)?;
        self.state.target = FrameState { pose, vel: twist, acc: Vec6::zeros() };
        Ok(self.state.target)
    }

    /// Full pipeline at the admittance rate: measure the hand wrench from the
    /// wrist deflection, update the admittance, compose the flange command
    /// and the teleoperation setpoint.
    ///
    /// The haptic reference is saturated to the wrench range reachable within
    /// the deflection limits instead of erroring mid-loop.
    pub fn tick(
        &mut self,
        sensor: &Delta6State,
        w_fb: &Vec6,
        feedback_scale: f64,
        d6: &Delta6Params,
        dt: f64,
    ) -> Result<(FrameState, Vec6)> {
        let w_hand = delta6::forward_wrench(&sensor.clamped(d6), d6)?;
        let target = self.admittance_step(&w_hand, w_fb, feedback_scale, dt)?;
        let haptic = d6.saturate_wrench(&self.state.haptic_ref);
        self.state.haptic_ref = haptic;
        let cmd = leader_command(&target, &haptic, d6)?;
        let setpoint = leader_setpoint(&target.pose, &self.params.home)?;
        Ok((cmd, setpoint))
    }
}

/// Flange command realizing the desired TCP state while loading the wrist
/// springs to render `haptic`: target composed-minus the deflected relative
/// state.
pub fn leader_command(
    target: &FrameState,
    haptic: &Vec6,
    d6: &Delta6Params,
) -> Result<FrameState> {
    let defl = delta6::inverse_wrench(
        haptic,
        d6,
        delta6::DEFAULT_INVERSE_TOL,
        delta6::DEFAULT_INVERSE_MAX_ITER,
    )?;
    let rel = delta6::deflection_to_pose(&defl, d6)?;
    se3::compose_minus(target, &rel)
}

/// Relative TCP increment streamed to the follower: the home pose expressed
/// in the current TCP frame, `vec(T(now)^-1 * T(home))`.
///
/// Note the operand order: the payload encodes home-relative-to-current, and
/// the follower-side reconstruction composes with the inverse so that the
/// round trip reproduces home-relative motion.
pub fn leader_setpoint(now: &PoseXyz, home: &PoseXyz) -> Result<Vec6> {
    let rel = se3::to_transform(now).inverse().compose(&se3::to_transform(home));
    Ok(se3::from_transform(&rel)?.as_vec6())
}
