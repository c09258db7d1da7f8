//! Bilateral wiring: leader and follower stacks, two teleoperation channels,
//! the gripper channel, plants, contact environment and the scripted
//! operator, advanced together by the multi-rate scheduler.
//!
//! Sign convention for the haptic back-stream: the follower streams the
//! wrench its TCP applies to the environment (the negated wrist
//! measurement). That is the force the operator's hand should feel, and it
//! closes the bilateral loop with negative feedback: pressing into a surface
//! is resisted rather than amplified.

use nalgebra::Vector3;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::delta6::{self, Delta6Params, Delta6State};
use crate::error::{Error, Result};
use crate::follower::Follower;
use crate::leader::{leader_setpoint, Leader};
use crate::netem::{Channel, Watchdog};
use crate::se3::{self, FrameState, PoseXyz, Vec6};
use crate::sim::environment::EnvPlate;
use crate::sim::gripper::GripperSim;
use crate::sim::operator::{DragLiftScript, Operator};
use crate::sim::plant::Plant;
use crate::sim::trace::{
    ChannelSample, GripperSample, PowerSample, SideSample, TraceMeta, TraceRow,
};
use crate::sim::RateSet;

/// Real leader arm: admittance loop, servo plant, wrist state.
pub struct LeaderStack {
    pub ctrl: Leader,
    pub plant: Plant,
    /// TCP rigidly held here (unilateral frequency-response setup).
    pub clamp: Option<PoseXyz>,
    pub tcp: FrameState,
    pub deflection: Delta6State,
    pub wrench: Vec6,
    pub cmd: FrameState,
    pub setpoint_out: Vec6,
    pub fallback_since: Option<f64>,
    pub feedback_scale: f64,
}

/// Real follower arm: impedance loop, servo plant, wrist state, environment.
pub struct FollowerStack {
    pub ctrl: Follower,
    pub plant: Plant,
    pub env: Option<EnvPlate>,
    pub tcp: FrameState,
    pub deflection: Delta6State,
    pub wrench: Vec6,
    pub cmd: FrameState,
    /// Streamed haptic value: wrench applied to the environment.
    pub wrench_out: Vec6,
    pub fallback: bool,
}

pub enum LeaderSide {
    Real(Box<LeaderStack>),
    /// Virtual leader tracking the operator script (unilateral follower
    /// experiments).
    Scripted,
}

pub enum FollowerSide {
    Real(Box<FollowerStack>),
    /// Scripted wrench source feeding the reverse channel (unilateral leader
    /// experiments).
    Injector,
}

/// One bilateral scenario, fully wired.
pub struct SessionGraph {
    pub rates: RateSet,
    pub operator: Operator,
    pub leader_side: LeaderSide,
    pub follower_side: FollowerSide,
    pub fwd: Channel,
    pub rev: Channel,
    pub grip_fwd: Channel,
    pub grip_rev: Channel,
    pub gripper: GripperSim,
    pub d6: Delta6Params,
    pub leader_home: PoseXyz,
    pub follower_home: PoseXyz,
    watchdog_timeout: f64,
    ramp_time: f64,
    grip_force_ref: f64,
    grip_pos_read: f64,
    fwd_held: bool,
    rev_held: bool,
    prev_p_sum: f64,
    e_sum: f64,
}

fn pose_plus_offset(home: &PoseXyz, offset: &Vec6) -> PoseXyz {
    PoseXyz::from_vec6(&(home.as_vec6() + offset))
}

impl SessionGraph {
    /// Construct every component from the configuration; homes are captured
    /// here, at t = 0.
    pub fn build(cfg: &ScenarioConfig) -> Result<SessionGraph> {
        cfg.validate()?;
        let rates = RateSet::from_config(&cfg.rates)?;
        let d6 = cfg.delta6_params()?;
        let cond = cfg.network_condition()?;
        let seed = cfg.scenario.seed;

        let leader_flange =
            PoseXyz::new(Vector3::from_row_slice(&cfg.leader.home_flange), Vector3::zeros());
        let follower_flange =
            PoseXyz::new(Vector3::from_row_slice(&cfg.follower.home_flange), Vector3::zeros());
        let neutral_state = FrameState::from_pose(d6.neutral);
        let leader_home =
            se3::compose_plus(&FrameState::from_pose(leader_flange), &neutral_state)?.pose;
        let follower_home =
            se3::compose_plus(&FrameState::from_pose(follower_flange), &neutral_state)?.pose;

        let kind = cfg.scenario.kind;
        let operator = match kind {
            ScenarioKind::LeaderBode => Operator::WrenchInjector {
                axis: cfg.operator.axis,
                amplitude: cfg.operator.amplitude,
                freq_hz: cfg.operator.freq,
            },
            ScenarioKind::FollowerBode => Operator::SetpointSine {
                axis: cfg.operator.axis,
                amplitude: cfg.operator.motion_amplitude,
                freq_hz: cfg.operator.freq,
            },
            ScenarioKind::Collision => Operator::SetpointDescent {
                speed: cfg.operator.speed,
                depth: cfg.operator.target_below,
                lead_in: cfg.operator.lead_in,
            },
            ScenarioKind::Passivity | ScenarioKind::Run => Operator::Hand {
                script: cfg.drag_lift_script(),
                stiffness: Vec6::from_row_slice(&cfg.operator.hand_stiffness),
            },
            ScenarioKind::Outage => Operator::Hand {
                // Single long press spanning the outage window, so the haptic
                // ramp-down and the follower freeze act on live contact.
                script: DragLiftScript {
                    reps: 1,
                    press_depth: cfg.drag_lift_script().press_depth,
                    drag_dist: 0.0,
                    lift_depth: 0.05,
                    lead_in: 0.5,
                    t_descend: 2.0,
                    t_hold: 7.0,
                    t_drag: 0.5,
                    t_lift: 1.0,
                    t_return: 0.5,
                },
                stiffness: Vec6::from_row_slice(&cfg.operator.hand_stiffness),
            },
            ScenarioKind::NetemValidate => {
                return Err(Error::Config("netem-validate is not a time-domain scenario".into()))
            }
        };

        let leader_side = match kind {
            ScenarioKind::FollowerBode | ScenarioKind::Collision => LeaderSide::Scripted,
            _ => {
                let ctrl = Leader::new(cfg.leader_params(leader_home))?;
                let plant = Plant::new(cfg.leader_plant_params(), leader_flange)?;
                let clamp = (kind == ScenarioKind::LeaderBode).then_some(leader_home);
                LeaderSide::Real(Box::new(LeaderStack {
                    ctrl,
                    plant,
                    clamp,
                    tcp: FrameState::from_pose(leader_home),
                    deflection: Delta6State::zero(),
                    wrench: Vec6::zeros(),
                    cmd: FrameState::from_pose(leader_flange),
                    setpoint_out: Vec6::zeros(),
                    fallback_since: None,
                    feedback_scale: 1.0,
                }))
            }
        };

        let follower_side = match kind {
            ScenarioKind::LeaderBode => FollowerSide::Injector,
            _ => {
                let ctrl = Follower::new(cfg.follower_params(follower_home))?;
                let plant = Plant::new(cfg.follower_plant_params(), follower_flange)?;
                let env = cfg.plate_enabled().then(|| EnvPlate {
                    surface_z: follower_home.position.z - cfg.environment.plate_below,
                    stiffness: cfg.environment.k_env,
                    friction: cfg.environment.mu,
                    vel_reg: 1e-3,
                });
                FollowerSide::Real(Box::new(FollowerStack {
                    ctrl,
                    plant,
                    env,
                    tcp: FrameState::from_pose(follower_home),
                    deflection: Delta6State::zero(),
                    wrench: Vec6::zeros(),
                    cmd: FrameState::from_pose(follower_flange),
                    wrench_out: Vec6::zeros(),
                    fallback: false,
                }))
            }
        };

        let mut fwd = Channel::new(cond, seed ^ 0xA5A5_0001)?;
        let mut rev = Channel::new(cond, seed ^ 0xA5A5_0002)?;
        let mut grip_fwd = Channel::new(cond, seed ^ 0xA5A5_0003)?;
        let mut grip_rev = Channel::new(cond, seed ^ 0xA5A5_0004)?;
        if kind == ScenarioKind::Outage {
            let (t0, t1) = (cfg.outage.start, cfg.outage.start + cfg.outage.duration);
            fwd.set_outage(t0, t1);
            rev.set_outage(t0, t1);
            grip_fwd.set_outage(t0, t1);
            grip_rev.set_outage(t0, t1);
        }

        let gripper = GripperSim::new(cfg.gripper_params());
        let grip_pos_read = gripper.opening;
        Ok(SessionGraph {
            rates,
            operator,
            leader_side,
            follower_side,
            fwd,
            rev,
            grip_fwd,
            grip_rev,
            gripper,
            d6,
            leader_home,
            follower_home,
            watchdog_timeout: cfg.watchdog.timeout,
            ramp_time: cfg.watchdog.ramp,
            grip_force_ref: cfg.gripper.force_ref,
            grip_pos_read,
            fwd_held: false,
            rev_held: false,
            prev_p_sum: 0.0,
            e_sum: 0.0,
        })
    }

    pub fn trace_meta(&self, seed: u64) -> TraceMeta {
        TraceMeta {
            base_hz: self.rates.base_hz as f64,
            seed,
            leader_home: self.leader_home,
            follower_home: self.follower_home,
        }
    }

    fn leader_physics(&mut self, t: f64, dt: f64) -> Result<()> {
        let LeaderSide::Real(stack) = &mut self.leader_side else { return Ok(()) };
        let flange = stack.plant.state;
        let free =
            se3::compose_plus(&flange, &FrameState::from_pose(self.d6.neutral))?.pose.as_vec6();
        let tcp_vec = if let Some(clamp) = stack.clamp {
            clamp.as_vec6()
        } else if let Some((offset, hand_k)) = self.operator.hand_offset(t) {
            // Quasi-static equilibrium of the hand spring against the wrist
            // springs, axis by axis.
            let script = self.leader_home.as_vec6() + offset;
            let wrist_k = self.d6.stiffness();
            let mut v = Vec6::zeros();
            for i in 0..6 {
                v[i] = (hand_k[i] * script[i] + wrist_k[i] * free[i]) / (hand_k[i] + wrist_k[i]);
            }
            v
        } else {
            free
        };
        let prev = stack.tcp.pose.as_vec6();
        let vel = if dt > 0.0 { (tcp_vec - prev) / dt } else { Vec6::zeros() };
        let pose = PoseXyz::from_vec6(&tcp_vec);
        stack.tcp = FrameState { pose, vel, acc: Vec6::zeros() };
        let rel = se3::to_transform(&flange.pose).inverse().compose(&se3::to_transform(&pose));
        let rel_state = FrameState::from_pose(se3::from_transform(&rel)?);
        stack.deflection = delta6::pose_to_deflection_saturated(&rel_state, &self.d6)?;
        stack.wrench = delta6::forward_wrench(&stack.deflection, &self.d6)?;
        Ok(())
    }

    fn follower_physics(&mut self, dt: f64) -> Result<()> {
        let FollowerSide::Real(stack) = &mut self.follower_side else { return Ok(()) };
        let flange = stack.plant.state;
        let free =
            se3::compose_plus(&flange, &FrameState::from_pose(self.d6.neutral))?.pose.as_vec6();
        let mut tcp_vec = free;
        if let Some(env) = &stack.env {
            let k = self.d6.stiffness();
            if free[2] < env.surface_z {
                // Series equilibrium of the wrist spring and the plate.
                tcp_vec[2] =
                    (k[2] * free[2] + env.stiffness * env.surface_z) / (k[2] + env.stiffness);
                let fz = env.stiffness * (env.surface_z - tcp_vec[2]);
                // Friction from the previous-tick sliding velocity, and the
                // lateral wrist deflection it causes.
                let vt = Vector3::new(stack.tcp.vel[0], stack.tcp.vel[1], 0.0);
                let speed = vt.norm();
                if speed > 0.0 {
                    let scale = env.friction * fz / (speed + env.vel_reg);
                    tcp_vec[0] += -vt.x * scale / k[0];
                    tcp_vec[1] += -vt.y * scale / k[1];
                }
            }
        }
        let prev = stack.tcp.pose.as_vec6();
        let vel = if dt > 0.0 { (tcp_vec - prev) / dt } else { Vec6::zeros() };
        let pose = PoseXyz::from_vec6(&tcp_vec);
        stack.tcp = FrameState { pose, vel, acc: Vec6::zeros() };
        let rel = se3::to_transform(&flange.pose).inverse().compose(&se3::to_transform(&pose));
        let rel_state = FrameState::from_pose(se3::from_transform(&rel)?);
        stack.deflection = delta6::pose_to_deflection_saturated(&rel_state, &self.d6)?;
        stack.wrench = delta6::forward_wrench(&stack.deflection, &self.d6)?;
        Ok(())
    }

    fn leader_loop_tick(&mut self, t: f64, dt: f64) -> Result<()> {
        let poll = self.rev.poll(t);
        self.rev_held = !poll.is_fresh();
        let watchdog = self.rev.watchdog(t, self.watchdog_timeout);
        let grip_read = self.grip_rev.poll(t).payload().map(|p| p[0]);
        let LeaderSide::Real(stack) = &mut self.leader_side else { return Ok(()) };
        match watchdog {
            Watchdog::Fallback => {
                if stack.fallback_since.is_none() {
                    stack.fallback_since = Some(t);
                }
            }
            Watchdog::Ok => stack.fallback_since = None,
        }
        stack.feedback_scale = match stack.fallback_since {
            Some(t0) if self.ramp_time > 0.0 => (1.0 - (t - t0) / self.ramp_time).clamp(0.0, 1.0),
            Some(_) => 0.0,
            None => 1.0,
        };
        let w_fb = poll.payload().unwrap_or_else(Vec6::zeros);
        let (cmd, setpoint) =
            stack.ctrl.tick(&stack.deflection, &w_fb, stack.feedback_scale, &self.d6, dt)?;
        stack.cmd = cmd;
        stack.setpoint_out = setpoint;
        if let Some(p) = grip_read {
            self.grip_pos_read = p;
        }
        Ok(())
    }

    fn follower_loop_tick(&mut self, t: f64, dt: f64) -> Result<()> {
        let poll = self.fwd.poll(t);
        self.fwd_held = !poll.is_fresh();
        let watchdog = self.fwd.watchdog(t, self.watchdog_timeout);
        let grip_ref = self.grip_fwd.poll(t).payload().map(|p| p[0]);
        let FollowerSide::Real(stack) = &mut self.follower_side else { return Ok(()) };
        stack.fallback = watchdog == Watchdog::Fallback;
        let setpoint = poll.payload();
        let flange = stack.plant.state;
        let (cmd, w_ext) = stack.ctrl.tick(
            &stack.deflection,
            &flange,
            setpoint.as_ref(),
            stack.fallback,
            &self.d6,
            dt,
        )?;
        stack.cmd = cmd;
        // Stream the reaction: the wrench applied to the environment.
        stack.wrench_out = -w_ext;

        // Gripper force-to-position servo on the held force reference.
        self.gripper.servo(grip_ref.unwrap_or(0.0), dt);
        Ok(())
    }

    fn tele_sends(&mut self, t: f64) {
        match &self.leader_side {
            LeaderSide::Real(stack) => {
                self.fwd.send(stack.setpoint_out, t);
            }
            LeaderSide::Scripted => {
                if let Some(offset) = self.operator.virtual_offset(t) {
                    let pose = pose_plus_offset(&self.leader_home, &offset);
                    if let Ok(sp) = leader_setpoint(&pose, &self.leader_home) {
                        self.fwd.send(sp, t);
                    }
                }
            }
        }
        let mut grip_msg = Vec6::zeros();
        grip_msg[0] = self.grip_force_ref;
        self.grip_fwd.send(grip_msg, t);

        match &self.follower_side {
            FollowerSide::Real(stack) => {
                self.rev.send(stack.wrench_out, t);
            }
            FollowerSide::Injector => {
                if let Some(w) = self.operator.injected_wrench(t) {
                    self.rev.send(w, t);
                }
            }
        }
        let mut grip_back = Vec6::zeros();
        grip_back[0] = self.gripper.opening;
        self.grip_rev.send(grip_back, t);
    }

    /// Advance one base tick and record the row.
    pub fn tick(&mut self, index: u64) -> Result<TraceRow> {
        let dt_base = 1.0 / self.rates.base_hz as f64;
        let t = index as f64 * dt_base;

        if index > 0 && index % self.rates.plant_div == 0 {
            let dt = dt_base * self.rates.plant_div as f64;
            if let LeaderSide::Real(stack) = &mut self.leader_side {
                let cmd = stack.cmd;
                stack.plant.step(&cmd, dt);
            }
            if let FollowerSide::Real(stack) = &mut self.follower_side {
                let cmd = stack.cmd;
                stack.plant.step(&cmd, dt);
            }
            self.leader_physics(t, dt)?;
            self.follower_physics(dt)?;
            self.gripper.step(dt);
        }
        if index % self.rates.leader_loop_div == 0 {
            let dt = dt_base * self.rates.leader_loop_div as f64;
            self.leader_loop_tick(t, dt)?;
        }
        if index % self.rates.follower_loop_div == 0 {
            let dt = dt_base * self.rates.follower_loop_div as f64;
            self.follower_loop_tick(t, dt)?;
        }
        if index % self.rates.tele_div == 0 {
            self.tele_sends(t);
        }

        // Power bookkeeping from the wrist wrenches and TCP velocities.
        let p_in = match &self.leader_side {
            LeaderSide::Real(stack) => stack.wrench.dot(&stack.tcp.vel),
            LeaderSide::Scripted => 0.0,
        };
        let p_out = match &self.follower_side {
            FollowerSide::Real(stack) => (-stack.wrench).dot(&stack.tcp.vel),
            FollowerSide::Injector => 0.0,
        };
        let p_sum = p_in - p_out;
        if index > 0 {
            self.e_sum += 0.5 * (p_sum + self.prev_p_sum) * dt_base;
        }
        self.prev_p_sum = p_sum;

        Ok(self.record(t, p_in, p_out, p_sum))
    }

    fn record(&self, t: f64, p_in: f64, p_out: f64, p_sum: f64) -> TraceRow {
        let leader = match &self.leader_side {
            LeaderSide::Real(stack) => SideSample {
                tcp: stack.tcp.pose.as_vec6(),
                tcp_vel: stack.tcp.vel,
                target: stack.ctrl.state.target.pose.as_vec6(),
                wrench: stack.wrench,
                wrench_ref: stack.ctrl.state.haptic_ref,
                flange_cmd: stack.cmd.pose.as_vec6(),
            },
            LeaderSide::Scripted => {
                let pose = self
                    .operator
                    .virtual_offset(t)
                    .map(|off| pose_plus_offset(&self.leader_home, &off))
                    .unwrap_or(self.leader_home);
                SideSample {
                    tcp: pose.as_vec6(),
                    tcp_vel: Vec6::zeros(),
                    target: pose.as_vec6(),
                    wrench: Vec6::zeros(),
                    wrench_ref: Vec6::zeros(),
                    flange_cmd: Vec6::zeros(),
                }
            }
        };
        let follower = match &self.follower_side {
            FollowerSide::Real(stack) => SideSample {
                tcp: stack.tcp.pose.as_vec6(),
                tcp_vel: stack.tcp.vel,
                target: stack.ctrl.state.target.as_vec6(),
                wrench: stack.wrench,
                wrench_ref: stack.ctrl.state.last_w_ref,
                flange_cmd: stack.cmd.pose.as_vec6(),
            },
            FollowerSide::Injector => {
                let w = self.operator.injected_wrench(t).unwrap_or_else(Vec6::zeros);
                SideSample {
                    tcp: Vec6::zeros(),
                    tcp_vel: Vec6::zeros(),
                    target: Vec6::zeros(),
                    wrench: w,
                    wrench_ref: w,
                    flange_cmd: Vec6::zeros(),
                }
            }
        };
        let channel = ChannelSample {
            fwd_seq: self.fwd.last_seq(),
            fwd_held: self.fwd_held,
            rev_seq: self.rev.last_seq(),
            rev_held: self.rev_held,
            leader_fallback: matches!(
                &self.leader_side,
                LeaderSide::Real(s) if s.fallback_since.is_some()
            ),
            follower_fallback: matches!(
                &self.follower_side,
                FollowerSide::Real(s) if s.fallback
            ),
        };
        let gripper = GripperSample {
            force_ref: self.grip_force_ref,
            pos_ref: self.gripper.cmd_opening,
            pos: self.gripper.opening,
            pos_read: self.grip_pos_read,
            force: self.gripper.force,
        };
        TraceRow {
            t,
            leader,
            follower,
            channel,
            gripper,
            power: PowerSample { p_in, p_out, p_sum, e_sum: self.e_sum },
        }
    }
}
