//! Scenario configuration: flat key-value sections mirroring the module
//! parameter names, loadable from TOML, with defaults reproducing the
//! reference controller/timing/network setup so a bare invocation runs the
//! standard configuration.
//!
//! Unknown keys are rejected. The fully resolved configuration serializes to
//! JSON as the provenance sidecar written next to every output file.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::delta6::Delta6Params;
use crate::error::{Error, Result};
use crate::filters::NotchParams;
use crate::follower::FollowerParams;
use crate::leader::LeaderParams;
use crate::netem::NetworkCondition;
use crate::se3::{PoseXyz, Vec6};
use crate::sim::operator::DragLiftScript;
use crate::sim::plant::PlantParams;
use crate::sim::GripperParams;

/// Scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    LeaderBode,
    FollowerBode,
    Collision,
    Passivity,
    Outage,
    NetemValidate,
    Run,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioKind::LeaderBode => "leader-bode",
            ScenarioKind::FollowerBode => "follower-bode",
            ScenarioKind::Collision => "collision",
            ScenarioKind::Passivity => "passivity",
            ScenarioKind::Outage => "outage",
            ScenarioKind::NetemValidate => "netem-validate",
            ScenarioKind::Run => "run",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
    /// Simulated duration (s); `None` resolves to a per-kind default.
    pub duration: Option<f64>,
    pub seed: u64,
    /// Settling time discarded before frequency-response measurement (s).
    pub settle: f64,
    /// Measurement length in whole excitation cycles.
    pub cycles: u32,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { kind: ScenarioKind::Run, duration: None, seed: 1, settle: 5.0, cycles: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesSection {
    /// Hardware servo rate (Hz).
    pub f_c: u32,
    /// Leader admittance rate (Hz).
    pub f_admt: u32,
    /// Follower impedance rate (Hz).
    pub f_impd: u32,
    /// Teleoperation message rate (Hz).
    pub f_tele: u32,
}

impl Default for RatesSection {
    fn default() -> Self {
        Self { f_c: 250, f_admt: 150, f_impd: 150, f_tele: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Named condition: local | good | fair | poor.
    pub condition: String,
    /// Explicit overrides (take precedence over the named condition).
    pub mean_delay_ms: Option<f64>,
    pub std_delay_ms: Option<f64>,
    pub loss_pct: Option<f64>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self { condition: "local".into(), mean_delay_ms: None, std_delay_ms: None, loss_pct: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaderSection {
    /// Cartesian damping (N*s/m, N*m*s/rad).
    #[serde(rename = "B")]
    pub b: [f64; 6],
    /// Flange pose at start (m).
    pub home_flange: [f64; 3],
}

impl Default for LeaderSection {
    fn default() -> Self {
        Self { b: [60.0, 60.0, 100.0, 0.3, 0.3, 0.2], home_flange: [0.35, 0.0, 0.30] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NotchSection {
    /// Center frequency, all axes (Hz).
    pub f0: f64,
    /// Sharpness, all axes.
    pub kappa: f64,
    /// Depth in [0, 1], all axes; 0 bypasses the filter.
    pub lambda: f64,
}

impl Default for NotchSection {
    fn default() -> Self {
        Self { f0: 1.0, kappa: 1.2, lambda: 0.27 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerSection {
    /// Virtual stiffness (N/m, N*m/rad).
    #[serde(rename = "K")]
    pub k: [f64; 6],
    /// Virtual damping (N*s/m, N*m*s/rad).
    #[serde(rename = "B")]
    pub b: [f64; 6],
    /// Velocity-error filter time constant (s).
    pub tau_v: f64,
    /// PID gains in mm/N (translation) and mrad/(N*m) (rotation).
    pub k_p: [f64; 6],
    pub k_i: [f64; 6],
    pub k_d: [f64; 6],
    /// Integrator clamp (N*s, N*m*s).
    pub i_limit: [f64; 6],
    /// Flange pose at start (m).
    pub home_flange: [f64; 3],
}

impl Default for FollowerSection {
    fn default() -> Self {
        Self {
            k: [300.0, 300.0, 500.0, 2.4, 2.4, 1.2],
            b: [2.0, 2.0, 3.0, 0.2, 0.2, 0.1],
            tau_v: 0.03,
            k_p: [0.1, 0.1, 0.25, 20.0, 20.0, 40.0],
            k_i: [0.01, 0.01, 0.02, 5.0, 5.0, 10.0],
            k_d: [0.0; 6],
            i_limit: [0.5, 0.5, 0.5, 0.05, 0.05, 0.05],
            home_flange: [0.45, 0.0, 0.40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Delta6Section {
    /// Rotational spring stiffness (N*m/rad).
    pub k_s: f64,
    /// Translational spring stiffness (N/m); placeholder for the physical
    /// device, which does not publish this value.
    pub k_trans: f64,
    /// Flange-to-TCP offset at zero load (m); placeholder geometry.
    pub neutral: [f64; 3],
    pub deflection_limit_trans: f64,
    pub deflection_limit_rot: f64,
}

impl Default for Delta6Section {
    fn default() -> Self {
        Self {
            k_s: 0.64,
            k_trans: 2000.0,
            neutral: [0.0, 0.0, -0.05],
            deflection_limit_trans: 0.02,
            deflection_limit_rot: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantSection {
    /// Servo natural frequency (Hz).
    pub natural_freq: f64,
    pub damping_ratio: f64,
    /// Pass commands through unchanged (delay-isolation test mode).
    pub ideal: bool,
    pub vel_limit_trans: f64,
    pub vel_limit_rot: f64,
    pub acc_limit_trans: f64,
    pub acc_limit_rot: f64,
}

impl PlantSection {
    fn with_dynamics(natural_freq: f64, damping_ratio: f64) -> Self {
        Self {
            natural_freq,
            damping_ratio,
            ideal: false,
            vel_limit_trans: 2.0,
            vel_limit_rot: 10.0,
            acc_limit_trans: 200.0,
            acc_limit_rot: 1000.0,
        }
    }
}

impl Default for PlantSection {
    fn default() -> Self {
        Self::with_dynamics(10.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantsSection {
    pub leader: PlantSection,
    pub follower: PlantSection,
}

impl Default for PlantsSection {
    fn default() -> Self {
        // The leader servo is deliberately sluggish (overdamped, dominant
        // pole well below 1 Hz) so the admittance gain peak sits in the low
        // single-Hz band. The follower servo must sit well above the
        // impedance loop: the outer loop re-issues a pose offset each tick,
        // so the servo pole directly caps the cascade bandwidth.
        Self {
            leader: PlantSection::with_dynamics(2.5, 3.2),
            follower: PlantSection::with_dynamics(100.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    /// Plate present; `None` resolves per scenario kind.
    pub plate: Option<bool>,
    /// Plate surface distance below the follower TCP home (m).
    pub plate_below: f64,
    /// Plate contact stiffness (N/m).
    pub k_env: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        Self { plate: None, plate_below: 0.192, k_env: 5e4, mu: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WatchdogSection {
    /// Silence threshold before fallback (s).
    pub timeout: f64,
    /// Haptic-reference ramp-down time after fallback (s).
    pub ramp: f64,
}

impl Default for WatchdogSection {
    fn default() -> Self {
        Self { timeout: 0.5, ramp: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    /// Excitation/scripted axis (0..5).
    pub axis: usize,
    /// Wrench-injection sine amplitude (N).
    pub amplitude: f64,
    /// Motion-setpoint sine amplitude (m).
    pub motion_amplitude: f64,
    /// Excitation frequency (Hz).
    pub freq: f64,
    /// Descent speed for the collision scenario (m/s).
    pub speed: f64,
    /// Descent target below home for the collision scenario (m).
    pub target_below: f64,
    /// Contact-drag-lift repetitions.
    pub reps: usize,
    /// Normal-force target for the drag-lift script (N).
    pub contact_force: f64,
    /// Hand-spring stiffness for the bilateral operator (N/m, N*m/rad).
    pub hand_stiffness: [f64; 6],
    /// Lateral drag distance (m).
    pub drag_dist: f64,
    /// Depth below home after lift-off (m).
    pub lift_depth: f64,
    /// Script lead-in before motion starts (s).
    pub lead_in: f64,
    pub t_descend: f64,
    pub t_hold: f64,
    pub t_drag: f64,
    pub t_lift: f64,
    pub t_return: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self {
            axis: 2,
            amplitude: 1.0,
            motion_amplitude: 0.010,
            freq: 1.5,
            speed: 0.05,
            target_below: 0.200,
            reps: 3,
            contact_force: 3.0,
            hand_stiffness: [400.0, 400.0, 400.0, 5.0, 5.0, 5.0],
            drag_dist: 0.06,
            lift_depth: 0.10,
            lead_in: 0.5,
            t_descend: 2.5,
            t_hold: 1.5,
            t_drag: 2.0,
            t_lift: 1.0,
            t_return: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripperSection {
    pub object_width: f64,
    pub k_grip: f64,
    pub max_open: f64,
    pub servo_gain: f64,
    pub time_const: f64,
    /// Constant force reference the leader writes (N); 0 keeps it open.
    pub force_ref: f64,
}

impl Default for GripperSection {
    fn default() -> Self {
        Self {
            object_width: 0.03,
            k_grip: 1e4,
            max_open: 0.08,
            servo_gain: 0.01,
            time_const: 0.05,
            force_ref: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutageSection {
    /// Outage start (s).
    pub start: f64,
    /// Outage length (s).
    pub duration: f64,
}

impl Default for OutageSection {
    fn default() -> Self {
        Self { start: 5.0, duration: 2.0 }
    }
}

/// Complete scenario configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub rates: RatesSection,
    pub network: NetworkSection,
    pub leader: LeaderSection,
    pub notch: NotchSection,
    pub follower: FollowerSection,
    pub delta6: Delta6Section,
    pub plant: PlantsSection,
    pub environment: EnvironmentSection,
    pub watchdog: WatchdogSection,
    pub operator: OperatorSection,
    pub gripper: GripperSection,
    pub outage: OutageSection,
}

fn vec6(a: &[f64; 6]) -> Vec6 {
    Vec6::from_row_slice(a)
}

fn vec3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::from_row_slice(a)
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(s).map_err(|e| Error::Config(format!("parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Fully resolved configuration as pretty JSON (provenance sidecar).
    pub fn resolved_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.f_c == 0
            || self.rates.f_admt == 0
            || self.rates.f_impd == 0
            || self.rates.f_tele == 0
        {
            return Err(Error::Config("all rates must be positive".into()));
        }
        if self.rates.f_admt % self.rates.f_tele != 0 || self.rates.f_impd % self.rates.f_tele != 0
        {
            return Err(Error::Config(
                "teleoperation rate must divide the control-loop rates".into(),
            ));
        }
        self.network_condition()?;
        self.delta6_params()?;
        if self.environment.k_env < 50.0 * self.follower.k[2] {
            return Err(Error::Config(format!(
                "plate stiffness {} must be at least 50x the virtual stiffness {}",
                self.environment.k_env, self.follower.k[2]
            )));
        }
        Ok(())
    }

    pub fn network_condition(&self) -> Result<NetworkCondition> {
        let mut cond = NetworkCondition::by_name(&self.network.condition)?;
        if let Some(m) = self.network.mean_delay_ms {
            cond.mean_delay = m * 1e-3;
        }
        if let Some(s) = self.network.std_delay_ms {
            cond.std_delay = s * 1e-3;
        }
        if let Some(l) = self.network.loss_pct {
            cond.loss_prob = l / 100.0;
        }
        cond.validate()?;
        Ok(cond)
    }

    pub fn delta6_params(&self) -> Result<Delta6Params> {
        let d = &self.delta6;
        let p = Delta6Params {
            k_trans: Vector3::repeat(d.k_trans),
            k_rot: Vector3::repeat(d.k_s),
            neutral: PoseXyz::new(vec3(&d.neutral), Vector3::zeros()),
            deflection_limits: Vec6::new(
                d.deflection_limit_trans,
                d.deflection_limit_trans,
                d.deflection_limit_trans,
                d.deflection_limit_rot,
                d.deflection_limit_rot,
                d.deflection_limit_rot,
            ),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn notch_params(&self) -> NotchParams {
        NotchParams::uniform(
            self.notch.f0,
            self.notch.kappa,
            self.notch.lambda,
            self.rates.f_admt as f64,
        )
    }

    /// Leader parameters for a TCP home captured at session build.
    pub fn leader_params(&self, home: PoseXyz) -> LeaderParams {
        LeaderParams {
            damping: vec6(&self.leader.b),
            notch: self.notch_params(),
            rate_hz: self.rates.f_admt as f64,
            home,
        }
    }

    /// Follower parameters for a TCP home captured at session build.
    ///
    /// The tabulated PID gains are in mm/N and mrad/(N*m); they scale by
    /// 1e-3 into SI here.
    pub fn follower_params(&self, home: PoseXyz) -> FollowerParams {
        let f = &self.follower;
        FollowerParams {
            stiffness: vec6(&f.k),
            damping: vec6(&f.b),
            tau_v: f.tau_v,
            kp: vec6(&f.k_p) * 1e-3,
            ki: vec6(&f.k_i) * 1e-3,
            kd: vec6(&f.k_d) * 1e-3,
            i_limit: vec6(&f.i_limit),
            rate_hz: self.rates.f_impd as f64,
            home,
        }
    }

    fn plant_params(section: &PlantSection, rate_hz: f64) -> PlantParams {
        PlantParams {
            natural_freq_hz: section.natural_freq,
            damping_ratio: section.damping_ratio,
            rate_hz,
            vel_limit: Vec6::new(
                section.vel_limit_trans,
                section.vel_limit_trans,
                section.vel_limit_trans,
                section.vel_limit_rot,
                section.vel_limit_rot,
                section.vel_limit_rot,
            ),
            acc_limit: Vec6::new(
                section.acc_limit_trans,
                section.acc_limit_trans,
                section.acc_limit_trans,
                section.acc_limit_rot,
                section.acc_limit_rot,
                section.acc_limit_rot,
            ),
            ideal: section.ideal,
        }
    }

    pub fn leader_plant_params(&self) -> PlantParams {
        Self::plant_params(&self.plant.leader, self.rates.f_c as f64)
    }

    pub fn follower_plant_params(&self) -> PlantParams {
        Self::plant_params(&self.plant.follower, self.rates.f_c as f64)
    }

    pub fn gripper_params(&self) -> GripperParams {
        GripperParams {
            max_open: self.gripper.max_open,
            servo_gain: self.gripper.servo_gain,
            time_const: self.gripper.time_const,
            k_contact: self.gripper.k_grip,
            object_width: Some(self.gripper.object_width),
        }
    }

    /// Whether the contact plate is present, resolved per scenario kind when
    /// not set explicitly.
    pub fn plate_enabled(&self) -> bool {
        self.environment.plate.unwrap_or(match self.scenario.kind {
            ScenarioKind::Collision | ScenarioKind::Passivity | ScenarioKind::Outage => true,
            ScenarioKind::LeaderBode
            | ScenarioKind::FollowerBode
            | ScenarioKind::NetemValidate
            | ScenarioKind::Run => false,
        })
    }

    /// Drag-lift script with the press depth compensated for the hand-spring
    /// compliance so the steady normal force lands near `contact_force`.
    pub fn drag_lift_script(&self) -> DragLiftScript {
        let o = &self.operator;
        let k_z = self.follower.k[2];
        let hand_k_z = o.hand_stiffness[2];
        let press_depth =
            self.environment.plate_below + (o.contact_force / k_z) * (1.0 + k_z / hand_k_z);
        DragLiftScript {
            reps: o.reps,
            press_depth,
            drag_dist: o.drag_dist,
            lift_depth: o.lift_depth,
            lead_in: o.lead_in,
            t_descend: o.t_descend,
            t_hold: o.t_hold,
            t_drag: o.t_drag,
            t_lift: o.t_lift,
            t_return: o.t_return,
        }
    }

    /// Simulated duration, resolving the per-kind default.
    pub fn duration(&self) -> f64 {
        if let Some(d) = self.scenario.duration {
            return d;
        }
        match self.scenario.kind {
            ScenarioKind::LeaderBode | ScenarioKind::FollowerBode => {
                self.scenario.settle + self.scenario.cycles as f64 / self.operator.freq + 1.0
            }
            ScenarioKind::Collision => 10.0,
            ScenarioKind::Passivity => self.drag_lift_script().total_duration() + 1.0,
            ScenarioKind::Outage => 12.0,
            ScenarioKind::NetemValidate => 0.0,
            ScenarioKind::Run => 10.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_reproduce_reference_tables() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.rates.f_c, 250);
        assert_eq!(cfg.rates.f_admt, 150);
        assert_eq!(cfg.rates.f_tele, 50);
        assert_eq!(cfg.leader.b, [60.0, 60.0, 100.0, 0.3, 0.3, 0.2]);
        assert_eq!(cfg.notch.f0, 1.0);
        assert_eq!(cfg.notch.kappa, 1.2);
        assert_eq!(cfg.notch.lambda, 0.27);
        assert_eq!(cfg.follower.k, [300.0, 300.0, 500.0, 2.4, 2.4, 1.2]);
        assert_eq!(cfg.follower.b, [2.0, 2.0, 3.0, 0.2, 0.2, 0.1]);
        assert_eq!(cfg.follower.tau_v, 0.03);
        assert_eq!(cfg.follower.k_p, [0.1, 0.1, 0.25, 20.0, 20.0, 40.0]);
        assert_eq!(cfg.follower.k_i, [0.01, 0.01, 0.02, 5.0, 5.0, 10.0]);
        assert_eq!(cfg.delta6.k_s, 0.64);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_unknown_key_rejection() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            [scenario]
            kind = "collision"
            seed = 7

            [network]
            condition = "good"

            [operator]
            speed = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.kind, ScenarioKind::Collision);
        assert_eq!(cfg.scenario.seed, 7);
        assert_eq!(cfg.operator.speed, 0.2);
        assert_eq!(cfg.network_condition().unwrap(), NetworkCondition::good());

        let err = ScenarioConfig::from_toml_str("[scenario]\nbogus_key = 1\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn incompatible_rates_are_rejected() {
        let err = ScenarioConfig::from_toml_str("[rates]\nf_tele = 40\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn network_overrides_apply() {
        let cfg =
            ScenarioConfig::from_toml_str("[network]\ncondition = \"good\"\nloss_pct = 2.0\n")
                .unwrap();
        let cond = cfg.network_condition().unwrap();
        assert_eq!(cond.mean_delay, 0.040);
        assert_eq!(cond.loss_prob, 0.02);
    }

    #[test]
    fn pid_gains_scale_to_si() {
        let cfg = ScenarioConfig::default();
        let p = cfg.follower_params(PoseXyz::identity());
        assert!((p.kp[2] - 0.25e-3).abs() < 1e-18);
        assert!((p.ki[5] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn resolved_json_is_deterministic() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.resolved_json(), cfg.resolved_json());
    }
}
