//! Fixed-step multi-rate scheduler plus the simulated hardware: servo
//! plants, contact environment, gripper stub and scripted operator models.
//!
//! The base tick is the least common multiple of the hardware servo rate,
//! the two control-loop rates and the teleoperation message rate (750 Hz for
//! the default 250/150/150/50). Each subsystem fires every `div`-th base
//! tick, so the whole simulation is an integer schedule and, given a seed,
//! fully deterministic.

pub mod environment;
pub mod gripper;
pub mod operator;
pub mod plant;
pub mod trace;

pub use environment::EnvPlate;
pub use gripper::{GripperParams, GripperSim};
pub use operator::Operator;
pub use plant::{Plant, PlantParams};
pub use trace::{TraceLog, TraceRow};

use crate::config::{RatesSection, ScenarioConfig};
use crate::error::{Error, Result};
use crate::session::SessionGraph;

/// Base tick rate and the integer divisors at which each subsystem fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateSet {
    pub base_hz: u32,
    pub plant_div: u64,
    pub leader_loop_div: u64,
    pub follower_loop_div: u64,
    pub tele_div: u64,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / gcd(a, b) * b
}

impl RateSet {
    /// Least-common-multiple schedule; rates that do not divide evenly are
    /// rejected rather than approximated.
    pub fn from_config(rates: &RatesSection) -> Result<RateSet> {
        if rates.f_c == 0 || rates.f_admt == 0 || rates.f_impd == 0 || rates.f_tele == 0 {
            return Err(Error::Config("all rates must be positive".into()));
        }
        let base = lcm(lcm(rates.f_c, rates.f_admt), lcm(rates.f_impd, rates.f_tele));
        if base > 1_000_000 {
            return Err(Error::Config(format!(
                "base rate {base} Hz is impractically high; choose commensurate rates"
            )));
        }
        Ok(RateSet {
            base_hz: base,
            plant_div: (base / rates.f_c) as u64,
            leader_loop_div: (base / rates.f_admt) as u64,
            follower_loop_div: (base / rates.f_impd) as u64,
            tele_div: (base / rates.f_tele) as u64,
        })
    }

    pub fn base_dt(&self) -> f64 {
        1.0 / self.base_hz as f64
    }
}

/// Run one scenario to completion and return its trace.
pub fn schedule(cfg: &ScenarioConfig) -> Result<TraceLog> {
    let mut session = SessionGraph::build(cfg)?;
    let duration = cfg.duration();
    let steps = (duration * session.rates.base_hz as f64).round() as u64 + 1;
    let mut rows = Vec::with_capacity(steps as usize);
    for i in 0..steps {
        rows.push(session.tick(i)?);
    }
    Ok(TraceLog { meta: session.trace_meta(cfg.scenario.seed), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioKind;

    #[test]
    fn default_rates_produce_750_hz_base_with_expected_divisors() {
        let rs = RateSet::from_config(&RatesSection::default()).unwrap();
        assert_eq!(rs.base_hz, 750);
        assert_eq!(rs.plant_div, 3);
        assert_eq!(rs.leader_loop_div, 5);
        assert_eq!(rs.follower_loop_div, 5);
        assert_eq!(rs.tele_div, 15);
    }

    #[test]
    fn pathological_rates_are_rejected() {
        let rates = RatesSection { f_c: 997, f_admt: 151, f_impd: 151, f_tele: 49 };
        assert!(RateSet::from_config(&rates).is_err());
    }

    #[test]
    fn degenerate_single_tick_run_has_one_row() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Run;
        cfg.scenario.duration = Some(0.0);
        let log = schedule(&cfg).unwrap();
        assert_eq!(log.rows.len(), 1);
        assert_eq!(log.rows[0].t, 0.0);
        log.check_finite().unwrap();
    }

    #[test]
    fn identical_seeds_give_bit_identical_traces() {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Passivity;
        cfg.scenario.duration = Some(1.0);
        cfg.network.condition = "poor".into();
        let a = schedule(&cfg).unwrap().to_csv_string();
        let b = schedule(&cfg).unwrap().to_csv_string();
        assert_eq!(a, b);
        cfg.scenario.seed = 2;
        let c = schedule(&cfg).unwrap().to_csv_string();
        assert_ne!(a, c);
    }
}
