//! Per-tick signal log: the substrate for every analysis and acceptance test.
//!
//! One row per base tick, uniform time base, append-only. The CSV schema is
//! fixed: a single header row, SI units throughout, floats printed with nine
//! significant digits, counters and flags as plain integers.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::se3::{PoseXyz, Vec6};

/// Signals of one arm at one tick. Poses are `[x,y,z,roll,pitch,yaw]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideSample {
    /// Measured TCP pose.
    pub tcp: Vec6,
    /// Measured TCP velocity.
    pub tcp_vel: Vec6,
    /// Desired TCP pose (admittance target / reconstructed setpoint).
    pub target: Vec6,
    /// Wrench measured by the wrist (leader: hand wrench; follower: external).
    pub wrench: Vec6,
    /// Reference wrench (leader: post-filter haptic ref; follower: impedance
    /// reference).
    pub wrench_ref: Vec6,
    /// Commanded flange pose.
    pub flange_cmd: Vec6,
}

impl SideSample {
    pub fn zero() -> Self {
        Self {
            tcp: Vec6::zeros(),
            tcp_vel: Vec6::zeros(),
            target: Vec6::zeros(),
            wrench: Vec6::zeros(),
            wrench_ref: Vec6::zeros(),
            flange_cmd: Vec6::zeros(),
        }
    }
}

/// Channel bookkeeping at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelSample {
    /// Last delivered setpoint sequence (forward channel), if any.
    pub fwd_seq: Option<u64>,
    /// Forward payload was held (no fresh delivery at the last loop tick).
    pub fwd_held: bool,
    pub rev_seq: Option<u64>,
    pub rev_held: bool,
    /// Watchdog fallback engaged per side.
    pub leader_fallback: bool,
    pub follower_fallback: bool,
}

/// Gripper channel values at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GripperSample {
    /// Force reference written by the leader (N).
    pub force_ref: f64,
    /// Position reference written on the follower (m).
    pub pos_ref: f64,
    /// Gripper opening (m).
    pub pos: f64,
    /// Opening as read back on the leader through the channel (m).
    pub pos_read: f64,
    /// Measured interaction force (N).
    pub force: f64,
}

/// Power bookkeeping at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerSample {
    /// Operator power into the leader TCP (W).
    pub p_in: f64,
    /// Power delivered to the environment by the follower TCP (W).
    pub p_out: f64,
    /// Net power `p_in - p_out` (W).
    pub p_sum: f64,
    /// Running trapezoidal integral of `p_sum` (J).
    pub e_sum: f64,
}

/// One base-tick record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub leader: SideSample,
    pub follower: SideSample,
    pub channel: ChannelSample,
    pub gripper: GripperSample,
    pub power: PowerSample,
}

/// Scenario identity recorded alongside the rows.
#[derive(Debug, Clone, Serialize)]
pub struct TraceMeta {
    pub base_hz: f64,
    pub seed: u64,
    /// Leader TCP pose at t = 0.
    pub leader_home: PoseXyz,
    /// Follower TCP pose at t = 0.
    pub follower_home: PoseXyz,
}

/// Completed per-tick log.
#[derive(Debug, Clone)]
pub struct TraceLog {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

const POSE_SUFFIX: [&str; 6] = ["x", "y", "z", "rx", "ry", "rz"];
const WRENCH_SUFFIX: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

/// CSV column names, in file order.
pub fn columns() -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for side in ["l", "f"] {
        for s in POSE_SUFFIX {
            cols.push(format!("{side}_{s}"));
        }
        for s in POSE_SUFFIX {
            cols.push(format!("{side}_v{s}"));
        }
        for s in POSE_SUFFIX {
            cols.push(format!("{side}_xd_{s}"));
        }
        for s in WRENCH_SUFFIX {
            cols.push(format!("{side}_w_{s}"));
        }
        for s in WRENCH_SUFFIX {
            cols.push(format!("{side}_wref_{s}"));
        }
        for s in POSE_SUFFIX {
            cols.push(format!("{side}_cmd_{s}"));
        }
    }
    for c in ["fwd_seq", "fwd_held", "rev_seq", "rev_held", "l_fallback", "f_fallback"] {
        cols.push(c.to_string());
    }
    for c in ["grip_force_ref", "grip_pos_ref", "grip_pos", "grip_pos_read", "grip_force"] {
        cols.push(c.to_string());
    }
    for c in ["p_in", "p_out", "p_sum", "e_sum"] {
        cols.push(c.to_string());
    }
    cols
}

impl TraceRow {
    fn float_block(out: &mut Vec<f64>, side: &SideSample) {
        out.extend(side.tcp.iter());
        out.extend(side.tcp_vel.iter());
        out.extend(side.target.iter());
        out.extend(side.wrench.iter());
        out.extend(side.wrench_ref.iter());
        out.extend(side.flange_cmd.iter());
    }

    /// All float-valued cells in column order (excludes counters/flags).
    pub fn float_values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        Self::float_block(&mut v, &self.leader);
        Self::float_block(&mut v, &self.follower);
        v.push(self.gripper.force_ref);
        v.push(self.gripper.pos_ref);
        v.push(self.gripper.pos);
        v.push(self.gripper.pos_read);
        v.push(self.gripper.force);
        v.push(self.power.p_in);
        v.push(self.power.p_out);
        v.push(self.power.p_sum);
        v.push(self.power.e_sum);
        v
    }
}

fn fmt_seq(seq: Option<u64>) -> String {
    match seq {
        Some(s) => s.to_string(),
        None => "-1".to_string(),
    }
}

impl TraceLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", columns().join(","))?;
        let mut line = String::with_capacity(2048);
        for row in &self.rows {
            line.clear();
            line.push_str(&format!("{:.8e}", row.t));
            let push_block = |line: &mut String, side: &SideSample| {
                for v in [
                    &side.tcp,
                    &side.tcp_vel,
                    &side.target,
                    &side.wrench,
                    &side.wrench_ref,
                    &side.flange_cmd,
                ] {
                    for c in v.iter() {
                        line.push_str(&format!(",{c:.8e}"));
                    }
                }
            };
            push_block(&mut line, &row.leader);
            push_block(&mut line, &row.follower);
            line.push_str(&format!(
                ",{},{},{},{},{},{}",
                fmt_seq(row.channel.fwd_seq),
                row.channel.fwd_held as u8,
                fmt_seq(row.channel.rev_seq),
                row.channel.rev_held as u8,
                row.channel.leader_fallback as u8,
                row.channel.follower_fallback as u8,
            ));
            for v in [
                row.gripper.force_ref,
                row.gripper.pos_ref,
                row.gripper.pos,
                row.gripper.pos_read,
                row.gripper.force,
                row.power.p_in,
                row.power.p_out,
                row.power.p_sum,
                row.power.e_sum,
            ] {
                line.push_str(&format!(",{v:.8e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Error if any cell is non-finite.
    pub fn check_finite(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for v in row.float_values() {
                if !v.is_finite() {
                    return Err(Error::Scenario(format!("non-finite value in trace row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Extract one series.
    pub fn series(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn duration(&self) -> f64 {
        self.rows.last().map(|r| r.t).unwrap_or(0.0)
    }

    pub fn sample_hz(&self) -> f64 {
        self.meta.base_hz
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn dummy_log(n: usize) -> TraceLog {
        let rows = (0..n)
            .map(|i| TraceRow {
                t: i as f64 / 750.0,
                leader: SideSample::zero(),
                follower: SideSample::zero(),
                channel: ChannelSample::default(),
                gripper: GripperSample::default(),
                power: PowerSample::default(),
            })
            .collect();
        TraceLog {
            meta: TraceMeta {
                base_hz: 750.0,
                seed: 1,
                leader_home: PoseXyz::new(Vector3::zeros(), Vector3::zeros()),
                follower_home: PoseXyz::new(Vector3::zeros(), Vector3::zeros()),
            },
            rows,
        }
    }

    #[test]
    fn header_matches_row_width() {
        let log = dummy_log(3);
        let csv = log.to_csv_string();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        let ncols = header.split(',').count();
        assert_eq!(ncols, columns().len());
        for line in lines {
            assert_eq!(line.split(',').count(), ncols);
        }
    }

    #[test]
    fn finite_check_catches_nan() {
        let mut log = dummy_log(2);
        log.rows[1].power.p_in = f64::NAN;
        assert!(log.check_finite().is_err());
    }
}
