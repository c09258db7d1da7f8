//! Post-processing over completed traces: single-bin DFT frequency-response
//! estimation, collision/compliance metrics and the passivity energy ledger.

use nalgebra::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ScenarioConfig, ScenarioKind};
use crate::error::{Error, Result};
use crate::se3::Vec6;
use crate::sim::{self, TraceLog};

/// One gain/phase sample of a swept response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BodePoint {
    pub freq: f64,
    pub mag_db: f64,
    /// Wrapped to (-360, 0] for lag presentation.
    pub phase_deg: f64,
}

/// Complex single-bin correlation over an integer number of cycles starting
/// after the settling window.
fn single_bin(series: &[f64], sample_hz: f64, freq: f64, start: usize, len: usize) -> Complex<f64> {
    let mut acc = Complex::new(0.0, 0.0);
    for k in start..start + len {
        let phase = 2.0 * std::f64::consts::PI * freq * k as f64 / sample_hz;
        acc += Complex::new(phase.cos(), -phase.sin()) * series[k];
    }
    acc
}

fn wrap_lag_deg(deg: f64) -> f64 {
    let mut p = deg;
    while p > 0.0 {
        p -= 360.0;
    }
    while p <= -360.0 {
        p += 360.0;
    }
    p
}

/// Gain and phase of `output` relative to `input` at `freq`, measured by
/// single-bin DFT correlation over whole cycles after `settle` seconds.
pub fn bode_point(
    input: &[f64],
    output: &[f64],
    sample_hz: f64,
    freq: f64,
    settle: f64,
) -> Result<BodePoint> {
    if input.len() != output.len() {
        return Err(Error::InsufficientData(format!(
            "series lengths differ: {} vs {}",
            input.len(),
            output.len()
        )));
    }
    if !(freq > 0.0 && sample_hz > 0.0) {
        return Err(Error::InsufficientData("frequency and rate must be positive".into()));
    }
    let start = (settle * sample_hz).ceil() as usize;
    if start >= input.len() {
        return Err(Error::InsufficientData("settling window exceeds the series".into()));
    }
    let remaining = input.len() - start;
    let cycles = (remaining as f64 * freq / sample_hz).floor();
    if cycles < 10.0 {
        return Err(Error::InsufficientData(format!(
            "need at least 10 cycles after settling, have {cycles}"
        )));
    }
    let len = (cycles * sample_hz / freq).floor() as usize;
    let num = single_bin(output, sample_hz, freq, start, len);
    let den = single_bin(input, sample_hz, freq, start, len);
    if den.norm() == 0.0 {
        return Err(Error::InsufficientData("input has no content at the probe frequency".into()));
    }
    let h = num / den;
    Ok(BodePoint {
        freq,
        mag_db: 20.0 * h.norm().log10(),
        phase_deg: wrap_lag_deg(h.arg().to_degrees()),
    })
}

/// Excitation/response series of a frequency-response trace, per scenario
/// kind and probed axis.
pub fn bode_series(trace: &TraceLog, kind: ScenarioKind, axis: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    match kind {
        ScenarioKind::LeaderBode => {
            let input = trace.series(|r| r.follower.wrench[axis]);
            let output = trace.series(|r| r.leader.wrench[axis]);
            Ok((input, output))
        }
        ScenarioKind::FollowerBode => {
            let home = trace.meta.leader_home.as_vec6()[axis];
            let home_f = trace.meta.follower_home.as_vec6()[axis];
            let input = trace.series(|r| r.leader.tcp[axis] - home);
            let output = trace.series(|r| r.follower.tcp[axis] - home_f);
            Ok((input, output))
        }
        other => Err(Error::Config(format!("scenario {other} has no frequency response"))),
    }
}

/// Run one scenario per frequency and estimate its response point.
///
/// Runs are independent and execute in parallel; each keeps the configured
/// seed so a sweep is reproducible point by point.
pub fn bode_sweep(cfg: &ScenarioConfig, freqs: &[f64]) -> Result<Vec<BodePoint>> {
    let mut points = freqs
        .par_iter()
        .map(|&freq| {
            let mut run_cfg = cfg.clone();
            run_cfg.operator.freq = freq;
            run_cfg.scenario.duration = None;
            let trace = sim::schedule(&run_cfg)?;
            let (input, output) = bode_series(&trace, run_cfg.scenario.kind, run_cfg.operator.axis)?;
            bode_point(&input, &output, trace.sample_hz(), freq, run_cfg.scenario.settle)
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.freq.total_cmp(&b.freq));
    Ok(points)
}

/// Logarithmically spaced frequency grid (inclusive of both ends).
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let ratio = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// One row of the energy ledger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// Operator power into the leader TCP (W).
    pub p_in: f64,
    /// Power delivered to the environment by the follower TCP (W).
    pub p_out: f64,
    pub p_sum: f64,
    /// Trapezoidal running integral of `p_sum` (J).
    pub e_sum: f64,
}

/// Recompute the power/energy ledger from the logged wrench and velocity
/// columns (independent of the simulator's own running integral).
pub fn energy_ledger(trace: &TraceLog) -> Vec<EnergySample> {
    let mut out = Vec::with_capacity(trace.rows.len());
    let mut e_sum = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for row in &trace.rows {
        let wl: Vec6 = row.leader.wrench;
        let wf: Vec6 = row.follower.wrench;
        let p_in = wl.dot(&row.leader.tcp_vel);
        let p_out = (-wf).dot(&row.follower.tcp_vel);
        let p_sum = p_in - p_out;
        if let Some((t_prev, p_prev)) = prev {
            e_sum += 0.5 * (p_sum + p_prev) * (row.t - t_prev);
        }
        prev = Some((row.t, p_sum));
        out.push(EnergySample { t: row.t, p_in, p_out, p_sum, e_sum });
    }
    out
}

/// Steady-state compliance and transient metrics of a collision trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollisionMetrics {
    /// Mean |target - measured| TCP height error over the steady window (m).
    pub steady_z_err: f64,
    /// Mean normal contact force over the steady window (N).
    pub steady_fz: f64,
    /// Ratio `steady_fz / steady_z_err` (N/m).
    pub recovered_k: f64,
    /// Peak force over the contact phase relative to steady, minus one.
    pub force_overshoot: f64,
    /// Time from first contact until the force stays within 2% of steady (s).
    pub settle_time: f64,
    /// First contact time (s).
    pub contact_time: f64,
}

/// Normal force threshold that counts as contact (N).
pub const CONTACT_THRESHOLD: f64 = 0.05;

/// Extract compliance metrics from a collision trace: steady window is the
/// last 20% of the rows.
pub fn collision_metrics(trace: &TraceLog) -> Result<CollisionMetrics> {
    let n = trace.rows.len();
    if n < 10 {
        return Err(Error::InsufficientData("trace too short".into()));
    }
    let fz = trace.series(|r| r.follower.wrench[2]);
    let contact_idx = fz
        .iter()
        .position(|&f| f > CONTACT_THRESHOLD)
        .ok_or(Error::NoContactDetected)?;
    let steady_start = n - n / 5;
    let window = steady_start..n;
    let mean = |s: &[f64], range: std::ops::Range<usize>| {
        s[range.clone()].iter().sum::<f64>() / range.len() as f64
    };
    let steady_fz = mean(&fz, window.clone());
    if steady_fz <= CONTACT_THRESHOLD {
        return Err(Error::NoContactDetected);
    }
    let z_err_series: Vec<f64> =
        trace.rows.iter().map(|r| (r.follower.target[2] - r.follower.tcp[2]).abs()).collect();
    let steady_z_err = mean(&z_err_series, window);
    let peak = fz[contact_idx..].iter().cloned().fold(f64::MIN, f64::max);
    let force_overshoot = peak / steady_fz - 1.0;
    let tol = 0.02 * steady_fz;
    let mut settled_idx = contact_idx;
    for (i, &f) in fz.iter().enumerate().skip(contact_idx) {
        if (f - steady_fz).abs() > tol {
            settled_idx = i + 1;
        }
    }
    let dt = 1.0 / trace.sample_hz();
    Ok(CollisionMetrics {
        steady_z_err,
        steady_fz,
        recovered_k: steady_fz / steady_z_err,
        force_overshoot,
        settle_time: (settled_idx - contact_idx) as f64 * dt,
        contact_time: contact_idx as f64 * dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(n: usize, fs: f64, f: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n).map(|k| amp * (2.0 * PI * f * k as f64 / fs + phase).sin()).collect()
    }

    #[test]
    fn identical_series_give_zero_db_zero_phase() {
        let x = sine(20_000, 750.0, 1.5, 1.0, 0.3);
        let p = bode_point(&x, &x, 750.0, 1.5, 5.0).unwrap();
        assert_relative_eq!(p.mag_db, 0.0, epsilon = 1e-9);
        assert_relative_eq!(p.phase_deg, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn half_amplitude_quarter_period_delay() {
        // Oracle: 0.5x amplitude delayed 1/(4f) is -6.0206 dB at -90 deg.
        let fs = 750.0;
        let f = 1.5;
        let n = 20_000;
        let x = sine(n, fs, f, 1.0, 0.0);
        let y = sine(n, fs, f, 0.5, -PI / 2.0);
        let p = bode_point(&x, &y, fs, f, 5.0).unwrap();
        assert_relative_eq!(p.mag_db, -6.020_599_913, epsilon = 1e-6);
        assert_relative_eq!(p.phase_deg, -90.0, epsilon = 1e-6);
    }

    #[test]
    fn pure_transport_delay_phase() {
        // 40 ms delay at 1.5 Hz: phase = -360 * 1.5 * 0.040 = -21.6 deg.
        let fs = 750.0;
        let f = 1.5;
        let n = 20_000;
        let x = sine(n, fs, f, 1.0, 0.0);
        let y = sine(n, fs, f, 1.0, -2.0 * PI * f * 0.040);
        let p = bode_point(&x, &y, fs, f, 5.0).unwrap();
        assert_relative_eq!(p.mag_db, 0.0, epsilon = 1e-9);
        assert_relative_eq!(p.phase_deg, -21.6, epsilon = 1e-6);
    }

    #[test]
    fn estimator_accuracy_at_60_db_snr() {
        // Gain within 0.05 dB and phase within 0.5 deg with additive noise at
        // -60 dB relative to the signal.
        let fs = 750.0;
        let f = 1.3;
        let n = 30_000;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = sine(n, fs, f, 1.0, 0.0);
        let mut y = sine(n, fs, f, 0.7, -0.4);
        for v in y.iter_mut() {
            *v += 1e-3 * rng.gen_range(-1.732..1.732);
        }
        let p = bode_point(&x, &y, fs, f, 2.0).unwrap();
        assert!((p.mag_db - 20.0 * 0.7f64.log10()).abs() < 0.05, "mag {}", p.mag_db);
        assert!((p.phase_deg - (-0.4f64).to_degrees()).abs() < 0.5, "phase {}", p.phase_deg);
    }

    #[test]
    fn too_short_series_is_rejected() {
        let x = sine(1000, 750.0, 1.5, 1.0, 0.0);
        assert!(matches!(
            bode_point(&x, &x, 750.0, 1.5, 0.5),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn phase_wraps_into_lag_range() {
        assert_relative_eq!(wrap_lag_deg(10.0), -350.0);
        assert_relative_eq!(wrap_lag_deg(-10.0), -10.0);
        assert_relative_eq!(wrap_lag_deg(0.0), 0.0);
        assert_relative_eq!(wrap_lag_deg(-360.0), 0.0);
    }

    #[test]
    fn log_grid_spans_range() {
        let g = log_grid(0.1, 4.0, 12);
        assert_eq!(g.len(), 12);
        assert_relative_eq!(g[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(g[11], 4.0, epsilon = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
