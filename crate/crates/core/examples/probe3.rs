//! Criterion-2 deep dive: error profile through the constant-velocity phase.

use bilatsim_core::analysis;
use bilatsim_core::config::{ScenarioConfig, ScenarioKind};
use bilatsim_core::sim;

fn main() {
    for (plant_fn, k_trans, speed) in [
        (100.0, 2000.0, 0.05),
        (100.0, 2400.0, 0.05),
        (100.0, 2000.0, 0.04),
        (100.0, 2000.0, 0.03),
        (60.0, 2000.0, 0.05),
        (60.0, 2000.0, 0.03),
    ] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Collision;
        cfg.operator.speed = speed;
        cfg.plant.follower.natural_freq = plant_fn;
        cfg.delta6.k_trans = k_trans;
        cfg.scenario.duration = Some(cfg.operator.target_below / speed + 4.0);
        let trace = sim::schedule(&cfg).unwrap();
        let m = analysis::collision_metrics(&trace).unwrap();
        // Phase ends when the follower-side target reaches its final value.
        let final_target = trace.rows.last().unwrap().follower.target[2];
        let arrival = trace
            .rows
            .iter()
            .find(|r| (r.follower.target[2] - final_target).abs() < 1e-9)
            .map(|r| r.t)
            .unwrap();
        let k_z = cfg.follower.k[2];
        let b_z = cfg.follower.b[2];
        println!(
            "plant {plant_fn} Hz, k_trans {k_trans}, v {speed}: contact {:.3}s, target-arrival {arrival:.3}s, phase {:.0} ms",
            m.contact_time,
            (arrival - m.contact_time) * 1e3
        );
        let mut profile = Vec::new();
        for r in &trace.rows {
            if r.t > m.contact_time && r.t < arrival {
                let z_err = (r.follower.target[2] - r.follower.tcp[2]).abs();
                let pred = k_z * z_err + b_z * speed;
                let rel = r.follower.wrench[2] / pred - 1.0;
                profile.push((r.t - m.contact_time, rel));
            }
        }
        for chunk in profile.chunks(profile.len().max(12) / 12) {
            let (t, r) = chunk[chunk.len() / 2];
            print!(" {:.0}ms:{:+.1}%", t * 1e3, r * 100.0);
        }
        println!();
        // Max error over the tail (skip the first 40% of the phase).
        let skip = (profile.len() as f64 * 0.4) as usize;
        let max_tail =
            profile[skip..].iter().map(|(_, r)| r.abs()).fold(0.0f64, f64::max);
        println!("  tail max |rel| = {:.1}%", max_tail * 100.0);

        // Smoothed protocol: anti-alias the held-setpoint staircase out of
        // the prediction with a centered one-tele-period moving average, then
        // evaluate the settled second half of the phase.
        let base_hz = trace.sample_hz();
        let half_win = (base_hz / 50.0 / 2.0).round() as usize;
        let fz: Vec<f64> = trace.series(|r| r.follower.wrench[2]);
        let pred: Vec<f64> = trace
            .rows
            .iter()
            .map(|r| k_z * (r.follower.target[2] - r.follower.tcp[2]).abs() + b_z * speed)
            .collect();
        let smooth = |s: &[f64], i: usize| {
            let lo = i.saturating_sub(half_win);
            let hi = (i + half_win + 1).min(s.len());
            s[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        };
        let phase_mid = m.contact_time + 0.5 * (arrival - m.contact_time);
        let mut max_sm: f64 = 0.0;
        for (i, r) in trace.rows.iter().enumerate() {
            if r.t >= phase_mid && r.t < arrival {
                let rel = (fz[i] / smooth(&pred, i) - 1.0).abs();
                max_sm = max_sm.max(rel);
            }
        }
        println!("  smoothed second-half max |rel| = {:.1}%", max_sm * 100.0);
    }
}
