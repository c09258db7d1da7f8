//! Scratch probe for closed-loop behavior while tuning defaults.

use bilatsim_core::analysis::{self, log_grid};
use bilatsim_core::config::{ScenarioConfig, ScenarioKind};
use bilatsim_core::sim;

fn main() {
    // Collision at both speeds.
    for speed in [0.05, 0.2] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Collision;
        cfg.operator.speed = speed;
        let trace = sim::schedule(&cfg).unwrap();
        trace.check_finite().unwrap();
        match analysis::collision_metrics(&trace) {
            Ok(m) => println!(
                "collision speed {speed}: K = {:.1} (err {:+.2}%), Fz = {:.3} N, z_err = {:.4} mm, overshoot = {:.2}%, settle = {:.2} s, contact at {:.2} s",
                m.recovered_k,
                (m.recovered_k / 500.0 - 1.0) * 100.0,
                m.steady_fz,
                m.steady_z_err * 1e3,
                m.force_overshoot * 100.0,
                m.settle_time,
                m.contact_time,
            ),
            Err(e) => println!("collision speed {speed}: {e}"),
        }
    }

    // Free-space follower step (10 mm via a fast descent script).
    {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Collision;
        cfg.environment.plate = Some(false);
        cfg.operator.speed = 0.5;
        cfg.operator.target_below = 0.010;
        cfg.scenario.duration = Some(3.0);
        let trace = sim::schedule(&cfg).unwrap();
        let last = trace.rows.last().unwrap();
        let err = (last.follower.target[2] - last.follower.tcp[2]).abs();
        println!("free-space 10 mm step: final error {:.4} mm", err * 1e3);
    }

    // Leader Bode damping sweep, notch off.
    let freqs = log_grid(0.4, 3.5, 14);
    for bz in [60.0, 80.0, 100.0] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::LeaderBode;
        cfg.leader.b[2] = bz;
        cfg.notch.lambda = 0.0;
        let pts = analysis::bode_sweep(&cfg, &freqs).unwrap();
        let peak = pts.iter().cloned().fold(pts[0], |a, b| if b.mag_db > a.mag_db { b } else { a });
        println!("leader bode B_z={bz}: peak {:.2} dB at {:.2} Hz", peak.mag_db, peak.freq);
        for p in &pts {
            print!(" {:.2}:{:+.1}dB", p.freq, p.mag_db);
        }
        println!();
    }

    // Notch benefit at B_z = 100.
    for lambda in [0.0, 0.27] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::LeaderBode;
        cfg.notch.lambda = lambda;
        let pts = analysis::bode_sweep(&cfg, &freqs).unwrap();
        let peak = pts.iter().cloned().fold(pts[0], |a, b| if b.mag_db > a.mag_db { b } else { a });
        println!("leader bode lambda={lambda}: peak {:.2} dB at {:.2} Hz", peak.mag_db, peak.freq);
    }

    // Phase at 1.5 Hz across conditions (leader, notch on).
    for cond in ["local", "good", "fair", "poor"] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::LeaderBode;
        cfg.network.condition = cond.into();
        let pts = analysis::bode_sweep(&cfg, &[1.5]).unwrap();
        println!("leader bode {cond}: {:.2} dB, {:.1} deg", pts[0].mag_db, pts[0].phase_deg);
    }

    // Ideal-plant phase delta Good vs Local at 1.5 Hz.
    let mut phases = Vec::new();
    for cond in ["local", "good"] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::LeaderBode;
        cfg.plant.leader.ideal = true;
        cfg.network.condition = cond.into();
        cfg.scenario.cycles = 20;
        let pts = analysis::bode_sweep(&cfg, &[1.5]).unwrap();
        phases.push(pts[0].phase_deg);
        println!("ideal-plant {cond}: {:.2} dB, {:.2} deg", pts[0].mag_db, pts[0].phase_deg);
    }
    let mut delta = phases[1] - phases[0];
    while delta > 180.0 {
        delta -= 360.0;
    }
    while delta <= -180.0 {
        delta += 360.0;
    }
    println!("ideal-plant added phase (good - local): {delta:.2} deg (expect ~-21.6)");

    // Criterion-2 style force-law probe: post-impact constant-velocity phase.
    {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Collision;
        cfg.operator.speed = 0.05;
        let trace = sim::schedule(&cfg).unwrap();
        let k_z = cfg.follower.k[2];
        let b_z = cfg.follower.b[2];
        let arrival =
            cfg.operator.lead_in + cfg.operator.target_below / cfg.operator.speed;
        let m = analysis::collision_metrics(&trace).unwrap();
        println!("cv-phase: contact {:.3} s, target arrival {arrival:.3} s", m.contact_time);
        for r in &trace.rows {
            if r.t > m.contact_time + 0.03 && r.t < arrival {
                let z_err = (r.follower.target[2] - r.follower.tcp[2]).abs();
                let pred = k_z * z_err + b_z * cfg.operator.speed;
                let f = r.follower.wrench[2];
                if (r.t * 100.0).round() % 2.0 == 0.0 {
                    println!(
                        "  t={:.3} F={:.3} pred={:.3} rel={:+.1}%",
                        r.t,
                        f,
                        pred,
                        (f / pred - 1.0) * 100.0
                    );
                }
            }
        }
    }

    // Follower bode at 1.5 Hz across conditions.
    for cond in ["local", "good", "fair", "poor"] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::FollowerBode;
        cfg.network.condition = cond.into();
        let pts = analysis::bode_sweep(&cfg, &[1.5]).unwrap();
        println!("follower bode {cond}: {:.2} dB, {:.1} deg", pts[0].mag_db, pts[0].phase_deg);
    }

    // Passivity under local and poor.
    for cond in ["local", "poor"] {
        let mut cfg = ScenarioConfig::default();
        cfg.scenario.kind = ScenarioKind::Passivity;
        cfg.network.condition = cond.into();
        let script = cfg.drag_lift_script();
        let trace = sim::schedule(&cfg).unwrap();
        trace.check_finite().unwrap();
        let ledger = analysis::energy_ledger(&trace);
        let min_e = ledger.iter().map(|s| s.e_sum).fold(f64::MAX, f64::min);
        let final_e = ledger.last().unwrap().e_sum;
        let mut envs = Vec::new();
        for (t0, t1) in script.contact_windows() {
            let env = trace
                .rows
                .iter()
                .filter(|r| r.t >= t0 && r.t < t1)
                .map(|r| r.follower.wrench[2])
                .fold(f64::MIN, f64::max);
            envs.push(env);
        }
        println!(
            "passivity {cond}: min E = {:.4} J, final E = {:.3} J, rep envelopes = {:?}",
            min_e,
            final_e,
            envs.iter().map(|e| (e * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
        // Steady force during each hold phase.
        for (i, (t0, _)) in script.contact_windows().iter().enumerate() {
            let hold_mid = t0 + script.t_descend + 0.8 * script.t_hold;
            if let Some(r) = trace.rows.iter().find(|r| r.t >= hold_mid) {
                println!("  rep {i} hold Fz = {:.2} N", r.follower.wrench[2]);
            }
        }
    }
}
