//! Focused probe: post-impact constant-velocity force-law tracking.

use bilatsim_core::analysis;
use bilatsim_core::config::{ScenarioConfig, ScenarioKind};
use bilatsim_core::sim;

fn main() {
    for plant_fn in [40.0, 60.0, 100.0] {
        for k_trans in [2000.0, 2500.0] {
            let mut cfg = ScenarioConfig::default();
            cfg.scenario.kind = ScenarioKind::Collision;
            cfg.operator.speed = 0.05;
            cfg.plant.follower.natural_freq = plant_fn;
            cfg.delta6.k_trans = k_trans;
            let trace = sim::schedule(&cfg).unwrap();
            let m = analysis::collision_metrics(&trace).unwrap();
            let arrival = cfg.operator.lead_in + cfg.operator.target_below / cfg.operator.speed;
            let k_z = cfg.follower.k[2];
            let b_z = cfg.follower.b[2];
            let mut max_err: f64 = 0.0;
            let mut count = 0;
            for r in &trace.rows {
                if r.t > m.contact_time + 0.06 && r.t < arrival {
                    let z_err = (r.follower.target[2] - r.follower.tcp[2]).abs();
                    let pred = k_z * z_err + b_z * cfg.operator.speed;
                    let rel = (r.follower.wrench[2] / pred - 1.0).abs();
                    max_err = max_err.max(rel);
                    count += 1;
                }
            }
            println!(
                "plant {plant_fn:>5} Hz, k_trans {k_trans}: contact {:.3}s arrival {arrival:.2}s window {count} rows, max |rel| = {:.1}%, K = {:.1}, overshoot {:.2}%",
                m.contact_time,
                max_err * 100.0,
                m.recovered_k,
                m.force_overshoot * 100.0
            );
        }
    }
    // Diagnostic: where does the pre-contact tracking lag sit?
    let mut cfg = ScenarioConfig::default();
    cfg.scenario.kind = ScenarioKind::Collision;
    cfg.operator.speed = 0.05;
    let trace = sim::schedule(&cfg).unwrap();
    for r in &trace.rows {
        if (r.t - 3.0).abs() < 0.001 || (r.t - 4.0).abs() < 0.001 || (r.t - 4.4).abs() < 0.001 {
            println!(
                "t={:.3}: target z off {:.2} mm, tcp z off {:.2} mm, lag {:.2} mm",
                r.t,
                (r.follower.target[2] - trace.meta.follower_home.position.z) * 1e3,
                (r.follower.tcp[2] - trace.meta.follower_home.position.z) * 1e3,
                (r.follower.target[2] - r.follower.tcp[2]).abs() * 1e3,
            );
        }
    }
}
