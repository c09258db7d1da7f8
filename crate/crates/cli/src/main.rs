//! Scenario runner: loads a configuration, applies command-line overrides,
//! runs the requested experiment and writes trace/analysis CSVs plus a JSON
//! summary. Every output file is accompanied by a resolved-config JSON
//! sidecar; reruns with the same arguments and seed produce byte-identical
//! files apart from the timestamp inside the summary.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use bilatsim_core::analysis::{self, BodePoint};
use bilatsim_core::config::{ScenarioConfig, ScenarioKind};
use bilatsim_core::netem::{self, NetworkCondition};
use bilatsim_core::sim::{self, TraceLog};
use bilatsim_core::Error;

#[derive(Parser)]
#[command(name = "bilatsim", version, about = "Bilateral teleoperation simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Leader-side frequency response: clamped wrist, swept sine wrench
    /// injected as the haptic reference.
    BodeLeader(RunArgs),
    /// Follower-side frequency response: swept sine motion setpoints.
    BodeFollower(RunArgs),
    /// Descend onto the contact plate and hold; compliance metrics.
    Collision(RunArgs),
    /// Bilateral contact-drag-lift with the spring-hand operator; energy
    /// ledger.
    Passivity(RunArgs),
    /// Bilateral run with a scripted channel outage; watchdog behavior.
    Outage(RunArgs),
    /// Statistical validation of the channel emulator.
    NetemValidate(NetemArgs),
    /// Generic bilateral run with the configured operator.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Network condition override: local | good | fair | poor.
    #[arg(long)]
    net: Option<String>,
    /// Descent speed override (collision), m/s.
    #[arg(long)]
    speed: Option<f64>,
    /// Simulated duration override, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Comma-separated sweep frequencies, Hz (bode subcommands).
    #[arg(long)]
    freq_grid: Option<String>,
}

#[derive(Args)]
struct NetemArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Condition to validate; all four when omitted.
    #[arg(long)]
    net: Option<String>,
    /// Sample count (at least 10000).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::BodeLeader(a) => run_bode(a, ScenarioKind::LeaderBode),
        Cmd::BodeFollower(a) => run_bode(a, ScenarioKind::FollowerBode),
        Cmd::Collision(a) => run_scenario(a, ScenarioKind::Collision),
        Cmd::Passivity(a) => run_scenario(a, ScenarioKind::Passivity),
        Cmd::Outage(a) => run_scenario(a, ScenarioKind::Outage),
        Cmd::Run(a) => run_scenario(a, ScenarioKind::Run),
        Cmd::NetemValidate(a) => run_netem(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = if err.downcast_ref::<Error>().map_or(false, |e| matches!(e, Error::Config(_)))
            {
                2
            } else {
                3
            };
            ExitCode::from(code)
        }
    }
}

fn load_config(args: &RunArgs, kind: ScenarioKind) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    cfg.scenario.kind = kind;
    if let Some(seed) = args.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(net) = &args.net {
        NetworkCondition::by_name(net)?;
        cfg.network.condition = net.clone();
        cfg.network.mean_delay_ms = None;
        cfg.network.std_delay_ms = None;
        cfg.network.loss_pct = None;
    }
    if let Some(speed) = args.speed {
        cfg.operator.speed = speed;
    }
    if let Some(duration) = args.duration {
        cfg.scenario.duration = Some(duration);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| anyhow::anyhow!(Error::Scenario(format!("write {}: {e}", path.display()))))
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!(Error::Config(format!("output dir {}: {e}", dir.display()))))
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn bode_csv(points: &[BodePoint]) -> String {
    let mut s = String::from("freq_hz,mag_db,phase_deg\n");
    for p in points {
        s.push_str(&format!("{:.8e},{:.8e},{:.8e}\n", p.freq, p.mag_db, p.phase_deg));
    }
    s
}

fn energy_csv(trace: &TraceLog) -> String {
    let mut s = String::from("t,p_in,p_out,p_sum,e_sum\n");
    for e in analysis::energy_ledger(trace) {
        s.push_str(&format!(
            "{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
            e.t, e.p_in, e.p_out, e.p_sum, e.e_sum
        ));
    }
    s
}

fn run_bode(args: &RunArgs, kind: ScenarioKind) -> anyhow::Result<()> {
    let cfg = load_config(args, kind)?;
    prepare_out(&args.out)?;
    let freqs = match &args.freq_grid {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| anyhow::anyhow!(Error::Config(format!("freq grid: {e}"))))
            })
            .collect::<anyhow::Result<Vec<_>>>()?,
        None => analysis::log_grid(0.1, 4.0, 12),
    };
    let points = analysis::bode_sweep(&cfg, &freqs)?;
    let stem = kind.to_string();
    let csv_path = args.out.join(format!("{stem}_bode.csv"));
    write_file(&csv_path, &bode_csv(&points))?;
    write_file(&args.out.join(format!("{stem}_config.json")), &cfg.resolved_json())?;
    let peak = points
        .iter()
        .cloned()
        .reduce(|a, b| if b.mag_db > a.mag_db { b } else { a })
        .ok_or_else(|| anyhow::anyhow!(Error::Scenario("empty frequency grid".into())))?;
    let summary = json!({
        "scenario": stem,
        "seed": cfg.scenario.seed,
        "network": cfg.network.condition,
        "points": points.len(),
        "peak_mag_db": peak.mag_db,
        "peak_freq_hz": peak.freq,
        "outputs": [csv_path.file_name().unwrap().to_str()],
        "generated_at_unix": timestamp(),
    });
    write_file(
        &args.out.join(format!("{stem}_summary.json")),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    println!("{stem}: {} points, peak {:.2} dB at {:.2} Hz", points.len(), peak.mag_db, peak.freq);
    Ok(())
}

fn run_scenario(args: &RunArgs, kind: ScenarioKind) -> anyhow::Result<()> {
    let cfg = load_config(args, kind)?;
    prepare_out(&args.out)?;
    let trace = sim::schedule(&cfg)?;
    trace.check_finite()?;
    let stem = kind.to_string();
    let trace_path = args.out.join(format!("{stem}_trace.csv"));
    write_file(&trace_path, &trace.to_csv_string())?;
    write_file(&args.out.join(format!("{stem}_config.json")), &cfg.resolved_json())?;

    let mut outputs = vec![trace_path.file_name().unwrap().to_str().unwrap().to_string()];
    let mut metrics = json!({});
    match kind {
        ScenarioKind::Collision => {
            let m = analysis::collision_metrics(&trace)?;
            let csv = format!(
                "steady_z_err_m,steady_fz_n,recovered_k,force_overshoot,settle_time_s,contact_time_s\n{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n",
                m.steady_z_err, m.steady_fz, m.recovered_k, m.force_overshoot, m.settle_time, m.contact_time
            );
            let p = args.out.join(format!("{stem}_metrics.csv"));
            write_file(&p, &csv)?;
            outputs.push(p.file_name().unwrap().to_str().unwrap().to_string());
            metrics = serde_json::to_value(m)?;
            println!(
                "{stem}: recovered K = {:.1} N/m, steady force {:.2} N, overshoot {:.1}%",
                m.recovered_k,
                m.steady_fz,
                m.force_overshoot * 100.0
            );
        }
        ScenarioKind::Passivity | ScenarioKind::Run | ScenarioKind::Outage => {
            let ledger = analysis::energy_ledger(&trace);
            let p = args.out.join(format!("{stem}_energy.csv"));
            write_file(&p, &energy_csv(&trace))?;
            outputs.push(p.file_name().unwrap().to_str().unwrap().to_string());
            let min_e = ledger.iter().map(|s| s.e_sum).fold(f64::MAX, f64::min);
            let final_e = ledger.last().map(|s| s.e_sum).unwrap_or(0.0);
            metrics = json!({ "min_e_sum": min_e, "final_e_sum": final_e });
            println!("{stem}: E_sum min {:.4} J, final {:.3} J", min_e, final_e);
        }
        _ => {}
    }
    let summary = json!({
        "scenario": stem,
        "seed": cfg.scenario.seed,
        "network": cfg.network.condition,
        "rows": trace.rows.len(),
        "duration_s": trace.duration(),
        "metrics": metrics,
        "outputs": outputs,
        "generated_at_unix": timestamp(),
    });
    write_file(
        &args.out.join(format!("{stem}_summary.json")),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(())
}

fn run_netem(args: &NetemArgs) -> anyhow::Result<()> {
    if args.samples < 10_000 {
        return Err(anyhow::anyhow!(Error::Config("need at least 10000 samples".into())));
    }
    let cfg = match &args.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let seed = args.seed.unwrap_or(cfg.scenario.seed);
    prepare_out(&args.out)?;
    let conditions: Vec<(String, NetworkCondition)> = match &args.net {
        Some(name) => vec![(name.clone(), NetworkCondition::by_name(name)?)],
        None => ["local", "good", "fair", "poor"]
            .iter()
            .map(|n| (n.to_string(), NetworkCondition::by_name(n).unwrap()))
            .collect(),
    };
    let mut reports = Vec::new();
    let mut all_pass = true;
    println!(
        "{:<6} {:>10} {:>10} {:>8} {:>10} {:>10} {:>8} {:>6}",
        "cond", "mean[ms]", "std[ms]", "loss[%]", "emp_mean", "emp_std", "emp_loss", "pass"
    );
    for (name, cond) in &conditions {
        let report = netem::sample_statistics(cond, args.samples, seed)?;
        println!(
            "{:<6} {:>10.2} {:>10.2} {:>8.2} {:>10.2} {:>10.2} {:>8.2} {:>6}",
            name,
            cond.mean_delay * 1e3,
            cond.std_delay * 1e3,
            cond.loss_prob * 1e2,
            report.empirical_mean * 1e3,
            report.empirical_std * 1e3,
            report.empirical_loss * 1e2,
            report.pass
        );
        if report.truncation_skew > 0.01 {
            println!(
                "  note: truncation at zero skews the mean by {:.1}% (expected {:.2} ms)",
                report.truncation_skew * 1e2,
                report.truncated_mean * 1e3
            );
        }
        all_pass &= report.pass;
        reports.push(json!({ "condition": name, "report": report }));
    }
    let summary = json!({
        "scenario": "netem-validate",
        "seed": seed,
        "samples": args.samples,
        "reports": reports,
        "pass": all_pass,
        "generated_at_unix": timestamp(),
    });
    write_file(&args.out.join("netem_validate_summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    write_file(&args.out.join("netem_validate_config.json"), &cfg.resolved_json())?;
    if !all_pass {
        return Err(anyhow::anyhow!(Error::Scenario(
            "channel statistics outside tolerance".into()
        )));
    }
    Ok(())
}
