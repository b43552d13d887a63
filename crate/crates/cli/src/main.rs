//! `rio`: simulate sequences, run the odometry, evaluate trajectories and
//! sweep ablations.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use rayon::prelude::*;

use rio::estimator::OdometryConfig;
use rio::eval::{compute_ape, compute_rpe, default_max_dt, Alignment, Metrics};
use rio::io::{
    export_trajectory_tum, read_gt, read_sequence, read_tum, write_sequence, IoError, KeyValues, Sequence,
    StampedPose,
};
use rio::run::{ablation_variants, config_from_key_values, config_to_key_values, run_sequence, RunError, RunResult};
use rio::simulator::{simulate, NoiseProfile, SceneParams, SimConfig, TrajectoryKind};

const EXIT_INPUT: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "rio", version, about = "Radar-inertial odometry toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence directory.
    Simulate(SimulateArgs),
    /// Run the odometry over a sequence.
    Run(RunArgs),
    /// Compare an estimated trajectory against ground truth.
    Eval(EvalArgs),
    /// Run the full system and every single-component ablation.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "circle")]
    kind: TrajectoryKind,
    #[arg(long, default_value_t = 20.0)]
    duration: f64,
    /// Mean speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    /// Turn rate of the circle trajectory, rad/s.
    #[arg(long, default_value_t = 0.2)]
    yaw_rate: f64,
    /// Share of scene points on moving objects.
    #[arg(long, default_value_t = 0.0)]
    dynamic_frac: f64,
    /// Mean clutter points per scan; defaults to the noise profile's.
    #[arg(long)]
    clutter_rate: Option<f64>,
    #[arg(long, default_value = "none")]
    noise_profile: NoiseProfile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Components to disable (imu_residual, doppler_residual, p2p_residual,
    /// velocity_filter, rcs_filter).
    #[arg(long, value_name = "FLAG")]
    disable: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seq: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Trajectory output (TUM format).
    #[arg(long)]
    out: PathBuf,
    /// Per-scan report CSV; a `.summary` sidecar is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    rpe_delta: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Estimated trajectory (TUM).
    #[arg(long)]
    est: PathBuf,
    /// Ground truth: gt.csv, or TUM text for any other extension.
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value_t = 1)]
    rpe_delta: usize,
    /// Association tolerance, s; defaults to half the ground-truth period.
    #[arg(long)]
    max_dt: Option<f64>,
    /// Skip the SE(3) alignment before APE.
    #[arg(long)]
    no_align: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    seq: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    rpe_delta: usize,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn input(msg: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            msg: msg.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::input(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::input(e)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn load_config(args: &ConfigArgs, seq: &Sequence) -> Result<OdometryConfig, Failure> {
    let mut kv = match &args.config {
        Some(path) => KeyValues::read(path)?,
        None => KeyValues::default(),
    };
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("--set expects KEY=VALUE, got '{item}'")))?;
        kv.set(k.trim(), v.trim());
    }
    if !args.disable.is_empty() {
        let mut flags: Vec<&str> = kv.get("disable").map(|s| s.split(',').collect()).unwrap_or_default();
        flags.extend(args.disable.iter().map(String::as_str));
        let joined = flags.iter().filter(|f| !f.is_empty()).copied().collect::<Vec<_>>().join(",");
        kv.set("disable", joined);
    }
    config_from_key_values(&kv, seq).map_err(Failure::input)
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Failure> {
    if !(a.duration > 0.0) || a.speed < 0.0 || !(0.0..1.0).contains(&a.dynamic_frac) {
        return Err(Failure::input("duration must be positive, speed non-negative, dynamic-frac in [0, 1)"));
    }
    let mut cfg = SimConfig {
        kind: a.kind,
        duration: a.duration,
        speed: a.speed,
        yaw_rate: a.yaw_rate,
        seed: a.seed,
        scene: SceneParams::default().with_dynamic_fraction(a.dynamic_frac),
        ..SimConfig::default()
    }
    .with_noise(a.noise_profile);
    if let Some(rate) = a.clutter_rate {
        if !(rate >= 0.0) {
            return Err(Failure::input("clutter-rate must be non-negative"));
        }
        cfg.radar.clutter_rate = rate;
    }
    let sim = simulate(&cfg);
    fs::create_dir_all(&a.out).map_err(|e| Failure::input(format!("{}: {e}", a.out.display())))?;
    write_sequence(&a.out, &sim.sequence)?;
    info!("wrote {} scans to {}", sim.sequence.scans.len(), a.out.display());
    Ok(())
}

fn metrics_fields(m: &Option<Metrics>) -> [String; 4] {
    match m {
        Some(m) => [m.ape.trans_rmse, m.ape.rot_rmse_deg, m.rpe.trans_rmse, m.rpe.rot_rmse_deg].map(|v| v.to_string()),
        None => ["nan"; 4].map(String::from),
    }
}

fn summary_text(cfg: &OdometryConfig, res: &RunResult, wall: f64) -> String {
    let mut kv = config_to_key_values(cfg);
    let [ape_t, ape_r, rpe_t, rpe_r] = metrics_fields(&res.metrics);
    kv.set("scans", res.records.len().to_string());
    kv.set("degraded_scans", res.degraded_scans().to_string());
    kv.set("diverged_solves", res.diverged_solves.to_string());
    kv.set("ape_trans_rmse", ape_t);
    kv.set("ape_rot_rmse_deg", ape_r);
    kv.set("rpe_trans_rmse", rpe_t);
    kv.set("rpe_rot_rmse_deg", rpe_r);
    let names = ["raw", "fov", "radius", "static", "matched", "landmarks"];
    for (n, v) in names.iter().zip(res.mean_counts()) {
        kv.set(&format!("mean_{n}"), v.to_string());
    }
    kv.set("wall_time_s", format!("{wall:.3}"));
    kv.to_string()
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let seq = read_sequence(&a.seq)?;
    let cfg = load_config(&a.config, &seq)?;
    let start = Instant::now();
    let res = run_sequence(&seq, &cfg, a.rpe_delta)?;
    let wall = start.elapsed().as_secs_f64();

    write_file(&a.out, &export_trajectory_tum(&res.poses()))?;
    if let Some(report) = &a.report {
        write_file(report, &res.report_csv())?;
        let mut sidecar = report.clone().into_os_string();
        sidecar.push(".summary");
        write_file(Path::new(&sidecar), &summary_text(&cfg, &res, wall))?;
    }
    if let Some(m) = &res.metrics {
        println!(
            "ape_trans_rmse={} ape_rot_rmse_deg={} rpe_trans_rmse={} rpe_rot_rmse_deg={}",
            m.ape.trans_rmse, m.ape.rot_rmse_deg, m.rpe.trans_rmse, m.rpe.rot_rmse_deg
        );
    }
    let finite = res.states.iter().all(|s| s.p.iter().chain(s.v.iter()).all(|v| v.is_finite()));
    if res.diverged_solves > 0 || !finite {
        return Err(Failure {
            code: EXIT_DIVERGED,
            msg: format!("{} solves diverged", res.diverged_solves),
        });
    }
    Ok(())
}

fn read_trajectory(path: &Path) -> Result<Vec<StampedPose>, IoError> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_gt(path)
    } else {
        read_tum(path)
    }
}

fn cmd_eval(a: EvalArgs) -> Result<(), Failure> {
    let est = read_tum(&a.est)?;
    let gt = read_trajectory(&a.gt)?;
    let max_dt = a.max_dt.unwrap_or_else(|| default_max_dt(&gt));
    let align = if a.no_align { Alignment::None } else { Alignment::Se3 };
    let ape = compute_ape(&est, &gt, align, max_dt).map_err(Failure::input)?;
    let rpe = compute_rpe(&est, &gt, a.rpe_delta, max_dt).map_err(Failure::input)?;
    println!("ape_trans_rmse,ape_rot_rmse_deg,rpe_trans_rmse,rpe_rot_rmse_deg");
    println!("{},{},{},{}", ape.trans_rmse, ape.rot_rmse_deg, rpe.trans_rmse, rpe.rot_rmse_deg);
    Ok(())
}

const ABLATION_HEADER: &str =
    "variant,ape_trans_rmse,ape_rot_rmse_deg,rpe_trans_rmse,rpe_rot_rmse_deg,mean_points,degraded_scans,diverged_solves";

fn cmd_ablate(a: AblateArgs) -> Result<(), Failure> {
    let seq = read_sequence(&a.seq)?;
    let base = load_config(&a.config, &seq)?;
    let variants = ablation_variants(&base);
    let results: Vec<Result<RunResult, RunError>> = variants
        .par_iter()
        .map(|(_, cfg)| run_sequence(&seq, cfg, a.rpe_delta))
        .collect();
    let mut table = String::from(ABLATION_HEADER);
    table.push('\n');
    for ((name, _), res) in variants.iter().zip(results) {
        let res = res?;
        let [ape_t, ape_r, rpe_t, rpe_r] = metrics_fields(&res.metrics);
        let c = res.mean_counts();
        let _ = writeln!(
            table,
            "{name},{ape_t},{ape_r},{rpe_t},{rpe_r},{},{},{}",
            c[3] + c[4],
            res.degraded_scans(),
            res.diverged_solves
        );
    }
    write_file(&a.out, &table)?;
    print!("{table}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Run(a) => cmd_run(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{}", f.msg);
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
