//! Running the odometry over a whole sequence, run configuration files and
//! per-scan reports.

use std::fmt::Write as _;

use thiserror::Error;

use crate::estimator::{Ablation, EstimatorError, Odometry, OdometryConfig, StageCounts};
use crate::eval::{default_max_dt, evaluate, EvalError, Metrics};
use crate::geom::Vec3;
use crate::io::{KeyValues, Sequence, StampedPose};
use crate::sensor::{FrameState, GravityModel};

pub const REPORT_HEADER: &str = "scan,t,raw,fov,radius,static,matched,landmarks,ape_t_inst";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scan {scan}: {source}")]
    Scan {
        scan: usize,
        #[source]
        source: EstimatorError,
    },
    #[error("sequence has no scans")]
    Empty,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Odometry settings for a sequence: sensor constants come from the
/// sequence meta, everything else from `kv` (unknown keys are rejected).
pub fn config_from_key_values(kv: &KeyValues, seq: &Sequence) -> Result<OdometryConfig, String> {
    let mut cfg = OdometryConfig {
        gravity: GravityModel::new(seq.meta.gravity_z),
        ext: seq.meta.ext,
        imu_period: 1.0 / seq.meta.imu_rate_hz,
        ..OdometryConfig::default()
    };
    for (key, value) in &kv.entries {
        let num = || value.parse::<f64>().map_err(|_| format!("invalid value '{value}' for '{key}'"));
        let int = || value.parse::<usize>().map_err(|_| format!("invalid value '{value}' for '{key}'"));
        let e = &mut cfg.estimator;
        let p = &mut cfg.preprocess;
        match key.as_str() {
            "window_k" => e.window_k = int()?,
            "w_d" => e.w_d = num()?,
            "w_p" => e.w_p = num()?,
            "robust_delta" => e.robust_delta = num()?,
            "max_iters" => e.max_iters = int()?,
            "rel_tol" => e.rel_tol = num()?,
            "lm_lambda_init" => e.lm_lambda_init = num()?,
            "fix_gauge_biases" => {
                e.fix_gauge_biases = value
                    .parse::<bool>()
                    .map_err(|_| format!("invalid value '{value}' for '{key}'"))?
            }
            "disable" => {
                for flag in value.split([',', ' ']).filter(|f| !f.is_empty()) {
                    e.ablation.disable(flag)?;
                }
            }
            "fov_azimuth_deg" => p.fov_azimuth = num()?.to_radians(),
            "fov_elevation_deg" => p.fov_elevation = num()?.to_radians(),
            "range_max" => p.range_max = num()?,
            "radius_n" => p.radius_n = int()?,
            "radius_d" => p.radius_d = num()?,
            "vel_threshold" => p.vel_threshold = num()?,
            "nn_d" => cfg.assoc.nn_d = num()?,
            "rcs_d" => cfg.assoc.rcs_d = num()?,
            "min_hits" => cfg.assoc.min_hits = int()?,
            "sigma_g" => cfg.noise.sigma_g = num()?,
            "sigma_a" => cfg.noise.sigma_a = num()?,
            "sigma_bg" => cfg.noise.sigma_bg = num()?,
            "sigma_ba" => cfg.noise.sigma_ba = num()?,
            "bias_bound" => cfg.bias_bound = num()?,
            "repropagate_bias" => cfg.repropagate_bias = num()?,
            other => return Err(format!("unknown config key '{other}'")),
        }
    }
    cfg.estimator.validate()?;
    Ok(cfg)
}

/// Full configuration as key=value text, for run snapshots.
pub fn config_to_key_values(cfg: &OdometryConfig) -> KeyValues {
    let mut kv = KeyValues::default();
    let e = &cfg.estimator;
    let p = &cfg.preprocess;
    kv.set("window_k", e.window_k.to_string());
    kv.set("w_d", e.w_d.to_string());
    kv.set("w_p", e.w_p.to_string());
    kv.set("robust_delta", e.robust_delta.to_string());
    kv.set("max_iters", e.max_iters.to_string());
    kv.set("rel_tol", e.rel_tol.to_string());
    kv.set("lm_lambda_init", e.lm_lambda_init.to_string());
    kv.set("fix_gauge_biases", e.fix_gauge_biases.to_string());
    kv.set("disable", disabled_flags(&e.ablation).join(","));
    kv.set("fov_azimuth_deg", p.fov_azimuth.to_degrees().to_string());
    kv.set("fov_elevation_deg", p.fov_elevation.to_degrees().to_string());
    kv.set("range_max", p.range_max.to_string());
    kv.set("radius_n", p.radius_n.to_string());
    kv.set("radius_d", p.radius_d.to_string());
    kv.set("vel_threshold", p.vel_threshold.to_string());
    kv.set("nn_d", cfg.assoc.nn_d.to_string());
    kv.set("rcs_d", cfg.assoc.rcs_d.to_string());
    kv.set("min_hits", cfg.assoc.min_hits.to_string());
    kv.set("sigma_g", cfg.noise.sigma_g.to_string());
    kv.set("sigma_a", cfg.noise.sigma_a.to_string());
    kv.set("sigma_bg", cfg.noise.sigma_bg.to_string());
    kv.set("sigma_ba", cfg.noise.sigma_ba.to_string());
    kv.set("bias_bound", cfg.bias_bound.to_string());
    kv.set("repropagate_bias", cfg.repropagate_bias.to_string());
    kv
}

pub fn disabled_flags(a: &Ablation) -> Vec<&'static str> {
    let on = [
        a.disable_imu_residual,
        a.disable_doppler_residual,
        a.disable_p2p_residual,
        a.disable_velocity_filter,
        a.disable_rcs_filter,
    ];
    Ablation::FLAGS
        .iter()
        .zip(on)
        .filter(|(_, on)| *on)
        .map(|(f, _)| *f)
        .collect()
}

/// Per-scan diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub scan: usize,
    pub t: f64,
    pub counts: StageCounts,
    /// Translation error against ground truth with the first estimate
    /// anchored to the first ground-truth pose; NaN without ground truth.
    pub ape_t_inst: f64,
    pub degraded: bool,
    /// Solver iterations spent on this scan.
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Final estimate of every scan's frame.
    pub states: Vec<FrameState>,
    pub records: Vec<ScanRecord>,
    pub metrics: Option<Metrics>,
    pub diverged_solves: usize,
}

impl RunResult {
    pub fn poses(&self) -> Vec<StampedPose> {
        self.states.iter().map(StampedPose::from).collect()
    }

    pub fn degraded_scans(&self) -> usize {
        self.records.iter().filter(|r| r.degraded).count()
    }

    /// Mean points per scan after each front-end stage.
    pub fn mean_counts(&self) -> [f64; 6] {
        let n = self.records.len().max(1) as f64;
        let mut acc = [0.0; 6];
        for r in &self.records {
            let c = r.counts;
            for (a, v) in acc.iter_mut().zip([c.raw, c.fov, c.radius, c.static_points, c.matched, c.landmarks]) {
                *a += v as f64;
            }
        }
        acc.map(|a| a / n)
    }

    /// CSV report, one row per scan.
    pub fn report_csv(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.records {
            let c = r.counts;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.scan, r.t, c.raw, c.fov, c.radius, c.static_points, c.matched, c.landmarks, r.ape_t_inst
            );
        }
        out
    }
}

fn anchored_error(est: &FrameState, est0: &FrameState, gt: &StampedPose, gt0: &StampedPose) -> f64 {
    // T_gt0 · T_est0⁻¹ · T_est
    let rel_p = est0.q.inverse() * (est.p - est0.p);
    let p: Vec3 = gt0.q * rel_p + gt0.p;
    (p - gt.p).norm()
}

/// Processes every scan of the sequence in order.
pub fn run_sequence(seq: &Sequence, cfg: &OdometryConfig, rpe_delta: usize) -> Result<RunResult, RunError> {
    let first = seq.scans.first().ok_or(RunError::Empty)?;
    let period = 1.0 / seq.meta.scan_rate_hz;
    let mut odo = Odometry::new(*cfg);
    let mut records = Vec::with_capacity(seq.scans.len());
    let gt_at = |t: f64| -> Option<StampedPose> {
        let gt = seq.gt.as_ref()?;
        gt.iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .filter(|g| (g.t - t).abs() <= 0.5 * period)
            .copied()
    };
    let gt0 = gt_at(first.t);
    let mut est0 = None;

    let mut t_prev = first.t;
    for (i, scan) in seq.scans.iter().enumerate() {
        let imu = if i == 0 {
            seq.imu_bracketing(scan.t, scan.t + period)
        } else {
            seq.imu_bracketing(t_prev, scan.t)
        };
        let out = odo
            .process_scan(scan, imu)
            .map_err(|source| RunError::Scan { scan: i, source })?;
        let est0 = *est0.get_or_insert(out.state);
        let ape_t_inst = match (gt0, gt_at(scan.t)) {
            (Some(g0), Some(g)) => anchored_error(&out.state, &est0, &g, &g0),
            _ => f64::NAN,
        };
        records.push(ScanRecord {
            scan: i,
            t: scan.t,
            counts: out.counts,
            ape_t_inst,
            degraded: out.degraded,
            iterations: out.solve.map_or(0, |s| s.iterations),
        });
        t_prev = scan.t;
    }

    let states = odo.trajectory().to_vec();
    let metrics = match &seq.gt {
        Some(gt) => {
            let poses: Vec<StampedPose> = states.iter().map(StampedPose::from).collect();
            Some(evaluate(&poses, gt, rpe_delta, default_max_dt(gt))?)
        }
        None => None,
    };
    Ok(RunResult {
        states,
        records,
        metrics,
        diverged_solves: odo.diverged_solves(),
    })
}

/// The full system followed by each single-component ablation.
pub fn ablation_variants(base: &OdometryConfig) -> Vec<(String, OdometryConfig)> {
    let mut out = vec![("full".to_string(), *base)];
    for flag in Ablation::FLAGS {
        let mut cfg = *base;
        cfg.estimator.ablation.disable(flag).expect("known flag");
        out.push((format!("w/o {flag}"), cfg));
    }
    out
}
