//! Absolute and relative pose error.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::geom::{rotation_angle_between, UnitQuat, Vec3};
use crate::io::StampedPose;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("only {0} poses could be associated (need at least 3)")]
    TooFewPoses(usize),
    #[error("rpe delta must be positive")]
    ZeroDelta,
}

/// RMSE and per-pose series of translation (m) and rotation (deg) errors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorStats {
    pub trans_rmse: f64,
    pub rot_rmse_deg: f64,
    pub trans: Vec<f64>,
    pub rot_deg: Vec<f64>,
}

impl ErrorStats {
    fn from_series(trans: Vec<f64>, rot_deg: Vec<f64>) -> Self {
        let rmse = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                (v.iter().map(|e| e * e).sum::<f64>() / v.len() as f64).sqrt()
            }
        };
        Self {
            trans_rmse: rmse(&trans),
            rot_rmse_deg: rmse(&rot_deg),
            trans,
            rot_deg,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub ape: ErrorStats,
    pub rpe: ErrorStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alignment {
    None,
    #[default]
    Se3,
}

/// Pairs each estimate with the ground-truth pose nearest in time, keeping
/// pairs closer than `max_dt`. Both inputs must be time-sorted.
pub fn associate(est: &[StampedPose], gt: &[StampedPose], max_dt: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if gt.is_empty() {
        return out;
    }
    for (i, e) in est.iter().enumerate() {
        let j = gt.partition_point(|g| g.t < e.t);
        let best = [j.checked_sub(1), (j < gt.len()).then_some(j)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (gt[a].t - e.t).abs().total_cmp(&(gt[b].t - e.t).abs()));
        if let Some(j) = best {
            if (gt[j].t - e.t).abs() <= max_dt {
                out.push((i, j));
            }
        }
    }
    out
}

/// Half the median ground-truth sample period.
pub fn default_max_dt(gt: &[StampedPose]) -> f64 {
    let mut d: Vec<f64> = gt.windows(2).map(|w| w[1].t - w[0].t).collect();
    if d.is_empty() {
        return f64::INFINITY;
    }
    d.sort_by(f64::total_cmp);
    0.5 * d[d.len() / 2]
}

/// Rigid transform `(R, t)` minimizing `Σ |dst − (R src + t)|²`.
pub fn umeyama_se3(src: &[Vec3], dst: &[Vec3]) -> (UnitQuat, Vec3) {
    let n = src.len() as f64;
    let mu_s = src.iter().sum::<Vec3>() / n;
    let mu_d = dst.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d - mu_d) * (s - mu_s).transpose();
    }
    let svd = cov.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let rot = UnitQuat::from_matrix(&r);
    (rot, mu_d - rot * mu_s)
}

pub fn compute_ape(
    est: &[StampedPose],
    gt: &[StampedPose],
    align: Alignment,
    max_dt: f64,
) -> Result<ErrorStats, EvalError> {
    let pairs = associate(est, gt, max_dt);
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPoses(pairs.len()));
    }
    let (rot, trans) = match align {
        Alignment::None => (UnitQuat::identity(), Vec3::zeros()),
        Alignment::Se3 => {
            let src: Vec<Vec3> = pairs.iter().map(|&(i, _)| est[i].p).collect();
            let dst: Vec<Vec3> = pairs.iter().map(|&(_, j)| gt[j].p).collect();
            umeyama_se3(&src, &dst)
        }
    };
    let (t_err, r_err): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .map(|&(i, j)| {
            let p = rot * est[i].p + trans;
            let q = rot * est[i].q;
            ((p - gt[j].p).norm(), rotation_angle_between(&q, &gt[j].q).to_degrees())
        })
        .unzip();
    Ok(ErrorStats::from_series(t_err, r_err))
}

fn relative(a: &StampedPose, b: &StampedPose) -> (UnitQuat, Vec3) {
    let inv = a.q.inverse();
    (inv * b.q, inv * (b.p - a.p))
}

/// Relative-pose error between associated poses `delta` apart.
pub fn compute_rpe(
    est: &[StampedPose],
    gt: &[StampedPose],
    delta: usize,
    max_dt: f64,
) -> Result<ErrorStats, EvalError> {
    if delta == 0 {
        return Err(EvalError::ZeroDelta);
    }
    let pairs = associate(est, gt, max_dt);
    if pairs.len() < 3 {
        return Err(EvalError::TooFewPoses(pairs.len()));
    }
    let (t_err, r_err): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .zip(pairs.iter().skip(delta))
        .map(|(&(i0, j0), &(i1, j1))| {
            let (qe, te) = relative(&est[i0], &est[i1]);
            let (qg, tg) = relative(&gt[j0], &gt[j1]);
            let inv = qg.inverse();
            ((inv * (te - tg)).norm(), rotation_angle_between(&qe, &qg).to_degrees())
        })
        .unzip();
    Ok(ErrorStats::from_series(t_err, r_err))
}

/// APE (SE(3)-aligned) and RPE at `delta`.
pub fn evaluate(
    est: &[StampedPose],
    gt: &[StampedPose],
    delta: usize,
    max_dt: f64,
) -> Result<Metrics, EvalError> {
    Ok(Metrics {
        ape: compute_ape(est, gt, Alignment::Se3, max_dt)?,
        rpe: compute_rpe(est, gt, delta, max_dt)?,
    })
}
