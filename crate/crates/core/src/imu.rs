//! IMU pre-integration between radar scans and the inertial residual.
//!
//! Deltas are integrated with the midpoint rule in the body frame of the
//! first sample. Gravity is not part of the deltas; it enters only through
//! [`residual_imu`] and [`propagate`].

use log::warn;
use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::geom::{
    exp_so3, quat_left_matrix, quat_mul, quat_right_matrix, quat_vec_part, right_jacobian, skew,
    to_matrix, Mat3, UnitQuat, Vec3,
};
use crate::sensor::{FrameState, GravityModel, ImuSample};

pub type Mat15 = SMatrix<f64, 15, 15>;
pub type Vec15 = SVector<f64, 15>;
pub type Mat9x6 = SMatrix<f64, 9, 6>;
type Mat15x12 = SMatrix<f64, 15, 12>;

/// Bias deviation above which the first-order correction is considered stale.
pub const BIAS_CORRECTION_WARN: f64 = 0.1;

// Error-state layout shared by the covariance, Jacobians and residual.
pub const IDX_P: usize = 0;
pub const IDX_Q: usize = 3;
pub const IDX_V: usize = 6;
pub const IDX_BA: usize = 9;
pub const IDX_BG: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ImuError {
    #[error("need at least {required} IMU samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("IMU timestamps not strictly increasing at sample {index} (t = {t})")]
    NonMonotonic { index: usize, t: f64 },
    #[error("IMU stream [{first}, {last}] does not cover interval [{t0}, {t1}]")]
    Coverage {
        first: f64,
        last: f64,
        t0: f64,
        t1: f64,
    },
    #[error("first IMU sample at {sample_t} does not match state time {state_t}")]
    TimestampMismatch { state_t: f64, sample_t: f64 },
}

/// Continuous-time noise densities of the IMU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoiseParams {
    /// Gyroscope white noise, rad/s/√Hz.
    pub sigma_g: f64,
    /// Accelerometer white noise, m/s²/√Hz.
    pub sigma_a: f64,
    /// Gyroscope bias random walk, rad/s²/√Hz.
    pub sigma_bg: f64,
    /// Accelerometer bias random walk, m/s³/√Hz.
    pub sigma_ba: f64,
}

impl Default for ImuNoiseParams {
    fn default() -> Self {
        Self {
            sigma_g: 1.0e-3,
            sigma_a: 1.0e-2,
            sigma_bg: 1.0e-4,
            sigma_ba: 1.0e-3,
        }
    }
}

/// Relative-motion deltas `(Δp, Δq, Δv)` over `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub dp: Vec3,
    pub dq: UnitQuat,
    pub dv: Vec3,
    pub dt: f64,
}

impl Deltas {
    pub fn identity() -> Self {
        Self {
            dp: Vec3::zeros(),
            dq: UnitQuat::identity(),
            dv: Vec3::zeros(),
            dt: 0.0,
        }
    }

    /// Chains `self` (earlier) with `next` (later).
    pub fn compose(&self, next: &Deltas) -> Deltas {
        Deltas {
            dp: self.dp + self.dv * next.dt + self.dq * next.dp,
            dq: quat_mul(&self.dq, &next.dq),
            dv: self.dv + self.dq * next.dv,
            dt: self.dt + next.dt,
        }
    }
}

/// Pre-integrated IMU measurement between two frames.
#[derive(Debug, Clone)]
pub struct Preintegrated {
    pub deltas: Deltas,
    /// Covariance of `(δp, δθ, δv, δb_a, δb_g)`.
    pub covariance: Mat15,
    /// ∂(Δp, Δθ, Δv) / ∂(b_a, b_g).
    pub bias_jacobian: Mat9x6,
    pub ba_lin: Vec3,
    pub bg_lin: Vec3,
    pub noise: ImuNoiseParams,
    /// Samples used, kept so the segment can be re-integrated with new biases.
    pub samples: Vec<ImuSample>,
}

fn check_samples(samples: &[ImuSample]) -> Result<(), ImuError> {
    if samples.len() < 2 {
        return Err(ImuError::TooFewSamples {
            required: 2,
            got: samples.len(),
        });
    }
    for (index, w) in samples.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(ImuError::NonMonotonic {
                index: index + 1,
                t: w[1].t,
            });
        }
    }
    Ok(())
}

/// Integrates `samples` into relative-motion deltas with covariance and bias
/// Jacobians, linearized at `(ba, bg)`.
pub fn preintegrate(
    samples: &[ImuSample],
    ba: Vec3,
    bg: Vec3,
    noise: ImuNoiseParams,
) -> Result<Preintegrated, ImuError> {
    check_samples(samples)?;

    let mut alpha = Vec3::zeros();
    let mut beta = Vec3::zeros();
    let mut q = UnitQuat::identity();
    let mut cov = Mat15::zeros();
    let mut jac = Mat15::identity();
    let mut dt_total = 0.0;

    let i3 = Mat3::identity();
    for w in samples.windows(2) {
        let (s0, s1) = (&w[0], &w[1]);
        let dt = s1.t - s0.t;
        let omega = 0.5 * (s0.gyro + s1.gyro) - bg;
        let phi = omega * dt;
        let dq = exp_so3(&phi);
        let q1 = quat_mul(&q, &dq);
        let r0 = to_matrix(&q);
        let r1 = to_matrix(&q1);
        let acc0 = s0.accel - ba;
        let acc1 = s1.accel - ba;
        let a_mid = 0.5 * (r0 * acc0 + r1 * acc1);

        // Linearization of this step, error state (δα, δθ, δβ, δba, δbg).
        let dr_t = to_matrix(&dq).transpose();
        let jr_dt = right_jacobian(&phi) * dt;
        let ma_theta = -0.5 * r0 * skew(&acc0) - 0.5 * r1 * skew(&acc1) * dr_t;
        let ma_ba = -0.5 * (r0 + r1);
        let ma_bg = 0.5 * r1 * skew(&acc1) * jr_dt;

        let mut f = Mat15::identity();
        f.fixed_view_mut::<3, 3>(IDX_P, IDX_Q).copy_from(&(0.5 * dt * dt * ma_theta));
        f.fixed_view_mut::<3, 3>(IDX_P, IDX_V).copy_from(&(dt * i3));
        f.fixed_view_mut::<3, 3>(IDX_P, IDX_BA).copy_from(&(0.5 * dt * dt * ma_ba));
        f.fixed_view_mut::<3, 3>(IDX_P, IDX_BG).copy_from(&(0.5 * dt * dt * ma_bg));
        f.fixed_view_mut::<3, 3>(IDX_Q, IDX_Q).copy_from(&dr_t);
        f.fixed_view_mut::<3, 3>(IDX_Q, IDX_BG).copy_from(&(-jr_dt));
        f.fixed_view_mut::<3, 3>(IDX_V, IDX_Q).copy_from(&(dt * ma_theta));
        f.fixed_view_mut::<3, 3>(IDX_V, IDX_BA).copy_from(&(dt * ma_ba));
        f.fixed_view_mut::<3, 3>(IDX_V, IDX_BG).copy_from(&(dt * ma_bg));

        // Noise inputs (n_a, n_g, n_ba, n_bg).
        let mut g = Mat15x12::zeros();
        g.fixed_view_mut::<3, 3>(IDX_P, 0).copy_from(&(0.5 * dt * dt * ma_ba));
        g.fixed_view_mut::<3, 3>(IDX_P, 3).copy_from(&(0.5 * dt * dt * ma_bg));
        g.fixed_view_mut::<3, 3>(IDX_Q, 3).copy_from(&(-jr_dt));
        g.fixed_view_mut::<3, 3>(IDX_V, 0).copy_from(&(dt * ma_ba));
        g.fixed_view_mut::<3, 3>(IDX_V, 3).copy_from(&(dt * ma_bg));
        g.fixed_view_mut::<3, 3>(IDX_BA, 6).copy_from(&i3);
        g.fixed_view_mut::<3, 3>(IDX_BG, 9).copy_from(&i3);

        let mut qn = SMatrix::<f64, 12, 12>::zeros();
        let na = noise.sigma_a * noise.sigma_a / dt;
        let ng = noise.sigma_g * noise.sigma_g / dt;
        let nba = noise.sigma_ba * noise.sigma_ba * dt;
        let nbg = noise.sigma_bg * noise.sigma_bg * dt;
        for i in 0..3 {
            qn[(i, i)] = na;
            qn[(3 + i, 3 + i)] = ng;
            qn[(6 + i, 6 + i)] = nba;
            qn[(9 + i, 9 + i)] = nbg;
        }

        cov = f * cov * f.transpose() + g * qn * g.transpose();
        cov = 0.5 * (cov + cov.transpose());
        jac = f * jac;

        alpha += beta * dt + 0.5 * a_mid * dt * dt;
        beta += a_mid * dt;
        q = q1;
        dt_total += dt;
    }

    let bias_jacobian = jac.fixed_view::<9, 6>(0, IDX_BA).into_owned();
    Ok(Preintegrated {
        deltas: Deltas {
            dp: alpha,
            dq: q,
            dv: beta,
            dt: dt_total,
        },
        covariance: cov,
        bias_jacobian,
        ba_lin: ba,
        bg_lin: bg,
        noise,
        samples: samples.to_vec(),
    })
}

impl Preintegrated {
    pub fn dt(&self) -> f64 {
        self.deltas.dt
    }

    fn jacobian_block(&self, row: usize, col: usize) -> Mat3 {
        self.bias_jacobian.fixed_view::<3, 3>(row, col).into_owned()
    }

    pub fn dp_dba(&self) -> Mat3 {
        self.jacobian_block(0, 0)
    }
    pub fn dp_dbg(&self) -> Mat3 {
        self.jacobian_block(0, 3)
    }
    pub fn dq_dbg(&self) -> Mat3 {
        self.jacobian_block(3, 3)
    }
    pub fn dv_dba(&self) -> Mat3 {
        self.jacobian_block(6, 0)
    }
    pub fn dv_dbg(&self) -> Mat3 {
        self.jacobian_block(6, 3)
    }

    /// First-order bias update of the deltas without re-integrating.
    pub fn bias_correct(&self, ba: &Vec3, bg: &Vec3) -> Deltas {
        let dba = ba - self.ba_lin;
        let dbg = bg - self.bg_lin;
        if dba.norm().max(dbg.norm()) > BIAS_CORRECTION_WARN {
            warn!(
                "bias moved {:.3} from linearization point; first-order correction is inaccurate",
                dba.norm().max(dbg.norm())
            );
        }
        Deltas {
            dp: self.deltas.dp + self.dp_dba() * dba + self.dp_dbg() * dbg,
            dq: quat_mul(&self.deltas.dq, &exp_so3(&(self.dq_dbg() * dbg))),
            dv: self.deltas.dv + self.dv_dba() * dba + self.dv_dbg() * dbg,
            dt: self.deltas.dt,
        }
    }

    /// Largest bias deviation from the linearization point.
    pub fn bias_deviation(&self, ba: &Vec3, bg: &Vec3) -> f64 {
        (ba - self.ba_lin).norm().max((bg - self.bg_lin).norm())
    }

    /// Integrates the stored samples again around new biases.
    pub fn repropagate(&self, ba: Vec3, bg: Vec3) -> Preintegrated {
        preintegrate(&self.samples, ba, bg, self.noise)
            .expect("stored samples were validated at construction")
    }
}

/// Extracts the samples spanning `[t0, t1]`, with endpoints linearly
/// interpolated exactly at `t0` and `t1`.
pub fn slice_samples(samples: &[ImuSample], t0: f64, t1: f64) -> Result<Vec<ImuSample>, ImuError> {
    let coverage = || ImuError::Coverage {
        first: samples.first().map_or(f64::NAN, |s| s.t),
        last: samples.last().map_or(f64::NAN, |s| s.t),
        t0,
        t1,
    };
    if samples.is_empty() || !(t1 > t0) {
        return Err(coverage());
    }
    let first = samples[0].t;
    let last = samples[samples.len() - 1].t;
    if first > t0 || last < t1 {
        return Err(coverage());
    }
    let sample_at = |t: f64| -> ImuSample {
        let idx = samples.partition_point(|s| s.t < t);
        if idx == 0 {
            return ImuSample { t, ..samples[0] };
        }
        if idx < samples.len() && samples[idx].t == t {
            return samples[idx];
        }
        let hi = idx.min(samples.len() - 1);
        ImuSample::lerp(&samples[hi - 1], &samples[hi], t)
    };

    let mut out = Vec::new();
    out.push(sample_at(t0));
    out.extend(samples.iter().filter(|s| s.t > t0 && s.t < t1).copied());
    out.push(sample_at(t1));
    Ok(out)
}

/// Interpolated gyro reading at `t`, clamped to the stream ends.
pub fn gyro_at(samples: &[ImuSample], t: f64) -> Option<Vec3> {
    if samples.is_empty() {
        return None;
    }
    let idx = samples.partition_point(|s| s.t < t);
    if idx == 0 {
        return Some(samples[0].gyro);
    }
    if idx >= samples.len() {
        return Some(samples[samples.len() - 1].gyro);
    }
    Some(ImuSample::lerp(&samples[idx - 1], &samples[idx], t).gyro)
}

/// Applies deltas to a state: the dead-reckoning counterpart of [`residual_imu`].
pub fn apply_deltas(x: &FrameState, d: &Deltas, g: &GravityModel) -> FrameState {
    let gv = g.vector();
    let dt = d.dt;
    FrameState {
        t: x.t + dt,
        p: x.p + x.v * dt - 0.5 * gv * dt * dt + x.q * d.dp,
        q: quat_mul(&x.q, &d.dq),
        v: x.v - gv * dt + x.q * d.dv,
        ba: x.ba,
        bg: x.bg,
    }
}

/// Dead-reckons `x` through `samples`, which must start at `x.t`.
pub fn propagate(
    x: &FrameState,
    samples: &[ImuSample],
    g: &GravityModel,
) -> Result<FrameState, ImuError> {
    if samples.len() < 2 {
        return Ok(*x);
    }
    let period = samples[1].t - samples[0].t;
    if (samples[0].t - x.t).abs() > 0.5 * period {
        return Err(ImuError::TimestampMismatch {
            state_t: x.t,
            sample_t: samples[0].t,
        });
    }
    let pre = preintegrate(samples, x.ba, x.bg, ImuNoiseParams::default())?;
    let mut out = apply_deltas(x, &pre.deltas, g);
    out.t = samples[samples.len() - 1].t;
    Ok(out)
}

/// Inertial residual between consecutive frames, in the order
/// position, rotation, velocity, accel-bias delta, gyro-bias delta.
/// Unweighted; whitening by the covariance happens in the estimator.
pub fn residual_imu(xk: &FrameState, xk1: &FrameState, pre: &Preintegrated, g: &GravityModel) -> Vec15 {
    imu_terms(xk, xk1, pre, g).residual
}

/// Residual together with Jacobians w.r.t. both frames' local parameters
/// `(δp, δθ, δv, δb_a, δb_g)`, rotations perturbed on the right.
pub fn residual_imu_with_jacobians(
    xk: &FrameState,
    xk1: &FrameState,
    pre: &Preintegrated,
    g: &GravityModel,
) -> (Vec15, Mat15, Mat15) {
    let t = imu_terms(xk, xk1, pre, g);
    let i3 = Mat3::identity();
    let rk_t = t.rk.transpose();
    let dt = pre.dt();

    let mut jk = Mat15::zeros();
    let mut jk1 = Mat15::zeros();

    jk.fixed_view_mut::<3, 3>(IDX_P, IDX_P).copy_from(&(-rk_t));
    jk.fixed_view_mut::<3, 3>(IDX_P, IDX_Q).copy_from(&skew(&(rk_t * t.pos_arg)));
    jk.fixed_view_mut::<3, 3>(IDX_P, IDX_V).copy_from(&(-rk_t * dt));
    jk.fixed_view_mut::<3, 3>(IDX_P, IDX_BA).copy_from(&(-pre.dp_dba()));
    jk.fixed_view_mut::<3, 3>(IDX_P, IDX_BG).copy_from(&(-pre.dp_dbg()));

    let lr = quat_left_matrix(&t.dq_corr_inv) * quat_right_matrix(&t.rel);
    jk.fixed_view_mut::<3, 3>(IDX_Q, IDX_Q).copy_from(&(-lr.fixed_view::<3, 3>(1, 1)));
    let rq = quat_right_matrix(&t.full);
    let dqbg = -rq.fixed_view::<3, 3>(1, 1) * right_jacobian(&t.phi_bg) * pre.dq_dbg();
    jk.fixed_view_mut::<3, 3>(IDX_Q, IDX_BG).copy_from(&dqbg);

    jk.fixed_view_mut::<3, 3>(IDX_V, IDX_Q).copy_from(&skew(&(rk_t * t.vel_arg)));
    jk.fixed_view_mut::<3, 3>(IDX_V, IDX_V).copy_from(&(-rk_t));
    jk.fixed_view_mut::<3, 3>(IDX_V, IDX_BA).copy_from(&(-pre.dv_dba()));
    jk.fixed_view_mut::<3, 3>(IDX_V, IDX_BG).copy_from(&(-pre.dv_dbg()));

    jk.fixed_view_mut::<3, 3>(IDX_BA, IDX_BA).copy_from(&(-i3));
    jk.fixed_view_mut::<3, 3>(IDX_BG, IDX_BG).copy_from(&(-i3));

    jk1.fixed_view_mut::<3, 3>(IDX_P, IDX_P).copy_from(&rk_t);
    let lq = quat_left_matrix(&t.full);
    jk1.fixed_view_mut::<3, 3>(IDX_Q, IDX_Q).copy_from(&lq.fixed_view::<3, 3>(1, 1));
    jk1.fixed_view_mut::<3, 3>(IDX_V, IDX_V).copy_from(&rk_t);
    jk1.fixed_view_mut::<3, 3>(IDX_BA, IDX_BA).copy_from(&i3);
    jk1.fixed_view_mut::<3, 3>(IDX_BG, IDX_BG).copy_from(&i3);

    (t.residual, jk, jk1)
}

struct ImuTerms {
    residual: Vec15,
    rk: Mat3,
    pos_arg: Vec3,
    vel_arg: Vec3,
    phi_bg: Vec3,
    dq_corr_inv: UnitQuat,
    rel: UnitQuat,
    full: UnitQuat,
}

fn imu_terms(xk: &FrameState, xk1: &FrameState, pre: &Preintegrated, g: &GravityModel) -> ImuTerms {
    let dt = pre.dt();
    let gv = g.vector();
    let dba = xk.ba - pre.ba_lin;
    let dbg = xk.bg - pre.bg_lin;
    let phi_bg = pre.dq_dbg() * dbg;
    let dp = pre.deltas.dp + pre.dp_dba() * dba + pre.dp_dbg() * dbg;
    let dv = pre.deltas.dv + pre.dv_dba() * dba + pre.dv_dbg() * dbg;
    let dq_corr = quat_mul(&pre.deltas.dq, &exp_so3(&phi_bg));
    let dq_corr_inv = dq_corr.inverse();

    let rk = to_matrix(&xk.q);
    let pos_arg = xk1.p - xk.p + 0.5 * gv * dt * dt - xk.v * dt;
    let vel_arg = xk1.v + gv * dt - xk.v;
    let rel = quat_mul(&xk.q.inverse(), &xk1.q);
    let full = quat_mul(&dq_corr_inv, &rel);

    let mut residual = Vec15::zeros();
    residual
        .fixed_rows_mut::<3>(IDX_P)
        .copy_from(&(rk.transpose() * pos_arg - dp));
    residual
        .fixed_rows_mut::<3>(IDX_Q)
        .copy_from(&(2.0 * quat_vec_part(&full)));
    residual
        .fixed_rows_mut::<3>(IDX_V)
        .copy_from(&(rk.transpose() * vel_arg - dv));
    residual.fixed_rows_mut::<3>(IDX_BA).copy_from(&(xk1.ba - xk.ba));
    residual.fixed_rows_mut::<3>(IDX_BG).copy_from(&(xk1.bg - xk.bg));

    ImuTerms {
        residual,
        rk,
        pos_arg,
        vel_arg,
        phi_bg,
        dq_corr_inv,
        rel,
        full,
    }
}

/// Applies a 15-dim local increment `(δp, δθ, δv, δb_a, δb_g)` to a state.
pub fn boxplus_state(x: &FrameState, delta: &Vec15) -> FrameState {
    FrameState {
        t: x.t,
        p: x.p + delta.fixed_rows::<3>(IDX_P),
        q: crate::geom::quat_boxplus(&x.q, &delta.fixed_rows::<3>(IDX_Q).into_owned()),
        v: x.v + delta.fixed_rows::<3>(IDX_V),
        ba: x.ba + delta.fixed_rows::<3>(IDX_BA),
        bg: x.bg + delta.fixed_rows::<3>(IDX_BG),
    }
}
