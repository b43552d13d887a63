//! Scan-by-scan driver: propagation, filtering, association, landmark
//! management, window optimization and sliding.

use log::{debug, warn};
use nalgebra::{Matrix3, OMatrix, U3};

use super::problem::build_problem;
use super::solver::{solve, SolveReport};
use super::window::{slide_window, SlidingWindow, WindowFrame};
use super::{EstimatorConfig, EstimatorError};
use crate::association::{associate_scans, AssocConfig, Observation, RelPose, TrackStore};
use crate::geom::{quat_from_euler, Vec3};
use crate::imu::{apply_deltas, gyro_at, preintegrate, slice_samples, ImuNoiseParams};
use crate::preprocess::{
    fov_indices, radius_indices, velocity_check_indices, PreprocessConfig,
};
use crate::sensor::{Extrinsics, FrameState, GravityModel, ImuSample, RadarPoint, RadarScan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryConfig {
    pub estimator: EstimatorConfig,
    pub preprocess: PreprocessConfig,
    pub assoc: AssocConfig,
    pub noise: ImuNoiseParams,
    pub gravity: GravityModel,
    pub ext: Extrinsics,
    /// Nominal IMU sample period, s. Zero infers it from the data.
    pub imu_period: f64,
    /// Sanity bound on bias magnitudes.
    pub bias_bound: f64,
    /// Bias deviation that triggers re-integration of a stored segment.
    pub repropagate_bias: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig::default(),
            preprocess: PreprocessConfig::default(),
            assoc: AssocConfig::default(),
            noise: ImuNoiseParams::default(),
            gravity: GravityModel::default(),
            ext: Extrinsics::identity(),
            imu_period: 0.0,
            bias_bound: 1.0,
            repropagate_bias: 0.02,
        }
    }
}

/// Point counts after each front-end stage of one scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub raw: usize,
    pub fov: usize,
    pub radius: usize,
    pub static_points: usize,
    pub matched: usize,
    pub landmarks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryOutput {
    pub frame: usize,
    pub t: f64,
    /// Newest frame state after optimization.
    pub state: FrameState,
    /// State predicted by IMU propagation before optimization.
    pub predicted: FrameState,
    pub counts: StageCounts,
    pub degraded: bool,
    pub solve: Option<SolveReport>,
    /// Raw-scan indices of points that reached the velocity check.
    pub checked_indices: Vec<usize>,
    /// Raw-scan indices of points kept as static.
    pub static_indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Initialization {
    pub state: FrameState,
    pub degraded: bool,
}

fn los_rank(dirs: &[Vec3]) -> usize {
    if dirs.is_empty() {
        return 0;
    }
    let m = OMatrix::<f64, nalgebra::Dyn, U3>::from_fn(dirs.len(), |r, c| dirs[r][c]);
    let sv = m.singular_values();
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-6 * max).count()
}

fn weighted_ls(dirs: &[Vec3], doppler: &[f64], weights: &[f64]) -> Option<Vec3> {
    let mut a = Matrix3::zeros();
    let mut b = Vec3::zeros();
    for ((u, d), w) in dirs.iter().zip(doppler).zip(weights) {
        a += u * u.transpose() * *w;
        b += u * (*d * *w);
    }
    a.cholesky().map(|c| c.solve(&b))
}

/// Radar-frame ego-velocity minimizing `Σ (uⱼᵀ v − v_dⱼ)²` over the points'
/// unit line-of-sight vectors, refined by Cauchy-weighted reweighting with
/// scale `threshold` and a final fit over points within `threshold`.
pub fn ego_velocity(points: &[RadarPoint], threshold: f64) -> Result<Vec3, EstimatorError> {
    let pts: Vec<&RadarPoint> = points.iter().filter(|p| p.p.norm() > 0.0).collect();
    let dirs: Vec<Vec3> = pts.iter().map(|p| p.p / p.p.norm()).collect();
    let doppler: Vec<f64> = pts.iter().map(|p| p.doppler).collect();
    let rank = los_rank(&dirs);
    if rank < 3 {
        return Err(EstimatorError::DegenerateGeometry { rank });
    }
    let mut weights = vec![1.0; dirs.len()];
    let mut v = weighted_ls(&dirs, &doppler, &weights).ok_or(EstimatorError::DegenerateGeometry { rank })?;
    let scale = threshold.max(1e-3);
    for _ in 0..10 {
        for ((w, u), d) in weights.iter_mut().zip(&dirs).zip(&doppler) {
            let r = (u.dot(&v) - d) / scale;
            *w = 1.0 / (1.0 + r * r);
        }
        match weighted_ls(&dirs, &doppler, &weights) {
            Some(next) => v = next,
            None => break,
        }
    }
    let inliers: Vec<usize> = (0..dirs.len())
        .filter(|&i| (dirs[i].dot(&v) - doppler[i]).abs() <= threshold)
        .collect();
    let in_dirs: Vec<Vec3> = inliers.iter().map(|&i| dirs[i]).collect();
    if inliers.len() >= 3 && los_rank(&in_dirs) == 3 {
        let in_dop: Vec<f64> = inliers.iter().map(|&i| doppler[i]).collect();
        if let Some(refit) = weighted_ls(&in_dirs, &in_dop, &vec![1.0; inliers.len()]) {
            v = refit;
        }
    }
    Ok(v)
}

/// Initial state at the first scan: origin position, zero yaw, roll and pitch
/// from the gravity direction seen by the accelerometer, zero biases, and
/// velocity from the scan's Doppler ego-motion.
pub fn initialize(scan: &RadarScan, imu: &[ImuSample], cfg: &OdometryConfig) -> Initialization {
    let fov = scan.select(&fov_indices(scan, &cfg.preprocess));
    let kept = fov.select(&radius_indices(&fov, &cfg.preprocess));
    let gyro = gyro_at(imu, scan.t).unwrap_or_else(Vec3::zeros);

    let (v_radar, degraded) = match ego_velocity(&kept.points, cfg.preprocess.vel_threshold) {
        Ok(v) => (v, false),
        Err(e) => {
            warn!("initialization at t = {}: {e}; assuming zero velocity", scan.t);
            (Vec3::zeros(), true)
        }
    };
    let v_body = cfg.ext.rotation * v_radar - gyro.cross(&cfg.ext.translation);

    // Specific force minus the centripetal term of steady motion leaves Rᵀg.
    let gravity_body = if imu.is_empty() {
        Vec3::new(0.0, 0.0, cfg.gravity.g_z)
    } else {
        imu.iter()
            .map(|s| s.accel - s.gyro.cross(&v_body))
            .sum::<Vec3>()
            / imu.len() as f64
    };
    let g = if cfg.gravity.g_z < 0.0 { -gravity_body } else { gravity_body };
    let roll = g.y.atan2(g.z);
    let pitch = (-g.x).atan2(g.y.hypot(g.z));
    let q = quat_from_euler(roll, pitch, 0.0);

    Initialization {
        state: FrameState {
            t: scan.t,
            p: Vec3::zeros(),
            q,
            v: q * v_body,
            ba: Vec3::zeros(),
            bg: Vec3::zeros(),
        },
        degraded,
    }
}

fn radar_pose(x: &FrameState, ext: &Extrinsics) -> (crate::geom::UnitQuat, Vec3) {
    (x.q * ext.rotation, x.q * ext.translation + x.p)
}

/// Transform from the current radar frame into the previous radar frame.
pub fn relative_radar_pose(prev: &FrameState, curr: &FrameState, ext: &Extrinsics) -> RelPose {
    let (rp, tp) = radar_pose(prev, ext);
    let (rc, tc) = radar_pose(curr, ext);
    let inv = rp.inverse();
    RelPose {
        rotation: inv * rc,
        translation: inv * (tc - tp),
    }
}

fn median_period(samples: &[ImuSample]) -> Option<f64> {
    let mut d: Vec<f64> = samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// The sliding-window radar-inertial odometry pipeline.
#[derive(Debug, Clone)]
pub struct Odometry {
    cfg: OdometryConfig,
    window: SlidingWindow,
    tracks: TrackStore,
    history: Vec<FrameState>,
    diverged_solves: usize,
}

impl Odometry {
    pub fn new(cfg: OdometryConfig) -> Self {
        Self {
            cfg,
            window: SlidingWindow::new(),
            tracks: TrackStore::new(),
            history: Vec::new(),
            diverged_solves: 0,
        }
    }

    pub fn config(&self) -> &OdometryConfig {
        &self.cfg
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn tracks(&self) -> &TrackStore {
        &self.tracks
    }

    /// Latest estimate of every processed frame, in scan order.
    pub fn trajectory(&self) -> &[FrameState] {
        &self.history
    }

    pub fn diverged_solves(&self) -> usize {
        self.diverged_solves
    }

    fn assoc_config(&self) -> AssocConfig {
        if self.cfg.estimator.ablation.disable_rcs_filter {
            self.cfg.assoc.without_rcs_gate()
        } else {
            self.cfg.assoc
        }
    }

    /// Processes one scan. `imu` must bracket the interval since the previous
    /// scan; for the first scan it is used for the gravity direction only.
    pub fn process_scan(
        &mut self,
        scan: &RadarScan,
        imu: &[ImuSample],
    ) -> Result<OdometryOutput, EstimatorError> {
        let frame_id = self.history.len();
        let pre_cfg = self.cfg.preprocess;

        let (predicted, preint, degraded_imu) = match self.window.newest() {
            None => {
                let init = initialize(scan, imu, &self.cfg);
                (init.state, None, init.degraded)
            }
            Some(prev) => {
                let x_prev = prev.state;
                if scan.t <= x_prev.t {
                    return Err(EstimatorError::OutOfOrder {
                        t: scan.t,
                        last: x_prev.t,
                    });
                }
                let (samples, gap) = self.imu_segment(imu, x_prev.t, scan.t)?;
                let pre = preintegrate(&samples, x_prev.ba, x_prev.bg, self.cfg.noise)?;
                let mut x = apply_deltas(&x_prev, &pre.deltas, &self.cfg.gravity);
                x.t = scan.t;
                (x, Some(pre), gap)
            }
        };
        let gyro = gyro_at(imu, scan.t).unwrap_or_else(Vec3::zeros);

        // Front end.
        let fov_idx = fov_indices(scan, &pre_cfg);
        let fov_scan = scan.select(&fov_idx);
        let rad_local = radius_indices(&fov_scan, &pre_cfg);
        let checked_indices: Vec<usize> = rad_local.iter().map(|&i| fov_idx[i]).collect();
        let rad_scan = scan.select(&checked_indices);
        let static_local = if self.cfg.estimator.ablation.disable_velocity_filter {
            (0..rad_scan.len()).collect()
        } else {
            velocity_check_indices(&rad_scan, &predicted, &gyro, &self.cfg.ext, &pre_cfg).static_idx
        };
        let static_indices: Vec<usize> = static_local.iter().map(|&i| checked_indices[i]).collect();
        let static_scan = scan.select(&static_indices);

        let correspondences = match self.window.newest() {
            Some(prev) => {
                let prev_scan = RadarScan::new(prev.state.t, prev.static_points.clone());
                let rel = relative_radar_pose(&prev.state, &predicted, &self.cfg.ext);
                associate_scans(&prev_scan, &static_scan, &rel, &self.assoc_config())
            }
            None => Vec::new(),
        };

        self.window.push(
            WindowFrame::new(frame_id, predicted, gyro, static_scan.points.clone()),
            preint,
        );
        self.history.push(predicted);

        let update = self.tracks.update(&correspondences, frame_id, &static_scan);
        if !self.cfg.estimator.ablation.disable_p2p_residual {
            self.attach_landmarks(&update.extended);
        }

        let mut solve_report = None;
        let mut degraded = degraded_imu;
        // With only inertial factors the prediction already has zero cost.
        let set = self.cfg.estimator.residuals();
        if self.window.len() >= 2 && (set.doppler || set.p2p) {
            let problem = build_problem(&self.window, &self.cfg.estimator, &self.cfg.ext, &self.cfg.gravity)?;
            let report = solve(&problem, &mut self.window, &self.cfg.estimator);
            if report.diverged {
                warn!("frame {frame_id}: solve diverged, window rolled back");
                self.diverged_solves += 1;
                degraded = true;
            }
            solve_report = Some(report);
            self.refresh_preintegration();
        }
        for f in &self.window.frames {
            self.history[f.id] = f.state;
        }
        let newest = self.window.newest().expect("frame just pushed").state;
        if !newest.biases_within(self.cfg.bias_bound) {
            warn!("frame {frame_id}: bias estimate outside sanity bound");
            degraded = true;
        }

        let counts = StageCounts {
            raw: scan.len(),
            fov: fov_idx.len(),
            radius: checked_indices.len(),
            static_points: static_indices.len(),
            matched: correspondences.len(),
            landmarks: self.window.landmarks.len(),
        };
        debug!("frame {frame_id}: {counts:?}");

        slide_window(&mut self.window, self.cfg.estimator.window_k);

        Ok(OdometryOutput {
            frame: frame_id,
            t: scan.t,
            state: newest,
            predicted,
            counts,
            degraded,
            solve: solve_report,
            checked_indices,
            static_indices,
        })
    }

    /// IMU samples over `[t0, t1]` with interpolated endpoints. Missing
    /// coverage is padded by holding the nearest sample, and gaps above twice
    /// the nominal period are flagged.
    fn imu_segment(
        &self,
        imu: &[ImuSample],
        t0: f64,
        t1: f64,
    ) -> Result<(Vec<ImuSample>, bool), EstimatorError> {
        if imu.is_empty() {
            return Err(crate::imu::ImuError::TooFewSamples { required: 1, got: 0 }.into());
        }
        let nominal = if self.cfg.imu_period > 0.0 {
            self.cfg.imu_period
        } else {
            median_period(imu).unwrap_or(t1 - t0)
        };
        let mut degraded = false;
        let mut padded: Vec<ImuSample> = Vec::with_capacity(imu.len() + 2);
        if imu[0].t > t0 {
            degraded = true;
            padded.push(ImuSample { t: t0, ..imu[0] });
        }
        for s in imu {
            if padded.last().is_none_or(|l| s.t > l.t) {
                padded.push(*s);
            }
        }
        let last = *padded.last().expect("non-empty");
        if last.t < t1 {
            degraded = true;
            padded.push(ImuSample { t: t1, ..last });
        }
        let samples = slice_samples(&padded, t0, t1)?;
        let max_gap = samples
            .windows(2)
            .map(|w| w[1].t - w[0].t)
            .fold(0.0, f64::max);
        if max_gap > 2.0 * nominal {
            degraded = true;
        }
        if degraded {
            warn!("IMU gap between {t0} and {t1} (max step {max_gap:.4} s)");
        }
        Ok((samples, degraded))
    }

    fn world_position(&self, obs: &Observation) -> Option<Vec3> {
        let state = match self.window.frame_index(obs.frame) {
            Some(i) => self.window.frames[i].state,
            None => *self.history.get(obs.frame)?,
        };
        Some(state.q * self.cfg.ext.radar_to_body(&obs.point.p) + state.p)
    }

    fn attach_landmarks(&mut self, extended: &[u64]) {
        let newest = self.window.len() - 1;
        for track in self.tracks.tracks() {
            let Some(lm) = track.landmark_id else { continue };
            if extended.contains(&track.id) && self.window.landmarks.contains_key(&lm) {
                let obs = track.last();
                self.window.frames[newest].observations.push((lm, obs.point));
            }
        }

        let cfg = self.assoc_config();
        let mut tracks = std::mem::take(&mut self.tracks);
        let promoted = tracks.promote(&cfg, |o| self.world_position(o));
        for lm in promoted {
            let track = tracks
                .tracks()
                .iter()
                .find(|t| t.landmark_id == Some(lm.id))
                .expect("promoted track is live");
            for obs in &track.observations {
                if let Some(i) = self.window.frame_index(obs.frame) {
                    self.window.frames[i].observations.push((lm.id, obs.point));
                }
            }
            self.window.landmarks.insert(lm.id, lm);
        }
        self.tracks = tracks;
    }

    fn refresh_preintegration(&mut self) {
        for k in 0..self.window.preints.len() {
            let st = self.window.frames[k].state;
            let pre = &self.window.preints[k];
            if pre.bias_deviation(&st.ba, &st.bg) > self.cfg.repropagate_bias {
                self.window.preints[k] = pre.repropagate(st.ba, st.bg);
            }
        }
    }
}
