//! Deterministic synthetic worlds: smooth trajectories, IMU streams and
//! radar scans with Doppler, RCS, clutter, moving objects and per-point
//! labels.
//!
//! Randomness comes from ChaCha streams derived from one seed, one stream per
//! purpose, so changing e.g. the clutter rate leaves the scene unchanged.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::geom::{quat_from_euler, UnitQuat, Vec3};
use crate::io::{Meta, PointLabel, Sequence, StampedPose};
use crate::sensor::{Extrinsics, FrameState, GravityModel, ImuSample, RadarPoint, RadarScan};

const STREAM_TRAJECTORY: u64 = 1;
const STREAM_SCENE: u64 = 2;
const STREAM_IMU: u64 = 3;
const STREAM_RADAR: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Circle,
    Figure8,
    RandomSmooth,
}

impl FromStr for TrajectoryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "circle" => Ok(Self::Circle),
            "figure8" => Ok(Self::Figure8),
            "random_smooth" | "random" => Ok(Self::RandomSmooth),
            _ => Err(format!("unknown trajectory kind '{s}'")),
        }
    }
}

/// `a·sin(w t + φ)` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Harmonic {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Harmonic {
    fn eval(&self, t: f64) -> [f64; 3] {
        let arg = self.freq * t + self.phase;
        let (s, c) = arg.sin_cos();
        [
            self.amp * s,
            self.amp * self.freq * c,
            -self.amp * self.freq * self.freq * s,
        ]
    }
}

fn sum_harmonics(hs: &[Harmonic], t: f64) -> [f64; 3] {
    hs.iter().fold([0.0; 3], |acc, h| {
        let v = h.eval(t);
        [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]
    })
}

/// Ground-truth kinematics at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    pub t: f64,
    pub p: Vec3,
    pub q: UnitQuat,
    /// World-frame velocity and acceleration.
    pub v: Vec3,
    pub a: Vec3,
    /// Body-frame angular rate.
    pub omega: Vec3,
}

impl Kinematics {
    pub fn state(&self) -> FrameState {
        FrameState {
            t: self.t,
            p: self.p,
            q: self.q,
            v: self.v,
            ba: Vec3::zeros(),
            bg: Vec3::zeros(),
        }
    }

    pub fn pose(&self) -> StampedPose {
        StampedPose {
            t: self.t,
            p: self.p,
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Static,
    /// Circle of `radius` at angular rate `rate`, or a straight line along x
    /// when `rate` is zero.
    Circle { speed: f64, rate: f64 },
    Figure8 { size: f64, rate: f64 },
    Random { pos: [Vec<Harmonic>; 3], yaw: Vec<Harmonic>, tilt: [Vec<Harmonic>; 2] },
}

/// A smooth trajectory that can be sampled at any time. Orientation follows
/// roll/pitch/yaw (`R = R_z(ψ) R_y(θ) R_x(φ)`); circle and figure-8 keep the
/// body x axis along the direction of travel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    pub duration: f64,
    height: f64,
    shape: Shape,
}

/// Builds a trajectory. `yaw_rate` sets the circle's turn rate (radius =
/// speed / yaw_rate) and the figure-8 loop rate; `seed` drives random_smooth.
pub fn make_trajectory(
    kind: TrajectoryKind,
    duration: f64,
    speed: f64,
    yaw_rate: f64,
    seed: u64,
) -> Trajectory {
    let height = 1.0;
    let shape = if speed == 0.0 {
        Shape::Static
    } else {
        match kind {
            TrajectoryKind::Circle => Shape::Circle { speed, rate: yaw_rate },
            TrajectoryKind::Figure8 => {
                // Lemniscate of Gerono x = a sin u, y = a sin u cos u, u = w t.
                // Its mean speed is a·w·m with m the mean of sqrt(cos²u + cos²2u).
                let n = 4096;
                let m = (0..n)
                    .map(|i| {
                        let u = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                        (u.cos().powi(2) + (2.0 * u).cos().powi(2)).sqrt()
                    })
                    .sum::<f64>()
                    / n as f64;
                let rate = if yaw_rate > 0.0 { yaw_rate } else { 0.1 };
                Shape::Figure8 {
                    size: speed / (rate * m),
                    rate,
                }
            }
            TrajectoryKind::RandomSmooth => {
                let mut rng = rng_for(seed, STREAM_TRAJECTORY);
                let mut harmonics = |n: usize, amp: f64, fmin: f64, fmax: f64| -> Vec<Harmonic> {
                    (0..n)
                        .map(|_| Harmonic {
                            amp: amp * rng.random_range(0.5..1.0),
                            freq: rng.random_range(fmin..fmax),
                            phase: rng.random_range(0.0..2.0 * PI),
                        })
                        .collect()
                };
                let mut pos = [harmonics(3, 1.0, 0.05, 0.3), harmonics(3, 1.0, 0.05, 0.3), harmonics(2, 0.1, 0.05, 0.3)];
                // Scale so the RMS horizontal speed equals `speed`.
                let ms: f64 = pos[..2]
                    .iter()
                    .flatten()
                    .map(|h| 0.5 * (h.amp * h.freq).powi(2))
                    .sum();
                let k = speed / ms.sqrt();
                for axis in &mut pos[..2] {
                    for h in axis.iter_mut() {
                        h.amp *= k;
                    }
                }
                let yaw = harmonics(2, 0.8, 0.03, 0.15);
                let tilt = [harmonics(2, 0.06, 0.1, 0.5), harmonics(2, 0.06, 0.1, 0.5)];
                Shape::Random { pos, yaw, tilt }
            }
        }
    };
    Trajectory {
        kind,
        duration,
        height,
        shape,
    }
}

/// Body angular rate for ZYX Euler angles and their rates.
fn euler_rates_to_body(roll: f64, pitch: f64, d_roll: f64, d_pitch: f64, d_yaw: f64) -> Vec3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(
        d_roll - d_yaw * sp,
        d_pitch * cr + d_yaw * cp * sr,
        -d_pitch * sr + d_yaw * cp * cr,
    )
}

impl Trajectory {
    pub fn sample(&self, t: f64) -> Kinematics {
        let z = self.height;
        let (p, v, a, euler, rates) = match &self.shape {
            Shape::Static => (
                Vec3::new(0.0, 0.0, z),
                Vec3::zeros(),
                Vec3::zeros(),
                [0.0; 3],
                [0.0; 3],
            ),
            Shape::Circle { speed, rate } if *rate == 0.0 => (
                Vec3::new(speed * t, 0.0, z),
                Vec3::new(*speed, 0.0, 0.0),
                Vec3::zeros(),
                [0.0; 3],
                [0.0; 3],
            ),
            Shape::Circle { speed, rate } => {
                let r = speed / rate;
                let (s, c) = (rate * t).sin_cos();
                (
                    Vec3::new(r * s, r * (1.0 - c), z),
                    Vec3::new(speed * c, speed * s, 0.0),
                    Vec3::new(-speed * rate * s, speed * rate * c, 0.0),
                    [0.0, 0.0, rate * t],
                    [0.0, 0.0, *rate],
                )
            }
            Shape::Figure8 { size, rate } => {
                let u = rate * t;
                let (s1, c1) = u.sin_cos();
                let (s2, c2) = (2.0 * u).sin_cos();
                let w = *rate;
                let p = Vec3::new(size * s1, 0.5 * size * s2, z + 0.2 * s1);
                let v = Vec3::new(size * w * c1, size * w * c2, 0.2 * w * c1);
                let a = Vec3::new(-size * w * w * s1, -2.0 * size * w * w * s2, -0.2 * w * w * s1);
                let yaw = v.y.atan2(v.x);
                let d_yaw = (v.x * a.y - v.y * a.x) / (v.x * v.x + v.y * v.y);
                (p, v, a, [0.0, 0.0, yaw], [0.0, 0.0, d_yaw])
            }
            Shape::Random { pos, yaw, tilt } => {
                let x = sum_harmonics(&pos[0], t);
                let y = sum_harmonics(&pos[1], t);
                let zz = sum_harmonics(&pos[2], t);
                let ya = sum_harmonics(yaw, t);
                let ro = sum_harmonics(&tilt[0], t);
                let pi = sum_harmonics(&tilt[1], t);
                (
                    Vec3::new(x[0], y[0], z + zz[0]),
                    Vec3::new(x[1], y[1], zz[1]),
                    Vec3::new(x[2], y[2], zz[2]),
                    [ro[0], pi[0], ya[0]],
                    [ro[1], pi[1], ya[1]],
                )
            }
        };
        Kinematics {
            t,
            p,
            q: quat_from_euler(euler[0], euler[1], euler[2]),
            v,
            a,
            omega: euler_rates_to_body(euler[0], euler[1], rates[0], rates[1], rates[2]),
        }
    }

    /// Largest horizontal distance from the origin over the duration.
    pub fn extent(&self) -> f64 {
        let n = 200;
        (0..=n)
            .map(|i| {
                let p = self.sample(self.duration * i as f64 / n as f64).p;
                p.x.hypot(p.y)
            })
            .fold(0.0, f64::max)
    }
}

/// IMU noise and bias model. Noise terms are continuous-time densities
/// (per-sample σ = density·√rate); biases start at the given values and
/// random-walk with the given densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSimParams {
    pub rate_hz: f64,
    pub gyro_noise: f64,
    pub accel_noise: f64,
    pub gyro_bias: Vec3,
    pub accel_bias: Vec3,
    pub gyro_walk: f64,
    pub accel_walk: f64,
}

impl ImuSimParams {
    pub fn noiseless(rate_hz: f64) -> Self {
        Self {
            rate_hz,
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias: Vec3::zeros(),
            accel_bias: Vec3::zeros(),
            gyro_walk: 0.0,
            accel_walk: 0.0,
        }
    }
}

impl Default for ImuSimParams {
    fn default() -> Self {
        Self::noiseless(200.0)
    }
}

/// Samples the trajectory at `rate_hz` from 0 to its duration (inclusive).
pub fn gen_imu(traj: &Trajectory, params: &ImuSimParams, gravity: &GravityModel, seed: u64) -> Vec<ImuSample> {
    let mut rng = rng_for(seed, STREAM_IMU);
    let dt = 1.0 / params.rate_hz;
    let n = (traj.duration * params.rate_hz + 1e-9).floor() as usize;
    let g = gravity.vector();
    let mut bg = params.gyro_bias;
    let mut ba = params.accel_bias;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss = |rng: &mut ChaCha8Rng, sigma: f64| -> Vec3 {
        if sigma == 0.0 {
            Vec3::zeros()
        } else {
            Vec3::from_fn(|_, _| sigma * std.sample(rng))
        }
    };
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 * dt;
        let kin = traj.sample(t);
        let gyro = kin.omega + bg + gauss(&mut rng, params.gyro_noise / dt.sqrt());
        let accel = kin.q.inverse() * (kin.a + g) + ba + gauss(&mut rng, params.accel_noise / dt.sqrt());
        out.push(ImuSample::new(t, gyro, accel));
        bg += gauss(&mut rng, params.gyro_walk * dt.sqrt());
        ba += gauss(&mut rng, params.accel_walk * dt.sqrt());
    }
    out
}

/// A rigid group of point targets moving at constant velocity, wrapping
/// around the scene bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicObject {
    pub start: Vec3,
    pub velocity: Vec3,
    pub offsets: Vec<Vec3>,
    pub rcs: Vec<f64>,
}

impl DynamicObject {
    pub fn center_at(&self, t: f64, bounds: f64) -> Vec3 {
        let wrap = |x: f64| (x + bounds).rem_euclid(2.0 * bounds) - bounds;
        let c = self.start + self.velocity * t;
        Vec3::new(wrap(c.x), wrap(c.y), c.z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Static points with their RCS (dBsm).
    pub landmarks: Vec<(Vec3, f64)>,
    pub dynamic: Vec<DynamicObject>,
    /// Half-width of the square scene area, m.
    pub bounds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub clusters: usize,
    pub points_per_cluster: usize,
    /// Spread of points around a cluster centre, m.
    pub cluster_sigma: f64,
    /// Scene half-width beyond the trajectory extent, m.
    pub margin: f64,
    pub z_range: (f64, f64),
    pub rcs_range: (f64, f64),
    /// Moving objects per static point.
    pub dynamic_ratio: f64,
    pub dynamic_speed: (f64, f64),
    pub dynamic_points: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            clusters: 80,
            points_per_cluster: 5,
            cluster_sigma: 0.3,
            margin: 30.0,
            z_range: (-1.0, 4.0),
            rcs_range: (-10.0, 30.0),
            dynamic_ratio: 0.0,
            dynamic_speed: (1.5, 3.0),
            dynamic_points: 4,
        }
    }
}

impl SceneParams {
    /// Sets the moving-object density so that about `frac` of the scene's
    /// points belong to moving objects.
    pub fn with_dynamic_fraction(mut self, frac: f64) -> Self {
        let frac = frac.clamp(0.0, 0.95);
        let n_static = (self.clusters * self.points_per_cluster) as f64;
        let n_dyn_points = frac / (1.0 - frac) * n_static;
        self.dynamic_ratio = n_dyn_points / (self.dynamic_points.max(1) as f64 * n_static);
        self
    }
}

pub fn make_scene(traj: &Trajectory, params: &SceneParams, seed: u64) -> Scene {
    let mut rng = rng_for(seed, STREAM_SCENE);
    let bounds = traj.extent() + params.margin;
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut landmarks = Vec::with_capacity(params.clusters * params.points_per_cluster);
    let mut tries = 0;
    while landmarks.len() < params.clusters * params.points_per_cluster && tries < 100 * params.clusters {
        tries += 1;
        let c = Vec3::new(
            rng.random_range(-bounds..bounds),
            rng.random_range(-bounds..bounds),
            rng.random_range(params.z_range.0..params.z_range.1),
        );
        // keep a corridor around the trajectory free
        if (0..50).any(|i| (traj.sample(traj.duration * i as f64 / 49.0).p - c).xy().norm() < 2.0) {
            continue;
        }
        for _ in 0..params.points_per_cluster {
            let off = Vec3::from_fn(|_, _| params.cluster_sigma * std.sample(&mut rng));
            let mut p = c + off;
            p.x = p.x.clamp(-bounds, bounds);
            p.y = p.y.clamp(-bounds, bounds);
            landmarks.push((p, rng.random_range(params.rcs_range.0..params.rcs_range.1)));
        }
    }

    let n_objects = (params.dynamic_ratio * landmarks.len() as f64).round() as usize;
    let dynamic = (0..n_objects)
        .map(|_| {
            let heading = rng.random_range(0.0..2.0 * PI);
            let speed = rng.random_range(params.dynamic_speed.0..params.dynamic_speed.1);
            DynamicObject {
                start: Vec3::new(
                    rng.random_range(-bounds..bounds),
                    rng.random_range(-bounds..bounds),
                    rng.random_range(params.z_range.0..params.z_range.1),
                ),
                velocity: Vec3::new(speed * heading.cos(), speed * heading.sin(), 0.0),
                offsets: (0..params.dynamic_points)
                    .map(|_| Vec3::from_fn(|_, _| params.cluster_sigma * std.sample(&mut rng)))
                    .collect(),
                rcs: (0..params.dynamic_points)
                    .map(|_| rng.random_range(params.rcs_range.0..params.rcs_range.1))
                    .collect(),
            }
        })
        .collect();
    Scene {
        landmarks,
        dynamic,
        bounds,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarSimParams {
    pub scan_rate_hz: f64,
    pub fov_azimuth: f64,
    pub fov_elevation: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub sigma_range: f64,
    /// Azimuth/elevation noise, rad.
    pub sigma_angle: f64,
    pub sigma_doppler: f64,
    pub sigma_rcs: f64,
    pub detection_prob: f64,
    /// Mean clutter detections per scan.
    pub clutter_rate: f64,
    /// Moving-object detections slower than this along the line of sight
    /// are dropped, m/s.
    pub dynamic_min_radial_speed: f64,
}

impl Default for RadarSimParams {
    fn default() -> Self {
        Self {
            scan_rate_hz: 10.0,
            fov_azimuth: 60f64.to_radians(),
            fov_elevation: 20f64.to_radians(),
            range_min: 0.5,
            range_max: 50.0,
            sigma_range: 0.0,
            sigma_angle: 0.0,
            sigma_doppler: 0.0,
            sigma_rcs: 0.0,
            detection_prob: 1.0,
            clutter_rate: 0.0,
            dynamic_min_radial_speed: 0.0,
        }
    }
}

/// Radial velocity of a target at radar-frame position `p_r` whose velocity
/// relative to the radar, expressed in the radar frame, is `-v_rel`:
/// positive when the range closes.
fn doppler_of(p_r: &Vec3, v_sensor_minus_target: &Vec3) -> f64 {
    p_r.dot(v_sensor_minus_target) / p_r.norm()
}

/// One scan per `1/scan_rate_hz` from t = 0 up to the duration, with labels.
pub fn gen_radar(
    traj: &Trajectory,
    scene: &Scene,
    params: &RadarSimParams,
    ext: &Extrinsics,
    seed: u64,
) -> (Vec<RadarScan>, Vec<Vec<PointLabel>>) {
    let mut rng = rng_for(seed, STREAM_RADAR);
    let n = (traj.duration * params.scan_rate_hz + 1e-9).floor() as usize;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let clutter = (params.clutter_rate > 0.0).then(|| Poisson::new(params.clutter_rate).expect("positive rate"));
    let mut scans = Vec::with_capacity(n + 1);
    let mut labels = Vec::with_capacity(n + 1);

    for k in 0..=n {
        let t = k as f64 / params.scan_rate_hz;
        let kin = traj.sample(t);
        let r_radar = kin.q * ext.rotation;
        let t_radar = kin.q * ext.translation + kin.p;
        let inv = r_radar.inverse();
        // radar velocity in the world frame
        let v_radar = kin.v + kin.q * kin.omega.cross(&ext.translation);

        let mut points: Vec<(RadarPoint, PointLabel)> = Vec::new();
        let mut observe = |rng: &mut ChaCha8Rng, world: &Vec3, vel: &Vec3, rcs: f64, label: PointLabel| {
            let p_r = inv * (world - t_radar);
            if !in_view(&p_r, params) || rng.random::<f64>() >= params.detection_prob {
                return;
            }
            let doppler = doppler_of(&p_r, &(inv * (v_radar - vel)));
            if label == PointLabel::Dynamic && (doppler - doppler_of(&p_r, &(inv * v_radar))).abs() < params.dynamic_min_radial_speed {
                return;
            }
            let point = corrupt(rng, &normal, params, &p_r, doppler, rcs);
            points.push((point, label));
        };
        for (id, (l, rcs)) in scene.landmarks.iter().enumerate() {
            observe(&mut rng, l, &Vec3::zeros(), *rcs, PointLabel::Static(id as u64));
        }
        for obj in &scene.dynamic {
            let c = obj.center_at(t, scene.bounds);
            for (off, rcs) in obj.offsets.iter().zip(&obj.rcs) {
                observe(&mut rng, &(c + off), &obj.velocity, *rcs, PointLabel::Dynamic);
            }
        }
        if let Some(pois) = &clutter {
            let count = pois.sample(&mut rng) as usize;
            for _ in 0..count {
                let az = rng.random_range(-params.fov_azimuth..params.fov_azimuth);
                let el = rng.random_range(-params.fov_elevation..params.fov_elevation);
                let r = rng.random_range(params.range_min.max(1.0)..params.range_max);
                let p = spherical(r, az, el);
                let point = RadarPoint::new(p, rng.random_range(-3.0..3.0), rng.random_range(-10.0..30.0));
                points.push((point, PointLabel::Clutter));
            }
        }
        points.shuffle(&mut rng);
        let (pts, lbl): (Vec<_>, Vec<_>) = points.into_iter().unzip();
        scans.push(RadarScan::new(t, pts));
        labels.push(lbl);
    }
    (scans, labels)
}

fn spherical(r: f64, az: f64, el: f64) -> Vec3 {
    Vec3::new(r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin())
}

fn in_view(p: &Vec3, params: &RadarSimParams) -> bool {
    let r = p.norm();
    if !(params.range_min..=params.range_max).contains(&r) {
        return false;
    }
    let az = p.y.atan2(p.x);
    let el = (p.z / r).asin();
    az.abs() <= params.fov_azimuth && el.abs() <= params.fov_elevation
}

fn corrupt(
    rng: &mut ChaCha8Rng,
    normal: &Normal<f64>,
    params: &RadarSimParams,
    p_r: &Vec3,
    doppler: f64,
    rcs: f64,
) -> RadarPoint {
    let mut g = |sigma: f64| if sigma == 0.0 { 0.0 } else { sigma * normal.sample(rng) };
    let r = p_r.norm();
    let az = p_r.y.atan2(p_r.x);
    let el = (p_r.z / r).asin().clamp(-FRAC_PI_2, FRAC_PI_2);
    let p = if params.sigma_range == 0.0 && params.sigma_angle == 0.0 {
        *p_r
    } else {
        spherical(r + g(params.sigma_range), az + g(params.sigma_angle), el + g(params.sigma_angle))
    };
    RadarPoint::new(p, doppler + g(params.sigma_doppler), rcs + g(params.sigma_rcs))
}

/// Named noise settings for radar and IMU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseProfile {
    /// Exact measurements, no clutter, no biases.
    None,
    /// Mild measurement noise, no clutter.
    Low,
    /// σ_range 0.1 m, σ_angle 0.5°, σ_doppler 0.1 m/s, 5 clutter points per scan.
    Noisy,
}

impl FromStr for NoiseProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" | "zero" => Ok(Self::None),
            "low" => Ok(Self::Low),
            "noisy" => Ok(Self::Noisy),
            _ => Err(format!("unknown noise profile '{s}'")),
        }
    }
}

impl NoiseProfile {
    pub fn apply(self, radar: &mut RadarSimParams, imu: &mut ImuSimParams) {
        match self {
            NoiseProfile::None => {
                radar.sigma_range = 0.0;
                radar.sigma_angle = 0.0;
                radar.sigma_doppler = 0.0;
                radar.sigma_rcs = 0.0;
                radar.clutter_rate = 0.0;
                radar.detection_prob = 1.0;
                *imu = ImuSimParams::noiseless(imu.rate_hz);
            }
            NoiseProfile::Low => {
                radar.sigma_range = 0.03;
                radar.sigma_angle = 0.2f64.to_radians();
                radar.sigma_doppler = 0.03;
                radar.sigma_rcs = 0.5;
                radar.detection_prob = 0.95;
                imu.gyro_noise = 1e-3;
                imu.accel_noise = 1e-2;
                imu.gyro_bias = Vec3::new(0.002, -0.003, 0.001);
                imu.accel_bias = Vec3::new(0.02, -0.01, 0.03);
            }
            NoiseProfile::Noisy => {
                radar.sigma_range = 0.1;
                radar.sigma_angle = 0.5f64.to_radians();
                radar.sigma_doppler = 0.1;
                radar.sigma_rcs = 1.0;
                radar.clutter_rate = 5.0;
                radar.detection_prob = 0.9;
                imu.gyro_noise = 2e-3;
                imu.accel_noise = 2e-2;
                imu.gyro_bias = Vec3::new(0.003, -0.004, 0.002);
                imu.accel_bias = Vec3::new(0.03, -0.02, 0.04);
                imu.gyro_walk = 1e-5;
                imu.accel_walk = 1e-4;
            }
        }
    }
}

/// Everything needed to generate one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub kind: TrajectoryKind,
    pub duration: f64,
    pub speed: f64,
    pub yaw_rate: f64,
    pub seed: u64,
    pub scene: SceneParams,
    pub radar: RadarSimParams,
    pub imu: ImuSimParams,
    pub ext: Extrinsics,
    pub gravity: GravityModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Circle,
            duration: 20.0,
            speed: 1.0,
            yaw_rate: 0.2,
            seed: 0,
            scene: SceneParams::default(),
            radar: RadarSimParams::default(),
            imu: ImuSimParams::default(),
            ext: default_extrinsics(),
            gravity: GravityModel::default(),
        }
    }
}

/// A small mounting offset and rotation, so extrinsics are exercised.
pub fn default_extrinsics() -> Extrinsics {
    Extrinsics::new(quat_from_euler(0.0, 0.02, 0.03), Vec3::new(0.15, 0.0, 0.1))
}

impl SimConfig {
    pub fn with_noise(mut self, profile: NoiseProfile) -> Self {
        profile.apply(&mut self.radar, &mut self.imu);
        self
    }
}

/// Simulated sequence plus the continuous ground truth it was sampled from.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub sequence: Sequence,
    pub trajectory: Trajectory,
    pub scene: Scene,
}

pub fn simulate(cfg: &SimConfig) -> Simulation {
    let traj = make_trajectory(cfg.kind, cfg.duration, cfg.speed, cfg.yaw_rate, cfg.seed);
    let scene = make_scene(&traj, &cfg.scene, cfg.seed);
    let imu = gen_imu(&traj, &cfg.imu, &cfg.gravity, cfg.seed);
    let (scans, labels) = gen_radar(&traj, &scene, &cfg.radar, &cfg.ext, cfg.seed);
    let gt = scans.iter().map(|s| traj.sample(s.t).pose()).collect();
    Simulation {
        sequence: Sequence {
            meta: Meta {
                imu_rate_hz: cfg.imu.rate_hz,
                scan_rate_hz: cfg.radar.scan_rate_hz,
                gravity_z: cfg.gravity.g_z,
                doppler_sign: 1.0,
                ext: cfg.ext,
            },
            imu,
            scans,
            gt: Some(gt),
            labels: Some(labels),
        },
        trajectory: traj,
        scene,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_kinematics() {
        let (s, w) = (2.0, 0.25);
        let traj = make_trajectory(TrajectoryKind::Circle, 30.0, s, w, 0);
        let r = s / w;
        for i in 0..20 {
            let k = traj.sample(i as f64 * 1.3);
            assert_relative_eq!(k.omega.z, s / r, epsilon = 1e-12);
            assert_relative_eq!(k.a.norm(), s * s / r, epsilon = 1e-12);
            assert_relative_eq!(k.v.norm(), s, epsilon = 1e-12);
            // body x stays tangent to the path
            assert_relative_eq!((k.q * Vec3::x()).dot(&k.v), s, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_speed_is_constant() {
        for kind in [TrajectoryKind::Circle, TrajectoryKind::Figure8, TrajectoryKind::RandomSmooth] {
            let traj = make_trajectory(kind, 10.0, 0.0, 0.2, 3);
            let a = traj.sample(0.0);
            let b = traj.sample(7.3);
            assert_eq!(a.p, b.p);
            assert_eq!(a.q, b.q);
            assert_eq!(b.v, Vec3::zeros());
            assert_eq!(b.omega, Vec3::zeros());
        }
    }

    #[test]
    fn random_smooth_is_seeded() {
        let a = make_trajectory(TrajectoryKind::RandomSmooth, 10.0, 1.0, 0.2, 11);
        let b = make_trajectory(TrajectoryKind::RandomSmooth, 10.0, 1.0, 0.2, 11);
        let c = make_trajectory(TrajectoryKind::RandomSmooth, 10.0, 1.0, 0.2, 12);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for kind in [TrajectoryKind::Circle, TrajectoryKind::Figure8, TrajectoryKind::RandomSmooth] {
            let traj = make_trajectory(kind, 20.0, 1.5, 0.3, 5);
            for i in 0..10 {
                let t = 0.5 + 1.7 * i as f64;
                let (k0, k, k1) = (traj.sample(t - h), traj.sample(t), traj.sample(t + h));
                let v_fd = (k1.p - k0.p) / (2.0 * h);
                let a_fd = (k1.v - k0.v) / (2.0 * h);
                assert!((v_fd - k.v).norm() < 1e-6, "{kind:?} velocity");
                assert!((a_fd - k.a).norm() < 1e-6, "{kind:?} acceleration");
                // body rate from the orientation derivative: Exp(ω h) ≈ q(t)⁻¹ q(t+h)
                let w_fd = crate::geom::log_so3(&(k0.q.inverse() * k1.q)) / (2.0 * h);
                assert!((w_fd - k.omega).norm() < 1e-6, "{kind:?} angular rate");
            }
        }
    }

    #[test]
    fn stationary_imu_reads_gravity() {
        let traj = make_trajectory(TrajectoryKind::Circle, 1.0, 0.0, 0.0, 0);
        let imu = gen_imu(&traj, &ImuSimParams::default(), &GravityModel::default(), 0);
        assert_eq!(imu.len(), 201);
        for s in imu {
            assert_eq!(s.gyro, Vec3::zeros());
            assert_relative_eq!(s.accel, Vec3::new(0.0, 0.0, 9.81), epsilon = 1e-15);
        }
    }

    #[test]
    fn boresight_doppler() {
        // sensor moving at (1,0,0), landmark 10 m ahead on boresight
        let traj = make_trajectory(TrajectoryKind::Circle, 0.0, 1.0, 0.0, 0);
        let scene = Scene {
            landmarks: vec![(Vec3::new(10.0, 0.0, 1.0), 5.0)],
            dynamic: Vec::new(),
            bounds: 100.0,
        };
        let (scans, labels) = gen_radar(&traj, &scene, &RadarSimParams::default(), &Extrinsics::identity(), 0);
        assert_eq!(scans.len(), 1);
        assert_eq!(labels[0], vec![PointLabel::Static(0)]);
        assert_relative_eq!(scans[0].points[0].doppler, 1.0, epsilon = 1e-12);
        assert_eq!(scans[0].points[0].rcs, 5.0);
    }

    #[test]
    fn static_sensor_sees_zero_doppler() {
        let cfg = SimConfig {
            speed: 0.0,
            duration: 1.0,
            ..Default::default()
        };
        let sim = simulate(&cfg);
        let labels = sim.sequence.labels.as_ref().unwrap();
        for (scan, ls) in sim.sequence.scans.iter().zip(labels) {
            assert_eq!(scan.len(), ls.len());
            for p in &scan.points {
                assert!(p.doppler.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dynamic_fraction_targets_scene_share() {
        let p = SceneParams::default().with_dynamic_fraction(0.3);
        let n_static = (p.clusters * p.points_per_cluster) as f64;
        let dyn_points = p.dynamic_ratio * n_static * p.dynamic_points as f64;
        assert_relative_eq!(dyn_points / (dyn_points + n_static), 0.3, epsilon = 1e-12);
    }
}
