//! Sensor records and navigation state shared across the pipeline.

use std::fmt;

use crate::geom::{is_finite, Mat3, UnitQuat, Vec3};

/// Default gravity magnitude along +z, m/s².
pub const DEFAULT_GRAVITY_Z: f64 = 9.81;

/// One IMU reading. `accel` is specific force in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vec3,
    pub accel: Vec3,
}

impl ImuSample {
    pub fn new(t: f64, gyro: Vec3, accel: Vec3) -> Self {
        Self { t, gyro, accel }
    }

    /// Linear interpolation between two samples at time `t`.
    pub fn lerp(a: &ImuSample, b: &ImuSample, t: f64) -> ImuSample {
        let span = b.t - a.t;
        let s = if span > 0.0 { (t - a.t) / span } else { 0.0 };
        ImuSample {
            t,
            gyro: a.gyro + (b.gyro - a.gyro) * s,
            accel: a.accel + (b.accel - a.accel) * s,
        }
    }
}

/// A single radar detection in the radar frame.
///
/// `doppler` is the radial velocity in m/s, positive when the sensor closes
/// in on the target. `rcs` is in dBsm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarPoint {
    pub p: Vec3,
    pub doppler: f64,
    pub rcs: f64,
}

impl RadarPoint {
    pub fn new(p: Vec3, doppler: f64, rcs: f64) -> Self {
        Self { p, doppler, rcs }
    }

    pub fn range(&self) -> f64 {
        self.p.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RadarScan {
    pub t: f64,
    pub points: Vec<RadarPoint>,
}

impl RadarScan {
    pub fn new(t: f64, points: Vec<RadarPoint>) -> Self {
        Self { t, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset of this scan keeping the given point indices, in order.
    pub fn select(&self, indices: &[usize]) -> RadarScan {
        RadarScan {
            t: self.t,
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanViolation {
    ZeroRange { index: usize },
    NonFinitePosition { index: usize },
    NonFiniteDoppler { index: usize },
    NonFiniteRcs { index: usize },
    NonFiniteTime,
}

impl fmt::Display for ScanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScanViolation::ZeroRange { index } => write!(f, "point {index}: zero range"),
            ScanViolation::NonFinitePosition { index } => {
                write!(f, "point {index}: non-finite position")
            }
            ScanViolation::NonFiniteDoppler { index } => {
                write!(f, "point {index}: non-finite doppler")
            }
            ScanViolation::NonFiniteRcs { index } => write!(f, "point {index}: non-finite rcs"),
            ScanViolation::NonFiniteTime => write!(f, "non-finite scan timestamp"),
        }
    }
}

/// Lists every invariant violation in `scan`; empty when the scan is valid.
pub fn validate_scan(scan: &RadarScan) -> Vec<ScanViolation> {
    let mut out = Vec::new();
    if !scan.t.is_finite() {
        out.push(ScanViolation::NonFiniteTime);
    }
    for (index, pt) in scan.points.iter().enumerate() {
        if !is_finite(&pt.p) {
            out.push(ScanViolation::NonFinitePosition { index });
        } else if pt.p.norm() == 0.0 {
            out.push(ScanViolation::ZeroRange { index });
        }
        if !pt.doppler.is_finite() {
            out.push(ScanViolation::NonFiniteDoppler { index });
        }
        if !pt.rcs.is_finite() {
            out.push(ScanViolation::NonFiniteRcs { index });
        }
    }
    out
}

/// Navigation state of one frame: IMU body pose in the world frame,
/// world-frame velocity and the two IMU biases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameState {
    pub t: f64,
    pub p: Vec3,
    pub q: UnitQuat,
    pub v: Vec3,
    pub ba: Vec3,
    pub bg: Vec3,
}

impl FrameState {
    pub fn at_rest(t: f64) -> Self {
        Self {
            t,
            p: Vec3::zeros(),
            q: UnitQuat::identity(),
            v: Vec3::zeros(),
            ba: Vec3::zeros(),
            bg: Vec3::zeros(),
        }
    }

    pub fn rotation(&self) -> Mat3 {
        crate::geom::to_matrix(&self.q)
    }

    /// True when both biases are inside `bound` (per-component magnitude).
    pub fn biases_within(&self, bound: f64) -> bool {
        self.ba.amax() < bound && self.bg.amax() < bound
    }
}

/// Fixed radar→IMU transform: a radar-frame point `p` maps to `R_E p + t_E`
/// in the IMU body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuat::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn radar_to_body(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

impl Default for Extrinsics {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landmark {
    pub id: u64,
    pub position: Vec3,
}

/// Gravity along the world z axis.
///
/// The accelerometer model is `â = Rᵀ(a_w + g) + b_a`, so a level sensor at
/// rest reads `(0, 0, g_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityModel {
    pub g_z: f64,
}

impl GravityModel {
    pub fn new(g_z: f64) -> Self {
        Self { g_z }
    }

    pub fn vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.g_z)
    }
}

impl Default for GravityModel {
    fn default() -> Self {
        Self {
            g_z: DEFAULT_GRAVITY_Z,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64, z: f64) -> RadarPoint {
        RadarPoint::new(Vec3::new(x, y, z), 0.3, 5.0)
    }

    #[test]
    fn valid_scan_has_no_violations() {
        let scan = RadarScan::new(1.0, vec![pt(1.0, 0.0, 0.0), pt(3.0, -2.0, 0.5)]);
        assert!(validate_scan(&scan).is_empty());
    }

    #[test]
    fn zero_range_is_reported_with_index() {
        let scan = RadarScan::new(1.0, vec![pt(1.0, 0.0, 0.0), pt(0.0, 0.0, 0.0)]);
        assert_eq!(validate_scan(&scan), vec![ScanViolation::ZeroRange { index: 1 }]);
    }

    #[test]
    fn nan_doppler_is_reported() {
        let mut bad = pt(1.0, 1.0, 0.0);
        bad.doppler = f64::NAN;
        let scan = RadarScan::new(0.0, vec![bad]);
        let v = validate_scan(&scan);
        assert_eq!(v, vec![ScanViolation::NonFiniteDoppler { index: 0 }]);
        assert!(v[0].to_string().contains("point 0"));
    }

    #[test]
    fn gravity_only_z() {
        let g = GravityModel::default();
        assert_eq!(g.vector(), Vec3::new(0.0, 0.0, 9.81));
    }

    #[test]
    fn lerp_midpoint() {
        let a = ImuSample::new(0.0, Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0));
        let b = ImuSample::new(1.0, Vec3::new(2.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 3.0));
        let m = ImuSample::lerp(&a, &b, 0.25);
        assert_eq!(m.gyro, Vec3::new(0.5, 0.0, 0.0));
        assert_eq!(m.accel, Vec3::new(0.0, 0.0, 1.5));
    }
}
