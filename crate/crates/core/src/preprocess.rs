//! Scan pre-processing: field-of-view gating, radius outlier removal and the
//! IMU-aided Doppler velocity check that separates static points.

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{skew, Vec3};
use crate::sensor::{Extrinsics, FrameState, RadarScan};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("radar point at zero range")]
    ZeroRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    /// Half-angle of the azimuth field of view, rad.
    pub fov_azimuth: f64,
    /// Half-angle of the elevation field of view, rad.
    pub fov_elevation: f64,
    pub range_max: f64,
    /// Minimum number of other points within `radius_d` for a point to survive.
    pub radius_n: usize,
    pub radius_d: f64,
    /// Doppler consistency threshold, m/s.
    pub vel_threshold: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            fov_azimuth: 60f64.to_radians(),
            fov_elevation: 20f64.to_radians(),
            range_max: 50.0,
            radius_n: 2,
            radius_d: 1.0,
            vel_threshold: 0.25,
        }
    }
}

pub fn azimuth(p: &Vec3) -> f64 {
    p.y.atan2(p.x)
}

pub fn elevation(p: &Vec3) -> f64 {
    p.z.atan2(p.x.hypot(p.y))
}

pub fn in_fov(p: &Vec3, cfg: &PreprocessConfig) -> bool {
    p.norm() <= cfg.range_max
        && azimuth(p).abs() <= cfg.fov_azimuth
        && elevation(p).abs() <= cfg.fov_elevation
}

pub fn fov_indices(scan: &RadarScan, cfg: &PreprocessConfig) -> Vec<usize> {
    (0..scan.len()).filter(|&i| in_fov(&scan.points[i].p, cfg)).collect()
}

/// Keeps points inside the configured range and angular field of view.
pub fn fov_filter(scan: &RadarScan, cfg: &PreprocessConfig) -> RadarScan {
    scan.select(&fov_indices(scan, cfg))
}

type Cell = (i64, i64, i64);

fn cell_of(p: &Vec3, size: f64) -> Cell {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Uniform hash grid over a point set for fixed-radius queries.
pub struct PointGrid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<Cell, Vec<usize>>,
}

impl<'a> PointGrid<'a> {
    pub fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<Cell, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(cell_of(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    /// Calls `f` with every index whose point lies within `radius` of `q`.
    /// `radius` must not exceed the cell size.
    pub fn for_each_within(&self, q: &Vec3, radius: f64, mut f: impl FnMut(usize)) {
        debug_assert!(radius <= self.cell);
        let (cx, cy, cz) = cell_of(q, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in bucket {
                            if (self.points[j] - q).norm() <= radius {
                                f(j);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn radius_indices(scan: &RadarScan, cfg: &PreprocessConfig) -> Vec<usize> {
    if scan.is_empty() {
        return Vec::new();
    }
    let pts: Vec<Vec3> = scan.points.iter().map(|p| p.p).collect();
    let grid = PointGrid::new(&pts, cfg.radius_d);
    (0..pts.len())
        .filter(|&i| {
            let mut n = 0usize;
            grid.for_each_within(&pts[i], cfg.radius_d, |j| {
                if j != i {
                    n += 1;
                }
            });
            n >= cfg.radius_n
        })
        .collect()
}

/// Removes points with fewer than `radius_n` other points within `radius_d`.
pub fn radius_filter(scan: &RadarScan, cfg: &PreprocessConfig) -> RadarScan {
    scan.select(&radius_indices(scan, cfg))
}

/// Doppler velocity a static point at radar-frame position `p` should show,
/// given the frame's rotation, velocity, gyro bias and the measured rate `gyro`.
pub fn estimate_doppler(
    p: &Vec3,
    x: &FrameState,
    gyro: &Vec3,
    ext: &Extrinsics,
) -> Result<f64, PreprocessError> {
    let range = p.norm();
    if range == 0.0 || !range.is_finite() {
        return Err(PreprocessError::ZeroRange);
    }
    let body_vel = x.q.inverse() * x.v + skew(&(gyro - x.bg)) * ext.translation;
    let radar_vel = ext.rotation.inverse() * body_vel;
    Ok(p.dot(&radar_vel) / range)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VelocityPartition {
    pub static_idx: Vec<usize>,
    pub rejected_idx: Vec<usize>,
}

pub fn velocity_check_indices(
    scan: &RadarScan,
    x_pred: &FrameState,
    gyro: &Vec3,
    ext: &Extrinsics,
    cfg: &PreprocessConfig,
) -> VelocityPartition {
    let mut out = VelocityPartition::default();
    for (i, pt) in scan.points.iter().enumerate() {
        let consistent = estimate_doppler(&pt.p, x_pred, gyro, ext)
            .map(|v| (v - pt.doppler).abs() <= cfg.vel_threshold)
            .unwrap_or(false);
        if consistent {
            out.static_idx.push(i);
        } else {
            out.rejected_idx.push(i);
        }
    }
    out
}

/// Splits a scan into `(static, rejected)` by Doppler consistency with the
/// predicted ego-motion.
pub fn velocity_check(
    scan: &RadarScan,
    x_pred: &FrameState,
    gyro: &Vec3,
    ext: &Extrinsics,
    cfg: &PreprocessConfig,
) -> (RadarScan, RadarScan) {
    let part = velocity_check_indices(scan, x_pred, gyro, ext, cfg);
    (scan.select(&part.static_idx), scan.select(&part.rejected_idx))
}
