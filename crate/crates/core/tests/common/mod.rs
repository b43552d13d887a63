#![allow(dead_code)]

use std::collections::BTreeMap;

use rio::estimator::{SlidingWindow, WindowFrame};
use rio::imu::{gyro_at, preintegrate, slice_samples, ImuNoiseParams, Vec15};
use rio::io::PointLabel;
use rio::sensor::{FrameState, Landmark};
use rio::simulator::{simulate, ImuSimParams, NoiseProfile, SimConfig, Simulation, TrajectoryKind};

pub fn noise_free_sim(kind: TrajectoryKind, yaw_rate: f64, imu_rate: f64, duration: f64) -> Simulation {
    let mut cfg = SimConfig {
        kind,
        duration,
        yaw_rate,
        ..SimConfig::default()
    }
    .with_noise(NoiseProfile::None);
    cfg.imu = ImuSimParams::noiseless(imu_rate);
    simulate(&cfg)
}

/// Window over scans `first..first + k` at ground truth, with every static
/// point as a Doppler measurement and every static point whose scene
/// landmark is seen at least twice as a point-to-point observation.
pub fn gt_window(sim: &Simulation, first: usize, k: usize) -> SlidingWindow {
    let seq = &sim.sequence;
    let labels = seq.labels.as_ref().expect("simulated labels");
    let mut window = SlidingWindow::new();
    let mut seen: BTreeMap<u64, usize> = BTreeMap::new();
    for i in first..first + k {
        for l in &labels[i] {
            if let PointLabel::Static(id) = l {
                *seen.entry(*id).or_default() += 1;
            }
        }
    }
    for i in first..first + k {
        let scan = &seq.scans[i];
        let state = sim.trajectory.sample(scan.t).state();
        let gyro = gyro_at(&seq.imu, scan.t).unwrap();
        let mut statics = Vec::new();
        let mut obs = Vec::new();
        for (p, l) in scan.points.iter().zip(&labels[i]) {
            if let PointLabel::Static(id) = l {
                statics.push(*p);
                if seen[id] >= 2 {
                    obs.push((*id, *p));
                    window.landmarks.insert(
                        *id,
                        Landmark {
                            id: *id,
                            position: sim.scene.landmarks[*id as usize].0,
                        },
                    );
                }
            }
        }
        let mut frame = WindowFrame::new(i, state, gyro, statics);
        frame.observations = obs;
        let preint = (i > first).then(|| {
            let t0 = seq.scans[i - 1].t;
            let samples = slice_samples(&seq.imu, t0, scan.t).unwrap();
            preintegrate(&samples, Default::default(), Default::default(), ImuNoiseParams::default()).unwrap()
        });
        window.push(frame, preint);
    }
    window
}

pub fn delta(values: [f64; 15]) -> Vec15 {
    Vec15::from_column_slice(&values)
}

/// Largest absolute entry difference relative to the larger of 1 and the
/// oracle's largest entry.
pub fn rel_error<const R: usize, const C: usize>(
    a: &nalgebra::SMatrix<f64, R, C>,
    b: &nalgebra::SMatrix<f64, R, C>,
) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn translation_gap(a: &FrameState, b: &FrameState) -> f64 {
    (a.p - b.p).norm()
}
