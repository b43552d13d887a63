use rio::imu::{propagate, slice_samples};
use rio::io::PointLabel;
use rio::preprocess::estimate_doppler;
use rio::sensor::GravityModel;
use rio::simulator::{
    gen_imu, make_trajectory, simulate, ImuSimParams, NoiseProfile, SceneParams, SimConfig, TrajectoryKind,
};

#[test]
fn propagating_noise_free_imu_recovers_trajectory() {
    let g = GravityModel::default();
    for kind in [TrajectoryKind::Circle, TrajectoryKind::Figure8, TrajectoryKind::RandomSmooth] {
        let traj = make_trajectory(kind, 10.0, 1.0, 0.2, 7);
        let imu = gen_imu(&traj, &ImuSimParams::noiseless(1000.0), &g, 7);
        let start = traj.sample(0.0).state();
        let end = propagate(&start, &imu, &g).unwrap();
        let truth = traj.sample(10.0).state();
        let err = (end.p - truth.p).norm();
        assert!(err <= 1e-4, "{kind:?}: {err:e}");
        // and piecewise, as the estimator consumes it
        let mut x = start;
        for k in 0..100 {
            let (t0, t1) = (k as f64 * 0.1, (k + 1) as f64 * 0.1);
            x = propagate(&x, &slice_samples(&imu, t0, t1).unwrap(), &g).unwrap();
        }
        assert!((x.p - truth.p).norm() <= 1e-4, "{kind:?}");
    }
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

#[test]
fn imu_noise_variance_scales_with_density() {
    let g = GravityModel::default();
    let traj = make_trajectory(TrajectoryKind::Circle, 50.0, 0.0, 0.0, 0);
    let rate = 200.0;
    let mut vars = Vec::new();
    for sigma in [0.01, 0.02, 0.04] {
        let params = ImuSimParams {
            gyro_noise: sigma,
            accel_noise: 10.0 * sigma,
            ..ImuSimParams::noiseless(rate)
        };
        let imu = gen_imu(&traj, &params, &g, 1);
        assert!(imu.len() >= 10_000);
        let gx: Vec<f64> = imu.iter().map(|s| s.gyro.x).collect();
        let az: Vec<f64> = imu.iter().map(|s| s.accel.z).collect();
        let (vg, va) = (sample_variance(&gx), sample_variance(&az));
        // discrete samples of a density: σ² · rate
        let expect = sigma * sigma * rate;
        assert!((vg / expect - 1.0).abs() <= 0.2, "gyro {vg} vs {expect}");
        assert!((va / (100.0 * expect) - 1.0).abs() <= 0.2, "accel {va}");
        vars.push(vg);
    }
    assert!((vars[1] / vars[0] / 4.0 - 1.0).abs() <= 0.2);
    assert!((vars[2] / vars[0] / 16.0 - 1.0).abs() <= 0.2);
}

fn noisy_config(seed: u64) -> SimConfig {
    SimConfig {
        duration: 5.0,
        seed,
        scene: SceneParams::default().with_dynamic_fraction(0.2),
        ..SimConfig::default()
    }
    .with_noise(NoiseProfile::Noisy)
}

#[test]
fn same_seed_gives_identical_sequences() {
    let a = simulate(&noisy_config(3));
    let b = simulate(&noisy_config(3));
    assert_eq!(a.sequence, b.sequence);
    let c = simulate(&noisy_config(4));
    assert_ne!(a.sequence.scans, c.sequence.scans);
}

#[test]
fn scan_count_follows_rate() {
    let sim = simulate(&SimConfig {
        duration: 60.0,
        ..SimConfig::default()
    });
    assert_eq!(sim.sequence.scans.len(), 601);
    assert!(sim.sequence.imu.last().unwrap().t >= 60.0 - 1e-9);
}

#[test]
fn labels_are_exhaustive() {
    let sim = simulate(&noisy_config(5));
    let labels = sim.sequence.labels.as_ref().unwrap();
    assert_eq!(labels.len(), sim.sequence.scans.len());
    let mut kinds = [0usize; 3];
    for (scan, ls) in sim.sequence.scans.iter().zip(labels) {
        assert_eq!(scan.len(), ls.len());
        for l in ls {
            kinds[match l {
                PointLabel::Static(id) => {
                    assert!((*id as usize) < sim.scene.landmarks.len());
                    0
                }
                PointLabel::Dynamic => 1,
                PointLabel::Clutter => 2,
            }] += 1;
        }
    }
    assert!(kinds.iter().all(|&k| k > 0), "{kinds:?}");
}

#[test]
fn static_doppler_matches_ground_truth_model() {
    let mut cfg = noisy_config(6);
    cfg.radar.sigma_doppler = 0.0;
    cfg.radar.sigma_range = 0.0;
    cfg.radar.sigma_angle = 0.0;
    let sim = simulate(&cfg);
    let seq = &sim.sequence;
    let mut n = 0;
    for (scan, ls) in seq.scans.iter().zip(seq.labels.as_ref().unwrap()) {
        let k = sim.trajectory.sample(scan.t);
        // gyro reading minus true bias is the body rate
        let mut x = k.state();
        x.bg = cfg.imu.gyro_bias;
        let gyro = k.omega + cfg.imu.gyro_bias;
        for (p, l) in scan.points.iter().zip(ls) {
            if matches!(l, PointLabel::Static(_)) {
                let model = estimate_doppler(&p.p, &x, &gyro, &cfg.ext).unwrap();
                assert!((model - p.doppler).abs() <= 1e-12, "{model} vs {}", p.doppler);
                n += 1;
            }
        }
    }
    assert!(n > 100);
}

#[test]
fn landmark_rcs_is_constant_without_noise() {
    let sim = simulate(&SimConfig {
        duration: 5.0,
        ..SimConfig::default()
    });
    let seq = &sim.sequence;
    for (scan, ls) in seq.scans.iter().zip(seq.labels.as_ref().unwrap()) {
        for (p, l) in scan.points.iter().zip(ls) {
            if let PointLabel::Static(id) = l {
                assert_eq!(p.rcs, sim.scene.landmarks[*id as usize].1);
            }
        }
    }
}

#[test]
fn scene_respects_bounds() {
    let sim = simulate(&noisy_config(8));
    for (p, rcs) in &sim.scene.landmarks {
        assert!(p.x.abs() <= sim.scene.bounds && p.y.abs() <= sim.scene.bounds);
        assert!(rcs.is_finite());
    }
}
