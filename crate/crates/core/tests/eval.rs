use proptest::prelude::*;

use rio::eval::{compute_ape, compute_rpe, evaluate, Alignment, EvalError};
use rio::geom::{exp_so3, quat_from_euler, UnitQuat, Vec3};
use rio::io::StampedPose;

fn wavy(n: usize) -> Vec<StampedPose> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.1;
            StampedPose {
                t,
                p: Vec3::new(2.0 * t.cos(), (1.3 * t).sin(), 0.2 * t),
                q: quat_from_euler(0.1 * t.sin(), 0.05 * t, 0.7 * t),
            }
        })
        .collect()
}

fn transform(poses: &[StampedPose], rot: UnitQuat, shift: Vec3) -> Vec<StampedPose> {
    poses
        .iter()
        .map(|p| StampedPose {
            t: p.t,
            p: rot * p.p + shift,
            q: rot * p.q,
        })
        .collect()
}

fn noisy(poses: &[StampedPose]) -> Vec<StampedPose> {
    poses
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let s = (i as f64 * 1.7).sin();
            StampedPose {
                t: p.t,
                p: p.p + Vec3::new(0.05 * s, -0.03 * s * s, 0.02),
                q: p.q * exp_so3(&Vec3::new(0.01 * s, 0.0, -0.02 * s)),
            }
        })
        .collect()
}

#[test]
fn identical_trajectories_have_zero_error() {
    let gt = wavy(30);
    let m = evaluate(&gt, &gt, 1, 0.05).unwrap();
    assert!(m.ape.trans_rmse <= 1e-12 && m.ape.rot_rmse_deg <= 1e-6);
    assert!(m.rpe.trans_rmse <= 1e-12 && m.rpe.rot_rmse_deg <= 1e-6);
}

#[test]
fn uniform_orthogonal_shift_aligns_away() {
    let gt: Vec<StampedPose> = (0..10)
        .map(|i| StampedPose {
            t: i as f64,
            p: Vec3::new(i as f64, 0.0, 0.0),
            q: UnitQuat::identity(),
        })
        .collect();
    let est = transform(&gt, UnitQuat::identity(), Vec3::new(0.0, 0.1, 0.0));
    let ape = compute_ape(&est, &gt, Alignment::Se3, 0.5).unwrap();
    assert!(ape.trans_rmse <= 1e-12);
    let raw = compute_ape(&est, &gt, Alignment::None, 0.5).unwrap();
    assert!((raw.trans_rmse - 0.1).abs() <= 1e-12);
}

#[test]
fn rpe_hand_computed() {
    // one relative step stretched by 0.2 m, all others exact
    let gt: Vec<StampedPose> = (0..5)
        .map(|i| StampedPose {
            t: i as f64,
            p: Vec3::new(i as f64, 0.0, 0.0),
            q: UnitQuat::identity(),
        })
        .collect();
    let mut est = gt.clone();
    for p in est.iter_mut().skip(3) {
        p.p.x += 0.2;
    }
    let rpe = compute_rpe(&est, &gt, 1, 0.5).unwrap();
    assert_eq!(rpe.trans.len(), 4);
    assert!((rpe.trans_rmse - (0.04f64 / 4.0).sqrt()).abs() <= 1e-12);
    assert_eq!(compute_rpe(&est, &gt, 0, 0.5).unwrap_err(), EvalError::ZeroDelta);
}

#[test]
fn too_few_associations_fail() {
    let gt = wavy(10);
    let shifted: Vec<StampedPose> = gt.iter().map(|p| StampedPose { t: p.t + 100.0, ..*p }).collect();
    assert_eq!(compute_ape(&shifted, &gt, Alignment::Se3, 0.05).unwrap_err(), EvalError::TooFewPoses(0));
}

proptest! {
    #[test]
    fn ape_is_invariant_to_rigid_transform_of_estimate(
        r in proptest::array::uniform3(-3.0f64..3.0),
        t in proptest::array::uniform3(-50.0f64..50.0),
    ) {
        let gt = wavy(40);
        let est = noisy(&gt);
        let base = compute_ape(&est, &gt, Alignment::Se3, 0.05).unwrap();
        let moved = transform(&est, exp_so3(&Vec3::from(r)), Vec3::from(t));
        let m = compute_ape(&moved, &gt, Alignment::Se3, 0.05).unwrap();
        prop_assert!((m.trans_rmse - base.trans_rmse).abs() <= 1e-9);
        prop_assert!((m.rot_rmse_deg - base.rot_rmse_deg).abs() <= 1e-9);
    }

    #[test]
    fn rpe_is_invariant_to_independent_rigid_transforms(
        r1 in proptest::array::uniform3(-3.0f64..3.0),
        t1 in proptest::array::uniform3(-50.0f64..50.0),
        r2 in proptest::array::uniform3(-3.0f64..3.0),
        t2 in proptest::array::uniform3(-50.0f64..50.0),
        delta in 1usize..5,
    ) {
        let gt = wavy(40);
        let est = noisy(&gt);
        let base = compute_rpe(&est, &gt, delta, 0.05).unwrap();
        let est2 = transform(&est, exp_so3(&Vec3::from(r1)), Vec3::from(t1));
        let gt2 = transform(&gt, exp_so3(&Vec3::from(r2)), Vec3::from(t2));
        let m = compute_rpe(&est2, &gt2, delta, 0.05).unwrap();
        prop_assert!((m.trans_rmse - base.trans_rmse).abs() <= 1e-9);
        prop_assert!((m.rot_rmse_deg - base.rot_rmse_deg).abs() <= 1e-9);
    }

    #[test]
    fn metrics_are_non_negative(seed in 0u64..1000) {
        let gt = wavy(20);
        let est = transform(&noisy(&gt), exp_so3(&Vec3::new(0.0, 0.0, seed as f64 * 0.01)), Vec3::zeros());
        let m = evaluate(&est, &gt, 1, 0.05).unwrap();
        prop_assert!(m.ape.trans_rmse >= 0.0 && m.rpe.rot_rmse_deg >= 0.0);
        prop_assert!(m.ape.trans.iter().all(|e| *e >= 0.0));
    }
}
