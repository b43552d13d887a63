//! Radar residuals and their analytic Jacobians.
//!
//! Jacobians are taken w.r.t. the frame's local parameters
//! `(δp, δθ, δv, δb_a, δb_g)` with the rotation perturbed on the right,
//! matching [`crate::imu::boxplus_state`].

use nalgebra::SMatrix;

use crate::geom::{skew, Mat3, Vec3};
use crate::imu::{IDX_BG, IDX_P, IDX_Q, IDX_V};
use crate::preprocess::{estimate_doppler, PreprocessError};
use crate::sensor::{Extrinsics, FrameState, Landmark, RadarPoint};

pub type Row15 = SMatrix<f64, 1, 15>;
pub type Mat3x15 = SMatrix<f64, 3, 15>;

/// Predicted minus measured Doppler velocity of a static point.
pub fn residual_doppler(
    x: &FrameState,
    point: &RadarPoint,
    gyro: &Vec3,
    ext: &Extrinsics,
) -> Result<f64, PreprocessError> {
    Ok(estimate_doppler(&point.p, x, gyro, ext)? - point.doppler)
}

pub fn residual_doppler_with_jacobian(
    x: &FrameState,
    point: &RadarPoint,
    gyro: &Vec3,
    ext: &Extrinsics,
) -> Result<(f64, Row15), PreprocessError> {
    let r = residual_doppler(x, point, gyro, ext)?;
    let u = point.p / point.p.norm();
    // lᵀ = uᵀ R_Eᵀ
    let l = (ext.rotation.to_rotation_matrix().matrix() * u).transpose();
    let rt_v = x.q.inverse() * x.v;
    let mut j = Row15::zeros();
    j.fixed_view_mut::<1, 3>(0, IDX_Q).copy_from(&(l * skew(&rt_v)));
    j.fixed_view_mut::<1, 3>(0, IDX_V)
        .copy_from(&(l * x.q.inverse().to_rotation_matrix().matrix()));
    j.fixed_view_mut::<1, 3>(0, IDX_BG).copy_from(&(l * skew(&ext.translation)));
    Ok((r, j))
}

/// Landmark minus the world-frame position of its measurement.
pub fn residual_p2p(x: &FrameState, landmark: &Landmark, point: &RadarPoint, ext: &Extrinsics) -> Vec3 {
    landmark.position - (x.q * ext.radar_to_body(&point.p) + x.p)
}

/// Residual with Jacobians w.r.t. the frame (3×15) and the landmark (3×3).
pub fn residual_p2p_with_jacobians(
    x: &FrameState,
    landmark: &Landmark,
    point: &RadarPoint,
    ext: &Extrinsics,
) -> (Vec3, Mat3x15, Mat3) {
    let m = ext.radar_to_body(&point.p);
    let r = residual_p2p(x, landmark, point, ext);
    let rot = x.rotation();
    let mut jf = Mat3x15::zeros();
    jf.fixed_view_mut::<3, 3>(0, IDX_P).copy_from(&(-Mat3::identity()));
    jf.fixed_view_mut::<3, 3>(0, IDX_Q).copy_from(&(rot * skew(&m)));
    (r, jf, Mat3::identity())
}

/// Huber loss on a squared norm `s`; `delta <= 0` disables it.
pub fn huber(s: f64, delta: f64) -> f64 {
    if delta <= 0.0 || s <= delta * delta {
        s
    } else {
        2.0 * delta * s.sqrt() - delta * delta
    }
}

/// First derivative of [`huber`] w.r.t. `s`, used as an IRLS weight.
pub fn huber_weight(s: f64, delta: f64) -> f64 {
    if delta <= 0.0 || s <= delta * delta {
        1.0
    } else {
        delta / s.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::exp_so3;
    use approx::assert_relative_eq;

    #[test]
    fn doppler_residual_examples() {
        let ext = Extrinsics::identity();
        let x = FrameState::at_rest(0.0);
        let still = RadarPoint::new(Vec3::new(4.0, 1.0, 0.0), 0.0, 0.0);
        assert_eq!(residual_doppler(&x, &still, &Vec3::zeros(), &ext).unwrap(), 0.0);

        let mut x = FrameState::at_rest(0.0);
        x.v = Vec3::new(1.0, 0.0, 0.0);
        let p = RadarPoint::new(Vec3::new(10.0, 0.0, 0.0), 0.8, 0.0);
        assert_relative_eq!(residual_doppler(&x, &p, &Vec3::zeros(), &ext).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn p2p_residual_examples() {
        let ext = Extrinsics::identity();
        let x = FrameState::at_rest(0.0);
        let lm = Landmark {
            id: 0,
            position: Vec3::new(1.0, 2.0, 3.0),
        };
        let p = RadarPoint::new(Vec3::new(1.0, 2.0, 2.0), 0.0, 0.0);
        assert_eq!(residual_p2p(&x, &lm, &p, &ext), Vec3::new(0.0, 0.0, 1.0));

        let ext = Extrinsics::new(exp_so3(&Vec3::new(0.0, 0.1, 0.2)), Vec3::new(0.2, 0.0, 0.1));
        let mut x = FrameState::at_rest(0.0);
        x.q = exp_so3(&Vec3::new(0.3, -0.1, 1.0));
        x.p = Vec3::new(4.0, -2.0, 0.5);
        let meas = RadarPoint::new(Vec3::new(7.0, 1.0, -0.3), 0.0, 0.0);
        // transform-then-subtract oracle using explicit matrices
        let world = x.rotation() * (ext.rotation.to_rotation_matrix().matrix() * meas.p + ext.translation) + x.p;
        let lm = Landmark { id: 1, position: world };
        assert!(residual_p2p(&x, &lm, &meas, &ext).norm() < 1e-12);
    }

    #[test]
    fn huber_is_continuous() {
        let d = 0.5;
        assert_relative_eq!(huber(0.25, d), 0.25);
        assert_relative_eq!(huber(0.25 + 1e-12, d), 0.25, epsilon = 1e-11);
        assert_eq!(huber(4.0, 0.0), 4.0);
        assert_relative_eq!(huber(4.0, d), 2.0 * 0.5 * 2.0 - 0.25);
        assert_relative_eq!(huber_weight(4.0, d), 0.25);
    }
}
