//! Small 3D math kernel on top of nalgebra.
//!
//! Quaternions follow the Hamilton convention and rotate body-frame vectors
//! into the world frame. Local updates on rotations are right-multiplicative:
//! `q ⊞ δθ = q ⊗ Exp(δθ)`.

use nalgebra::{Matrix3, Matrix4, Quaternion, UnitQuaternion, Vector3, Vector4};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type UnitQuat = UnitQuaternion<f64>;

/// Skew-symmetric matrix of `v`, so that `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Hamilton product `a ⊗ b`, renormalized.
pub fn quat_mul(a: &UnitQuat, b: &UnitQuat) -> UnitQuat {
    UnitQuaternion::new_normalize(a.quaternion() * b.quaternion())
}

/// Rotates `v` by `q` (`R(q) v`).
pub fn quat_rotate(q: &UnitQuat, v: &Vec3) -> Vec3 {
    q.transform_vector(v)
}

/// Exponential map from a rotation vector to a unit quaternion.
pub fn exp_so3(theta: &Vec3) -> UnitQuat {
    let angle = theta.norm();
    if angle < 1e-12 {
        // second-order series keeps the map smooth at the origin
        let half = theta * 0.5;
        return UnitQuaternion::new_normalize(Quaternion::new(
            1.0 - half.norm_squared() * 0.5,
            half.x,
            half.y,
            half.z,
        ));
    }
    let (s, c) = (angle * 0.5).sin_cos();
    let axis = theta * (s / angle);
    UnitQuaternion::new_normalize(Quaternion::new(c, axis.x, axis.y, axis.z))
}

/// Logarithm map, inverse of [`exp_so3`] for rotation angles below π.
pub fn log_so3(q: &UnitQuat) -> Vec3 {
    q.scaled_axis()
}

/// Right-multiplicative manifold update `q ⊗ Exp(δθ)`.
pub fn quat_boxplus(q: &UnitQuat, delta: &Vec3) -> UnitQuat {
    quat_mul(q, &exp_so3(delta))
}

/// Imaginary part `(x, y, z)` of a quaternion.
pub fn quat_vec_part(q: &UnitQuat) -> Vec3 {
    q.quaternion().imag()
}

/// Rotation matrix of `q`.
pub fn to_matrix(q: &UnitQuat) -> Mat3 {
    *q.to_rotation_matrix().matrix()
}

/// Right Jacobian of SO(3): `Exp(θ + δ) ≈ Exp(θ) Exp(Jr(θ) δ)`.
pub fn right_jacobian(theta: &Vec3) -> Mat3 {
    let angle = theta.norm();
    let k = skew(theta);
    if angle < 1e-6 {
        return Mat3::identity() - 0.5 * k + (1.0 / 6.0) * k * k;
    }
    let a2 = angle * angle;
    Mat3::identity() - ((1.0 - angle.cos()) / a2) * k + ((angle - angle.sin()) / (a2 * angle)) * k * k
}

/// Left-multiplication matrix: `a ⊗ b == L(a) [b]` with `[b] = (w, x, y, z)`.
pub fn quat_left_matrix(q: &UnitQuat) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, -z, y, //
        y, z, w, -x, //
        z, -y, x, w,
    )
}

/// Right-multiplication matrix: `a ⊗ b == R(b) [a]` with `[a] = (w, x, y, z)`.
pub fn quat_right_matrix(q: &UnitQuat) -> Matrix4<f64> {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    Matrix4::new(
        w, -x, -y, -z, //
        x, w, z, -y, //
        y, -z, w, x, //
        z, y, -x, w,
    )
}

/// `(w, x, y, z)` coefficients of `q`.
pub fn quat_wxyz(q: &UnitQuat) -> Vector4<f64> {
    Vector4::new(q.w, q.i, q.j, q.k)
}

/// Builds a unit quaternion from `(w, x, y, z)`, normalizing unless it is
/// already unit to rounding, so stored values survive a round trip bit-exact.
pub fn quat_from_wxyz(w: f64, x: f64, y: f64, z: f64) -> UnitQuat {
    let q = Quaternion::new(w, x, y, z);
    if (q.norm_squared() - 1.0).abs() <= 4.0 * f64::EPSILON {
        UnitQuaternion::new_unchecked(q)
    } else {
        UnitQuaternion::new_normalize(q)
    }
}

/// Geodesic angle between two rotations, radians.
pub fn rotation_angle_between(a: &UnitQuat, b: &UnitQuat) -> f64 {
    a.angle_to(b)
}

/// Rotation from ZYX Euler angles (roll about x, pitch about y, yaw about z).
pub fn quat_from_euler(roll: f64, pitch: f64, yaw: f64) -> UnitQuat {
    UnitQuaternion::from_euler_angles(roll, pitch, yaw)
}

pub fn is_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}
