//! Pose parameterization, homogeneous transforms, kinematic composition and
//! Euler-rate integration.
//!
//! A Cartesian pose is a 6-vector `[x, y, z, roll, pitch, yaw]` with XYZ Euler
//! angles. The convention is fixed crate-wide as intrinsic X-then-Y-then-Z:
//!
//! ```text
//! R = Rx(roll) * Ry(pitch) * Rz(yaw)
//! ```
//!
//! Extraction is unique for `|pitch| < pi/2`; near the singularity operations
//! return [`Error::GimbalLock`] instead of producing garbage.

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 6-vector used for pose deltas `[m, rad]`, twists `[m/s, rad/s]` and
/// wrenches `[N, N*m]`, by context.
pub type Vec6 = Vector6<f64>;

/// Guard on |cos(pitch)| below which Euler extraction is rejected.
pub const DEFAULT_GIMBAL_EPS: f64 = 1e-6;

/// Build a [`Vec6`] from a linear and an angular 3-vector.
pub fn vec6_from_parts(linear: Vector3<f64>, angular: Vector3<f64>) -> Vec6 {
    Vec6::new(linear.x, linear.y, linear.z, angular.x, angular.y, angular.z)
}

/// Linear (first three) components.
pub fn linear_part(v: &Vec6) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

/// Angular (last three) components.
pub fn angular_part(v: &Vec6) -> Vector3<f64> {
    Vector3::new(v[3], v[4], v[5])
}

/// Cartesian pose: position plus intrinsic XYZ Euler angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseXyz {
    /// Position in metres.
    pub position: Vector3<f64>,
    /// Euler angles `[roll, pitch, yaw]` in radians.
    pub euler: Vector3<f64>,
}

impl PoseXyz {
    pub fn identity() -> Self {
        Self { position: Vector3::zeros(), euler: Vector3::zeros() }
    }

    pub fn new(position: Vector3<f64>, euler: Vector3<f64>) -> Self {
        Self { position, euler }
    }

    pub fn from_vec6(v: &Vec6) -> Self {
        Self { position: linear_part(v), euler: angular_part(v) }
    }

    pub fn as_vec6(&self) -> Vec6 {
        vec6_from_parts(self.position, self.euler)
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(self.euler.iter()).all(|c| c.is_finite())
    }

    /// Homogeneous transform of this pose.
    pub fn to_transform(&self) -> Transform {
        to_transform(self)
    }
}

/// Rigid transform: orthonormal rotation matrix plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Transform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Composition `self * other` (apply `other` first in `self`'s frame).
    pub fn compose(&self, other: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Inverse transform.
    pub fn inverse(&self) -> Transform {
        let rt = self.rotation.transpose();
        Transform { rotation: rt, translation: -(rt * self.translation) }
    }

    /// Euler extraction with the default gimbal guard.
    pub fn to_pose(&self) -> Result<PoseXyz> {
        from_transform(self)
    }
}

impl std::ops::Mul for Transform {
    type Output = Transform;
    fn mul(self, rhs: Transform) -> Transform {
        self.compose(&rhs)
    }
}

/// Frame state: pose plus twist plus acceleration.
///
/// `vel` and `acc` hold `[linear; angular]` rates of the frame origin,
/// expressed in the frame the pose itself is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub pose: PoseXyz,
    pub vel: Vec6,
    pub acc: Vec6,
}

impl FrameState {
    pub fn identity() -> Self {
        Self { pose: PoseXyz::identity(), vel: Vec6::zeros(), acc: Vec6::zeros() }
    }

    pub fn from_pose(pose: PoseXyz) -> Self {
        Self { pose, vel: Vec6::zeros(), acc: Vec6::zeros() }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite()
            && self.vel.iter().all(|c| c.is_finite())
            && self.acc.iter().all(|c| c.is_finite())
    }
}

/// Rotation matrix for intrinsic XYZ Euler angles.
fn rotation_xyz(euler: &Vector3<f64>) -> Matrix3<f64> {
    let (s1, c1) = euler.x.sin_cos();
    let (s2, c2) = euler.y.sin_cos();
    let (s3, c3) = euler.z.sin_cos();
    Matrix3::new(
        c2 * c3,
        -c2 * s3,
        s2,
        c1 * s3 + c3 * s1 * s2,
        c1 * c3 - s1 * s2 * s3,
        -c2 * s1,
        s1 * s3 - c1 * c3 * s2,
        c3 * s1 + c1 * s2 * s3,
        c1 * c2,
    )
}

/// Pose to homogeneous transform.
pub fn to_transform(pose: &PoseXyz) -> Transform {
    Transform { rotation: rotation_xyz(&pose.euler), translation: pose.position }
}

/// Euler extraction `vec(T)` with an explicit gimbal guard.
///
/// Unique for `|pitch| < pi/2 - eps`; errors when `|cos(pitch)| < eps`.
pub fn from_transform_eps(t: &Transform, eps: f64) -> Result<PoseXyz> {
    let r = &t.rotation;
    let sp = r[(0, 2)].clamp(-1.0, 1.0);
    // |cos(pitch)| recovered from the first row, which is immune to roll/yaw.
    let cp = (r[(0, 0)] * r[(0, 0)] + r[(0, 1)] * r[(0, 1)]).sqrt();
    if cp < eps {
        return Err(Error::GimbalLock { cos_pitch: cp, guard: eps });
    }
    let pitch = sp.atan2(cp);
    let roll = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let yaw = (-r[(0, 1)]).atan2(r[(0, 0)]);
    Ok(PoseXyz { position: t.translation, euler: Vector3::new(roll, pitch, yaw) })
}

/// Euler extraction with the default guard.
pub fn from_transform(t: &Transform) -> Result<PoseXyz> {
    from_transform_eps(t, DEFAULT_GIMBAL_EPS)
}

/// Kinematic composition `a (+) b`: `b` is a relative state expressed in
/// `a`'s frame; the result is `b`'s frame expressed in `a`'s parent.
///
/// Rates are transported rigidly (rotation plus lever-arm term on the linear
/// part). Centripetal/Coriolis cross terms are dropped from the acceleration
/// transport; relative states are quasi-static in all scenarios, so this is a
/// first-order approximation that keeps `(a (+) b) (-) b == a` exact.
pub fn compose_plus(a: &FrameState, b: &FrameState) -> Result<FrameState> {
    let ta = to_transform(&a.pose);
    let tb = to_transform(&b.pose);
    let pose = from_transform(&ta.compose(&tb))?;
    let lever = ta.rotation * tb.translation;

    let ang_v = angular_part(&a.vel) + ta.rotation * angular_part(&b.vel);
    let lin_v =
        linear_part(&a.vel) + angular_part(&a.vel).cross(&lever) + ta.rotation * linear_part(&b.vel);
    let ang_a = angular_part(&a.acc) + ta.rotation * angular_part(&b.acc);
    let lin_a =
        linear_part(&a.acc) + angular_part(&a.acc).cross(&lever) + ta.rotation * linear_part(&b.acc);

    Ok(FrameState {
        pose,
        vel: vec6_from_parts(lin_v, ang_v),
        acc: vec6_from_parts(lin_a, ang_a),
    })
}

/// Right-inverse of [`compose_plus`]: removes the relative state `b` from a
/// composed state `c`, recovering the parent frame state.
pub fn compose_minus(c: &FrameState, b: &FrameState) -> Result<FrameState> {
    let tc = to_transform(&c.pose);
    let tb = to_transform(&b.pose);
    let ta = tc.compose(&tb.inverse());
    let pose = from_transform(&ta)?;
    let lever = ta.rotation * tb.translation;

    let ang_v = angular_part(&c.vel) - ta.rotation * angular_part(&b.vel);
    let lin_v = linear_part(&c.vel) - ang_v.cross(&lever) - ta.rotation * linear_part(&b.vel);
    let ang_a = angular_part(&c.acc) - ta.rotation * angular_part(&b.acc);
    let lin_a = linear_part(&c.acc) - ang_a.cross(&lever) - ta.rotation * linear_part(&b.acc);

    Ok(FrameState {
        pose,
        vel: vec6_from_parts(lin_v, ang_v),
        acc: vec6_from_parts(lin_a, ang_a),
    })
}

/// Jacobian mapping XYZ Euler-angle rates to the body angular velocity, i.e.
/// `omega_body = J * [roll_dot, pitch_dot, yaw_dot]`.
///
/// Consistent with [`to_transform`]'s convention; `J(0) = I` exactly and
/// `det J = cos(pitch)`, so it is invertible away from the singularity.
pub fn euler_rate_jacobian(euler: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let (s2, c2) = euler.y.sin_cos();
    let (s3, c3) = euler.z.sin_cos();
    if c2.abs() < DEFAULT_GIMBAL_EPS {
        return Err(Error::GimbalLock { cos_pitch: c2.abs(), guard: DEFAULT_GIMBAL_EPS });
    }
    Ok(Matrix3::new(
        c2 * c3, s3, 0.0, //
        -c2 * s3, c3, 0.0, //
        s2, 0.0, 1.0,
    ))
}

/// One forward-Euler pose integration step.
///
/// Translation integrates directly; orientation integrates the angular rate
/// through the inverse Euler-rate Jacobian.
pub fn integrate_pose(pose: &PoseXyz, twist: &Vec6, dt: f64) -> Result<PoseXyz> {
    let jac = euler_rate_jacobian(&pose.euler)?;
    let inv = jac.try_inverse().ok_or(Error::GimbalLock {
        cos_pitch: pose.euler.y.cos().abs(),
        guard: DEFAULT_GIMBAL_EPS,
    })?;
    let euler_rates = inv * angular_part(twist);
    Ok(PoseXyz {
        position: pose.position + linear_part(twist) * dt,
        euler: pose.euler + euler_rates * dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
    }

    fn random_pose(rng: &mut impl Rng, max_pitch: f64) -> PoseXyz {
        PoseXyz {
            position: Vector3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ),
            euler: Vector3::new(
                rng.gen_range(-PI..PI),
                rng.gen_range(-max_pitch..max_pitch),
                rng.gen_range(-PI..PI),
            ),
        }
    }

    fn random_state(rng: &mut impl Rng, max_pitch: f64) -> FrameState {
        let mut vel = Vec6::zeros();
        let mut acc = Vec6::zeros();
        for i in 0..6 {
            vel[i] = rng.gen_range(-1.0..1.0);
            acc[i] = rng.gen_range(-1.0..1.0);
        }
        FrameState { pose: random_pose(rng, max_pitch), vel, acc }
    }

    #[test]
    fn zero_pose_is_identity_transform() {
        let t = to_transform(&PoseXyz::identity());
        assert_eq!(t.rotation, Matrix3::identity());
        assert_eq!(t.translation, Vector3::zeros());
    }

    #[test]
    fn quarter_roll_maps_y_axis_to_z_axis() {
        let pose = PoseXyz::new(Vector3::zeros(), Vector3::new(FRAC_PI_2, 0.0, 0.0));
        let t = to_transform(&pose);
        let mapped = t.rotation * Vector3::y();
        assert_relative_eq!(mapped, Vector3::z(), epsilon = 1e-15);
    }

    #[test]
    fn rotation_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t = to_transform(&random_pose(&mut rng, 1.4));
            let rtr = t.rotation.transpose() * t.rotation;
            assert_relative_eq!(rtr, Matrix3::identity(), epsilon = 1e-12);
            assert_relative_eq!(t.rotation.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn round_trip_over_seeded_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let pose = random_pose(&mut rng, 1.4);
            let back = from_transform(&to_transform(&pose)).unwrap();
            assert_relative_eq!(back.position, pose.position, epsilon = 1e-10);
            assert_relative_eq!(back.euler, pose.euler, epsilon = 1e-10);
        }
    }

    #[test]
    fn from_transform_identity_is_zero_pose() {
        let p = from_transform(&Transform::identity()).unwrap();
        assert_eq!(p.position, Vector3::zeros());
        assert_eq!(p.euler, Vector3::zeros());
    }

    #[test]
    fn from_transform_recovers_known_pose() {
        let pose = PoseXyz::new(Vector3::new(1.0, 2.0, 3.0), Vector3::new(0.1, 0.2, 0.3));
        let back = from_transform(&to_transform(&pose)).unwrap();
        assert_relative_eq!(back.position, pose.position, epsilon = 1e-10);
        assert_relative_eq!(back.euler, pose.euler, epsilon = 1e-10);
    }

    #[test]
    fn gimbal_lock_is_reported() {
        let pose = PoseXyz::new(Vector3::zeros(), Vector3::new(0.3, FRAC_PI_2, -0.2));
        let t = to_transform(&pose);
        assert!(matches!(from_transform(&t), Err(Error::GimbalLock { .. })));
    }

    #[test]
    fn compose_with_identity_is_identity_element() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_state(&mut rng, 1.3);
        let c = compose_plus(&a, &FrameState::identity()).unwrap();
        assert_relative_eq!(c.pose.as_vec6(), a.pose.as_vec6(), epsilon = 1e-12);
        assert_relative_eq!(c.vel, a.vel, epsilon = 1e-12);
        assert_relative_eq!(c.acc, a.acc, epsilon = 1e-12);
    }

    #[test]
    fn group_round_trip_over_seeded_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let a = random_state(&mut rng, 1.2);
            let b = random_state(&mut rng, 1.2);
            let c = compose_plus(&a, &b).unwrap();
            let back = compose_minus(&c, &b).unwrap();
            assert_relative_eq!(back.pose.as_vec6(), a.pose.as_vec6(), epsilon = 1e-10);
            assert_relative_eq!(back.vel, a.vel, epsilon = 1e-9);
            assert_relative_eq!(back.acc, a.acc, epsilon = 1e-9);
        }
    }

    #[test]
    fn self_minus_self_is_identity_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let a = random_state(&mut rng, 1.2);
            let e = compose_minus(&a, &a).unwrap();
            assert_relative_eq!(e.pose.as_vec6(), Vec6::zeros(), epsilon = 1e-10);
            assert_relative_eq!(e.vel, Vec6::zeros(), epsilon = 1e-9);
            assert_relative_eq!(e.acc, Vec6::zeros(), epsilon = 1e-9);
        }
    }

    #[test]
    fn pure_translations_add() {
        let a = FrameState {
            pose: PoseXyz::new(Vector3::new(1.0, 0.0, 0.5), Vector3::zeros()),
            vel: Vec6::new(0.1, 0.0, 0.0, 0.0, 0.0, 0.0),
            acc: Vec6::zeros(),
        };
        let b = FrameState {
            pose: PoseXyz::new(Vector3::new(0.2, 0.3, -0.1), Vector3::zeros()),
            vel: Vec6::new(0.0, 0.2, 0.0, 0.0, 0.0, 0.0),
            acc: Vec6::zeros(),
        };
        let c = compose_plus(&a, &b).unwrap();
        assert_relative_eq!(c.pose.position, a.pose.position + b.pose.position, epsilon = 1e-14);
        assert_relative_eq!(c.vel, a.vel + b.vel, epsilon = 1e-14);
    }

    #[test]
    fn cancellation_chain_recovers_original() {
        // (x (+) r) (-) r = x with the same relative state on both sides.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_state(&mut rng, 1.2);
        let r = random_state(&mut rng, 1.2);
        let back = compose_minus(&compose_plus(&x, &r).unwrap(), &r).unwrap();
        assert_relative_eq!(back.pose.as_vec6(), x.pose.as_vec6(), epsilon = 1e-10);
    }

    #[test]
    fn jacobian_at_zero_is_exact_identity() {
        let j = euler_rate_jacobian(&Vector3::zeros()).unwrap();
        assert_eq!(j, Matrix3::identity());
    }

    #[test]
    fn jacobian_matches_finite_differenced_rotation() {
        // Oracle: Rdot = R * skew(omega_body), omega_body = J * euler_rates.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let delta = 1e-7;
        for _ in 0..200 {
            let e = Vector3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let rates = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r0 = rotation_xyz(&e);
            let r1 = rotation_xyz(&(e + rates * delta));
            let numeric = (r1 - r0) / delta;
            let omega = euler_rate_jacobian(&e).unwrap() * rates;
            let analytic = r0 * skew(&omega);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (numeric[(i, j)] - analytic[(i, j)]).abs() < 1e-6,
                        "entry ({i},{j}): {} vs {}",
                        numeric[(i, j)],
                        analytic[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn jacobian_rejects_near_singular_pitch() {
        let e = Vector3::new(0.0, FRAC_PI_2 - 1e-9, 0.0);
        assert!(matches!(euler_rate_jacobian(&e), Err(Error::GimbalLock { .. })));
    }

    #[test]
    fn integrate_zero_twist_is_noop() {
        let pose = PoseXyz::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(0.1, -0.2, 0.3));
        let out = integrate_pose(&pose, &Vec6::zeros(), 0.01).unwrap();
        assert_eq!(out, pose);
    }

    #[test]
    fn integrate_linear_twist_forward_euler_arithmetic() {
        let twist = Vec6::new(0.01, 0.0, 0.0, 0.0, 0.0, 0.0);
        let out = integrate_pose(&PoseXyz::identity(), &twist, 1.0 / 150.0).unwrap();
        assert_relative_eq!(out.position.x, 6.666_666_666_666_667e-5, epsilon = 1e-18);
    }

    #[test]
    fn constant_angular_twist_matches_axis_angle_first_order() {
        // Oracle: closed-form body-frame exponential R0 * exp(skew(omega) * t).
        let omega = Vector3::new(0.3, -0.2, 0.4);
        let total_t = 0.5;
        let twist = vec6_from_parts(Vector3::zeros(), omega);
        let exact = {
            let angle = (omega * total_t).norm();
            let axis = nalgebra::Unit::new_normalize(omega);
            nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner()
        };
        let mut err = Vec::new();
        for steps in [500usize, 5000] {
            let dt = total_t / steps as f64;
            let mut pose = PoseXyz::identity();
            for _ in 0..steps {
                pose = integrate_pose(&pose, &twist, dt).unwrap();
            }
            let r = rotation_xyz(&pose.euler);
            err.push((r - exact).norm());
        }
        // Forward Euler: error shrinks roughly linearly with dt.
        assert!(err[0] < 1e-3, "coarse error too large: {}", err[0]);
        assert!(err[1] < err[0] / 5.0, "error not O(dt): {} vs {}", err[1], err[0]);
    }
}
