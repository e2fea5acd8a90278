//! Unit-quaternion attitude (body to NED) and gyro integration.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{ensure_finite, Error, Result};

/// Below this rotation angle the exponential map is replaced by its first-order form.
const SMALL_ANGLE: f64 = 1e-12;

/// Pitch magnitude beyond which roll and yaw are no longer well separated.
pub const GIMBAL_LIMIT_DEG: f64 = 89.99;

/// Body-to-navigation rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude(UnitQuaternion<f64>);

impl Default for Attitude {
    fn default() -> Self {
        Attitude::identity()
    }
}

impl Attitude {
    pub fn identity() -> Self {
        Attitude(UnitQuaternion::identity())
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>) -> Self {
        Attitude(q)
    }

    /// ZYX convention: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (0.5 * roll).sin_cos();
        let (sp, cp) = (0.5 * pitch).sin_cos();
        let (sy, cy) = (0.5 * yaw).sin_cos();
        let q = Quaternion::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        );
        Attitude(UnitQuaternion::new_normalize(q))
    }

    /// Level attitude pointing along `yaw`.
    pub fn from_yaw(yaw: f64) -> Self {
        Attitude::from_euler(0.0, 0.0, yaw)
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    /// Rotate a body-frame vector into the navigation frame.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }

    pub fn inverse_rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.inverse_transform_vector(v)
    }

    pub fn norm_error(&self) -> f64 {
        (self.0.quaternion().norm() - 1.0).abs()
    }

    /// Rotation angle (rad) separating two attitudes.
    pub fn angle_to(&self, other: &Attitude) -> f64 {
        self.0.angle_to(&other.0)
    }

    /// Sign-invariant Euclidean distance between the quaternions.
    pub fn quaternion_distance(&self, other: &Attitude) -> f64 {
        let a = self.0.quaternion().coords;
        let b = other.0.quaternion().coords;
        (a - b).norm().min((a + b).norm())
    }

    /// Pre-rotate in the navigation frame by `yaw` about the down axis.
    pub fn rotated_by_yaw(&self, yaw: f64) -> Self {
        let rz = Attitude::from_yaw(yaw);
        Attitude(UnitQuaternion::new_normalize(
            rz.0.into_inner() * self.0.into_inner(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    /// Set when |pitch| exceeds [`GIMBAL_LIMIT_DEG`]; angles are still returned.
    pub near_gimbal_lock: bool,
}

/// Right-multiply by the body-frame rotation `w * dt` and renormalize.
pub fn quat_integrate(q: &Attitude, w: &Vector3<f64>, dt: f64) -> Result<Attitude> {
    ensure_finite("angular rate", w.as_slice())?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("integration step must be positive, got {dt}")));
    }
    let qc = q.0.quaternion().coords;
    if !qc.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite attitude".into()));
    }
    let rot = w * dt;
    let angle = rot.norm();
    let delta = if angle > SMALL_ANGLE {
        let axis = rot / angle;
        let (s, c) = (0.5 * angle).sin_cos();
        Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z)
    } else {
        Quaternion::new(1.0, 0.5 * rot.x, 0.5 * rot.y, 0.5 * rot.z)
    };
    Ok(Attitude(UnitQuaternion::new_normalize(
        q.0.into_inner() * delta,
    )))
}

/// ZYX Euler angles with yaw in (-pi, pi].
pub fn quat_to_euler(q: &Attitude) -> Euler {
    let q = q.0.quaternion();
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let mut yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    if yaw <= -std::f64::consts::PI {
        yaw = std::f64::consts::PI;
    }
    Euler {
        roll,
        pitch,
        yaw,
        near_gimbal_lock: pitch.abs() > GIMBAL_LIMIT_DEG.to_radians(),
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Circular mean of a set of angles; `None` for an empty set.
pub fn circular_mean(angles: &[f64]) -> Option<f64> {
    if angles.is_empty() {
        return None;
    }
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    Some(wrap_angle(s.atan2(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    type M3 = [[f64; 3]; 3];

    // Independent oracle: Rodrigues rotation matrices composed in plain arrays.
    fn rodrigues(w: [f64; 3], dt: f64) -> M3 {
        let r = [w[0] * dt, w[1] * dt, w[2] * dt];
        let th = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let mut m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        if th == 0.0 {
            return m;
        }
        let k = [r[0] / th, r[1] / th, r[2] / th];
        let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
        let kx2 = matmul(&kx, &kx);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += th.sin() * kx[i][j] + (1.0 - th.cos()) * kx2[i][j];
            }
        }
        m
    }

    fn matmul(a: &M3, b: &M3) -> M3 {
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn angle_between(a: &M3, b: &Matrix3<f64>) -> f64 {
        // trace(A^T B) = 1 + 2 cos(theta)
        let mut tr = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                tr += a[i][j] * b[(i, j)];
            }
        }
        let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
        // acos is ill-conditioned near zero; use the antisymmetric part instead.
        let mut s2 = 0.0;
        let ab = {
            let mut m = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        m[i][j] += a[k][i] * b[(k, j)];
                    }
                }
            }
            m
        };
        for (i, j) in [(2, 1), (0, 2), (1, 0)] {
            let d = 0.5 * (ab[i][j] - ab[j][i]);
            s2 += d * d;
        }
        s2.sqrt().atan2(c)
    }

    #[test]
    fn yaw_quarter_turn() {
        let q = quat_integrate(&Attitude::identity(), &Vector3::new(0.0, 0.0, FRAC_PI_2), 1.0).unwrap();
        let e = quat_to_euler(&q);
        assert!((e.yaw - FRAC_PI_2).abs() < 1e-9);
        assert!(e.roll.abs() < 1e-12 && e.pitch.abs() < 1e-12);
    }

    #[test]
    fn zero_rate_leaves_attitude_unchanged() {
        let q = Attitude::from_euler(0.3, -0.2, 2.0);
        let q2 = quat_integrate(&q, &Vector3::zeros(), 1.0).unwrap();
        assert!(q.quaternion_distance(&q2) < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        let q = Attitude::identity();
        assert!(quat_integrate(&q, &Vector3::new(f64::NAN, 0.0, 0.0), 0.01).is_err());
        assert!(quat_integrate(&q, &Vector3::zeros(), 0.0).is_err());
        assert!(quat_integrate(&q, &Vector3::zeros(), f64::INFINITY).is_err());
    }

    #[test]
    fn matches_rotation_matrix_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut q = Attitude::identity();
        let mut m: M3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let dt = 1.0 / 120.0;
        for _ in 0..1000 {
            let w = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            q = quat_integrate(&q, &Vector3::new(w[0], w[1], w[2]), dt).unwrap();
            m = matmul(&m, &rodrigues(w, dt));
            assert!(q.norm_error() < 1e-9);
        }
        let diff = angle_between(&m, &q.rotation_matrix());
        assert!(diff < 1e-8, "attitude angle difference {diff}");
    }

    #[test]
    fn euler_identity_and_round_trip() {
        let e = quat_to_euler(&Attitude::identity());
        assert_eq!((e.roll, e.pitch, e.yaw), (0.0, 0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let q = Attitude::from_quaternion(UnitQuaternion::from_scaled_axis(
                axis * rng.random_range(0.0..PI),
            ));
            let e = quat_to_euler(&q);
            assert!(e.yaw > -PI && e.yaw <= PI);
            let back = Attitude::from_euler(e.roll, e.pitch, e.yaw);
            assert!(q.quaternion_distance(&back) < 1e-9);
        }
    }

    #[test]
    fn gimbal_proximity_flagged() {
        let q = Attitude::from_euler(0.1, 89.995f64.to_radians(), 0.2);
        let e = quat_to_euler(&q);
        assert!(e.near_gimbal_lock);
        assert!(!quat_to_euler(&Attitude::from_euler(0.1, 0.5, 0.2)).near_gimbal_lock);
    }

    #[test]
    fn yaw_at_pi_maps_to_positive_pi() {
        let e = quat_to_euler(&Attitude::from_yaw(PI));
        assert!((e.yaw - PI).abs() < 1e-12);
        assert!(wrap_angle(-PI) == PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn circular_mean_handles_wraparound() {
        let m = circular_mean(&[PI - 0.1, -PI + 0.1]).unwrap();
        assert!((m.abs() - PI).abs() < 1e-12);
        assert!(circular_mean(&[]).is_none());
    }
}
