//! Axis-angle rotations, the so(3) exponential map and rigid poses.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Below this angle the exponential map switches to its second-order Taylor form.
pub const SMALL_ANGLE: f64 = 1e-8;

/// A rotation stored as a scaled axis (unit axis times angle in radians).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation {
    pub axis_angle: Vector3<f64>,
}

impl Rotation {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(axis_angle: Vector3<f64>) -> Self {
        Self { axis_angle }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::new(axis * (angle / n))
    }

    /// Principal log of an orthonormal matrix.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        let q = UnitQuaternion::from_matrix(m);
        Self::new(q.scaled_axis())
    }

    pub fn angle(&self) -> f64 {
        self.axis_angle.norm()
    }

    /// Unit rotation axis, or `None` for the identity.
    pub fn axis(&self) -> Option<Vector3<f64>> {
        let a = self.angle();
        (a > 0.0).then(|| self.axis_angle / a)
    }

    pub fn is_finite(&self) -> bool {
        self.axis_angle.iter().all(|c| c.is_finite())
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        rotation_to_matrix(self)
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation::from_matrix(&(self.to_matrix() * other.to_matrix()))
    }

    pub fn inverse(&self) -> Rotation {
        Rotation::new(-self.axis_angle)
    }
}

/// Cross-product matrix: `skew(a) * b == a.cross(&b)`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Exponential map from so(3) to SO(3) (Rodrigues' formula).
pub fn rotation_to_matrix(r: &Rotation) -> Matrix3<f64> {
    let phi = &r.axis_angle;
    let theta = phi.norm();
    let k = skew(phi);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let half = (0.5 * theta).sin() / theta;
    let b = 2.0 * half * half;
    Matrix3::identity() + a * k + b * k * k
}

/// Right Jacobian of SO(3): `exp(phi + d) ≈ exp(phi) * exp(Jr(phi) d)`.
pub fn right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let (a, b) = if theta < 1e-4 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() - a * k + b * k * k
}

/// Rigid motion `x -> R x + t`, translation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl RigidPose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.to_matrix() * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.to_matrix() * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidPose) -> RigidPose {
        let r = self.rotation.to_matrix();
        RigidPose {
            rotation: Rotation::from_matrix(&(r * other.rotation.to_matrix())),
            translation: r * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidPose {
        let rt = self.rotation.to_matrix().transpose();
        RigidPose {
            rotation: self.rotation.inverse(),
            translation: -(rt * self.translation),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.iter().all(|c| c.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_vector_is_identity() {
        assert_eq!(rotation_to_matrix(&Rotation::identity()), Matrix3::identity());
    }

    #[test]
    fn half_turn_about_z() {
        let m = rotation_to_matrix(&Rotation::new(Vector3::new(0.0, 0.0, PI)));
        let p = m * Vector3::x();
        assert!((p - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn taylor_branch_is_continuous() {
        let tiny = Rotation::new(Vector3::new(3e-9, -2e-9, 1e-9));
        let above = Rotation::new(Vector3::new(3e-8, -2e-8, 1e-8));
        let q = UnitQuaternion::from_scaled_axis(tiny.axis_angle);
        assert!((rotation_to_matrix(&tiny) - q.to_rotation_matrix().into_inner()).norm() < 1e-15);
        let q = UnitQuaternion::from_scaled_axis(above.axis_angle);
        assert!((rotation_to_matrix(&above) - q.to_rotation_matrix().into_inner()).norm() < 1e-15);
    }

    #[test]
    fn right_jacobian_matches_finite_differences() {
        let phi = Vector3::new(0.4, -1.1, 0.7);
        let r0 = rotation_to_matrix(&Rotation::new(phi));
        let jr = right_jacobian(&phi);
        let h = 1e-6;
        for i in 0..3 {
            let mut d = Vector3::zeros();
            d[i] = h;
            let rp = rotation_to_matrix(&Rotation::new(phi + d));
            // log(R0^T Rp) / h ≈ Jr e_i
            let w = Rotation::from_matrix(&(r0.transpose() * rp)).axis_angle / h;
            assert!((w - jr.column(i)).norm() < 1e-5, "column {i}: {w} vs {}", jr.column(i));
        }
    }

    #[test]
    fn pose_inverse_roundtrip() {
        let p = RigidPose::new(
            Rotation::new(Vector3::new(0.3, 0.2, -1.0)),
            Vector3::new(10.0, -4.0, 2.5),
        );
        let id = p.inverse().compose(&p);
        let x = Vector3::new(7.0, 8.0, -9.0);
        assert!((id.apply(&x) - x).norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn exp_map_is_special_orthogonal_and_matches_quaternion(
            x in -4.0f64..4.0, y in -4.0f64..4.0, z in -4.0f64..4.0,
        ) {
            let v = Vector3::new(x, y, z);
            let m = rotation_to_matrix(&Rotation::new(v));
            prop_assert!((m * m.transpose() - Matrix3::identity()).norm() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
            let q = UnitQuaternion::from_scaled_axis(v).to_rotation_matrix().into_inner();
            prop_assert!((m - q).norm() < 1e-9);
        }

        #[test]
        fn composition_is_associative(
            a in prop::array::uniform3(-2.0f64..2.0),
            b in prop::array::uniform3(-2.0f64..2.0),
            c in prop::array::uniform3(-2.0f64..2.0),
        ) {
            let mk = |v: [f64; 3], s: f64| RigidPose::new(
                Rotation::new(Vector3::from(v)), Vector3::from(v) * s);
            let (p, q, r) = (mk(a, 10.0), mk(b, -7.0), mk(c, 3.0));
            let lhs = p.compose(&q).compose(&r);
            let rhs = p.compose(&q.compose(&r));
            let x = Vector3::new(12.0, -5.0, 30.0);
            prop_assert!((lhs.apply(&x) - rhs.apply(&x)).norm() < 1e-9);
        }
    }

    #[test]
    fn ten_thousand_random_rotations_are_in_so3() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let v = Vector3::new(
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
                rng.random_range(-10.0..10.0),
            );
            let m = rotation_to_matrix(&Rotation::new(v));
            assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
