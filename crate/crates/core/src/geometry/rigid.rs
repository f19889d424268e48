use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{Disp3, Point3};
use crate::{Error, Result};

const ORTHO_TOL: f64 = 1e-10;

/// An element of SE(3): `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Disp3,
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Disp3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("rigid transform"));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidArgument(format!(
                "rotation is not in SO(3): |RtR - I| = {ortho:e}, det = {det}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Disp3::zeros(),
        }
    }

    pub fn from_translation(t: Disp3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` about the line through `center` with direction `axis`.
    pub fn rotation_about(axis: Vector3<f64>, angle: f64, center: Point3) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let r = *rot.matrix();
        let t = center.coords - r * center.coords;
        Self {
            rotation: r,
            translation: t,
        }
    }

    /// Rotation in the yz-plane (about the x axis) through `center`.
    pub fn yz_rotation(angle: f64, center: Point3) -> Self {
        Self::rotation_about(Vector3::x(), angle, center)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Disp3 {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Rotation angle in the yz-plane, `atan2(R[2,1], R[1,1])`.
    pub fn yz_angle(&self) -> f64 {
        self.rotation[(2, 1)].atan2(self.rotation[(1, 1)])
    }

    /// XYZ Euler angles `(a, b, c)` with `R = Rz(c) Ry(b) Rx(a)`.
    pub fn euler_xyz(&self) -> [f64; 3] {
        let r = &self.rotation;
        let b = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let a = r[(2, 1)].atan2(r[(2, 2)]);
        let c = r[(1, 0)].atan2(r[(0, 0)]);
        [a, b, c]
    }

    pub fn from_euler_xyz(angles: [f64; 3], translation: Disp3) -> Self {
        let rot = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    /// Row-major rotation followed by the translation.
    pub fn to_array(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.x,
            t.y,
            t.z,
        ]
    }

    pub fn from_array(a: &[f64; 12]) -> Result<Self> {
        let rotation = Matrix3::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8]);
        Self::new(rotation, Disp3::new(a[9], a[10], a[11]))
    }

    /// Frobenius distance of rotations plus Euclidean distance of translations.
    pub fn distance(&self, other: &RigidTransform) -> (f64, f64) {
        (
            (self.rotation - other.rotation).norm(),
            (self.translation - other.translation).norm(),
        )
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Maps every point through `t`.
pub fn apply_rigid(t: &RigidTransform, points: &[Point3]) -> Vec<Point3> {
    points.iter().map(|p| t.apply(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_is_noop() {
        let pts = vec![Point3::new(1.0, -2.0, 3.5), Point3::new(0.0, 0.1, 0.2)];
        assert_eq!(apply_rigid(&RigidTransform::identity(), &pts), pts);
    }

    #[test]
    fn translation_moves_origin() {
        let t = RigidTransform::from_translation(Disp3::new(1.0, 0.0, 0.0));
        assert_eq!(t.apply(&Point3::origin()), Point3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn quarter_turn_about_z() {
        let t = RigidTransform::rotation_about(Vector3::z(), FRAC_PI_2, Point3::origin());
        let p = t.apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((p - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Disp3::zeros()).is_err());
    }

    #[test]
    fn euler_roundtrip() {
        let angles = [0.3, -0.7, 1.9];
        let t = RigidTransform::from_euler_xyz(angles, Disp3::new(1.0, 2.0, 3.0));
        let back = t.euler_xyz();
        for k in 0..3 {
            assert!((angles[k] - back[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn yz_angle_recovers_x_rotation() {
        let t = RigidTransform::yz_rotation(2.2, Point3::new(0.0, 1.0, 5.0));
        assert!((t.yz_angle() - 2.2).abs() < 1e-14);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = RigidTransform::rotation_about(Vector3::new(1.0, 2.0, -1.0), 0.8, Point3::new(3.0, 0.0, 1.0));
        let id = t.compose(&t.inverse());
        let (dr, dt) = id.distance(&RigidTransform::identity());
        assert!(dr < 1e-14 && dt < 1e-14);
    }
}
