//! Rigid motions.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

/// `p ↦ rotation · p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Point3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

#[inline]
pub(crate) fn to_vector(p: &Point3) -> Vector3<f64> {
    Vector3::new(p.x, p.y, p.z)
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Point3::ORIGIN,
        }
    }

    /// Checked constructor: the rotation must be orthonormal (1e-9) with det +1.
    pub fn new(rotation: Matrix3<f64>, translation: Point3) -> Result<Self> {
        let t = RigidTransform {
            rotation,
            translation,
        };
        if !translation.is_finite() || !t.is_orthonormal(1e-9) {
            return Err(Error::invalid("rotation is not a proper orthonormal matrix"));
        }
        Ok(t)
    }

    pub fn from_translation(t: Point3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation by `angle` about the vertical axis through the origin.
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation: Point3::ORIGIN,
        }
    }

    /// Rotation by `angle` about the vertical axis through `pivot`.
    pub fn rotation_z_about(angle: f64, pivot: Point3) -> Self {
        let r = Self::rotation_z(angle);
        RigidTransform {
            translation: pivot - r.apply_vector(&pivot),
            ..r
        }
    }

    /// Rotation by `angle` about an arbitrary axis through the origin, then translation.
    pub fn from_axis_angle(axis: Point3, angle: f64, translation: Point3) -> Result<Self> {
        let axis = axis
            .normalized()
            .ok_or_else(|| Error::invalid("rotation axis has zero length"))?;
        let r = Rotation3::from_axis_angle(&Unit::new_unchecked(to_vector(&axis)), angle);
        Ok(RigidTransform {
            rotation: *r.matrix(),
            translation,
        })
    }

    #[inline]
    pub fn apply(&self, p: &Point3) -> Point3 {
        self.apply_vector(p) + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Point3) -> Point3 {
        let r = &self.rotation;
        Point3::new(
            r[(0, 0)] * v.x + r[(0, 1)] * v.y + r[(0, 2)] * v.z,
            r[(1, 0)] * v.x + r[(1, 1)] * v.y + r[(1, 2)] * v.z,
            r[(2, 0)] * v.x + r[(2, 1)] * v.y + r[(2, 2)] * v.z,
        )
    }

    /// Transforms every point and relabels the result with `frame`.
    pub fn apply_cloud(&self, cloud: &PointCloud, frame: &str) -> PointCloud {
        PointCloud::with_frame(cloud.points.iter().map(|p| self.apply(p)).collect(), frame)
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.apply(&other.translation),
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        let inv = RigidTransform {
            rotation: rt,
            translation: Point3::ORIGIN,
        };
        RigidTransform {
            rotation: rt,
            translation: -inv.apply_vector(&self.translation),
        }
    }

    pub fn is_orthonormal(&self, tol: f64) -> bool {
        let r = &self.rotation;
        if !r.iter().all(|v| v.is_finite()) {
            return false;
        }
        let gram = r.transpose() * r - Matrix3::identity();
        gram.iter().all(|v| v.abs() <= tol) && (r.determinant() - 1.0).abs() <= tol
    }

    /// Frobenius norm of the rotation difference.
    pub fn rotation_distance(&self, other: &RigidTransform) -> f64 {
        (self.rotation - other.rotation).norm()
    }

    pub fn translation_distance(&self, other: &RigidTransform) -> f64 {
        self.translation.distance(&other.translation)
    }

    /// Rotation angle of `self⁻¹ ∘ other`, in radians.
    pub fn angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }

    /// Homogeneous 4×4 matrix, row-major.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            [r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x],
            [r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y],
            [r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// Inverse of [`to_rows`](Self::to_rows). The bottom row must be `0 0 0 1`
    /// and the rotation block orthonormal within `tol`.
    pub fn from_rows(m: &[[f64; 4]; 4], tol: f64) -> Result<Self> {
        if m[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::invalid("bottom row of a rigid transform must be 0 0 0 1"));
        }
        let rotation = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        let t = RigidTransform {
            rotation,
            translation: Point3::new(m[0][3], m[1][3], m[2][3]),
        };
        if !t.translation.is_finite() || !t.is_orthonormal(tol) {
            return Err(Error::invalid("rotation block is not orthonormal"));
        }
        Ok(t)
    }
}

/// Rotates a cloud about the vertical axis through `pivot`.
pub fn rotate_z(cloud: &PointCloud, angle: f64, pivot: Point3) -> PointCloud {
    let t = RigidTransform::rotation_z_about(angle, pivot);
    cloud.map_points(|p| t.apply(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use core::f64::consts::PI;

    #[test]
    fn quarter_turn() {
        let c = PointCloud::new(alloc::vec![Point3::new(1.0, 0.0, 0.0)]);
        let r = rotate_z(&c, PI / 2.0, Point3::ORIGIN);
        assert!(r.points[0].distance(&Point3::new(0.0, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn sixty_steps_of_six_degrees_close_the_circle() {
        let pts: Vec<Point3> = (0..30)
            .map(|i| Point3::new(0.01 * i as f64, -0.02 + 0.003 * i as f64, 0.001 * i as f64))
            .collect();
        let start = PointCloud::new(pts);
        let pivot = Point3::new(0.005, -0.01, 0.0);
        let mut c = start.clone();
        for _ in 0..60 {
            c = rotate_z(&c, 6f64.to_radians(), pivot);
        }
        for (a, b) in c.iter().zip(start.iter()) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9 && a.z == b.z);
        }
    }

    #[test]
    fn inverse_and_compose() {
        let t = RigidTransform::from_axis_angle(Point3::new(1.0, 2.0, 3.0), 0.7, Point3::new(0.1, -0.2, 0.3))
            .unwrap();
        let id = t.compose(&t.inverse());
        assert!(id.rotation_distance(&RigidTransform::identity()) < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        let p = Point3::new(0.3, 0.2, -0.1);
        assert!(t.inverse().apply(&t.apply(&p)).distance(&p) < 1e-12);
    }

    #[test]
    fn rows_round_trip() {
        let t = RigidTransform::rotation_z_about(0.4, Point3::new(1.0, 2.0, 0.0));
        assert_eq!(RigidTransform::from_rows(&t.to_rows(), 1e-9).unwrap(), t);
        let mut bad = t.to_rows();
        bad[0][0] = 2.0;
        assert!(RigidTransform::from_rows(&bad, 1e-9).is_err());
    }
}
