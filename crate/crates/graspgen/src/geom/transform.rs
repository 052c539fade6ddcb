use nalgebra::{Matrix3, Matrix4, Point3, Vector3};
use serde::{Deserialize, Serialize};

/// A proper rigid transform: rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// self ∘ other: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// A general affine map (linear part need not be a rotation). Mirrored
/// scenes carry a reflection here, which a rigid type cannot represent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    /// Row-major 3x3 linear part.
    pub linear: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl AffineTransform {
    pub fn identity() -> Self {
        Self::from_parts(&Matrix3::identity(), &Vector3::zeros())
    }

    pub fn from_parts(linear: &Matrix3<f64>, translation: &Vector3<f64>) -> Self {
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = linear[(r, c)];
            }
        }
        Self {
            linear: m,
            translation: [translation.x, translation.y, translation.z],
        }
    }

    pub fn from_rigid(t: &RigidTransform) -> Self {
        Self::from_parts(&t.rotation, &t.translation)
    }

    pub fn linear_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.linear[r][c])
    }

    pub fn translation_vector(&self) -> Vector3<f64> {
        Vector3::new(self.translation[0], self.translation[1], self.translation[2])
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.linear_matrix() * p.coords + self.translation_vector())
    }

    pub fn compose(&self, other: &AffineTransform) -> AffineTransform {
        let a = self.linear_matrix();
        let b = other.linear_matrix();
        AffineTransform::from_parts(
            &(a * b),
            &(a * other.translation_vector() + self.translation_vector()),
        )
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.linear_matrix());
        m.fixed_view_mut::<3, 1>(0, 3)
            .copy_from(&self.translation_vector());
        m
    }
}
