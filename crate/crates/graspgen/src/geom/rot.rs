use nalgebra::{Matrix3, Vector3};

use super::GeomError;

/// Threshold below which a 6-d block is considered degenerate: the first
/// raw vector is (nearly) zero or the second is (nearly) collinear with it.
pub const DEGENERACY_EPS: f64 = 1e-8;

/// Continuous 6-d rotation representation: the first two columns of a
/// rotation matrix, stored raw. Decoding runs Gram–Schmidt, so any pair of
/// non-collinear vectors maps to a valid rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation6D {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl Rotation6D {
    pub fn from_slice(s: &[f64]) -> Self {
        assert!(s.len() >= 6, "rotation block needs 6 scalars");
        Self {
            a1: Vector3::new(s[0], s[1], s[2]),
            a2: Vector3::new(s[3], s[4], s[5]),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z,
        ]
    }

    /// Encode a rotation matrix as its first two columns.
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        Self {
            a1: r.column(0).into(),
            a2: r.column(1).into(),
        }
    }

    pub fn identity() -> Self {
        Self::from_matrix(&Matrix3::identity())
    }

    /// Gram–Schmidt orthonormalization. b1 = â1, b2 = normalized rejection
    /// of a2 from b1, b3 = b1 × b2. Errors when the inputs are degenerate.
    pub fn to_matrix(&self) -> Result<Matrix3<f64>, GeomError> {
        let n1 = self.a1.norm();
        if n1 < DEGENERACY_EPS {
            return Err(GeomError::DegenerateRotation(format!(
                "first column norm {n1:.3e}"
            )));
        }
        let b1 = self.a1 / n1;
        let rej = self.a2 - b1 * b1.dot(&self.a2);
        let n2 = rej.norm();
        if n2 < DEGENERACY_EPS {
            return Err(GeomError::DegenerateRotation(format!(
                "rejection norm {n2:.3e}"
            )));
        }
        let b2 = rej / n2;
        let b3 = b1.cross(&b2);
        Ok(Matrix3::from_columns(&[b1, b2, b3]))
    }

    pub fn is_degenerate(&self) -> bool {
        self.to_matrix().is_err()
    }
}

/// Rodrigues' formula: axis-angle vector (axis * angle) to rotation matrix.
pub fn axis_angle_to_matrix(aa: &Vector3<f64>) -> Matrix3<f64> {
    let theta = aa.norm();
    if theta < 1e-12 {
        return Matrix3::identity();
    }
    let k = aa / theta;
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

/// Inverse Rodrigues. Returns axis * angle with angle in [0, pi].
pub fn matrix_to_axis_angle(r: &Matrix3<f64>) -> Vector3<f64> {
    let tr = r.trace();
    let cos_theta = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < 1e-12 {
        return Vector3::zeros();
    }
    if (std::f64::consts::PI - theta) < 1e-6 {
        // Near pi the antisymmetric part vanishes; recover the axis from
        // the symmetric part R = I + 2*sin^2(theta/2)*(kk^T - I).
        let m = (r + Matrix3::identity()) / 2.0;
        let k = Vector3::new(m[(0, 0)].max(0.0).sqrt(), m[(1, 1)].max(0.0).sqrt(), m[(2, 2)].max(0.0).sqrt());
        // Fix signs using the largest component as reference.
        let mut k = k;
        let (i, j, l) = if k.x >= k.y && k.x >= k.z {
            (0, 1, 2)
        } else if k.y >= k.z {
            (1, 0, 2)
        } else {
            (2, 0, 1)
        };
        if k[i] > 1e-12 {
            if m[(i, j)] < 0.0 {
                k[j] = -k[j];
            }
            if m[(i, l)] < 0.0 {
                k[l] = -k[l];
            }
        }
        let n = k.norm();
        if n > 1e-12 {
            return k / n * theta;
        }
        return Vector3::zeros();
    }
    let axis = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    ) / (2.0 * theta.sin());
    axis * theta
}

/// Convenience: axis-angle straight to the 6-d encoding.
pub fn axis_angle_to_rot6d(aa: &Vector3<f64>) -> Rotation6D {
    Rotation6D::from_matrix(&axis_angle_to_matrix(aa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
        let aa = Vector3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        axis_angle_to_matrix(&aa)
    }

    #[test]
    fn rot6d_roundtrip_identity_on_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let r = random_rotation(&mut rng);
            let r2 = Rotation6D::from_matrix(&r).to_matrix().unwrap();
            assert_relative_eq!(r, r2, epsilon = 1e-12);
        }
    }

    #[test]
    fn decoded_matrix_is_orthonormal_with_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            // Arbitrary (non-orthogonal) inputs still decode to SO(3).
            let rep = Rotation6D {
                a1: Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                a2: Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            };
            let r = match rep.to_matrix() {
                Ok(r) => r,
                Err(_) => continue,
            };
            assert_relative_eq!(r.transpose() * r, Matrix3::identity(), epsilon = 1e-10);
            assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_blocks_are_rejected() {
        let zero = Rotation6D {
            a1: Vector3::zeros(),
            a2: Vector3::new(1.0, 0.0, 0.0),
        };
        assert!(zero.is_degenerate());
        let collinear = Rotation6D {
            a1: Vector3::new(1.0, 2.0, 3.0),
            a2: Vector3::new(2.0, 4.0, 6.0),
        };
        assert!(collinear.is_degenerate());
        let fine = Rotation6D {
            a1: Vector3::new(1.0, 2.0, 3.0),
            a2: Vector3::new(0.0, 1.0, 0.0),
        };
        assert!(!fine.is_degenerate());
    }

    #[test]
    fn axis_angle_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let theta = rng.gen_range(0.01..3.1);
            let mut axis = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if axis.norm() < 1e-6 {
                axis = Vector3::x();
            }
            let aa = axis.normalize() * theta;
            let back = matrix_to_axis_angle(&axis_angle_to_matrix(&aa));
            assert_relative_eq!(aa, back, epsilon = 1e-8);
        }
    }

    #[test]
    fn axis_angle_near_pi() {
        for axis in [Vector3::x(), Vector3::y(), Vector3::z(), Vector3::new(1.0, 1.0, 1.0).normalize()] {
            let aa = axis * (std::f64::consts::PI - 1e-9);
            let r = axis_angle_to_matrix(&aa);
            let back = matrix_to_axis_angle(&r);
            let r2 = axis_angle_to_matrix(&back);
            // Axis sign may flip at pi; compare matrices instead.
            assert_relative_eq!(r, r2, epsilon = 1e-6);
        }
    }

    #[test]
    fn rodrigues_matches_quarter_turn() {
        // 90 degrees about z maps x to y.
        let r = axis_angle_to_matrix(&(Vector3::z() * std::f64::consts::FRAC_PI_2));
        assert_relative_eq!(r * Vector3::x(), Vector3::y(), epsilon = 1e-12);
    }
}
