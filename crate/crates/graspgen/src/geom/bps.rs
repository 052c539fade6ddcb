use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{MeshQueryAccel, TriMesh};

/// Number of basis points in the standard encoding.
pub const BPS_POINTS: usize = 512;
/// Radius in meters of the ball the basis points are drawn from.
pub const BPS_RADIUS: f64 = 0.15;

/// A fixed set of basis points. Object geometry is encoded as the vector of
/// distances from each basis point to the object surface. The set is drawn
/// once from a seeded stream and must be reused verbatim for any encoder or
/// decoder trained against it, so checkpoints persist the full point list.
#[derive(Debug, Clone, PartialEq)]
pub struct BpsBasis {
    pub points: Vec<Point3<f64>>,
    pub seed: u64,
    pub radius: f64,
}

impl BpsBasis {
    /// Draw `n` points uniformly from the ball of the given radius.
    pub fn generate(seed: u64, n: usize, radius: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            // Isotropic direction from three normals, radius ~ R * u^(1/3).
            let mut dir = Vector3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            if dir.norm() < 1e-12 {
                dir = Vector3::x();
            }
            let r = radius * rng.gen::<f64>().cbrt();
            points.push(Point3::from(dir.normalize() * r));
        }
        Self { points, seed, radius }
    }

    pub fn standard(seed: u64) -> Self {
        Self::generate(seed, BPS_POINTS, BPS_RADIUS)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from every basis point to the mesh surface, in basis order.
    pub fn encode(&self, object: &MeshQueryAccel) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| object.distance(p).distance)
            .collect()
    }

    pub fn encode_mesh(&self, mesh: &TriMesh) -> Vec<f64> {
        let accel = MeshQueryAccel::new(mesh.clone());
        self.encode(&accel)
    }

    /// Flatten for checkpoint storage (x, y, z per point).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len() * 3);
        for p in &self.points {
            out.extend_from_slice(&[p.x, p.y, p.z]);
        }
        out
    }

    pub fn from_flat(flat: &[f64], seed: u64, radius: f64) -> Self {
        assert!(flat.len() % 3 == 0, "flat basis length must be divisible by 3");
        let points = flat
            .chunks_exact(3)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect();
        Self { points, seed, radius }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::shapes;
    use approx::assert_relative_eq;

    #[test]
    fn basis_is_deterministic_and_inside_ball() {
        let a = BpsBasis::standard(123);
        let b = BpsBasis::standard(123);
        let c = BpsBasis::standard(124);
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
        assert_eq!(a.len(), BPS_POINTS);
        for p in &a.points {
            assert!(p.coords.norm() <= BPS_RADIUS + 1e-12);
        }
        // Uniform ball has mean radius 3R/4; loose band for 512 samples.
        let mean: f64 = a.points.iter().map(|p| p.coords.norm()).sum::<f64>() / a.len() as f64;
        assert!((mean - 0.75 * BPS_RADIUS).abs() < 0.05 * BPS_RADIUS, "mean radius {mean}");
    }

    #[test]
    fn sphere_encoding_matches_radial_gap() {
        let basis = BpsBasis::generate(7, 64, BPS_RADIUS);
        let sphere = shapes::icosphere(0.05, 3);
        let enc = basis.encode_mesh(&sphere);
        for (p, d) in basis.points.iter().zip(&enc) {
            let expect = (p.coords.norm() - 0.05).abs();
            assert_relative_eq!(*d, expect, epsilon = 1e-3);
        }
    }

    #[test]
    fn flat_roundtrip() {
        let a = BpsBasis::generate(99, 17, 0.1);
        let back = BpsBasis::from_flat(&a.to_flat(), 99, 0.1);
        assert_eq!(a, back);
    }
}
