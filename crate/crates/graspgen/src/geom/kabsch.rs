use nalgebra::{Matrix3, Point3, Vector3};

use super::{GeomError, RigidTransform};

/// Optimal proper rigid transform minimizing the weighted sum of squared
/// distances `Σ w_i · ‖R s_i + t − t_i‖²` (SVD of the cross-covariance with
/// a determinant fix so reflections are never returned).
pub fn weighted_kabsch(
    source: &[Point3<f64>],
    target: &[Point3<f64>],
    weights: &[f64],
) -> Result<RigidTransform, GeomError> {
    if source.len() != target.len() || source.len() != weights.len() {
        return Err(GeomError::DegenerateCorrespondences(format!(
            "length mismatch: {} source, {} target, {} weights",
            source.len(),
            target.len(),
            weights.len()
        )));
    }
    if source.len() < 3 {
        return Err(GeomError::DegenerateCorrespondences(format!(
            "need at least 3 correspondences, got {}",
            source.len()
        )));
    }
    let wsum: f64 = weights.iter().sum();
    if wsum <= 1e-12 || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GeomError::DegenerateCorrespondences(
            "weights must be non-negative with positive sum".into(),
        ));
    }

    let mut s_bar = Vector3::zeros();
    let mut t_bar = Vector3::zeros();
    for ((s, t), &w) in source.iter().zip(target).zip(weights) {
        s_bar += s.coords * w;
        t_bar += t.coords * w;
    }
    s_bar /= wsum;
    t_bar /= wsum;

    let mut h = Matrix3::zeros();
    for ((s, t), &w) in source.iter().zip(target).zip(weights) {
        let sc = s.coords - s_bar;
        let tc = t.coords - t_bar;
        h += (sc * tc.transpose()) * w;
    }

    let svd = h.svd(true, true);
    let u = svd.u.ok_or_else(|| {
        GeomError::DegenerateCorrespondences("SVD failed to produce U".into())
    })?;
    let v = svd
        .v_t
        .ok_or_else(|| GeomError::DegenerateCorrespondences("SVD failed to produce V".into()))?
        .transpose();
    let d = (v * u.transpose()).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d < 0.0 { -1.0 } else { 1.0 }));
    let rotation = v * fix * u.transpose();
    let translation = t_bar - rotation * s_bar;
    Ok(RigidTransform { rotation, translation })
}

/// Unweighted Kabsch alignment.
pub fn kabsch(source: &[Point3<f64>], target: &[Point3<f64>]) -> Result<RigidTransform, GeomError> {
    weighted_kabsch(source, target, &vec![1.0; source.len()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::axis_angle_to_matrix;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(rng: &mut impl Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
            })
            .collect()
    }

    fn sq_residual(t: &RigidTransform, src: &[Point3<f64>], dst: &[Point3<f64>]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(s, d)| (t.apply_point(s) - d).norm_squared())
            .sum()
    }

    #[test]
    fn recovers_exact_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let src = random_cloud(&mut rng, 12);
            let truth = RigidTransform::new(
                axis_angle_to_matrix(&Vector3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )),
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.4),
            );
            let dst: Vec<_> = src.iter().map(|p| truth.apply_point(p)).collect();
            let est = kabsch(&src, &dst).unwrap();
            assert_relative_eq!(est.rotation, truth.rotation, epsilon = 1e-10);
            assert_relative_eq!(est.translation, truth.translation, epsilon = 1e-10);
        }
    }

    #[test]
    fn beats_random_rotations_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let src = random_cloud(&mut rng, 20);
        let truth = RigidTransform::new(
            axis_angle_to_matrix(&Vector3::new(0.4, -1.2, 0.8)),
            Vector3::new(0.3, -0.1, 0.6),
        );
        let dst: Vec<_> = src
            .iter()
            .map(|p| {
                let q = truth.apply_point(p);
                Point3::new(
                    q.x + rng.gen_range(-0.02..0.02),
                    q.y + rng.gen_range(-0.02..0.02),
                    q.z + rng.gen_range(-0.02..0.02),
                )
            })
            .collect();
        let est = kabsch(&src, &dst).unwrap();
        let est_res = sq_residual(&est, &src, &dst);

        // Independent check of optimality: no random rotation (with its own
        // optimal translation) does better.
        let s_bar = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / src.len() as f64;
        let d_bar = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / dst.len() as f64;
        for _ in 0..2000 {
            let r = axis_angle_to_matrix(&Vector3::new(
                rng.gen_range(-3.2..3.2),
                rng.gen_range(-3.2..3.2),
                rng.gen_range(-3.2..3.2),
            ));
            let cand = RigidTransform::new(r, d_bar - r * s_bar);
            assert!(sq_residual(&cand, &src, &dst) >= est_res - 1e-9);
        }
        // And the generating transform is not better either.
        assert!(sq_residual(&truth, &src, &dst) >= est_res - 1e-12);
    }

    #[test]
    fn never_returns_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let src = random_cloud(&mut rng, 8);
            // Mirror the cloud: the best orthogonal map is a reflection, so
            // the solver must settle for the best proper rotation.
            let dst: Vec<_> = src
                .iter()
                .map(|p| Point3::new(-p.x, p.y, p.z))
                .collect();
            let est = kabsch(&src, &dst).unwrap();
            assert_relative_eq!(est.rotation.determinant(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn weights_localize_the_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_cloud(&mut rng, 10);
        let truth = RigidTransform::new(
            axis_angle_to_matrix(&Vector3::new(0.1, 0.9, -0.4)),
            Vector3::new(-0.2, 0.5, 0.1),
        );
        let mut dst: Vec<_> = src.iter().map(|p| truth.apply_point(p)).collect();
        // Corrupt the last three points badly.
        for d in dst.iter_mut().skip(7) {
            d.x += 5.0;
            d.y -= 3.0;
        }
        let mut weights = vec![1.0; 10];
        for w in weights.iter_mut().skip(7) {
            *w = 0.0;
        }
        let est = weighted_kabsch(&src, &dst, &weights).unwrap();
        assert_relative_eq!(est.rotation, truth.rotation, epsilon = 1e-9);
        assert_relative_eq!(est.translation, truth.translation, epsilon = 1e-9);
    }

    #[test]
    fn rejects_degenerate_input() {
        let p = vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0)];
        assert!(kabsch(&p, &p).is_err());
        let tri = vec![
            Point3::origin(),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert!(weighted_kabsch(&tri, &tri, &[0.0, 0.0, 0.0]).is_err());
        assert!(weighted_kabsch(&tri, &tri, &[1.0, 1.0]).is_err());
    }
}
