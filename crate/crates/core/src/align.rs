//! Rigid alignment of corresponding point sets and the calibration-error metric.

use crate::error::{GardeError, Result};
use crate::geometry::{centroid, Point2};

/// `x ↦ rotation · x + translation`, where `rotation` is orthogonal and may
/// include a reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 2]; 2],
    pub translation: Point2,
    pub reflected: bool,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0], [0.0, 1.0]],
        translation: Point2::ORIGIN,
        reflected: false,
    };

    /// Counter-clockwise rotation by `angle` radians followed by a translation.
    pub fn from_angle(angle: f64, translation: Point2) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: [[c, -s], [s, c]],
            translation,
            reflected: false,
        }
    }

    /// Mirror across the x-axis, then rotate by `angle`, then translate.
    pub fn reflected_from_angle(angle: f64, translation: Point2) -> Self {
        let (s, c) = angle.sin_cos();
        RigidTransform {
            rotation: [[c, s], [s, -c]],
            translation,
            reflected: true,
        }
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        let r = &self.rotation;
        Point2::new(
            r[0][0] * p.x + r[0][1] * p.y + self.translation.x,
            r[1][0] * p.x + r[1][1] * p.y + self.translation.y,
        )
    }

    pub fn apply_all(&self, points: &[Point2]) -> Vec<Point2> {
        points.iter().map(|&p| self.apply(p)).collect()
    }

    pub fn determinant(&self) -> f64 {
        let r = &self.rotation;
        r[0][0] * r[1][1] - r[0][1] * r[1][0]
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [[r[0][0], r[1][0]], [r[0][1], r[1][1]]];
        let t = self.translation;
        RigidTransform {
            rotation: rt,
            translation: Point2::new(
                -(rt[0][0] * t.x + rt[0][1] * t.y),
                -(rt[1][0] * t.x + rt[1][1] * t.y),
            ),
            reflected: self.reflected,
        }
    }
}

fn spread(points: &[Point2], center: Point2) -> f64 {
    points.iter().map(|&p| (p - center).norm_sq()).sum()
}

fn check_spread(points: &[Point2], center: Point2, name: &str) -> Result<()> {
    let scale = points
        .iter()
        .fold(1.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let tol = 1e-12 * scale;
    if spread(points, center) <= tol * tol * points.len() as f64 {
        return Err(GardeError::Degenerate(format!(
            "all {name} points coincide"
        )));
    }
    Ok(())
}

/// Least-squares rigid alignment of `moving` onto `reference`.
///
/// Returns the transform minimizing the mean squared distance between
/// transformed moving points and their reference counterparts, and the
/// transformed moving points. Without `allow_reflection` the rotation is
/// proper (determinant +1).
pub fn align(
    moving: &[Point2],
    reference: &[Point2],
    allow_reflection: bool,
) -> Result<(RigidTransform, Vec<Point2>)> {
    if moving.len() != reference.len() {
        return Err(GardeError::DimensionMismatch {
            what: "alignment point count",
            expected: reference.len(),
            actual: moving.len(),
        });
    }
    if moving.len() < 2 {
        return Err(GardeError::Degenerate(format!(
            "alignment needs at least 2 points, got {}",
            moving.len()
        )));
    }
    let cm = centroid(moving);
    let cr = centroid(reference);
    check_spread(moving, cm, "moving")?;
    check_spread(reference, cr, "reference")?;

    // Cross-covariance terms for the proper and the mirrored case.
    let (mut dot, mut cross) = (0.0, 0.0);
    for (&m, &r) in moving.iter().zip(reference) {
        let (m, r) = (m - cm, r - cr);
        dot += m.x * r.x + m.y * r.y;
        cross += m.x * r.y - m.y * r.x;
    }
    // Mirrored moving point is (m.x, -m.y).
    let (mut dot_f, mut cross_f) = (0.0, 0.0);
    if allow_reflection {
        for (&m, &r) in moving.iter().zip(reference) {
            let (m, r) = (m - cm, r - cr);
            dot_f += m.x * r.x - m.y * r.y;
            cross_f += m.x * r.y + m.y * r.x;
        }
    }

    let proper_gain = dot.hypot(cross);
    let mirrored_gain = dot_f.hypot(cross_f);
    let base = if allow_reflection && mirrored_gain > proper_gain {
        RigidTransform::reflected_from_angle(cross_f.atan2(dot_f), Point2::ORIGIN)
    } else {
        RigidTransform::from_angle(cross.atan2(dot), Point2::ORIGIN)
    };
    let rotated_center = base.apply(cm);
    let transform = RigidTransform {
        translation: cr - rotated_center,
        ..base
    };
    let aligned = transform.apply_all(moving);
    Ok((transform, aligned))
}

/// Root-mean-square point distance after optimal rigid alignment of
/// `estimated` onto `truth`.
pub fn calibration_error(
    estimated: &[Point2],
    truth: &[Point2],
    allow_reflection: bool,
) -> Result<f64> {
    if estimated.len() != truth.len() {
        return Err(GardeError::DimensionMismatch {
            what: "point count",
            expected: truth.len(),
            actual: estimated.len(),
        });
    }
    if estimated.is_empty() {
        return Err(GardeError::Degenerate("empty point set".into()));
    }
    let aligned = match align(estimated, truth, allow_reflection) {
        Ok((_, aligned)) => aligned,
        // Coincident sets leave only the translation to fit.
        Err(GardeError::Degenerate(_)) => {
            let shift = centroid(truth) - centroid(estimated);
            estimated.iter().map(|&p| p + shift).collect()
        }
        Err(e) => return Err(e),
    };
    Ok(rmse(&aligned, truth))
}

/// Root-mean-square distance between corresponding points.
pub fn rmse(a: &[Point2], b: &[Point2]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(&p, &q)| (p - q).norm_sq()).sum();
    (sum / a.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.5),
            Point2::new(1.0, 2.0),
            Point2::new(-0.5, 1.5),
        ]
    }

    #[test]
    fn identity_on_equal_sets() {
        let p = sample();
        let (t, aligned) = align(&p, &p, false).unwrap();
        assert!((t.rotation[0][0] - 1.0).abs() < 1e-12);
        assert!(t.rotation[0][1].abs() < 1e-12);
        assert!(t.translation.norm() < 1e-12);
        assert!(rmse(&aligned, &p) < 1e-12);
    }

    #[test]
    fn recovers_rotation_and_translation() {
        let reference = sample();
        let motion = RigidTransform::from_angle(std::f64::consts::FRAC_PI_2, Point2::new(1.0, 2.0));
        let moved = motion.apply_all(&reference);
        let (t, aligned) = align(&moved, &reference, false).unwrap();
        assert!(rmse(&aligned, &reference) < 1e-10);
        let inv = motion.inverse();
        for i in 0..2 {
            for j in 0..2 {
                assert!((t.rotation[i][j] - inv.rotation[i][j]).abs() < 1e-12);
            }
        }
        assert!((t.translation - inv.translation).norm() < 1e-12);
    }

    #[test]
    fn reflection_only_when_allowed() {
        let reference = sample();
        let mirror = RigidTransform::reflected_from_angle(0.3, Point2::new(-2.0, 0.7));
        let moved = mirror.apply_all(&reference);
        let (t, aligned) = align(&moved, &reference, true).unwrap();
        assert!(t.reflected);
        assert!((t.determinant() + 1.0).abs() < 1e-12);
        assert!(rmse(&aligned, &reference) < 1e-10);
        let (t, aligned) = align(&moved, &reference, false).unwrap();
        assert!(!t.reflected);
        assert!((t.determinant() - 1.0).abs() < 1e-12);
        assert!(rmse(&aligned, &reference) > 0.1);
    }

    #[test]
    fn degenerate_sets_rejected() {
        let same = vec![Point2::new(0.1, 0.1); 3];
        assert!(matches!(
            align(&same, &sample()[..3], false),
            Err(GardeError::Degenerate(_))
        ));
        assert!(align(&sample(), &sample()[..3], false).is_err());
    }

    #[test]
    fn calibration_error_rigid_invariance() {
        let truth = sample();
        let est = RigidTransform::from_angle(37f64.to_radians(), Point2::new(4.0, -1.0))
            .apply_all(&truth);
        assert!(calibration_error(&est, &truth, false).unwrap() < 1e-10);
        assert_eq!(calibration_error(&truth, &truth, true).unwrap(), 0.0);
    }

    #[test]
    fn calibration_error_count_mismatch() {
        assert!(calibration_error(&sample(), &sample()[..2], true).is_err());
    }

    #[test]
    fn rotation_is_orthogonal() {
        let a = sample();
        let b: Vec<Point2> = a.iter().map(|p| Point2::new(p.y * 1.1 + 0.3, -p.x)).collect();
        for refl in [false, true] {
            let (t, _) = align(&a, &b, refl).unwrap();
            let r = t.rotation;
            let rtr00 = r[0][0] * r[0][0] + r[1][0] * r[1][0];
            let rtr01 = r[0][0] * r[0][1] + r[1][0] * r[1][1];
            let rtr11 = r[0][1] * r[0][1] + r[1][1] * r[1][1];
            assert!((rtr00 - 1.0).abs() < 1e-10 && rtr01.abs() < 1e-10 && (rtr11 - 1.0).abs() < 1e-10);
        }
    }
}
