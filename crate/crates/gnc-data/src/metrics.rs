//! Error metrics for comparing estimates to ground truth.

use nalgebra::Matrix3;

/// Geodesic distance between two rotations in degrees:
/// `acos((trace(Ra^T Rb) - 1) / 2)`, clamped against round-off.
pub fn rotation_error_deg(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let cos = ((a.transpose() * b).trace() - 1.0) / 2.0;
    cos.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Precision and recall of an inlier classification against the known
/// outlier mask. Undefined ratios (no predicted inliers, or no true inliers)
/// are reported as 0.
pub fn precision_recall(predicted_inliers: &[bool], outlier_mask: &[bool]) -> (f64, f64) {
    assert_eq!(
        predicted_inliers.len(),
        outlier_mask.len(),
        "mask lengths differ"
    );
    let mut true_positives = 0usize;
    let mut predicted = 0usize;
    let mut actual = 0usize;
    for (&pred, &out) in predicted_inliers.iter().zip(outlier_mask) {
        let truth = !out;
        predicted += pred as usize;
        actual += truth as usize;
        true_positives += (pred && truth) as usize;
    }
    let precision = if predicted > 0 {
        true_positives as f64 / predicted as f64
    } else {
        0.0
    };
    let recall = if actual > 0 {
        true_positives as f64 / actual as f64
    } else {
        0.0
    };
    (precision, recall)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{UnitQuaternion, Vector3};

    #[test]
    fn rotation_error_matches_the_constructed_angle() {
        let eye = Matrix3::identity();
        assert_abs_diff_eq!(rotation_error_deg(&eye, &eye), 0.0, epsilon = 1e-12);

        for &deg in &[0.5f64, 10.0, 90.0, 179.0] {
            let r = UnitQuaternion::from_axis_angle(
                &Vector3::y_axis(),
                deg.to_radians(),
            )
            .to_rotation_matrix()
            .into_inner();
            assert_abs_diff_eq!(rotation_error_deg(&eye, &r), deg, epsilon = 1e-7);
            // Symmetric in its arguments.
            assert_abs_diff_eq!(rotation_error_deg(&r, &eye), deg, epsilon = 1e-7);
        }

        let flip = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
            .to_rotation_matrix()
            .into_inner();
        assert_abs_diff_eq!(rotation_error_deg(&eye, &flip), 180.0, epsilon = 1e-7);
    }

    #[test]
    fn precision_recall_counts_against_the_outlier_mask() {
        // truth: inlier, inlier, outlier, outlier
        let outliers = [false, false, true, true];

        // Perfect classification.
        assert_eq!(
            precision_recall(&[true, true, false, false], &outliers),
            (1.0, 1.0)
        );
        // One outlier admitted: 2 of 3 predictions correct, full recall.
        assert_eq!(
            precision_recall(&[true, true, true, false], &outliers),
            (2.0 / 3.0, 1.0)
        );
        // One inlier missed: precision stays 1, recall halves.
        assert_eq!(
            precision_recall(&[true, false, false, false], &outliers),
            (1.0, 0.5)
        );
        // Nothing predicted: both ratios collapse to 0.
        assert_eq!(
            precision_recall(&[false, false, false, false], &outliers),
            (0.0, 0.0)
        );
    }
}
