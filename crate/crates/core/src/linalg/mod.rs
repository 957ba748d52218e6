//! Dense 64-bit linear algebra: matrices, a one-sided Jacobi SVD, norms and
//! vector angles.
//!
//! Everything here is a pure function of its inputs.

mod matrix;
mod svd;

pub use matrix::{frobenius_norm, DenseMatrix};
pub use svd::{svd_decompose, SvdFactors, DEFAULT_RANK_TOLERANCE};

use crate::error::{invalid, Error, Result};

/// Vectors with Euclidean norm at or below this value are degenerate.
pub const NORM_EPSILON: f64 = 1e-12;

/// Angle between two vectors in degrees, in `[0, 180]`.
///
/// Evaluated as `2·atan2(‖â − b̂‖, ‖â + b̂‖)` on the normalized vectors, which
/// equals `acos` of the cosine similarity but stays exact for parallel and
/// antiparallel inputs, where `acos` loses half the digits. Returns [`Error::DegenerateVector`] when either operand has norm at or
/// below [`NORM_EPSILON`].
pub fn vector_angle_deg(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return invalid(format!("vector lengths differ: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("vectors must be non-empty");
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return invalid("vector contains a non-finite component");
    }
    let na = norm(a);
    let nb = norm(b);
    for n in [na, nb] {
        if n <= NORM_EPSILON {
            return Err(Error::DegenerateVector {
                norm: n,
                epsilon: NORM_EPSILON,
            });
        }
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt()))
        .to_degrees()
        .clamp(0.0, 180.0))
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_identical_orthogonal_antipodal() {
        assert_eq!(
            vector_angle_deg(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(),
            0.0
        );
        assert!((vector_angle_deg(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 90.0).abs() < 1e-12);
        assert!((vector_angle_deg(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 180.0).abs() < 1e-12);
    }

    #[test]
    fn angle_errors() {
        assert!(matches!(
            vector_angle_deg(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateVector { .. })
        ));
        assert!(matches!(
            vector_angle_deg(&[1.0], &[1.0, 0.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(vector_angle_deg(&[], &[]).is_err());
    }

    #[test]
    fn matches_clamped_acos() {
        let a = [0.3, -1.2, 2.0];
        let b = [1.0, 0.4, -0.5];
        let cos = (dot(&a, &b) / (norm(&a) * norm(&b))).clamp(-1.0, 1.0);
        let angle = vector_angle_deg(&a, &b).unwrap();
        assert!((angle - cos.acos().to_degrees()).abs() < 1e-12);
        assert_eq!(vector_angle_deg(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    }

    #[test]
    fn nearly_parallel_never_nan() {
        let a = [0.1, 0.2, 0.3];
        let b = [0.1 * 3.0, 0.2 * 3.0, 0.3 * 3.0];
        let angle = vector_angle_deg(&a, &b).unwrap();
        assert!(angle.is_finite() && angle < 1e-5);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn vec3() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(-10.0f64..10.0, 3)
                .prop_filter("non-degenerate", |v| norm(v) > 1e-3)
        }

        proptest! {
            #[test]
            fn symmetric_and_scale_invariant(a in vec3(), b in vec3(), s in 0.01f64..100.0) {
                let ab = vector_angle_deg(&a, &b).unwrap();
                let ba = vector_angle_deg(&b, &a).unwrap();
                prop_assert!((ab - ba).abs() < 1e-9);
                let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
                let sb = vector_angle_deg(&scaled, &b).unwrap();
                prop_assert!((ab - sb).abs() < 1e-6);
                prop_assert!((0.0..=180.0).contains(&ab));
            }
        }
    }
}
