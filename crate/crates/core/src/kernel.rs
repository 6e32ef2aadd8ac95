//! Configuration points and the Gaussian (squared-exponential) correlation.

use serde::{Deserialize, Serialize};

use crate::linalg::SquareMatrix;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PointError {
    #[error("configuration point has no coordinates")]
    Empty,
    #[error("coordinate {index} = {value} lies outside the unit interval")]
    OutOfRange { index: usize, value: f64 },
}

/// A hyperparameter configuration expressed in normalized unit-cube
/// coordinates. Native values are recovered through a
/// [`SearchSpace`](crate::space::SearchSpace).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigPoint<T = f64> {
    coords: Vec<T>,
}

impl<T: Scalar> ConfigPoint<T> {
    pub fn new(coords: Vec<T>) -> Result<Self, PointError> {
        if coords.is_empty() {
            return Err(PointError::Empty);
        }
        for (index, &c) in coords.iter().enumerate() {
            if !(c >= T::zero() && c <= T::one()) {
                return Err(PointError::OutOfRange {
                    index,
                    value: c.as_f64(),
                });
            }
        }
        Ok(Self { coords })
    }

    /// Clamps every coordinate into `[0, 1]`. NaN coordinates map to 0.
    pub fn clamped(coords: Vec<T>) -> Self {
        assert!(!coords.is_empty(), "configuration point needs a dimension");
        let coords = coords
            .into_iter()
            .map(|c| {
                if c.is_nan() {
                    T::zero()
                } else {
                    c.max(T::zero()).min(T::one())
                }
            })
            .collect();
        Self { coords }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    /// Sup-norm distance.
    pub fn sup_distance(&self, other: &Self) -> T {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }
}

impl<T> std::ops::Index<usize> for ConfigPoint<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

/// `∏ᵢ exp(−φᵢ (xᵢ − x2ᵢ)²)`.
///
/// Panics on a dimension mismatch between the points and `phi`.
pub fn correlation<T: Scalar>(x: &ConfigPoint<T>, x2: &ConfigPoint<T>, phi: &[T]) -> T {
    assert_eq!(x.dim(), x2.dim(), "dimension mismatch between points");
    assert_eq!(
        x.dim(),
        phi.len(),
        "dimension mismatch between point and length-scales"
    );
    let mut exponent = T::zero();
    for ((&a, &b), &p) in x.coords.iter().zip(&x2.coords).zip(phi) {
        let diff = a - b;
        exponent = exponent + p * diff * diff;
    }
    (-exponent).exp()
}

/// Correlation matrix of a set of points; symmetric with an exact unit diagonal.
pub fn correlation_matrix<T: Scalar>(points: &[ConfigPoint<T>], phi: &[T]) -> SquareMatrix<T> {
    assert!(!points.is_empty(), "correlation matrix of an empty design");
    let n = points.len();
    let mut m = SquareMatrix::identity(n);
    for i in 0..n {
        for j in 0..i {
            let r = correlation(&points[i], &points[j], phi);
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    m
}

/// Correlations between `x` and every point of `points`.
pub fn correlation_vector<T: Scalar>(
    x: &ConfigPoint<T>,
    points: &[ConfigPoint<T>],
    phi: &[T],
) -> Vec<T> {
    points.iter().map(|p| correlation(x, p, phi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> ConfigPoint {
        ConfigPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn identical_points_correlate_fully() {
        let x = p(&[0.2, 0.7]);
        assert_eq!(correlation(&x, &x, &[5.0, 30.0]), 1.0);
    }

    #[test]
    fn zero_length_scale_is_constant() {
        assert_eq!(
            correlation(&p(&[0.0, 0.1]), &p(&[1.0, 0.9]), &[0.0, 0.0]),
            1.0
        );
    }

    #[test]
    fn unit_distance_hand_value() {
        let r = correlation(&p(&[1.0, 0.3]), &p(&[0.0, 0.3]), &[1.0, 1.0]);
        assert!((r - (-1.0f64).exp()).abs() < 1e-15);
        assert!((r - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn single_point_matrix() {
        let m = correlation_matrix(&[p(&[0.4])], &[3.0]);
        assert_eq!(m.as_slice(), &[1.0]);
    }

    #[test]
    fn duplicate_points_give_all_ones() {
        let m = correlation_matrix(&[p(&[0.4, 0.1]), p(&[0.4, 0.1])], &[3.0, 2.0]);
        assert_eq!(m.as_slice(), &[1.0; 4]);
    }

    #[test]
    fn collinear_points() {
        let pts = [p(&[0.0]), p(&[0.5]), p(&[1.0])];
        let m = correlation_matrix(&pts, &[1.0]);
        let e = |v: f64| (-v).exp();
        assert!((m[(0, 1)] - e(0.25)).abs() < 1e-15);
        assert!((m[(1, 2)] - e(0.25)).abs() < 1e-15);
        assert!((m[(0, 2)] - e(1.0)).abs() < 1e-15);
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn mismatched_dimensions_panic() {
        correlation(&p(&[0.1]), &p(&[0.1, 0.2]), &[1.0]);
    }

    #[test]
    fn rejects_out_of_cube() {
        assert_eq!(
            ConfigPoint::new(vec![0.5, 1.5]),
            Err(PointError::OutOfRange {
                index: 1,
                value: 1.5
            })
        );
        assert_eq!(ConfigPoint::<f64>::new(vec![]), Err(PointError::Empty));
    }

    #[test]
    fn single_precision_kernel() {
        let a = ConfigPoint::new(vec![0.0f32]).unwrap();
        let b = ConfigPoint::new(vec![1.0f32]).unwrap();
        assert!((correlation(&a, &b, &[1.0f32]) - (-1.0f32).exp()).abs() < 1e-7);
    }
}
