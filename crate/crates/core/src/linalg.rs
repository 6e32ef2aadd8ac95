//! Small dense linear algebra: square matrices and Cholesky factors.
//!
//! Designs handled here hold at most a few hundred points, so a plain
//! row-major `Vec` is all that is needed.

use crate::scalar::Scalar;

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if `data.len() != n * n`.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * n, "row-major data must have n*n entries");
        Self { n, data }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Returns a copy with `value` added to every diagonal entry.
    pub fn with_diagonal_added(&self, value: T) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out[(i, i)] = out[(i, i)] + value;
        }
        out
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Symmetric permutation `P A Pᵀ` with `out[(i, j)] = self[(perm[i], perm[j])]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n);
        Self::from_fn(self.n, |i, j| self[(perm[i], perm[j])])
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cholesky<T> {
    factor: SquareMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric positive-definite matrix. Returns `None` when a
    /// pivot is not strictly positive (or not finite).
    pub fn factor(a: &SquareMatrix<T>) -> Option<Self> {
        let n = a.n();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag = diag - l[(j, k)] * l[(j, k)];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Self { factor: l })
    }

    /// Factors `a + jitter·I`, escalating the jitter tenfold (at most
    /// `max_attempts` times) until the factorization succeeds. Returns the
    /// factor together with the jitter actually used.
    pub fn factor_with_jitter(
        a: &SquareMatrix<T>,
        jitter: T,
        max_attempts: usize,
    ) -> Option<(Self, T)> {
        let mut j = jitter;
        for _ in 0..max_attempts.max(1) {
            if let Some(c) = Self::factor(&a.with_diagonal_added(j)) {
                return Some((c, j));
            }
            j = if j > T::zero() {
                j * T::of(10.0)
            } else {
                T::epsilon()
            };
        }
        None
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.factor.n()
    }

    pub fn lower(&self) -> &SquareMatrix<T> {
        &self.factor
    }

    /// Solves `L z = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(b.len(), n);
        let l = &self.factor;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            let row = l.row(i);
            for k in 0..i {
                s = s - row[k] * z[k];
            }
            z[i] = s / row[i];
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn solve_upper(&self, z: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(z.len(), n);
        let l = &self.factor;
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `bᵀ A⁻¹ b`.
    pub fn quad_form(&self, b: &[T]) -> T {
        self.solve_lower(b).iter().map(|&v| v * v).sum()
    }

    /// `ln |A|`.
    pub fn log_det(&self) -> T {
        let two = T::of(2.0);
        (0..self.n()).map(|i| two * self.factor[(i, i)].ln()).sum()
    }

    /// Reconstructs `L Lᵀ`.
    pub fn reconstruct(&self) -> SquareMatrix<T> {
        let n = self.n();
        let l = &self.factor;
        SquareMatrix::from_fn(n, |i, j| {
            (0..=i.min(j)).map(|k| l[(i, k)] * l[(j, k)]).sum()
        })
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}
