//! Minimal dense linear algebra: symmetric matrices and Cholesky solves.
//!
//! Only what the Mahalanobis scorer needs. A covariance matrix is factored
//! once per score-state update and reused for every quadratic form in that
//! round, so the factorization is the hot path, not the solve.

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.data[row * self.dim + col]
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.dim {
            *self.at_mut(i, i) += value;
        }
    }

    /// Lower-triangular Cholesky factorization of a symmetric positive
    /// definite matrix. Returns `None` when a pivot is not strictly positive,
    /// which signals the matrix is not SPD to working precision.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.dim;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.at(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * n + j] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(Cholesky { dim: n, l })
    }
}

/// Lower-triangular factor L with A = L Lᵀ.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Solves L y = b by forward substitution.
    ///
    /// With A = L Lᵀ, the quadratic form bᵀ A⁻¹ b equals ‖y‖², which is how
    /// the Mahalanobis scorer stays non-negative in floating point.
    pub fn forward_sub(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= self.l[i * n + k] * y[k];
            }
            y[i] = sum / self.l[i * n + i];
        }
        y
    }

    /// Solves A x = b via forward and back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let y = self.forward_sub(b);
        let mut x = y;
        for i in (0..n).rev() {
            let mut sum = x[i];
            for k in (i + 1)..n {
                sum -= self.l[k * n + i] * x[k];
            }
            x[i] = sum / self.l[i * n + i];
        }
        x
    }
}

/// Dot product of two equal-length slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve_is_identity() {
        let m = Matrix::identity(3);
        let chol = m.cholesky().unwrap();
        let b = vec![1.5, -2.0, 0.25];
        let x = chol.solve(&b);
        assert_eq!(x, b);
    }

    #[test]
    fn solves_known_spd_system() {
        // A = [[4, 2], [2, 3]], b = [2, 1] -> x = [0.5, 0].
        let mut a = Matrix::zeros(2);
        *a.at_mut(0, 0) = 4.0;
        *a.at_mut(0, 1) = 2.0;
        *a.at_mut(1, 0) = 2.0;
        *a.at_mut(1, 1) = 3.0;
        let x = a.cholesky().unwrap().solve(&[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-12);
        assert!(x[1].abs() < 1e-12);
    }

    #[test]
    fn rejects_non_spd() {
        let mut a = Matrix::zeros(2);
        *a.at_mut(0, 0) = 1.0;
        *a.at_mut(0, 1) = 2.0;
        *a.at_mut(1, 0) = 2.0;
        *a.at_mut(1, 1) = 1.0;
        assert!(a.cholesky().is_none());

        let zero = Matrix::zeros(2);
        assert!(zero.cholesky().is_none());
    }

    #[test]
    fn factorization_round_trips() {
        let mut a = Matrix::zeros(3);
        let entries = [
            [6.0, 2.0, 1.0],
            [2.0, 5.0, 2.0],
            [1.0, 2.0, 4.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                *a.at_mut(i, j) = entries[i][j];
            }
        }
        let chol = a.cholesky().unwrap();
        // Verify A x = b for several right-hand sides by reconstructing b.
        for b in [[1.0, 0.0, 0.0], [0.3, -1.2, 2.5]] {
            let x = chol.solve(&b);
            for i in 0..3 {
                let recon: f64 = (0..3).map(|j| entries[i][j] * x[j]).sum();
                assert!((recon - b[i]).abs() < 1e-10);
            }
        }
    }
}
