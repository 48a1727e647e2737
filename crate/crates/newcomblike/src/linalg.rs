//! Dense LU factorization with partial pivoting.
//!
//! The linear systems in this crate come from absorbing chains over a
//! handful of states, so a plain dense factorization is the right tool. The
//! factorization is computed once and can then solve against the matrix and
//! its transpose, which is exactly the pair needed for expected visit counts
//! and state values.

use thiserror::Error;

use crate::tolerances::LU_PIVOT_MIN;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {index} has magnitude {magnitude:.3e}")]
    Singular { index: usize, magnitude: f64 },
    #[error("dimension mismatch: matrix is {n}x{n} but vector has length {len}")]
    Dimension { n: usize, len: usize },
}

/// Row-major LU factors of a square matrix with row pivoting: P A = L U.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    /// Combined storage: strictly lower triangle holds L (unit diagonal
    /// implied), upper triangle including the diagonal holds U.
    lu: Vec<f64>,
    /// perm[i] is the original row now in position i.
    perm: Vec<usize>,
}

/// Factors a square row-major matrix. Pivots smaller in magnitude than
/// `pivot_min` are reported as singular.
pub fn factor(mut lu: Vec<f64>, n: usize, pivot_min: f64) -> Result<LuFactors, LinalgError> {
    assert_eq!(lu.len(), n * n, "matrix storage must be n*n");
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut best = col;
        let mut best_mag = lu[col * n + col].abs();
        for row in col + 1..n {
            let mag = lu[row * n + col].abs();
            if mag > best_mag {
                best = row;
                best_mag = mag;
            }
        }
        if best_mag < pivot_min {
            return Err(LinalgError::Singular {
                index: col,
                magnitude: best_mag,
            });
        }
        if best != col {
            perm.swap(col, best);
            for k in 0..n {
                lu.swap(col * n + k, best * n + k);
            }
        }
        let pivot = lu[col * n + col];
        for row in col + 1..n {
            let factor = lu[row * n + col] / pivot;
            lu[row * n + col] = factor;
            for k in col + 1..n {
                lu[row * n + k] -= factor * lu[col * n + k];
            }
        }
    }
    Ok(LuFactors { n, lu, perm })
}

/// Factors with the crate-wide pivot threshold.
pub fn factor_default(matrix: Vec<f64>, n: usize) -> Result<LuFactors, LinalgError> {
    factor(matrix, n, LU_PIVOT_MIN)
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves A x = b.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Dimension { n, len: rhs.len() });
        }
        // Forward: L y = P b, unit diagonal.
        let mut x: Vec<f64> = (0..n).map(|i| rhs[self.perm[i]]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[i * n + k] * x[k];
            }
        }
        // Backward: U x = y.
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }

    /// Solves Aᵀ x = b using the same factors: Aᵀ = Uᵀ Lᵀ P.
    pub fn solve_transposed(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        if rhs.len() != n {
            return Err(LinalgError::Dimension { n, len: rhs.len() });
        }
        // Forward: Uᵀ z = b; Uᵀ is lower triangular with U's diagonal.
        let mut z = rhs.to_vec();
        for i in 0..n {
            for k in 0..i {
                z[i] -= self.lu[k * n + i] * z[k];
            }
            z[i] /= self.lu[i * n + i];
        }
        // Backward: Lᵀ w = z; Lᵀ is upper triangular with unit diagonal.
        for i in (0..n).rev() {
            for k in i + 1..n {
                z[i] -= self.lu[k * n + i] * z[k];
            }
        }
        // x = Pᵀ w, i.e. x[perm[i]] = w[i].
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = z[i];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    }

    fn transpose(a: &[f64], n: usize) -> Vec<f64> {
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                t[j * n + i] = a[i * n + j];
            }
        }
        t
    }

    #[test]
    fn solves_reference_system() {
        let a = vec![2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let b = vec![8.0, -11.0, -3.0];
        let f = factor_default(a.clone(), 3).unwrap();
        let x = f.solve(&b).unwrap();
        let expect = [2.0, 3.0, -1.0];
        for (got, want) in x.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
        let back = mat_vec(&a, 3, &x);
        for (got, want) in back.iter().zip(b.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_solve_matches_explicit_transpose() {
        let a = vec![
            4.0, -2.0, 1.0, 0.5, //
            3.0, 6.0, -1.0, 2.0, //
            0.0, 1.0, 5.0, -2.0, //
            1.0, -1.0, 0.0, 3.0,
        ];
        let b = vec![1.0, -2.0, 0.5, 4.0];
        let f = factor_default(a.clone(), 4).unwrap();
        let x1 = f.solve_transposed(&b).unwrap();
        let ft = factor_default(transpose(&a, 4), 4).unwrap();
        let x2 = ft.solve(&b).unwrap();
        for (u, v) in x1.iter().zip(x2.iter()) {
            assert!((u - v).abs() < 1e-10, "{u} vs {v}");
        }
    }

    #[test]
    fn needs_pivoting() {
        // Zero in the top-left corner forces a row swap.
        let a = vec![0.0, 1.0, 1.0, 1.0];
        let f = factor_default(a, 2).unwrap();
        let x = f.solve(&[3.0, 5.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn reports_singularity() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        let err = factor_default(a, 2).unwrap_err();
        match err {
            LinalgError::Singular { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
