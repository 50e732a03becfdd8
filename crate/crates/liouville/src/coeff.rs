//! The interaction matrix `A` and the quadratic polynomials Λ_J.
//!
//! A mass vector σ lies on the hypersurface Π when Λ_I(σ) = 0 and
//! Λ_J(σ) > 0 for every proper nonempty subset J of the index set.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

/// Largest dimension for which the 2^n proper-subset scan is attempted.
pub const MAX_SUBSET_DIM: usize = 20;

/// Relative determinant threshold below which the matrix is declared singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix must be square and nonempty, got {rows} rows with row {bad_row} of length {bad_len}")]
    NotSquare {
        rows: usize,
        bad_row: usize,
        bad_len: usize,
    },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is not symmetric: a[{i}][{j}] = {lhs} but a[{j}][{i}] = {rhs}")]
    NotSymmetric { i: usize, j: usize, lhs: f64, rhs: f64 },
    #[error("negative entry a[{i}][{j}] = {value}")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("matrix is numerically singular (|det| = {det:e}, threshold {threshold:e})")]
    Singular { det: f64, threshold: f64 },
    #[error("matrix is reducible: the positivity graph is disconnected")]
    Reducible,
    #[error("dimension {n} exceeds the subset-scan limit {MAX_SUBSET_DIM}")]
    DimensionTooLarge { n: usize },
}

/// Validated interaction matrix with its inverse.
///
/// Immutable after construction; safe to share across parallel workers.
#[derive(Clone, Debug)]
pub struct CoefficientMatrix {
    n: usize,
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    positive_definite: bool,
}

/// Residuals of the Π-membership conditions for one mass vector.
#[derive(Clone, Debug, Serialize)]
pub struct PiResidual {
    /// Λ_I(σ) = 4 Σ σ_i − Σ a_ij σ_i σ_j over the full index set.
    pub lambda_i: f64,
    /// Minimum of Λ_J over all proper nonempty subsets (+∞ when n = 1).
    pub min_proper_lambda: f64,
    /// Zero-based indices of the subset achieving the minimum (empty when n = 1).
    pub worst_subset: Vec<usize>,
}

impl PiResidual {
    /// Membership test at tolerance `tol` on |Λ_I|.
    pub fn on_pi(&self, tol: f64) -> bool {
        self.lambda_i.abs() <= tol && self.min_proper_lambda > 0.0
    }
}

impl CoefficientMatrix {
    /// Validates row-major entries: symmetric, non-negative, invertible, irreducible.
    pub fn new(entries: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let n = entries.len();
        if n == 0 {
            return Err(MatrixError::Empty);
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::NotSquare {
                    rows: n,
                    bad_row: i,
                    bad_len: row.len(),
                });
            }
        }
        let scale = entries
            .iter()
            .flatten()
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        let sym_tol = 1e-12 * scale;
        for i in 0..n {
            for j in (i + 1)..n {
                let (lhs, rhs) = (entries[i][j], entries[j][i]);
                if (lhs - rhs).abs() > sym_tol {
                    return Err(MatrixError::NotSymmetric { i, j, lhs, rhs });
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if entries[i][j] < 0.0 {
                    return Err(MatrixError::NegativeEntry {
                        i,
                        j,
                        value: entries[i][j],
                    });
                }
            }
        }
        // exact symmetrization of roundoff asymmetry that passed the check
        let a = DMatrix::from_fn(n, n, |i, j| 0.5 * (entries[i][j] + entries[j][i]));
        let det = a.clone().lu().determinant();
        let threshold = SINGULAR_TOL * scale.powi(n as i32).max(f64::MIN_POSITIVE);
        if det.abs() < threshold {
            return Err(MatrixError::Singular {
                det: det.abs(),
                threshold,
            });
        }
        if !is_connected(&a) {
            return Err(MatrixError::Reducible);
        }
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or(MatrixError::Singular { det: 0.0, threshold })?;
        let positive_definite = a.clone().cholesky().is_some();
        Ok(Self {
            n,
            a,
            a_inv,
            positive_definite,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    /// Entry a^{ij} of the inverse matrix.
    pub fn inv_entry(&self, i: usize, j: usize) -> f64 {
        self.a_inv[(i, j)]
    }

    /// Whether A is positive definite. Recorded but never required.
    pub fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }

    /// Row-major copy of the entries.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[(i, j)]).collect())
            .collect()
    }

    /// Matrix-vector product (A x)_i.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.a[(i, j)] * x[j]).sum())
            .collect()
    }

    /// Λ_J(σ) = 4 Σ_{i∈J} σ_i − Σ_{i,j∈J} a_ij σ_i σ_j for an index subset J.
    ///
    /// Indices are zero-based; the empty subset gives 0.
    pub fn lambda_j(&self, sigma: &[f64], subset: &[usize]) -> f64 {
        assert_eq!(sigma.len(), self.n, "sigma length must match dimension");
        let mut linear = 0.0;
        let mut quad = 0.0;
        for &i in subset {
            linear += sigma[i];
            for &j in subset {
                quad += self.a[(i, j)] * sigma[i] * sigma[j];
            }
        }
        4.0 * linear - quad
    }

    /// Λ_I(σ) over the full index set.
    pub fn lambda_full(&self, sigma: &[f64]) -> f64 {
        let all: Vec<usize> = (0..self.n).collect();
        self.lambda_j(sigma, &all)
    }

    /// Λ_I together with the minimum of Λ_J over all 2^n − 2 proper subsets.
    pub fn pi_residual(&self, sigma: &[f64]) -> Result<PiResidual, MatrixError> {
        if self.n > MAX_SUBSET_DIM {
            return Err(MatrixError::DimensionTooLarge { n: self.n });
        }
        assert_eq!(sigma.len(), self.n);
        let lambda_i = self.lambda_full(sigma);
        let mut min_proper = f64::INFINITY;
        let mut worst: Vec<usize> = Vec::new();
        let full: u32 = (1 << self.n) - 1;
        for mask in 1..full {
            let subset: Vec<usize> = (0..self.n).filter(|&i| mask >> i & 1 == 1).collect();
            let val = self.lambda_j(sigma, &subset);
            if val < min_proper {
                min_proper = val;
                worst = subset;
            }
        }
        Ok(PiResidual {
            lambda_i,
            min_proper_lambda: min_proper,
            worst_subset: worst,
        })
    }
}

/// BFS connectivity of the graph with an edge (i,j) iff a_ij > 0.
fn is_connected(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut queue = vec![0usize];
    seen[0] = true;
    while let Some(i) = queue.pop() {
        for j in 0..n {
            if !seen[j] && a[(i, j)] > 0.0 {
                seen[j] = true;
                queue.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn validates_one_by_one() {
        let m = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        assert_eq!(m.n(), 1);
        assert_relative_eq!(m.inv_entry(0, 0), 1.0);
        assert!(m.is_positive_definite());
    }

    #[test]
    fn accepts_zero_diagonal_swap_matrix() {
        let m = CoefficientMatrix::new(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.n(), 2);
        assert_relative_eq!(m.inv_entry(0, 1), 1.0);
        assert_relative_eq!(m.inv_entry(0, 0), 0.0);
        assert!(!m.is_positive_definite());
    }

    #[test]
    fn rejects_identity_as_reducible() {
        let err = CoefficientMatrix::new(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::Reducible));
    }

    #[test]
    fn rejects_rank_one_as_singular() {
        let err = CoefficientMatrix::new(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::Singular { .. }));
    }

    #[test]
    fn rejects_asymmetry_and_negative_entries() {
        let err = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.3, 1.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::NotSymmetric { .. }));
        let err = CoefficientMatrix::new(&[vec![1.0, -0.5], vec![-0.5, 1.0]]).unwrap_err();
        assert!(matches!(err, MatrixError::NegativeEntry { .. }));
    }

    #[test]
    fn lambda_on_scalar_bubble_mass_vanishes() {
        let m = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        assert_relative_eq!(m.lambda_j(&[4.0], &[0]), 0.0);
        assert_relative_eq!(m.lambda_j(&[4.0], &[]), 0.0);
    }

    #[test]
    fn lambda_proper_subset_symmetric_half_coupling() {
        let m = CoefficientMatrix::new(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let s = 8.0 / 3.0;
        // 4σ − σ² with σ = 8/3
        assert_relative_eq!(m.lambda_j(&[s, s], &[0]), 32.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn pi_residual_scalar_case_has_empty_scan() {
        let m = CoefficientMatrix::new(&[vec![1.0]]).unwrap();
        let res = m.pi_residual(&[4.0]).unwrap();
        assert_relative_eq!(res.lambda_i, 0.0);
        assert!(res.min_proper_lambda.is_infinite());
        assert!(res.worst_subset.is_empty());
        let off = m.pi_residual(&[1.0]).unwrap();
        assert_relative_eq!(off.lambda_i, 3.0);
        assert!(!off.on_pi(1e-10));
    }

    #[test]
    fn pi_residual_swap_matrix_at_four_four() {
        let m = CoefficientMatrix::new(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let res = m.pi_residual(&[4.0, 4.0]).unwrap();
        assert_relative_eq!(res.lambda_i, 0.0);
        assert_relative_eq!(res.min_proper_lambda, 16.0);
        assert!(res.on_pi(1e-12));
    }
}
