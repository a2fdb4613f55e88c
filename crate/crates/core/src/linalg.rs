//! Minimal dense linear algebra for the feature and classifier stages.
//!
//! The pipeline only ever needs small dense matrices (feature covariances are
//! k-by-k with k around four; Gaussian-process kernels are capped near a
//! thousand rows), so this module provides a plain row-major [`Matrix`], a
//! Jacobi eigendecomposition for symmetric matrices, and a Cholesky
//! factorization with triangular solves. No external solver dependency.

use thiserror::Error;

/// Errors from the dense solvers.
#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    /// Operand shapes are incompatible for the requested operation.
    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: String,
        right: String,
    },
    /// The matrix is not square but the operation requires it.
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    /// Cholesky hit a non-positive pivot; the matrix is not positive definite.
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    /// Jacobi sweeps did not reduce the off-diagonal mass below tolerance.
    #[error("eigendecomposition failed to converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Creates a zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Creates the identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from row slices. All rows must share a length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == cols),
            "all rows must have equal length"
        );
        Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// Borrows row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Matrix transpose.
    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch {
                context: "matmul",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}x{}", other.rows, other.cols),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch {
                context: "matvec",
                left: format!("{}x{}", self.rows, self.cols),
                right: format!("{}", v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect())
    }
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Eigenvectors as matrix columns, aligned with `values`.
    pub vectors: Matrix,
}

/// Jacobi eigendecomposition of a symmetric matrix.
///
/// Rotates away off-diagonal entries until their total magnitude falls below
/// a fixed relative tolerance. Cubic per sweep but the matrices here are tiny
/// (feature covariances), so robustness beats asymptotics.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale: f64 = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| m.get(r, c).abs())
        .fold(0.0, f64::max)
        .max(1.0);
    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|r| (r + 1..n).map(move |c| (r, c)))
            .map(|(r, c)| m.get(r, c).abs())
            .sum();
        if off < 1e-14 * scale {
            return Ok(sort_eigen(m, v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle (Golub & Van Loan).
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    Err(LinalgError::EigenNoConvergence { sweeps: MAX_SWEEPS })
}

fn sort_eigen(m: Matrix, v: Matrix) -> SymmetricEigen {
    let n = m.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(m.get(src, src));
        for k in 0..n {
            vectors.set(k, dst, v.get(k, src));
        }
    }
    SymmetricEigen { values, vectors }
}

/// Lower-triangular Cholesky factor `L` with `L * L^T = A`.
pub fn cholesky(a: &Matrix) -> Result<Matrix, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare {
            rows: a.rows,
            cols: a.cols,
        });
    }
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(LinalgError::NotPositiveDefinite {
                        index: i,
                        pivot: sum,
                    });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` by forward substitution, `L` lower triangular.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if l.rows != b.len() {
        return Err(LinalgError::DimensionMismatch {
            context: "solve_lower",
            left: format!("{}x{}", l.rows, l.cols),
            right: format!("{}", b.len()),
        });
    }
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

/// Solves `L^T x = b` by back substitution, `L` lower triangular.
pub fn solve_lower_transpose(l: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if l.rows != b.len() {
        return Err(LinalgError::DimensionMismatch {
            context: "solve_lower_transpose",
            left: format!("{}x{}", l.rows, l.cols),
            right: format!("{}", b.len()),
        });
    }
    let n = l.rows;
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = b[i];
        for k in i + 1..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b} (tol {tol})");
    }

    #[test]
    fn matmul_and_transpose_agree_with_hand_computation() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
        let t = a.transpose();
        assert_eq!(t.row(0), &[1.0, 3.0]);
        assert_eq!(t.row(1), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_rejects_mismatched_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(
            a.matmul(&b),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eigen_recovers_known_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1 with eigenvectors along
        // (1,1)/sqrt(2) and (1,-1)/sqrt(2).
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = symmetric_eigen(&a).unwrap();
        assert_close(e.values[0], 3.0, 1e-12, "dominant eigenvalue");
        assert_close(e.values[1], 1.0, 1e-12, "second eigenvalue");
        let v0 = (e.vectors.get(0, 0), e.vectors.get(1, 0));
        assert_close(v0.0.abs(), v0.1.abs(), 1e-12, "dominant eigenvector shape");
    }

    #[test]
    fn eigen_reconstructs_the_matrix() {
        let a = Matrix::from_rows(&[
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.0],
            vec![-2.0, 0.0, 3.0],
        ]);
        let e = symmetric_eigen(&a).unwrap();
        // Rebuild V diag(w) V^T and compare entrywise.
        let mut d = Matrix::zeros(3, 3);
        for i in 0..3 {
            d.set(i, i, e.values[i]);
        }
        let rebuilt = e
            .vectors
            .matmul(&d)
            .unwrap()
            .matmul(&e.vectors.transpose())
            .unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_close(rebuilt.get(r, c), a.get(r, c), 1e-10, "reconstruction");
            }
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal() {
        let a = Matrix::from_rows(&[
            vec![5.0, 2.0, 1.0],
            vec![2.0, 6.0, 3.0],
            vec![1.0, 3.0, 7.0],
        ]);
        let e = symmetric_eigen(&a).unwrap();
        let gram = e.vectors.transpose().matmul(&e.vectors).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert_close(gram.get(r, c), want, 1e-10, "V^T V identity");
            }
        }
    }

    #[test]
    fn cholesky_factor_matches_hand_computation() {
        // A = [[4,2],[2,3]] => L = [[2,0],[1,sqrt(2)]].
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        assert_close(l.get(0, 0), 2.0, 1e-15, "L[0,0]");
        assert_close(l.get(1, 0), 1.0, 1e-15, "L[1,0]");
        assert_close(l.get(1, 1), 2.0_f64.sqrt(), 1e-15, "L[1,1]");
        assert_eq!(l.get(0, 1), 0.0, "upper triangle must stay zero");
    }

    #[test]
    fn cholesky_rejects_indefinite_matrix() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        match cholesky(&a) {
            Err(LinalgError::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn triangular_solves_invert_the_factor() {
        let a = Matrix::from_rows(&[
            vec![6.0, 3.0, 1.0],
            vec![3.0, 5.0, 2.0],
            vec![1.0, 2.0, 4.0],
        ]);
        let l = cholesky(&a).unwrap();
        let b = vec![1.0, -2.0, 0.5];
        // Solving L (L^T x) = b solves A x = b.
        let y = solve_lower(&l, &b).unwrap();
        let x = solve_lower_transpose(&l, &y).unwrap();
        let back = a.matvec(&x).unwrap();
        for (got, want) in back.iter().zip(&b) {
            assert_close(*got, *want, 1e-12, "A x round trip");
        }
    }
}
