//! Small dense linear algebra for normal equations.
//!
//! Regressor dimensions are small (a handful of columns), so matrices are
//! row-major `Vec<f64>` and the symmetric solver is a diagonally pivoted
//! Cholesky factorization that reveals rank through its pivots.

/// Relative pivot threshold below which a Gram matrix is declared singular.
pub const RANK_TOL: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pivoted Cholesky factorization `P' A P = L L'` of a symmetric PSD matrix.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    lower: Vec<f64>,
    perm: Vec<usize>,
}

impl PivotedCholesky {
    /// Factorizes `a`; returns `None` when a pivot falls below
    /// `RANK_TOL` times the largest diagonal entry.
    pub fn new(a: &Matrix) -> Option<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut work = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return None;
        }
        let threshold = RANK_TOL * scale;
        for k in 0..n {
            // choose the largest remaining diagonal
            let (p, _) = (k..n)
                .map(|i| (i, work[i * n + i]))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty range");
            if work[p * n + p] <= threshold {
                return None;
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    work.swap(k * n + j, p * n + j);
                }
                for i in 0..n {
                    work.swap(i * n + k, i * n + p);
                }
            }
            let pivot = work[k * n + k].sqrt();
            work[k * n + k] = pivot;
            for i in k + 1..n {
                work[i * n + k] /= pivot;
            }
            // keep the trailing block symmetric so later pivot swaps stay valid
            for j in k + 1..n {
                let ljk = work[j * n + k];
                for i in j..n {
                    let v = work[i * n + j] - work[i * n + k] * ljk;
                    work[i * n + j] = v;
                    work[j * n + i] = v;
                }
            }
        }
        Some(PivotedCholesky {
            n,
            lower: work,
            perm,
        })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.lower;
        let mut z: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
            z[i] = (z[i] - s) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k * n + i] * z[k]).sum();
            z[i] = (z[i] - s) / l[i * n + i];
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.n;
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// `v' A^{-1} v`.
    pub fn quadratic_form_inverse(&self, v: &[f64]) -> f64 {
        dot(v, &self.solve(v))
    }
}
