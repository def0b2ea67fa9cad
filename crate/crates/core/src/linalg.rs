//! Small dense linear algebra on row-major `f64` matrices.
//!
//! Everything here is desk scale (a few dozen rows). Eigenvalues are delegated
//! to `nalgebra`; elimination-based routines are local so their pivoting and
//! tolerance rules stay explicit.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;

const SCHUR_TOLERANCES: [f64; 4] = [f64::EPSILON, 1e-14, 1e-12, 1e-10];
const SCHUR_ITERATIONS_PER_ROW: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
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

    /// Builds a matrix from row slices. Panics if the rows are ragged.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_column_major(rows: usize, cols: usize, values: &[f64]) -> Self {
        assert_eq!(values.len(), rows * cols);
        let mut m = Self::zeros(rows, cols);
        for c in 0..cols {
            for r in 0..rows {
                m[(r, c)] = values[c * rows + r];
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.add(&rhs.scaled(-1.0))
    }

    /// Copies `block` into `self` with its top-left corner at `(row, col)`.
    pub fn set_block(&mut self, row: usize, col: usize, block: &Matrix) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(row + r, col + c)] = block[(r, c)];
            }
        }
    }

    /// `I_copies ⊗ self`: `copies` copies of `self` along the diagonal.
    pub fn repeat_diagonal(&self, copies: usize) -> Matrix {
        let mut out = Matrix::zeros(self.rows * copies, self.cols * copies);
        for k in 0..copies {
            out.set_block(k * self.rows, k * self.cols, self);
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..r).all(|c| self[(r, c)] == self[(c, r)]))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Real parts of all eigenvalues (general, possibly nonsymmetric matrix).
    ///
    /// The real Schur iteration can stall at machine-precision deflation on
    /// matrices with many repeated eigenvalues, so the deflation tolerance is
    /// relaxed step by step. `None` if no rung converges.
    pub fn eigenvalue_real_parts(&self) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "eigenvalues need a square matrix");
        if self.rows == 0 {
            return Some(Vec::new());
        }
        let max_iter = SCHUR_ITERATIONS_PER_ROW * self.rows;
        SCHUR_TOLERANCES.iter().find_map(|&eps| {
            Schur::try_new(self.to_nalgebra(), eps, max_iter)
                .map(|s| s.complex_eigenvalues().iter().map(|z| z.re).collect())
        })
    }

    /// Largest eigenvalue real part; `-inf` for an empty matrix.
    pub fn spectral_abscissa(&self) -> Option<f64> {
        self.eigenvalue_real_parts()
            .map(|re| re.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Ascending eigenvalues of a symmetric matrix.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        if self.rows == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = self
            .to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `rel_tol * ‖a‖∞`.
pub fn solve_partial_pivot(a: &Matrix, b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(a.cols(), n, "square system expected");
    assert_eq!(b.len(), n);
    let threshold = rel_tol * a.norm_inf();
    let mut m = a.clone();
    let mut rhs = b.to_vec();

    for k in 0..n {
        let (pivot_row, pivot_abs) = (k..n)
            .map(|r| (r, m[(r, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_abs > threshold) {
            return None;
        }
        if pivot_row != k {
            for c in 0..n {
                m.data.swap(k * n + c, pivot_row * n + c);
            }
            rhs.swap(k, pivot_row);
        }
        let pivot = m[(k, k)];
        for r in (k + 1)..n {
            let factor = m[(r, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in k..n {
                m[(r, c)] -= factor * m[(k, c)];
            }
            rhs[r] -= factor * rhs[k];
        }
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let tail: f64 = ((k + 1)..n).map(|c| m[(k, c)] * x[c]).sum();
        x[k] = (rhs[k] - tail) / m[(k, k)];
    }
    Some(x)
}

/// Numerical rank by elimination with complete pivoting.
///
/// A pivot counts when its magnitude exceeds `rel_tol` times the largest
/// column 2-norm of the input.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> usize {
    let (rows, cols) = (a.rows(), a.cols());
    let largest_col = (0..cols)
        .map(|c| libm::sqrt((0..rows).map(|r| a[(r, c)] * a[(r, c)]).sum::<f64>()))
        .fold(0.0, f64::max);
    if largest_col == 0.0 {
        return 0;
    }
    let threshold = rel_tol * largest_col;
    let mut m = a.clone();
    let mut rank = 0;
    let steps = rows.min(cols);
    for k in 0..steps {
        let mut best = (k, k, -1.0);
        for r in k..rows {
            for c in k..cols {
                let v = m[(r, c)].abs();
                if v > best.2 {
                    best = (r, c, v);
                }
            }
        }
        if !(best.2 > threshold) {
            break;
        }
        let (pr, pc, _) = best;
        if pr != k {
            for c in 0..cols {
                m.data.swap(k * cols + c, pr * cols + c);
            }
        }
        if pc != k {
            for r in 0..rows {
                m.data.swap(r * cols + k, r * cols + pc);
            }
        }
        let pivot = m[(k, k)];
        for r in (k + 1)..rows {
            let factor = m[(r, k)] / pivot;
            for c in k..cols {
                m[(r, c)] -= factor * m[(k, c)];
            }
        }
        rank += 1;
    }
    rank
}

pub(crate) fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = Matrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = solve_partial_pivot(&a, &[4.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve_partial_pivot(&a, &[1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn rank_of_duplicate_columns() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]]);
        assert_eq!(numerical_rank(&a, 1e-10), 2);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 2), 1e-10), 0);
    }

    #[test]
    fn kron_identity_layout() {
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let k = b.repeat_diagonal(2);
        assert_eq!(k.rows(), 4);
        assert_eq!(k[(2, 3)], 2.0);
        assert_eq!(k[(0, 2)], 0.0);
    }

    #[test]
    fn repeated_spectrum_converges() {
        // stalls the plain iteration at machine-precision deflation
        let g = crate::graph::eight_generator_topology();
        let a = crate::dynamics::boundary_layer_matrix(&g, 3).unwrap();
        let s = a.spectral_abscissa().unwrap();
        let single = crate::dynamics::boundary_layer_matrix(&g, 1).unwrap().spectral_abscissa().unwrap();
        assert!((s - single).abs() < 1e-10, "{s} vs {single}");
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let a = Matrix::from_rows(&[vec![-1.0, 2.0], vec![-2.0, -1.0]]);
        let re = a.eigenvalue_real_parts().unwrap();
        assert!(re.iter().all(|r| (r + 1.0).abs() < 1e-12));
    }
}
