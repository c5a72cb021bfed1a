//! Dense row-major matrices and the small-scale linear algebra the engine
//! needs: matrix products, Cholesky factorization, SPD solves, and a cyclic
//! Jacobi eigensolver for symmetric matrices.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Build from a row-major buffer; `data.len()` must equal `rows*cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length {} != {rows}x{cols}", data.len());
        Mat { rows, cols, data }
    }

    /// Build from row slices; all rows must share a length.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    /// Single-row matrix from a slice.
    pub fn row_vector(values: &[T]) -> Self {
        Mat { rows: 1, cols: values.len(), data: values.to_vec() }
    }

    /// Single-column matrix from a slice.
    pub fn col_vector(values: &[T]) -> Self {
        Mat { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major backing buffer.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// New matrix whose rows are `self`'s rows at `indices`, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Mat { rows: indices.len(), cols: self.cols, data }
    }

    /// Stack `self` on top of `other` (same width).
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "vstack width mismatch");
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Mat { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Place `other` to the right of `self` (same height).
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "hstack height mismatch");
        let mut out = Self::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// Matrix product; inner dimensions must agree.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        // i-k-j order keeps the inner loop contiguous in both operands.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let rhs_row = rhs.row(k);
                let out_row = out.row_mut(i);
                for j in 0..rhs.cols {
                    out_row[j] = out_row[j] + a * rhs_row[j];
                }
            }
        }
        out
    }

    /// Elementwise map.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Elementwise combination of two same-shape matrices.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| v * c)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Column means as a length-`cols` vector; zero rows give zeros.
    pub fn col_means(&self) -> Vec<T> {
        let mut means = vec![T::zero(); self.cols];
        if self.rows == 0 {
            return means;
        }
        for i in 0..self.rows {
            for (m, &v) in means.iter_mut().zip(self.row(i)) {
                *m = *m + v;
            }
        }
        let inv = T::one() / T::of(self.rows as f64);
        for m in &mut means {
            *m = *m * inv;
        }
        means
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> std::fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        if self.rows > 8 {
            writeln!(f, "  ... ({} more rows)", self.rows - 8)?;
        }
        write!(f, "]")
    }
}

/// Euclidean distance between two equal-length slices.
pub fn euclidean<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// Sample covariance with the 1/(rows-1) convention; rows must be ≥ 2.
pub fn sample_covariance<T: Real>(x: &Mat<T>) -> Mat<T> {
    let n = x.rows();
    let d = x.cols();
    assert!(n >= 2, "covariance needs at least 2 rows");
    let means = x.col_means();
    let mut cov = Mat::zeros(d, d);
    for r in 0..n {
        let row = x.row(r);
        for i in 0..d {
            let ci = row[i] - means[i];
            for j in i..d {
                cov[(i, j)] = cov[(i, j)] + ci * (row[j] - means[j]);
            }
        }
    }
    let inv = T::one() / T::of((n - 1) as f64);
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] * inv;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// Cholesky factor L (lower triangular, `A = L·Lᵀ`) of a symmetric
/// positive-definite matrix.
pub fn cholesky<T: Real>(a: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape { op: "cholesky", detail: format!("{}x{} not square", n, a.cols()) });
    }
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= T::zero() {
                    return Err(Error::Domain {
                        op: "cholesky",
                        detail: format!("matrix not positive definite (pivot {k} = {s})", k = i),
                    });
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `A·x = b` for SPD `A` via Cholesky; `b` is a length-n vector.
pub fn solve_spd<T: Real>(a: &Mat<T>, b: &[T]) -> Result<Vec<T>> {
    let l = cholesky(a)?;
    let n = b.len();
    // forward substitution L y = b
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    // back substitution Lᵀ x = y
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix.
///
/// `values[k]` pairs with the unit row `vectors.row(k)`; sorted by nonincreasing
/// eigenvalue, ties keeping the solver's output order.
pub struct SymEigen<T> {
    pub values: Vec<T>,
    /// One eigenvector per row.
    pub vectors: Mat<T>,
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps rotations until the off-diagonal Frobenius norm drops below
/// `1e-12 · max(1, ‖A‖_F)` (an absolute floor that loosens for large-norm
/// matrices, which cannot reach a fixed absolute threshold in finite
/// precision).
pub fn sym_eigen<T: Real>(a: &Mat<T>) -> Result<SymEigen<T>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape { op: "sym_eigen", detail: format!("{}x{} not square", n, a.cols()) });
    }
    let mut m = a.clone();
    let mut v: Mat<T> = Mat::identity(n);
    let tol = T::of(1e-12) * T::one().max(a.frobenius());
    // For f32 instantiations the requested tolerance is below machine
    // precision; stop at the achievable floor instead.
    let tol = tol.max(T::epsilon() * T::of(4.0) * T::one().max(a.frobenius()));
    let max_sweeps = 64;

    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + m[(p, q)] * m[(p, q)];
            }
        }
        if (off + off).sqrt() <= tol {
            let mut values: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).expect("finite eigenvalues"));
            values = order.iter().map(|&i| values[i]).collect();
            // v accumulated rotations column-wise; transpose to rows and reorder.
            let vt = v.transpose();
            let vectors = vt.select_rows(&order);
            return Ok(SymEigen { values, vectors });
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                // Smaller-angle root keeps rotations stable.
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Domain { op: "sym_eigen", detail: "Jacobi sweeps did not converge".into() })
}

/// Condition number (ratio of extreme eigenvalue magnitudes) of a symmetric
/// matrix; infinite when the smallest magnitude vanishes.
pub fn sym_condition_number<T: Real>(a: &Mat<T>) -> Result<T> {
    let eig = sym_eigen(a)?;
    let mut max = T::zero();
    let mut min = T::infinity();
    for &l in &eig.values {
        max = max.max(l.abs());
        min = min.min(l.abs());
    }
    if min == T::zero() {
        return Ok(T::infinity());
    }
    Ok(max / min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matmul_small() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Mat::from_rows(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let c = a.matmul(&b);
        assert_eq!(c.row(0), &[19.0, 22.0]);
        assert_eq!(c.row(1), &[43.0, 50.0]);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = Mat::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Mat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let back = l.matmul(&l.transpose());
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(back[(i, j)], a[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn solve_spd_matches_direct() {
        let a = Mat::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]);
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> =
            (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x_true[j]).sum()).collect();
        let x = solve_spd(&a, &b).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn jacobi_diagonalizes_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1 with vectors (1,1)/√2, (1,-1)/√2.
        let a: Mat<f64> = Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let eig = sym_eigen(&a).unwrap();
        assert_relative_eq!(eig.values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(eig.values[1], 1.0, epsilon = 1e-12);
        let v0 = eig.vectors.row(0);
        assert_relative_eq!(v0[0].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-10);
        assert_relative_eq!(v0[0], v0[1], epsilon = 1e-10);
    }

    #[test]
    fn jacobi_reconstructs_random_symmetric() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 6;
        let mut a = Mat::zeros(n, n);
        let mut s = 1u64;
        for i in 0..n {
            for j in i..n {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = ((s >> 11) as f64) / (1u64 << 53) as f64 - 0.5;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = sym_eigen(&a).unwrap();
        // A ≈ Vᵀ diag(λ) V with eigenvectors as rows of V.
        let v = &eig.vectors;
        let mut back = Mat::zeros(n, n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    back[(i, j)] += eig.values[k] * v[(k, i)] * v[(k, j)];
                }
            }
        }
        assert!(back.sub(&a).frobenius() < 1e-10);
        // Orthonormal rows.
        let vvt = v.matmul(&v.transpose());
        assert!(vvt.sub(&Mat::identity(n)).frobenius() < 1e-10);
        // Sorted nonincreasing.
        for w in eig.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn jacobi_f32_instantiation() {
        let a: Mat<f32> = Mat::from_rows(&[&[2.0f32, 1.0], &[1.0, 2.0]]);
        let eig = sym_eigen(&a).unwrap();
        assert!((eig.values[0] - 3.0).abs() < 1e-5);
        assert!((eig.values[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn condition_number_of_identity() {
        let cond: f64 = sym_condition_number(&Mat::identity(4)).unwrap();
        assert_relative_eq!(cond, 1.0, epsilon = 1e-12);
    }
}
