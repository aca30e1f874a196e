//! Dense symmetric linear algebra on row-major `n × n` buffers.

use nalgebra::DMatrix;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Failure of an unpivoted Cholesky factorization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct PivotFailure {
    pub row: usize,
    pub pivot: f64,
}

/// Lower Cholesky factor `L` with `A = L Lᵀ`, stored in the lower triangle
/// of a row-major buffer. The strict upper triangle is left as it was.
#[derive(Clone, Debug)]
pub(crate) struct Cholesky {
    n: usize,
    factor: Vec<f64>,
    min_pivot: f64,
}

impl Cholesky {
    /// Factors `a` in place. Only the lower triangle of `a` is read.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self, PivotFailure> {
        assert_eq!(a.len(), n * n);
        let mut min_pivot = f64::INFINITY;
        for i in 0..n {
            let (done, rest) = a.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &done[j * n..j * n + j + 1];
                let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let s = row_i[i] - dot(&row_i[..i], &row_i[..i]);
            min_pivot = min_pivot.min(s);
            if !(s > 0.0) || !s.is_finite() {
                return Err(PivotFailure { row: i, pivot: s });
            }
            row_i[i] = s.sqrt();
        }
        Ok(Cholesky { n, factor: a, min_pivot })
    }

    /// Smallest pivot `s_ii` seen before taking square roots.
    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let l = &self.factor;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / l[i * n + i];
        }
        // Lᵀ x = y, sweeping rows of L from the bottom
        for i in (0..n).rev() {
            let xi = y[i] / l[i * n + i];
            y[i] = xi;
            let row = &l[i * n..i * n + i];
            for (yj, &lij) in y[..i].iter_mut().zip(row) {
                *yj -= lij * xi;
            }
        }
        y
    }
}

pub(crate) fn to_nalgebra(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Partial-pivoting LU solve, used only as a fallback when Cholesky fails.
pub(crate) fn lu_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let lu = to_nalgebra(a, n).lu();
    lu.solve(&nalgebra::DVector::from_column_slice(b)).map(|x| x.as_slice().to_vec())
}

/// Eigenvalues of a symmetric matrix, ascending.
pub(crate) fn symmetric_eigenvalues(a: &[f64], n: usize) -> Option<Vec<f64>> {
    if n == 0 {
        return Some(Vec::new());
    }
    let m = to_nalgebra(a, n);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(m, f64::EPSILON, 10_000)?;
    let mut v = eig.eigenvalues.as_slice().to_vec();
    v.sort_by(|x, y| x.total_cmp(y));
    Some(v)
}

/// `y = A x` for a row-major square matrix.
pub(crate) fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}
