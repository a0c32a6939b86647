//! Small dense kernels: column-major matrices, packed upper-triangular
//! solves, Householder thin QR and a cyclic Jacobi eigensolver.
//!
//! Everything here is sized for the tall-skinny `d x 2l` and tiny `2l x 2l`
//! shapes that the compact representations produce.

use crate::error::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

pub(crate) fn check_len(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// Dense matrix in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = scale;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices; handy for hand-written test fixtures.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            check_len(rows, c)?;
            data.extend_from_slice(c);
        }
        Ok(Self { rows, cols: columns.len(), data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x)?;
        let mut out = vec![0.0; self.rows];
        for (j, xj) in x.iter().enumerate() {
            axpy(*xj, self.col(j), &mut out);
        }
        Ok(out)
    }

    /// `self^T x`
    pub fn t_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, x)?;
        Ok((0..self.cols).map(|j| dot(self.col(j), x)).collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let b = other[(k, j)];
                if b != 0.0 {
                    axpy(b, self.col(k), out.col_mut(j));
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Frobenius norm of `self - self^T`; requires a square matrix.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols, "asymmetry of a non-square matrix");
        let mut acc = 0.0;
        for j in 0..self.cols {
            for i in 0..self.rows {
                let d = self[(i, j)] - self[(j, i)];
                acc += d * d;
            }
        }
        acc.sqrt()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Upper triangle (diagonal included) packed into an [`UpperTriangular`].
    pub fn upper(&self) -> UpperTriangular {
        let n = self.rows.min(self.cols);
        UpperTriangular::from_fn(n, |i, j| self[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

/// Upper-triangular matrix packed column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperTriangular {
    order: usize,
    data: Vec<f64>,
}

impl UpperTriangular {
    #[inline]
    fn offset(i: usize, j: usize) -> usize {
        j * (j + 1) / 2 + i
    }

    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![0.0; order * (order + 1) / 2] }
    }

    pub fn identity(order: usize) -> Self {
        Self::from_fn(order, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// Fills entries `i <= j` from `f(i, j)`.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(order * (order + 1) / 2);
        for j in 0..order {
            for i in 0..=j {
                data.push(f(i, j));
            }
        }
        Self { order, data }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i > j {
            0.0
        } else {
            self.data[Self::offset(i, j)]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i <= j, "write below the diagonal of an upper-triangular matrix");
        self.data[Self::offset(i, j)] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.order, x)?;
        Ok((0..self.order)
            .map(|i| (i..self.order).map(|j| self.get(i, j) * x[j]).sum())
            .collect())
    }

    /// Solves `R x = b` (or `R^T x = b` when `transposed`).
    pub fn solve(&self, b: &[f64], transposed: bool) -> Result<Vec<f64>> {
        tri_solve(self, b, transposed)
    }
}

/// Solves `R x = b` by back substitution (last row first), or `R^T x = b`
/// by forward substitution (first row first) when `transposed` is set.
pub fn tri_solve(r: &UpperTriangular, b: &[f64], transposed: bool) -> Result<Vec<f64>> {
    let n = r.order();
    check_len(n, b)?;
    if let Some(index) = (0..n).find(|&i| r.get(i, i) == 0.0) {
        return Err(Error::SingularTriangular { index });
    }
    let mut x = b.to_vec();
    if transposed {
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= r.get(k, i) * x[k];
            }
            x[i] = acc / r.get(i, i);
        }
    } else {
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= r.get(i, k) * x[k];
            }
            x[i] = acc / r.get(i, i);
        }
    }
    Ok(x)
}

/// Householder QR returning `Q` (`rows x k`) and `R` (`k x cols`, upper
/// trapezoidal) with `k = min(rows, cols)` and a nonnegative diagonal.
pub(crate) fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    let mut work = a.clone();
    let mut reflectors: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);

    for j in 0..k {
        let x = &work.col(j)[j..];
        let norm = norm2(x);
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        for vi in v.iter_mut() {
            *vi /= vnorm;
        }
        for c in j..n {
            let col = &mut work.col_mut(c)[j..];
            let t = 2.0 * dot(&v, col);
            axpy(-t, &v, col);
        }
        reflectors.push(Some(v));
    }

    let mut r = DenseMatrix::from_fn(k, n, |i, c| if i <= c { work[(i, c)] } else { 0.0 });

    // Q = H_0 H_1 ... H_{k-1} applied to the leading k columns of I.
    let mut q = DenseMatrix::from_fn(m, k, |i, c| if i == c { 1.0 } else { 0.0 });
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some(v) = refl {
            for c in 0..k {
                let col = &mut q.col_mut(c)[j..];
                let t = 2.0 * dot(v, col);
                axpy(-t, v, col);
            }
        }
    }

    for i in 0..k {
        if r[(i, i)] < 0.0 {
            for c in i..n {
                r[(i, c)] = -r[(i, c)];
            }
            for x in q.col_mut(i) {
                *x = -*x;
            }
        }
    }
    (q, r)
}

/// Thin QR of a tall matrix: `A = Q R` with `Q^T Q = I` and `diag(R) >= 0`.
pub fn thin_qr(a: &DenseMatrix) -> Result<(DenseMatrix, UpperTriangular)> {
    if a.rows() < a.cols() {
        return Err(Error::ShapeMismatch(format!(
            "thin QR needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let (q, r) = householder_qr(a);
    Ok((q, r.upper()))
}

const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

fn off_diagonal_norm(m: &DenseMatrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Eigendecomposition `M = P diag(lambdas) P^T` of a small symmetric matrix
/// by cyclic Jacobi sweeps. Eigenvalues are ascending; each eigenvector has
/// its first significant component positive.
pub fn sym_eig_small(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    let scale = m.frobenius_norm();
    let asym = m.asymmetry();
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    if !all_finite(m.data()) {
        return Err(Error::NonFiniteInput);
    }

    let mut a = m.clone();
    let mut p = DenseMatrix::identity(n);
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_TOL * scale {
            break;
        }
        for q in 1..n {
            for pi in 0..q {
                let apq = a[(pi, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(pi, pi)];
                let aqq = a[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // A <- J^T A J with J the rotation in the (pi, q) plane.
                for k in 0..n {
                    let akp = a[(k, pi)];
                    let akq = a[(k, q)];
                    a[(k, pi)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(pi, k)];
                    let aqk = a[(q, k)];
                    a[(pi, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(pi, q)] = 0.0;
                a[(q, pi)] = 0.0;
                for k in 0..n {
                    let vkp = p[(k, pi)];
                    let vkq = p[(k, q)];
                    p[(k, pi)] = c * vkp - s * vkq;
                    p[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let lambdas: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vecs = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = p.col(src);
        let cutoff = 1e-12 * norm_inf(col);
        let sign = match col.iter().find(|x| x.abs() > cutoff) {
            Some(x) if *x < 0.0 => -1.0,
            _ => 1.0,
        };
        for (o, x) in vecs.col_mut(dst).iter_mut().zip(col) {
            *o = sign * x;
        }
    }
    Ok((vecs, lambdas))
}

/// Ascending eigenvalues of a dense symmetric matrix of any size.
///
/// This is the reference "dense eig" leg for benchmarks and oracles and is
/// deliberately independent of [`sym_eig_small`].
pub fn dense_sym_eigenvalues(m: &DenseMatrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!("{}x{} is not square", m.rows(), m.cols())));
    }
    let n = m.rows();
    let a = nalgebra::DMatrix::from_column_slice(n, n, m.data());
    let eig = nalgebra::SymmetricEigen::new(a);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
