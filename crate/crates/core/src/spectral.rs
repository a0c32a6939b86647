//! Implicit eigendecomposition of `(1/gamma) I + J K^{-1} J^T`.
//!
//! With the thin QR `J = Q R` and the small eigendecomposition
//! `R K^{-1} R^T = P̂ Λ̂ P̂^T`, the matrix has eigenpairs
//! `(λ̂_i + 1/gamma, Q p̂_i)` plus `1/gamma` repeated on the orthogonal
//! complement of `range(Q)`. The complement basis is never formed.

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, householder_qr, norm2, sym_eig_small, DenseMatrix};

/// Rows of `R` below this fraction of the largest row norm are dropped.
pub const DEFLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitEigen {
    q: DenseMatrix,
    phat: DenseMatrix,
    hat_lambdas: Vec<f64>,
    gamma: f64,
}

impl ImplicitEigen {
    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    /// Number of explicitly represented eigenpairs.
    pub fn rank(&self) -> usize {
        self.hat_lambdas.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// The repeated eigenvalue `1/gamma`.
    pub fn base(&self) -> f64 {
        1.0 / self.gamma
    }

    pub fn q(&self) -> &DenseMatrix {
        &self.q
    }

    pub fn phat(&self) -> &DenseMatrix {
        &self.phat
    }

    /// Ascending `λ̂_i`.
    pub fn hat_lambdas(&self) -> &[f64] {
        &self.hat_lambdas
    }

    /// Explicit eigenvalues `λ̂_i + 1/gamma`, ascending.
    pub fn lambdas(&self) -> Vec<f64> {
        let b = self.base();
        self.hat_lambdas.iter().map(|l| l + b).collect()
    }

    /// Full sorted spectrum of length `d`.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut all = self.lambdas();
        all.extend(std::iter::repeat_n(self.base(), self.dim() - self.rank()));
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn lambda_min(&self) -> f64 {
        let explicit = self.lambdas().into_iter().fold(f64::INFINITY, f64::min);
        if self.rank() < self.dim() {
            explicit.min(self.base())
        } else {
            explicit
        }
    }

    /// `P1 = Q P̂`, the explicit eigenvectors.
    pub fn p1(&self) -> DenseMatrix {
        self.q.matmul(&self.phat).expect("Q and P̂ are conformant")
    }

    /// `P1^T x`
    pub fn project_p1(&self, x: &[f64]) -> Vec<f64> {
        let qx = self.q.t_matvec(x).expect("length checked by caller");
        self.phat.t_matvec(&qx).expect("conformant")
    }

    /// `P1 c`
    pub fn expand_p1(&self, c: &[f64]) -> Vec<f64> {
        let pc = self.phat.matvec(c).expect("conformant");
        self.q.matvec(&pc).expect("conformant")
    }

    /// `x - Q Q^T x`
    pub fn complement(&self, x: &[f64]) -> Vec<f64> {
        let qx = self.q.t_matvec(x).expect("length checked by caller");
        let back = self.q.matvec(&qx).expect("conformant");
        x.iter().zip(&back).map(|(a, b)| a - b).collect()
    }

    /// `(1/gamma)(I - Q Q^T) x`, the scaled projector onto the implicit eigenspace.
    pub fn apply_complement_projection(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x)?;
        let b = self.base();
        Ok(self.complement(x).into_iter().map(|v| b * v).collect())
    }

    /// `P diag(f(lambda)) P^T x` for a spectral function `f`.
    pub fn apply_function(&self, x: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        check_len(self.dim(), x)?;
        let coeffs: Vec<f64> = self.project_p1(x).iter().zip(self.lambdas()).map(|(c, l)| c * f(l)).collect();
        let mut out = self.expand_p1(&coeffs);
        let fb = f(self.base());
        for (o, c) in out.iter_mut().zip(self.complement(x)) {
            *o += fb * c;
        }
        Ok(out)
    }

    /// Smallest shift making the matrix positive definite with margin `eps_pd`.
    pub fn min_shift(&self, eps_pd: f64) -> f64 {
        let lmin = self.lambda_min();
        (-lmin + eps_pd * lmin.abs().max(1.0)).max(0.0)
    }
}

/// Standalone form of [`ImplicitEigen::min_shift`] over an explicit minimum eigenvalue.
pub fn min_shift_for(lambda_min: f64, eps_pd: f64) -> f64 {
    (-lambda_min + eps_pd * lambda_min.abs().max(1.0)).max(0.0)
}

/// Computes the implicit eigendecomposition of `(1/gamma) I + J K^{-1} J^T`,
/// where `k_solve` applies `K^{-1}` to vectors of length `J.cols()`.
pub fn implicit_eig<F>(j: &DenseMatrix, k_solve: F, gamma: f64) -> Result<ImplicitEigen>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("gamma must be positive, got {gamma}")));
    }
    let d = j.rows();
    let width = j.cols();
    if width == 0 {
        return Ok(ImplicitEigen {
            q: DenseMatrix::zeros(d, 0),
            phat: DenseMatrix::zeros(0, 0),
            hat_lambdas: Vec::new(),
            gamma,
        });
    }
    let (q, r) = householder_qr(j);
    let k = r.rows();

    let rows: Vec<Vec<f64>> = (0..k).map(|i| (0..width).map(|c| r[(i, c)]).collect()).collect();
    let norms: Vec<f64> = rows.iter().map(|row| norm2(row)).collect();
    let max_norm = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..k).filter(|&i| max_norm > 0.0 && norms[i] > DEFLATION_TOL * max_norm).collect();

    // columns of K^{-1} R^T restricted to the kept rows
    let solved: Vec<Vec<f64>> = keep.iter().map(|&i| k_solve(&rows[i])).collect::<Result<_>>()?;
    let r_dim = keep.len();
    let small = DenseMatrix::from_fn(r_dim, r_dim, |a, b| {
        let lhs = dot(&rows[keep[a]], &solved[b]);
        let rhs = dot(&rows[keep[b]], &solved[a]);
        0.5 * (lhs + rhs)
    });
    let (phat, hat_lambdas) = sym_eig_small(&small)?;
    let q_kept = DenseMatrix::from_fn(d, r_dim, |row, c| q[(row, keep[c])]);
    Ok(ImplicitEigen { q: q_kept, phat, hat_lambdas, gamma })
}
