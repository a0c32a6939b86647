//! Compact representation of the general direct rank-2 recursion.
//!
//! This is the inverse representation with the roles of `H` and `B`, `s`
//! and `y`, and `v` and `c` interchanged:
//!
//! ```text
//! B = (1/gamma) I + [C, Y - S/gamma] M_B^{-1} [C, Y - S/gamma]^T
//! M_B = [ 0       R_cs ]
//!       [ R_cs^T  W_B  ],   W_B = T + T^T - (D + S^T S / gamma)
//! ```
//!
//! where `R_cs = triu(C^T S)` and `T = triu(Y^T S)`; `T` carries the
//! entries `y_i^T s_j` for `i <= j`, the mirror of `triu(S^T Y)`.

use crate::error::{Error, Result};
use crate::history::{LmHistory, Mode, PairPolicy};
use crate::inverse::{MiddleFactors, CONDITION_FLOOR, MATERIALIZE_MAX_DIM};
use crate::linalg::{all_finite, check_len, dot, DenseMatrix};
use crate::spectral::{implicit_eig, ImplicitEigen};

/// Builds `R_cs` and `W_B` from the direct-mode caches.
pub fn build_middle_direct(h: &LmHistory) -> Result<MiddleFactors> {
    if h.mode() != Mode::Direct {
        return Err(Error::IncompatibleForm { form: "direct", reason: "an inverse-mode history" });
    }
    let m = h.len();
    if m == 0 {
        return Err(Error::EmptyHistory);
    }
    let sy = h.sy();
    let ss = h.gram();
    let inv_gamma = 1.0 / h.gamma();
    let w = DenseMatrix::from_fn(m, m, |i, j| {
        // (Y^T S)_{ij} = (S^T Y)_{ji}; symmetric extension of its upper triangle
        let mirror = if i <= j { sy[(j, i)] } else { sy[(i, j)] };
        mirror - inv_gamma * ss[(i, j)]
    });
    Ok(MiddleFactors { r: h.param_cross().upper(), w })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectForm {
    General,
    /// Powell-symmetric-Broyden; requires `C = S`.
    Psb,
}

/// Solution of `(B + sigma I) s = -h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedSolveResult {
    pub s: Vec<f64>,
    pub sigma: f64,
    /// Smallest eigenvalue of `B` before the shift.
    pub lambda_min: f64,
}

/// Read-only view exposing products with the direct estimate `B_k`.
#[derive(Debug, Clone)]
pub struct CompactDirect<'a> {
    history: &'a LmHistory,
    form: DirectForm,
    gamma: f64,
    middle: Option<MiddleFactors>,
}

impl<'a> CompactDirect<'a> {
    pub fn new(history: &'a LmHistory, form: DirectForm) -> Result<Self> {
        if history.mode() != Mode::Direct {
            return Err(Error::IncompatibleForm { form: "direct", reason: "an inverse-mode history" });
        }
        if form == DirectForm::Psb && history.policy() != PairPolicy::EqualsS {
            return Err(Error::IncompatibleForm { form: "psb", reason: "a policy other than C = S" });
        }
        let middle = if history.is_empty() {
            None
        } else {
            let mf = build_middle_direct(history)?;
            let diag = mf.r.diagonal();
            let max = diag.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            if let Some(index) = diag.iter().position(|x| x.abs() < CONDITION_FLOOR * max || *x == 0.0) {
                return Err(Error::SingularTriangular { index });
            }
            Some(mf)
        };
        Ok(Self { history, form, gamma: history.gamma(), middle })
    }

    pub fn form(&self) -> DirectForm {
        self.form
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn middle(&self) -> Option<&MiddleFactors> {
        self.middle.as_ref()
    }

    /// `B_k x`
    pub fn bv_product(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.history;
        check_len(h.dim(), x)?;
        if !all_finite(x) {
            return Err(Error::NonFiniteInput);
        }
        let inv_g = 1.0 / self.gamma;
        let mut out: Vec<f64> = x.iter().map(|v| inv_g * v).collect();
        let Some(mf) = self.middle.as_ref() else {
            return Ok(out);
        };
        let m = h.len();
        let cx = h.params().t_mul(x)?;
        let yx = h.y().t_mul(x)?;
        let sx = h.s().t_mul(x)?;
        let mut u = cx;
        u.extend(yx.iter().zip(&sx).map(|(a, b)| a - inv_g * b));
        let w = mf.solve(&u)?;
        let (w1, w2) = w.split_at(m);
        h.params().mul_add(1.0, w1, &mut out)?;
        h.y().mul_add(1.0, w2, &mut out)?;
        h.s().mul_add(-inv_g, w2, &mut out)?;
        Ok(out)
    }

    /// Explicit `d x d` matrix from `d` unit-vector products.
    pub fn materialize_b(&self) -> Result<DenseMatrix> {
        let d = self.history.dim();
        if d > MATERIALIZE_MAX_DIM {
            return Err(Error::DimensionTooLarge(d));
        }
        let mut out = DenseMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.bv_product(&e)?;
            out.col_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// `J = [C, Y - S/gamma]`
    fn tall_factor(&self) -> Result<DenseMatrix> {
        let h = self.history;
        let m = h.len();
        let inv_g = 1.0 / self.gamma;
        let mut cols = Vec::with_capacity(2 * m);
        for i in 0..m {
            cols.push(h.params().col(i).to_vec());
        }
        for i in 0..m {
            cols.push(h.y().col(i).iter().zip(h.s().col(i)).map(|(y, s)| y - inv_g * s).collect());
        }
        DenseMatrix::from_columns(h.dim(), &cols)
    }

    /// Implicit eigendecomposition `B = P diag(lambda) P^T`.
    pub fn implicit_eig(&self) -> Result<ImplicitEigen> {
        match self.middle.as_ref() {
            None => implicit_eig(
                &DenseMatrix::zeros(self.history.dim(), 0),
                |v: &[f64]| Ok(v.to_vec()),
                self.gamma,
            ),
            Some(mf) => implicit_eig(&self.tall_factor()?, |v: &[f64]| mf.solve(v), self.gamma),
        }
    }

    /// Solves `(B + sigma I) s = -h` through a fresh implicit eigendecomposition.
    pub fn shifted_solve(&self, h: &[f64], sigma: f64) -> Result<ShiftedSolveResult> {
        let eig = self.implicit_eig()?;
        shifted_solve_with(&eig, h, sigma)
    }
}

/// `s = -P1 (Lambda1 + sigma)^{-1} P1^T h - (1/gamma + sigma)^{-1} (h - Q Q^T h)`
pub fn shifted_solve_with(eig: &ImplicitEigen, h: &[f64], sigma: f64) -> Result<ShiftedSolveResult> {
    check_len(eig.dim(), h)?;
    if !(sigma >= 0.0) {
        return Err(Error::InvalidConfig(format!("shift must be nonnegative, got {sigma}")));
    }
    let lambda_min = eig.lambda_min();
    if lambda_min + sigma <= 0.0 {
        return Err(Error::IndefiniteShift { value: lambda_min + sigma });
    }
    let base = eig.base() + sigma;
    let coeffs = eig.project_p1(h);
    let scaled: Vec<f64> = coeffs
        .iter()
        .zip(eig.lambdas())
        .map(|(c, l)| -c / (l + sigma))
        .collect();
    let mut s = eig.expand_p1(&scaled);
    let comp = eig.complement(h);
    for (si, ci) in s.iter_mut().zip(&comp) {
        *si -= ci / base;
    }
    Ok(ShiftedSolveResult { s, sigma, lambda_min })
}

/// `s^T B s` using one product; the trust-region model curvature term.
pub fn quadratic_form(cd: &CompactDirect<'_>, s: &[f64]) -> Result<f64> {
    Ok(dot(s, &cd.bv_product(s)?))
}
