//! Compact representation of the general inverse rank-2 recursion
//!
//! ```text
//! H = gamma I + [V, S - gamma Y] M^{-1} [V, S - gamma Y]^T
//! M = [ 0      R_vy ]
//!     [ R_vy^T W    ],   W = R + R^T - (D + gamma Y^T Y)
//! ```
//!
//! with `R_vy = triu(V^T Y)`, `R = triu(S^T Y)` and `D = diag(S^T Y)`.
//! Besides this general form the view offers the split layout that keeps
//! `S` and `gamma Y` apart, the BFGS layout (`V = S`) and the Greenstadt
//! layout (`V = Y`). All four evaluate `H x` from the cached Gram products
//! and the `d x m` column stores only.

use std::sync::atomic::{AtomicU64, Ordering};

use log::warn;

use crate::error::{Error, Result};
use crate::history::{LmHistory, Mode, PairPolicy};
use crate::linalg::{all_finite, check_len, tri_solve, DenseMatrix, UpperTriangular};
use crate::spectral::{implicit_eig, ImplicitEigen};

/// Relative floor on the diagonal of the triangular block before a view
/// refuses to use its low-rank part.
pub const CONDITION_FLOOR: f64 = 1e-12;

/// Largest dimension for which a dense matrix is assembled.
pub const MATERIALIZE_MAX_DIM: usize = 2000;

/// Blocks of the symmetric middle matrix `[[0, R], [R^T, W]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MiddleFactors {
    pub r: UpperTriangular,
    pub w: DenseMatrix,
}

impl MiddleFactors {
    pub fn order(&self) -> usize {
        self.r.order()
    }

    /// Applies the inverse of `[[0, R], [R^T, W]]` to `(a; b)` with two
    /// triangular solves:
    /// `x2 = R^{-1} a`, `x1 = R^{-T} (b - W x2)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.order();
        check_len(2 * m, rhs)?;
        let (a, b) = rhs.split_at(m);
        let x2 = tri_solve(&self.r, a, false)?;
        let wx2 = self.w.matvec(&x2)?;
        let t: Vec<f64> = b.iter().zip(&wx2).map(|(bi, wi)| bi - wi).collect();
        let mut x = tri_solve(&self.r, &t, true)?;
        x.extend(x2);
        Ok(x)
    }

    /// The full `2m x 2m` matrix; used by tests and the residual checks.
    pub fn assemble(&self) -> DenseMatrix {
        let m = self.order();
        DenseMatrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => 0.0,
            (true, false) => self.r.get(i, j - m),
            (false, true) => self.r.get(j, i - m),
            (false, false) => self.w[(i - m, j - m)],
        })
    }

    fn is_well_conditioned(&self) -> bool {
        let diag = self.r.diagonal();
        let max = diag.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        max > 0.0 && diag.iter().all(|x| x.abs() >= CONDITION_FLOOR * max)
    }
}

/// Builds `R_vy = triu(V^T Y)` and `W = R + R^T - (D + gamma Y^T Y)` from the caches.
pub fn build_middle(h: &LmHistory) -> Result<MiddleFactors> {
    if h.mode() != Mode::Inverse {
        return Err(Error::IncompatibleForm { form: "inverse", reason: "a direct-mode history" });
    }
    let m = h.len();
    if m == 0 {
        return Err(Error::EmptyHistory);
    }
    let sy = h.sy();
    let yy = h.gram();
    let gamma = h.gamma();
    let w = DenseMatrix::from_fn(m, m, |i, j| {
        // R + R^T carries the diagonal twice, so one copy of D survives
        let sym = if i <= j { sy[(i, j)] } else { sy[(j, i)] };
        sym - gamma * yy[(i, j)]
    });
    Ok(MiddleFactors { r: h.param_cross().upper(), w })
}

/// Layout used to evaluate `H x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseForm {
    /// `[V, S - gamma Y] M^{-1} [...]^T`
    General,
    /// `[V, S | gamma Y]` with the three-block middle matrix.
    Alternative,
    /// Classical compact BFGS, valid when `V = S`.
    Bfgs,
    /// `[S, gamma Y] N^{-1} [...]^T`, valid when `V = Y`.
    Greenstadt,
}

impl InverseForm {
    fn name(self) -> &'static str {
        match self {
            InverseForm::General => "general",
            InverseForm::Alternative => "alternative",
            InverseForm::Bfgs => "bfgs",
            InverseForm::Greenstadt => "greenstadt",
        }
    }
}

/// Read-only view exposing products with the inverse estimate `H_k`.
#[derive(Debug)]
pub struct CompactInverse<'a> {
    history: &'a LmHistory,
    form: InverseForm,
    gamma: f64,
    middle: Option<MiddleFactors>,
    degenerate: bool,
    flops: AtomicU64,
}

impl<'a> CompactInverse<'a> {
    pub fn new(history: &'a LmHistory, form: InverseForm) -> Result<Self> {
        if history.mode() != Mode::Inverse {
            return Err(Error::IncompatibleForm { form: form.name(), reason: "a direct-mode history" });
        }
        match (form, history.policy()) {
            (InverseForm::Bfgs, p) if p != PairPolicy::EqualsS => {
                return Err(Error::IncompatibleForm { form: "bfgs", reason: "a policy other than V = S" })
            }
            (InverseForm::Greenstadt, p) if p != PairPolicy::EqualsY => {
                return Err(Error::IncompatibleForm {
                    form: "greenstadt",
                    reason: "a policy other than V = Y",
                })
            }
            _ => {}
        }
        let (middle, degenerate) = if history.is_empty() {
            (None, false)
        } else {
            let mf = build_middle(history)?;
            let ok = mf.is_well_conditioned();
            if !ok {
                warn!("triangular block of the compact inverse is near-singular; falling back to gamma * I");
            }
            (Some(mf), !ok)
        };
        Ok(Self { history, form, gamma: history.gamma(), middle, degenerate, flops: AtomicU64::new(0) })
    }

    pub fn form(&self) -> InverseForm {
        self.form
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn history(&self) -> &LmHistory {
        self.history
    }

    pub fn middle(&self) -> Option<&MiddleFactors> {
        self.middle.as_ref()
    }

    /// Multiplications spent in products since construction.
    pub fn flop_count(&self) -> u64 {
        self.flops.load(Ordering::Relaxed)
    }

    fn count(&self, n: usize) {
        self.flops.fetch_add(n as u64, Ordering::Relaxed);
    }

    fn scaled_identity(&self, x: &[f64]) -> Vec<f64> {
        self.count(x.len());
        x.iter().map(|v| self.gamma * v).collect()
    }

    /// `H_k x` using the configured form.
    pub fn hv_product(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self.form {
            InverseForm::General => self.hv_product_general(x),
            InverseForm::Alternative => self.hv_product_alternative(x),
            InverseForm::Bfgs => self.hv_product_bfgs(x),
            InverseForm::Greenstadt => self.hv_product_greenstadt(x),
        }
    }

    fn prepare(&self, x: &[f64]) -> Result<Option<&MiddleFactors>> {
        check_len(self.history.dim(), x)?;
        if !all_finite(x) {
            return Err(Error::NonFiniteInput);
        }
        if self.degenerate {
            return Ok(None);
        }
        Ok(self.middle.as_ref())
    }

    pub fn hv_product_general(&self, x: &[f64]) -> Result<Vec<f64>> {
        let Some(mf) = self.prepare(x)? else {
            return Ok(self.scaled_identity(x));
        };
        let h = self.history;
        let (m, d) = (h.len(), h.dim());
        let g = self.gamma;
        let vx = h.params().t_mul(x)?;
        let sx = h.s().t_mul(x)?;
        let yx = h.y().t_mul(x)?;
        let mut u = vx;
        u.extend(sx.iter().zip(&yx).map(|(a, b)| a - g * b));
        let w = mf.solve(&u)?;
        let (w1, w2) = w.split_at(m);
        let mut out = self.scaled_identity(x);
        h.params().mul_add(1.0, w1, &mut out)?;
        h.s().mul_add(1.0, w2, &mut out)?;
        h.y().mul_add(-g, w2, &mut out)?;
        self.count(6 * m * d + 2 * m * m);
        Ok(out)
    }

    /// Split layout: `H = gamma I + [V, S | gamma Y] [[M^{-1}, -E], [-E^T, 0]] [...]^T`
    /// where `E = (R_vy^{-T}; 0)`.
    pub fn hv_product_alternative(&self, x: &[f64]) -> Result<Vec<f64>> {
        let Some(mf) = self.prepare(x)? else {
            return Ok(self.scaled_identity(x));
        };
        let h = self.history;
        let (m, d) = (h.len(), h.dim());
        let g = self.gamma;
        let a = h.params().t_mul(x)?;
        let b = h.s().t_mul(x)?;
        let c: Vec<f64> = h.y().t_mul(x)?.into_iter().map(|v| g * v).collect();
        let mut ab = a.clone();
        ab.extend_from_slice(&b);
        let t = mf.solve(&ab)?;
        let (t1, t2) = t.split_at(m);
        let rc = tri_solve(&mf.r, &c, true)?;
        let w1: Vec<f64> = t1.iter().zip(&rc).map(|(p, q)| p - q).collect();
        let w3: Vec<f64> = tri_solve(&mf.r, &a, false)?.into_iter().map(|v| -v).collect();
        let mut out = self.scaled_identity(x);
        h.params().mul_add(1.0, &w1, &mut out)?;
        h.s().mul_add(1.0, t2, &mut out)?;
        h.y().mul_add(g, &w3, &mut out)?;
        self.count(6 * m * d + 3 * m * m);
        Ok(out)
    }

    /// Classical compact BFGS:
    /// `H = gamma I + [S, gamma Y] [[R^{-T}(D + gamma Y^T Y)R^{-1}, -R^{-T}], [-R^{-1}, 0]] [...]^T`.
    pub fn hv_product_bfgs(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.form != InverseForm::Bfgs && self.history.policy() != PairPolicy::EqualsS {
            return Err(Error::IncompatibleForm { form: "bfgs", reason: "a policy other than V = S" });
        }
        check_len(self.history.dim(), x)?;
        if !all_finite(x) {
            return Err(Error::NonFiniteInput);
        }
        let h = self.history;
        let (m, d) = (h.len(), h.dim());
        if m == 0 {
            return Ok(self.scaled_identity(x));
        }
        let diag = h.d();
        if let Some(&value) = diag.iter().find(|&&v| v <= 0.0) {
            return Err(Error::NonPositiveCurvature { value });
        }
        let g = self.gamma;
        let r = h.r();
        let yy = h.gram();
        let a = h.s().t_mul(x)?;
        let c: Vec<f64> = h.y().t_mul(x)?.into_iter().map(|v| g * v).collect();
        let q = tri_solve(&r, &a, false)?;
        let mut t: Vec<f64> = (0..m)
            .map(|i| diag[i] * q[i] + g * (0..m).map(|j| yy[(i, j)] * q[j]).sum::<f64>())
            .collect();
        for (ti, ci) in t.iter_mut().zip(&c) {
            *ti -= ci;
        }
        let w1 = tri_solve(&r, &t, true)?;
        let mut out = self.scaled_identity(x);
        h.s().mul_add(1.0, &w1, &mut out)?;
        h.y().mul_add(-g, &q, &mut out)?;
        self.count(4 * m * d + 3 * m * m);
        Ok(out)
    }

    /// Greenstadt layout `H = gamma I + [S, gamma Y] N^{-1} [S, gamma Y]^T` with
    ///
    /// ```text
    /// N = [ W + gamma (R_yy + R_yy^T)   gamma R_yy^T ]
    ///     [ gamma R_yy                  0            ]
    /// ```
    ///
    /// and `R_yy = triu(Y^T Y)`. `N` is solved by two triangular solves.
    pub fn hv_product_greenstadt(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.form != InverseForm::Greenstadt && self.history.policy() != PairPolicy::EqualsY {
            return Err(Error::IncompatibleForm { form: "greenstadt", reason: "a policy other than V = Y" });
        }
        let Some(mf) = self.prepare(x)? else {
            return Ok(self.scaled_identity(x));
        };
        let h = self.history;
        let (m, d) = (h.len(), h.dim());
        let g = self.gamma;
        let ryy = h.gram().upper();
        let a = h.s().t_mul(x)?;
        let c: Vec<f64> = h.y().t_mul(x)?.into_iter().map(|v| g * v).collect();
        // gamma R_yy z1 = c
        let z1: Vec<f64> = tri_solve(&ryy, &c, false)?.into_iter().map(|v| v / g).collect();
        // gamma R_yy^T z2 = a - (W + gamma (R_yy + R_yy^T)) z1
        let wz = mf.w.matvec(&z1)?;
        let rz = ryy.matvec(&z1)?;
        let rtz = ryy.to_dense().t_matvec(&z1)?;
        let t: Vec<f64> = (0..m).map(|i| a[i] - wz[i] - g * (rz[i] + rtz[i])).collect();
        let z2: Vec<f64> = tri_solve(&ryy, &t, true)?.into_iter().map(|v| v / g).collect();
        let mut out = self.scaled_identity(x);
        h.s().mul_add(1.0, &z1, &mut out)?;
        h.y().mul_add(g, &z2, &mut out)?;
        self.count(4 * m * d + 5 * m * m);
        Ok(out)
    }

    /// Explicit `d x d` matrix assembled from `d` unit-vector products.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        let d = self.history.dim();
        if d > MATERIALIZE_MAX_DIM {
            return Err(Error::DimensionTooLarge(d));
        }
        let mut out = DenseMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.hv_product(&e)?;
            out.col_mut(j).copy_from_slice(&col);
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// Implicit eigendecomposition of `H_k`, treating `gamma I` as the base.
    pub fn implicit_eig(&self) -> Result<ImplicitEigen> {
        let h = self.history;
        let d = h.dim();
        let Some(mf) = self.middle.as_ref().filter(|_| !self.degenerate) else {
            return implicit_eig(&DenseMatrix::zeros(d, 0), |v: &[f64]| Ok(v.to_vec()), 1.0 / self.gamma);
        };
        let m = h.len();
        let mut cols = Vec::with_capacity(2 * m);
        for i in 0..m {
            cols.push(h.params().col(i).to_vec());
        }
        for i in 0..m {
            cols.push(h.s().col(i).iter().zip(h.y().col(i)).map(|(s, y)| s - self.gamma * y).collect());
        }
        let j = DenseMatrix::from_columns(d, &cols)?;
        implicit_eig(&j, |v: &[f64]| mf.solve(v), 1.0 / self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::GammaPolicy;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn middle_trivial_cases() {
        let mut h = LmHistory::new(3, 4, Mode::Inverse, PairPolicy::EqualsS);
        h.push_pair(&e(3, 0), &e(3, 0), None).unwrap();
        let mf = build_middle(&h).unwrap();
        assert_eq!(mf.r.to_dense(), DenseMatrix::from_rows(&[&[1.0]]));
        assert_eq!(mf.w, DenseMatrix::from_rows(&[&[0.0]]));

        let mut h = LmHistory::new(3, 4, Mode::Inverse, PairPolicy::EqualsY);
        h.push_pair(&[2.0, 0.0, 0.0], &e(3, 0), None).unwrap();
        assert_eq!(h.gamma(), 2.0);
        let mf = build_middle(&h).unwrap();
        assert_eq!(mf.r.to_dense(), DenseMatrix::from_rows(&[&[1.0]]));
        assert_eq!(mf.w, DenseMatrix::from_rows(&[&[0.0]]));
    }

    #[test]
    fn middle_empty_is_error() {
        let h = LmHistory::new(3, 4, Mode::Inverse, PairPolicy::EqualsS);
        assert_eq!(build_middle(&h), Err(Error::EmptyHistory));
    }

    #[test]
    fn solve_middle_swap() {
        let mf = MiddleFactors { r: UpperTriangular::identity(1), w: DenseMatrix::zeros(1, 1) };
        assert_eq!(mf.solve(&[3.0, 7.0]).unwrap(), vec![7.0, 3.0]);
    }

    #[test]
    fn solve_middle_hand_2x2() {
        // M = [[0, 2], [2, 4]]; M (-2, 1) = (2, 0)
        let mf = MiddleFactors {
            r: DenseMatrix::from_rows(&[&[2.0]]).upper(),
            w: DenseMatrix::from_rows(&[&[4.0]]),
        };
        let x = mf.solve(&[2.0, 0.0]).unwrap();
        assert_eq!(x, vec![-2.0, 1.0]);
        assert_eq!(mf.assemble().matvec(&x).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn empty_history_is_scaled_identity() {
        let h = LmHistory::new(4, 3, Mode::Inverse, PairPolicy::EqualsS).with_gamma_policy(GammaPolicy::Fixed(2.0));
        for form in [InverseForm::General, InverseForm::Alternative, InverseForm::Bfgs] {
            let ci = CompactInverse::new(&h, form).unwrap();
            assert_eq!(ci.hv_product(&[1.0, -2.0, 0.5, 3.0]).unwrap(), vec![2.0, -4.0, 1.0, 6.0]);
        }
    }

    #[test]
    fn unit_pair_is_identity() {
        let mut h = LmHistory::new(3, 3, Mode::Inverse, PairPolicy::EqualsS);
        h.push_pair(&e(3, 0), &e(3, 0), None).unwrap();
        for form in [InverseForm::General, InverseForm::Alternative, InverseForm::Bfgs] {
            let ci = CompactInverse::new(&h, form).unwrap();
            assert_eq!(ci.hv_product(&e(3, 0)).unwrap(), e(3, 0));
            assert_eq!(ci.hv_product(&e(3, 1)).unwrap(), e(3, 1));
        }
    }

    #[test]
    fn greenstadt_unit_pair() {
        let mut h = LmHistory::new(3, 3, Mode::Inverse, PairPolicy::EqualsY);
        h.push_pair(&e(3, 0), &e(3, 0), None).unwrap();
        let ci = CompactInverse::new(&h, InverseForm::Greenstadt).unwrap();
        assert_eq!(ci.hv_product(&e(3, 0)).unwrap(), e(3, 0));
    }

    #[test]
    fn form_policy_mismatch() {
        let h = LmHistory::new(3, 3, Mode::Inverse, PairPolicy::EqualsY);
        assert!(CompactInverse::new(&h, InverseForm::Bfgs).is_err());
        let h = LmHistory::new(3, 3, Mode::Inverse, PairPolicy::EqualsS);
        assert!(CompactInverse::new(&h, InverseForm::Greenstadt).is_err());
        let h = LmHistory::new(3, 3, Mode::Direct, PairPolicy::EqualsS);
        assert!(CompactInverse::new(&h, InverseForm::General).is_err());
    }

    #[test]
    fn bfgs_rejects_negative_curvature() {
        let mut h = LmHistory::new(2, 3, Mode::Inverse, PairPolicy::EqualsS);
        h.push_pair(&[1.0, 0.0], &[-1.0, 0.0], None).unwrap();
        let ci = CompactInverse::new(&h, InverseForm::Bfgs).unwrap();
        assert!(matches!(ci.hv_product(&[1.0, 0.0]), Err(Error::NonPositiveCurvature { .. })));
    }

    #[test]
    fn non_finite_input() {
        let h = LmHistory::new(2, 3, Mode::Inverse, PairPolicy::EqualsS);
        let ci = CompactInverse::new(&h, InverseForm::General).unwrap();
        assert_eq!(ci.hv_product(&[f64::INFINITY, 0.0]), Err(Error::NonFiniteInput));
    }

    #[test]
    fn flop_count_is_linear_in_dimension() {
        let (d, m) = (200, 5);
        let mut h = LmHistory::new(d, m, Mode::Inverse, PairPolicy::EqualsS);
        for k in 0..m {
            let s: Vec<f64> = (0..d).map(|i| ((i * 7 + k * 3) % 11) as f64 - 5.0).collect();
            let y: Vec<f64> = s.iter().enumerate().map(|(i, v)| v * (1.0 + (i % 3) as f64)).collect();
            assert!(h.push_pair(&s, &y, None).unwrap());
        }
        for form in [InverseForm::General, InverseForm::Alternative, InverseForm::Bfgs] {
            let ci = CompactInverse::new(&h, form).unwrap();
            ci.hv_product(&vec![1.0; d]).unwrap();
            let bound = 8 * (m * d + m * m) as u64 + d as u64;
            assert!(ci.flop_count() <= bound, "{form:?}: {} > {}", ci.flop_count(), bound);
            assert!(ci.flop_count() < (d * d) as u64);
        }
    }
}
