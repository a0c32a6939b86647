//! Limited-memory pair history.
//!
//! Columns live in fixed `d x l` ring buffers so that dropping the oldest
//! pair is an index bump, never a copy of `d`-length data. The small Gram
//! caches (`S^T Y` plus two mode-specific products) are kept in logical
//! oldest-to-newest order and refreshed with one new row and one new column
//! per accepted pair.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, check_len, dot, norm2, DenseMatrix, UpperTriangular};

/// Relative threshold for the pair acceptance test `|p^T y| >= EPS_PAIR ||p|| ||y||`.
pub const EPS_PAIR: f64 = 1e-10;
pub const GAMMA_MIN: f64 = 1e-8;
pub const GAMMA_MAX: f64 = 1e8;

/// Which recursion the history feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Inverse estimate `H`; the parameter vectors are the `v_i`.
    Inverse,
    /// Direct estimate `B`; the parameter vectors are the `c_i`.
    Direct,
}

/// Choice of the free parameter vector of each rank-2 update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPolicy {
    /// `v = s` (inverse: BFGS) or `c = s` (direct: PSB).
    EqualsS,
    /// `v = y` (inverse: Greenstadt) or `c = y` (direct).
    EqualsY,
    /// Caller supplies one vector per pair.
    Custom,
}

/// How the identity scaling `gamma` of the initial matrix evolves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaPolicy {
    /// `gamma = y^T s / y^T y` of the newest accepted pair, clamped.
    Adaptive,
    /// Constant `gamma` for the life of the history.
    Fixed(f64),
}

/// `d x l` ring of columns in logical oldest-to-newest order.
#[derive(Debug, Clone)]
pub struct ColumnStore {
    dim: usize,
    capacity: usize,
    head: usize,
    len: usize,
    data: Vec<f64>,
}

impl ColumnStore {
    pub fn new(dim: usize, capacity: usize) -> Self {
        assert!(capacity >= 1, "column store needs capacity >= 1");
        Self { dim, capacity, head: 0, len: 0, data: vec![0.0; dim * capacity] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_full(&self) -> bool {
        self.len == self.capacity
    }

    #[inline]
    fn slot(&self, i: usize) -> usize {
        (self.head + i) % self.capacity
    }

    /// Logical column `i` (0 is the oldest).
    #[inline]
    pub fn col(&self, i: usize) -> &[f64] {
        debug_assert!(i < self.len);
        let s = self.slot(i);
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    /// Appends `v`, dropping the oldest column when full.
    pub fn col_update(&mut self, v: &[f64]) -> Result<()> {
        check_len(self.dim, v)?;
        let slot = if self.len < self.capacity {
            self.len += 1;
            self.slot(self.len - 1)
        } else {
            let s = self.head;
            self.head = (self.head + 1) % self.capacity;
            s
        };
        self.data[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(v);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.head = 0;
        self.len = 0;
    }

    /// `X^T x` over the logical columns starting at `from`.
    fn t_mul_from(&self, from: usize, x: &[f64]) -> Vec<f64> {
        (from..self.len).map(|i| dot(self.col(i), x)).collect()
    }

    /// `X^T x`
    pub fn t_mul(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, x)?;
        Ok(self.t_mul_from(0, x))
    }

    /// `out += alpha * X w`
    pub fn mul_add(&self, alpha: f64, w: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.len, w)?;
        check_len(self.dim, out)?;
        for (i, wi) in w.iter().enumerate() {
            axpy(alpha * wi, self.col(i), out);
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, self.len, |r, c| self.col(c)[r])
    }
}

/// Returns the post-update `X^T Y` given the pre-update cache and stores.
///
/// Only the new row `x^T Y` and new column `X^T y` are computed; when the
/// stores are full the oldest row and column are dropped first.
pub fn prod_update(
    cache: &DenseMatrix,
    xs: &ColumnStore,
    ys: &ColumnStore,
    x: &[f64],
    y: &[f64],
) -> Result<DenseMatrix> {
    check_len(xs.dim(), x)?;
    check_len(ys.dim(), y)?;
    let m = xs.len();
    if ys.len() != m || cache.rows() != m || cache.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: cache.rows() });
    }
    let drop = usize::from(xs.is_full());
    let new_col = xs.t_mul_from(drop, y);
    let new_row = ys.t_mul_from(drop, x);
    Ok(assemble_update(cache, drop, &new_col, &new_row, dot(x, y)))
}

/// Symmetric variant of [`prod_update`] for `X^T X`: one product serves as
/// both the new row and the new column.
pub fn prod_update_sym(cache: &DenseMatrix, xs: &ColumnStore, x: &[f64]) -> Result<DenseMatrix> {
    check_len(xs.dim(), x)?;
    let m = xs.len();
    if cache.rows() != m || cache.cols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: cache.rows() });
    }
    let drop = usize::from(xs.is_full());
    let shared = xs.t_mul_from(drop, x);
    Ok(assemble_update(cache, drop, &shared, &shared, dot(x, x)))
}

fn assemble_update(
    cache: &DenseMatrix,
    drop: usize,
    new_col: &[f64],
    new_row: &[f64],
    corner: f64,
) -> DenseMatrix {
    let keep = cache.rows() - drop;
    DenseMatrix::from_fn(keep + 1, keep + 1, |i, j| match (i < keep, j < keep) {
        (true, true) => cache[(i + drop, j + drop)],
        (true, false) => new_col[i],
        (false, true) => new_row[j],
        (false, false) => corner,
    })
}

/// `clamp(y^T s / y^T y)`, or `previous` when the curvature `y^T s` is not positive.
pub fn gamma_init(s: &[f64], y: &[f64], previous: f64) -> Result<f64> {
    check_len(s.len(), y)?;
    let yy = dot(y, y);
    if yy == 0.0 {
        return Err(Error::ZeroVector);
    }
    let ys = dot(y, s);
    if ys <= 0.0 {
        return Ok(previous);
    }
    Ok((ys / yy).clamp(GAMMA_MIN, GAMMA_MAX))
}

/// Limited-memory store of `S`, `Y` and the parameter vectors `P` (the `v_i`
/// or `c_i`), with cached Gram products.
///
/// Inverse mode caches `S^T Y`, `P^T Y`, `Y^T Y`; direct mode caches
/// `S^T Y`, `P^T S`, `S^T S`.
#[derive(Debug, Clone)]
pub struct LmHistory {
    mode: Mode,
    policy: PairPolicy,
    gamma_policy: GammaPolicy,
    require_positive_curvature: bool,
    s: ColumnStore,
    y: ColumnStore,
    p: ColumnStore,
    sy: DenseMatrix,
    p_cross: DenseMatrix,
    gram: DenseMatrix,
    gamma: f64,
    skip_count: usize,
    accepted: usize,
}

impl LmHistory {
    pub fn new(dim: usize, memory: usize, mode: Mode, policy: PairPolicy) -> Self {
        assert!(memory >= 1, "memory limit must be at least 1");
        Self {
            mode,
            policy,
            gamma_policy: GammaPolicy::Adaptive,
            require_positive_curvature: false,
            s: ColumnStore::new(dim, memory),
            y: ColumnStore::new(dim, memory),
            p: ColumnStore::new(dim, memory),
            sy: DenseMatrix::zeros(0, 0),
            p_cross: DenseMatrix::zeros(0, 0),
            gram: DenseMatrix::zeros(0, 0),
            gamma: 1.0,
            skip_count: 0,
            accepted: 0,
        }
    }

    pub fn with_gamma_policy(mut self, policy: GammaPolicy) -> Self {
        if let GammaPolicy::Fixed(g) = policy {
            assert!(g > 0.0 && g.is_finite(), "fixed gamma must be positive");
            self.gamma = g;
        }
        self.gamma_policy = policy;
        self
    }

    /// Also reject pairs with `s^T y <= EPS_PAIR ||s|| ||y||`.
    pub fn with_positive_curvature(mut self, on: bool) -> Self {
        self.require_positive_curvature = on;
        self
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn policy(&self) -> PairPolicy {
        self.policy
    }

    pub fn gamma_policy(&self) -> GammaPolicy {
        self.gamma_policy
    }

    pub fn dim(&self) -> usize {
        self.s.dim()
    }

    pub fn memory(&self) -> usize {
        self.s.capacity()
    }

    /// Current number of stored pairs `m`.
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn skip_count(&self) -> usize {
        self.skip_count
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted
    }

    pub fn s(&self) -> &ColumnStore {
        &self.s
    }

    pub fn y(&self) -> &ColumnStore {
        &self.y
    }

    /// Parameter vectors (`V` in inverse mode, `C` in direct mode).
    pub fn params(&self) -> &ColumnStore {
        &self.p
    }

    /// Cached `S^T Y`.
    pub fn sy(&self) -> &DenseMatrix {
        &self.sy
    }

    /// Cached `P^T Y` (inverse) or `P^T S` (direct).
    pub fn param_cross(&self) -> &DenseMatrix {
        &self.p_cross
    }

    /// Cached `Y^T Y` (inverse) or `S^T S` (direct).
    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    /// `triu(S^T Y)`
    pub fn r(&self) -> UpperTriangular {
        self.sy.upper()
    }

    /// `diag(S^T Y)`
    pub fn d(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.sy[(i, i)]).collect()
    }

    /// Strictly lower part of `S^T Y`.
    pub fn l(&self) -> DenseMatrix {
        let m = self.len();
        DenseMatrix::from_fn(m, m, |i, j| if i > j { self.sy[(i, j)] } else { 0.0 })
    }

    /// Number of `f64` slots allocated for columns and caches at full memory.
    pub fn storage_footprint(&self) -> usize {
        let l = self.memory();
        3 * self.dim() * l + 3 * l * l
    }

    /// Drops every stored pair; `gamma` is reset unless it is fixed.
    pub fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.p.clear();
        self.sy = DenseMatrix::zeros(0, 0);
        self.p_cross = DenseMatrix::zeros(0, 0);
        self.gram = DenseMatrix::zeros(0, 0);
        if self.gamma_policy == GammaPolicy::Adaptive {
            self.gamma = 1.0;
        }
    }

    /// Offers a curvature pair. Returns `Ok(true)` when accepted; a rejected
    /// pair leaves every stored value untouched and bumps the skip counter.
    pub fn push_pair(&mut self, s: &[f64], y: &[f64], custom: Option<&[f64]>) -> Result<bool> {
        let d = self.dim();
        check_len(d, s)?;
        check_len(d, y)?;
        let p: &[f64] = match self.policy {
            PairPolicy::EqualsS => s,
            PairPolicy::EqualsY => y,
            PairPolicy::Custom => custom.ok_or(Error::MissingParameterVector)?,
        };
        check_len(d, p)?;
        if !all_finite(s) || !all_finite(y) || !all_finite(p) {
            return Err(Error::NonFiniteInput);
        }

        let partner = match self.mode {
            Mode::Inverse => y,
            Mode::Direct => s,
        };
        let scale = norm2(p) * norm2(partner);
        let pass = scale > 0.0 && dot(p, partner).abs() >= EPS_PAIR * scale;
        let curvature_ok = !self.require_positive_curvature || {
            let sy_scale = norm2(s) * norm2(y);
            sy_scale > 0.0 && dot(s, y) > EPS_PAIR * sy_scale
        };
        if !pass || !curvature_ok || dot(y, y) == 0.0 {
            self.skip_count += 1;
            return Ok(false);
        }

        let sy = prod_update(&self.sy, &self.s, &self.y, s, y)?;
        let (p_cross, gram) = match self.mode {
            Mode::Inverse => (
                prod_update(&self.p_cross, &self.p, &self.y, p, y)?,
                prod_update_sym(&self.gram, &self.y, y)?,
            ),
            Mode::Direct => (
                prod_update(&self.p_cross, &self.p, &self.s, p, s)?,
                prod_update_sym(&self.gram, &self.s, s)?,
            ),
        };
        // p may alias s or y; copy before the stores are touched.
        let p = p.to_vec();
        self.s.col_update(s)?;
        self.y.col_update(y)?;
        self.p.col_update(&p)?;
        self.sy = sy;
        self.p_cross = p_cross;
        self.gram = gram;
        if self.gamma_policy == GammaPolicy::Adaptive {
            self.gamma = gamma_init(s, y, self.gamma)?;
        }
        self.accepted += 1;
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn rand_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn gram_from_scratch(a: &ColumnStore, b: &ColumnStore) -> DenseMatrix {
        a.to_dense().transpose().matmul(&b.to_dense()).unwrap()
    }

    #[test]
    fn col_update_appends_then_rotates() {
        let mut st = ColumnStore::new(2, 3);
        st.col_update(&[1.0, 0.0]).unwrap();
        assert_eq!(st.len(), 1);
        assert_eq!(st.col(0), &[1.0, 0.0]);
        st.col_update(&[2.0, 0.0]).unwrap();
        st.col_update(&[3.0, 0.0]).unwrap();
        st.col_update(&[4.0, 0.0]).unwrap();
        let firsts: Vec<f64> = (0..st.len()).map(|i| st.col(i)[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn col_update_replay_matches_rebuild() {
        let mut st = ColumnStore::new(3, 2);
        let vs = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        for v in &vs {
            st.col_update(v).unwrap();
        }
        let mut fresh = ColumnStore::new(3, 2);
        fresh.col_update(&vs[1]).unwrap();
        fresh.col_update(&vs[2]).unwrap();
        assert_eq!(st.to_dense(), fresh.to_dense());
    }

    #[test]
    fn col_update_dimension_mismatch() {
        let mut st = ColumnStore::new(3, 2);
        assert!(matches!(st.col_update(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn prod_update_first_entry() {
        let xs = ColumnStore::new(2, 3);
        let ys = ColumnStore::new(2, 3);
        let out = prod_update(&DenseMatrix::zeros(0, 0), &xs, &ys, &[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(out, DenseMatrix::from_rows(&[&[11.0]]));
    }

    #[test]
    fn prod_update_full_matches_from_scratch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (d, l) = (7, 3);
        let mut xs = ColumnStore::new(d, l);
        let mut ys = ColumnStore::new(d, l);
        let mut cache = DenseMatrix::zeros(0, 0);
        let mut sym = DenseMatrix::zeros(0, 0);
        for _ in 0..6 {
            let x = rand_vec(&mut rng, d);
            let y = rand_vec(&mut rng, d);
            cache = prod_update(&cache, &xs, &ys, &x, &y).unwrap();
            sym = prod_update_sym(&sym, &xs, &x).unwrap();
            xs.col_update(&x).unwrap();
            ys.col_update(&y).unwrap();
            let scratch = gram_from_scratch(&xs, &ys);
            assert!(cache.sub(&scratch).unwrap().frobenius_norm() <= 1e-14 * (1.0 + scratch.frobenius_norm()));
            let sym_scratch = gram_from_scratch(&xs, &xs);
            assert!(sym.sub(&sym_scratch).unwrap().frobenius_norm() <= 1e-14 * (1.0 + sym_scratch.frobenius_norm()));
            assert_eq!(sym.asymmetry(), 0.0);
        }
    }

    #[test]
    fn push_pair_trivial_inverse_bfgs() {
        let mut h = LmHistory::new(3, 5, Mode::Inverse, PairPolicy::EqualsS);
        assert!(h.push_pair(&e(3, 0), &e(3, 0), None).unwrap());
        assert_eq!(h.sy(), &DenseMatrix::from_rows(&[&[1.0]]));
        assert_eq!(h.gamma(), 1.0);
    }

    #[test]
    fn push_pair_greenstadt_never_rejects_nonzero_y() {
        let mut h = LmHistory::new(3, 5, Mode::Inverse, PairPolicy::EqualsY);
        assert!(h.push_pair(&e(3, 1), &e(3, 0), None).unwrap());
        assert_eq!(h.param_cross(), &DenseMatrix::from_rows(&[&[1.0]]));
    }

    #[test]
    fn push_pair_rejects_orthogonal_custom_and_leaves_state() {
        let mut h = LmHistory::new(3, 5, Mode::Inverse, PairPolicy::Custom);
        h.push_pair(&[1.0, 1.0, 0.0], &[1.0, 0.5, 0.0], Some(&[1.0, 0.0, 1.0])).unwrap();
        let before = (h.s().to_dense(), h.sy().clone(), h.param_cross().clone(), h.gamma());
        let accepted = h.push_pair(&[0.0, 1.0, 0.0], &e(3, 0), Some(&e(3, 2))).unwrap();
        assert!(!accepted);
        assert_eq!(h.skip_count(), 1);
        assert_eq!(before, (h.s().to_dense(), h.sy().clone(), h.param_cross().clone(), h.gamma()));
    }

    #[test]
    fn push_pair_custom_requires_vector() {
        let mut h = LmHistory::new(2, 2, Mode::Inverse, PairPolicy::Custom);
        assert_eq!(h.push_pair(&[1.0, 0.0], &[1.0, 0.0], None), Err(Error::MissingParameterVector));
    }

    #[test]
    fn push_pair_non_finite() {
        let mut h = LmHistory::new(2, 2, Mode::Direct, PairPolicy::EqualsS);
        assert_eq!(h.push_pair(&[f64::NAN, 0.0], &[1.0, 0.0], None), Err(Error::NonFiniteInput));
    }

    #[test]
    fn positive_curvature_guard() {
        let mut h = LmHistory::new(2, 2, Mode::Inverse, PairPolicy::EqualsS).with_positive_curvature(true);
        assert!(!h.push_pair(&[1.0, 0.0], &[-1.0, 0.0], None).unwrap());
        assert_eq!(h.skip_count(), 1);
    }

    #[test]
    fn gamma_init_cases() {
        let y = [1.0, -2.0, 0.5];
        assert_eq!(gamma_init(&y, &y, 7.0).unwrap(), 1.0);
        let s2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
        assert_eq!(gamma_init(&s2, &y, 7.0).unwrap(), 2.0);
        assert_eq!(gamma_init(&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], 7.0).unwrap(), 7.0);
        assert_eq!(gamma_init(&y, &[0.0; 3], 7.0), Err(Error::ZeroVector));
        assert_eq!(gamma_init(&[1e12, 0.0, 0.0], &[1.0, 0.0, 0.0], 1.0).unwrap(), GAMMA_MAX);
    }

    #[test]
    fn caches_track_columns_and_lrd_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for mode in [Mode::Inverse, Mode::Direct] {
            let mut h = LmHistory::new(9, 4, mode, PairPolicy::Custom);
            for _ in 0..11 {
                let s = rand_vec(&mut rng, 9);
                let y = rand_vec(&mut rng, 9);
                let v = rand_vec(&mut rng, 9);
                h.push_pair(&s, &y, Some(&v)).unwrap();
            }
            let sy = gram_from_scratch(h.s(), h.y());
            assert!(h.sy().sub(&sy).unwrap().frobenius_norm() <= 1e-12 * sy.frobenius_norm());
            let (cross, gram) = match mode {
                Mode::Inverse => (gram_from_scratch(h.params(), h.y()), gram_from_scratch(h.y(), h.y())),
                Mode::Direct => (gram_from_scratch(h.params(), h.s()), gram_from_scratch(h.s(), h.s())),
            };
            assert!(h.param_cross().sub(&cross).unwrap().frobenius_norm() <= 1e-12 * cross.frobenius_norm());
            assert!(h.gram().sub(&gram).unwrap().frobenius_norm() <= 1e-12 * gram.frobenius_norm());
            let m = h.len();
            let r = h.r().to_dense();
            let l = h.l();
            for i in 0..m {
                for j in 0..m {
                    assert_eq!(r[(i, j)] + l[(i, j)], h.sy()[(i, j)]);
                }
                assert_eq!(h.d()[i], h.sy()[(i, i)]);
            }
        }
    }

    #[test]
    fn storage_is_three_blocks_plus_three_caches() {
        let h = LmHistory::new(100, 5, Mode::Inverse, PairPolicy::EqualsS);
        assert_eq!(h.storage_footprint(), 3 * 100 * 5 + 3 * 25);
        assert_eq!(h.s().capacity() + h.y().capacity() + h.params().capacity(), 15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn ring_order_and_cache_fidelity(seed in 0u64..100_000, l in 1usize..6, pushes in 0usize..14) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = 6;
                let mut h = LmHistory::new(d, l, Mode::Inverse, PairPolicy::EqualsY);
                let mut accepted: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
                for _ in 0..pushes {
                    let s = rand_vec(&mut rng, d);
                    let y = rand_vec(&mut rng, d);
                    if h.push_pair(&s, &y, None).unwrap() {
                        accepted.push((s, y));
                    }
                }
                let tail = &accepted[accepted.len().saturating_sub(l)..];
                prop_assert_eq!(h.len(), tail.len());
                for (i, (s, y)) in tail.iter().enumerate() {
                    prop_assert_eq!(h.s().col(i), s.as_slice());
                    prop_assert_eq!(h.y().col(i), y.as_slice());
                }
                let yy = gram_from_scratch(h.y(), h.y());
                prop_assert!(h.gram().sub(&yy).unwrap().frobenius_norm() <= 1e-12 * (1.0 + yy.frobenius_norm()));
            }
        }
    }
}
