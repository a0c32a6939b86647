//! Dense `O(d^2)` recursions used as ground truth for the compact forms.
//!
//! Updates are written term by term as outer products, without any
//! re-association, so they stay independent of the compact code paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::direct::{CompactDirect, DirectForm};
use crate::error::{Error, Result};
use crate::history::{GammaPolicy, LmHistory, Mode, PairPolicy};
use crate::inverse::{CompactInverse, InverseForm};
use crate::linalg::{dot, norm2, DenseMatrix};

const TINY_DENOMINATOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    InverseH,
    DirectB,
}

/// Explicit symmetric `d x d` estimate evolved by a recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseEstimate {
    m: DenseMatrix,
    kind: EstimateKind,
}

fn outer_add(m: &mut DenseMatrix, alpha: f64, a: &[f64], b: &[f64]) {
    for j in 0..m.cols() {
        let bj = alpha * b[j];
        if bj == 0.0 {
            continue;
        }
        for (mij, ai) in m.col_mut(j).iter_mut().zip(a) {
            *mij += ai * bj;
        }
    }
}

impl DenseEstimate {
    pub fn scaled_identity(d: usize, scale: f64, kind: EstimateKind) -> Self {
        Self { m: DenseMatrix::scaled_identity(d, scale), kind }
    }

    pub fn from_matrix(m: DenseMatrix, kind: EstimateKind) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeMismatch("estimate must be square".into()));
        }
        Ok(Self { m, kind })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn kind(&self) -> EstimateKind {
        self.kind
    }

    fn expect_kind(&self, kind: EstimateKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::IncompatibleForm {
                form: match kind {
                    EstimateKind::InverseH => "inverse update",
                    EstimateKind::DirectB => "direct update",
                },
                reason: "an estimate of the other kind",
            });
        }
        Ok(())
    }

    /// Shared body of both general rank-2 formulas:
    /// `M + (r p^T + p r^T)/(p^T b) - (r^T b)/(p^T b)^2 p p^T`, `r = a - M b`.
    fn general_rank2(&mut self, a: &[f64], b: &[f64], p: &[f64]) -> Result<()> {
        let denom = dot(p, b);
        if denom.abs() < TINY_DENOMINATOR {
            return Err(Error::ZeroDenominator { value: denom });
        }
        let mb = self.m.matvec(b)?;
        let r: Vec<f64> = a.iter().zip(&mb).map(|(x, y)| x - y).collect();
        let rb = dot(&r, b);
        outer_add(&mut self.m, 1.0 / denom, &r, p);
        outer_add(&mut self.m, 1.0 / denom, p, &r);
        outer_add(&mut self.m, -rb / (denom * denom), p, p);
        Ok(())
    }

    /// `H <- H + ((s - Hy) v^T + v (s - Hy)^T)/(v^T y) - ((s - Hy)^T y)/(v^T y)^2 v v^T`
    pub fn update_general_inverse(&mut self, s: &[f64], y: &[f64], v: &[f64]) -> Result<()> {
        self.expect_kind(EstimateKind::InverseH)?;
        self.general_rank2(s, y, v)
    }

    /// `B <- B + ((y - Bs) c^T + c (y - Bs)^T)/(c^T s) - ((y - Bs)^T s)/(c^T s)^2 c c^T`
    pub fn update_general_direct(&mut self, s: &[f64], y: &[f64], c: &[f64]) -> Result<()> {
        self.expect_kind(EstimateKind::DirectB)?;
        self.general_rank2(y, s, c)
    }

    /// `H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T`, `rho = 1/(s^T y)`.
    pub fn update_bfgs_inverse(&mut self, s: &[f64], y: &[f64]) -> Result<()> {
        self.expect_kind(EstimateKind::InverseH)?;
        let sy = dot(s, y);
        if sy <= 0.0 {
            return Err(Error::NonPositiveCurvature { value: sy });
        }
        let rho = 1.0 / sy;
        // left factor: A = (I - rho s y^T) H = H - rho s (y^T H)
        let yth = self.m.t_matvec(y)?;
        let mut left = self.m.clone();
        outer_add(&mut left, -rho, s, &yth);
        // right factor: A (I - rho y s^T) = A - rho (A y) s^T
        let ay = left.matvec(y)?;
        outer_add(&mut left, -rho, &ay, s);
        outer_add(&mut left, rho, s, s);
        self.m = left;
        Ok(())
    }

    /// `B <- B + ((y - Bs) s^T + s (y - Bs)^T)/(s^T s) - ((y - Bs)^T s)/(s^T s)^2 s s^T`
    pub fn update_psb(&mut self, s: &[f64], y: &[f64]) -> Result<()> {
        self.expect_kind(EstimateKind::DirectB)?;
        let ss = dot(s, s);
        if ss == 0.0 {
            return Err(Error::ZeroVector);
        }
        let bs = self.m.matvec(s)?;
        let r: Vec<f64> = y.iter().zip(&bs).map(|(a, b)| a - b).collect();
        let rs = dot(&r, s);
        outer_add(&mut self.m, 1.0 / ss, &r, s);
        outer_add(&mut self.m, 1.0 / ss, s, &r);
        outer_add(&mut self.m, -rs / (ss * ss), s, s);
        Ok(())
    }
}

/// Rebuilds the dense estimate from the pairs currently stored in `h`,
/// starting at the history's current `gamma` (window replay).
pub fn replay_window(h: &LmHistory) -> Result<DenseEstimate> {
    let d = h.dim();
    match h.mode() {
        Mode::Inverse => {
            let mut e = DenseEstimate::scaled_identity(d, h.gamma(), EstimateKind::InverseH);
            for i in 0..h.len() {
                e.update_general_inverse(h.s().col(i), h.y().col(i), h.params().col(i))?;
            }
            Ok(e)
        }
        Mode::Direct => {
            let mut e = DenseEstimate::scaled_identity(d, 1.0 / h.gamma(), EstimateKind::DirectB);
            for i in 0..h.len() {
                e.update_general_direct(h.s().col(i), h.y().col(i), h.params().col(i))?;
            }
            Ok(e)
        }
    }
}

/// One curvature pair together with the parameter vector it was paired with.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    pub s: Vec<f64>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
}

/// Which parameter vector accompanies the generated pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    S,
    Y,
    /// Gaussian vector with `|p^T partner| >= 1e-3 ||p|| ||partner||`.
    Random,
}

/// Deterministic pairs with `y = A s` for a fixed SPD `A = diag(a) + w w^T`,
/// so `s^T y > 0` always holds.
pub fn random_pairs(d: usize, k: usize, seed: u64, source: PairSource, mode: Mode) -> Vec<CurvaturePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diag: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..2.0)).collect();
    let w: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) / (d as f64).sqrt()).collect();
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
    (0..k)
        .map(|_| {
            let s = gauss(&mut rng);
            let ws = dot(&w, &s);
            let y: Vec<f64> = (0..d).map(|i| diag[i] * s[i] + ws * w[i]).collect();
            let p = match source {
                PairSource::S => s.clone(),
                PairSource::Y => y.clone(),
                PairSource::Random => {
                    let partner = if mode == Mode::Inverse { &y } else { &s };
                    loop {
                        let v = gauss(&mut rng);
                        if dot(&v, partner).abs() >= 1e-3 * norm2(&v) * norm2(partner) {
                            break v;
                        }
                    }
                }
            };
            CurvaturePair { s, y, p }
        })
        .collect()
}

/// Compact-vs-recursion comparison target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    GeneralS,
    GeneralY,
    GeneralRand,
    Bfgs,
    Psb,
    Greenstadt,
}

impl VerifyMode {
    pub const ALL: [VerifyMode; 6] = [
        VerifyMode::GeneralS,
        VerifyMode::GeneralY,
        VerifyMode::GeneralRand,
        VerifyMode::Bfgs,
        VerifyMode::Psb,
        VerifyMode::Greenstadt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VerifyMode::GeneralS => "general-s",
            VerifyMode::GeneralY => "general-y",
            VerifyMode::GeneralRand => "general-rand",
            VerifyMode::Bfgs => "bfgs",
            VerifyMode::Psb => "psb",
            VerifyMode::Greenstadt => "greenstadt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    fn mode(self) -> Mode {
        if self == VerifyMode::Psb {
            Mode::Direct
        } else {
            Mode::Inverse
        }
    }

    fn source(self) -> PairSource {
        match self {
            VerifyMode::GeneralS | VerifyMode::Bfgs | VerifyMode::Psb => PairSource::S,
            VerifyMode::GeneralY | VerifyMode::Greenstadt => PairSource::Y,
            VerifyMode::GeneralRand => PairSource::Random,
        }
    }
}

/// One row of the verification table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub k: usize,
    /// Secant residual `||H y - s||_2` (or `||B s - y||_2` for PSB).
    pub error1: f64,
    /// `||compact - recursive||_F`
    pub error2: f64,
}

/// Compares the compact form selected by `mode` with its dense recursion
/// after each of the given pairs, both started from the same fixed `gamma`.
pub fn verification_rows(mode: VerifyMode, pairs: &[CurvaturePair], gamma: f64) -> Result<Vec<ErrorRow>> {
    let Some(first) = pairs.first() else {
        return Ok(Vec::new());
    };
    let d = first.s.len();
    let policy = match mode.source() {
        PairSource::S => PairPolicy::EqualsS,
        PairSource::Y => PairPolicy::EqualsY,
        PairSource::Random => PairPolicy::Custom,
    };
    let mut hist = LmHistory::new(d, pairs.len(), mode.mode(), policy).with_gamma_policy(GammaPolicy::Fixed(gamma));
    let mut dense = match mode.mode() {
        Mode::Inverse => DenseEstimate::scaled_identity(d, gamma, EstimateKind::InverseH),
        Mode::Direct => DenseEstimate::scaled_identity(d, 1.0 / gamma, EstimateKind::DirectB),
    };
    let mut rows = Vec::with_capacity(pairs.len());
    for (idx, pair) in pairs.iter().enumerate() {
        if !hist.push_pair(&pair.s, &pair.y, Some(&pair.p))? {
            return Err(Error::ZeroDenominator { value: dot(&pair.p, &pair.y) });
        }
        match mode {
            VerifyMode::Bfgs => dense.update_bfgs_inverse(&pair.s, &pair.y)?,
            VerifyMode::Psb => dense.update_psb(&pair.s, &pair.y)?,
            _ => dense.update_general_inverse(&pair.s, &pair.y, &pair.p)?,
        }
        let (compact, residual) = match mode {
            VerifyMode::Psb => {
                let cd = CompactDirect::new(&hist, DirectForm::Psb)?;
                let bs = cd.bv_product(&pair.s)?;
                let res: Vec<f64> = bs.iter().zip(&pair.y).map(|(a, b)| a - b).collect();
                (cd.materialize_b()?, norm2(&res))
            }
            _ => {
                let form = match mode {
                    VerifyMode::Bfgs => InverseForm::Bfgs,
                    VerifyMode::Greenstadt => InverseForm::Greenstadt,
                    _ => InverseForm::General,
                };
                let ci = CompactInverse::new(&hist, form)?;
                let hy = ci.hv_product(&pair.y)?;
                let res: Vec<f64> = hy.iter().zip(&pair.s).map(|(a, b)| a - b).collect();
                (ci.materialize()?, norm2(&res))
            }
        };
        rows.push(ErrorRow {
            k: idx + 1,
            error1: residual,
            error2: compact.sub(dense.matrix())?.frobenius_norm(),
        });
    }
    Ok(rows)
}

/// Full verification run: generated pairs, `gamma` fixed from the first pair.
pub fn verification_report(mode: VerifyMode, d: usize, seed: u64, k_max: usize) -> Result<Vec<ErrorRow>> {
    let pairs = random_pairs(d, k_max, seed, mode.source(), mode.mode());
    let gamma = pairs.first().map_or(1.0, |p| (dot(&p.y, &p.s) / dot(&p.y, &p.y)).clamp(1e-8, 1e8));
    verification_rows(mode, &pairs, gamma)
}

/// Greenstadt (`v = y`) compact form against the general inverse recursion.
pub fn table1_report(d: usize, seed: u64, k_max: usize) -> Result<Vec<ErrorRow>> {
    verification_report(VerifyMode::Greenstadt, d, seed, k_max)
}
