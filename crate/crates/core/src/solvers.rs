//! Optimization drivers: strong-Wolfe line search with the compact inverse,
//! eigenvalue-shifted trust region with the compact direct form, and a
//! fixed-step stochastic mini-batch loop.

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::direct::{quadratic_form, shifted_solve_with, CompactDirect, DirectForm};
use crate::error::{Error, Result};
use crate::history::{GammaPolicy, LmHistory, Mode, PairPolicy};
use crate::inverse::{CompactInverse, InverseForm};
use crate::linalg::{all_finite, check_len, dot, norm2, norm_inf};
use crate::problems::{BatchProblem, Problem};

pub const LINE_SEARCH_MAX_EVALS: usize = 30;
pub const SHIFT_BISECTION_STEPS: usize = 40;
pub const TR_RADIUS_MIN: f64 = 1e-12;
pub const TR_RADIUS_MAX: f64 = 1e12;
const PD_MARGIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub memory: usize,
    /// Stop when `||g||_inf <= tol_g`.
    pub tol_g: f64,
    pub max_iter: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    pub tr_delta0: f64,
    pub tr_eta: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub policy: PairPolicy,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            memory: 5,
            tol_g: 1e-5,
            max_iter: 5000,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            tr_delta0: 1.0,
            tr_eta: 0.1,
            alpha: 0.5,
            batch_size: 256,
            epochs: 10,
            policy: PairPolicy::EqualsS,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        if !(self.tol_g > 0.0) {
            return bad("tol_g must be positive");
        }
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return bad("need 0 < c1 < c2 < 1");
        }
        if !(self.tr_delta0 > 0.0) || !(0.0..1.0).contains(&self.tr_eta) {
            return bad("need delta0 > 0 and 0 <= eta < 1");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || self.batch_size == 0 {
            return bad("need alpha >= 0 and batch_size >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIter,
    LineSearchFail,
    NumericalFail,
    /// All requested epochs ran (stochastic mode).
    Completed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::LineSearchFail => "line_search_fail",
            Status::NumericalFail => "numerical_fail",
            Status::Completed => "completed",
        }
    }
}

/// One iteration: `step` is the line-search `alpha` or the trust-region shift `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub f: f64,
    pub gnorm: f64,
    pub step: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    pub iterations: usize,
    pub w: Vec<f64>,
    pub f_final: f64,
    pub gnorm_final: f64,
    pub f_evals: usize,
    pub g_evals: usize,
    pub skip_count: usize,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub f: f64,
    pub g: Vec<f64>,
    pub evals: usize,
}

struct Trial {
    alpha: f64,
    f: f64,
    slope: f64,
    g: Vec<f64>,
}

fn eval_at<P: Problem + ?Sized>(problem: &P, w: &[f64], p: &[f64], alpha: f64) -> Result<Trial> {
    let x: Vec<f64> = w.iter().zip(p).map(|(wi, pi)| wi + alpha * pi).collect();
    let (f, g) = problem.eval(&x)?;
    let f = if f.is_finite() && all_finite(&g) { f } else { f64::INFINITY };
    let slope = if f.is_finite() { dot(&g, p) } else { f64::NAN };
    Ok(Trial { alpha, f, slope, g })
}

/// Minimizer of the cubic matching values and slopes at `a` and `b`, if any.
fn cubic_min(a: &Trial, b: &Trial) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

/// Strong-Wolfe step along the descent direction `p`, starting from `alpha = 1`.
pub fn wolfe_linesearch<P: Problem + ?Sized>(
    problem: &P,
    w: &[f64],
    p: &[f64],
    f0: f64,
    g0: &[f64],
    cfg: &SolverConfig,
) -> Result<LineSearchResult> {
    check_len(w.len(), p)?;
    check_len(w.len(), g0)?;
    let slope0 = dot(p, g0);
    if !(slope0 < 0.0) {
        return Err(Error::NotDescent { slope: slope0 });
    }
    let (c1, c2) = (cfg.wolfe_c1, cfg.wolfe_c2);
    let armijo = |t: &Trial| t.f <= f0 + c1 * t.alpha * slope0;
    let curvature = |t: &Trial| t.slope.abs() <= c2 * slope0.abs();
    let done = |t: Trial, evals| Ok(LineSearchResult { alpha: t.alpha, f: t.f, g: t.g, evals });

    let mut evals = 0;
    let mut prev = Trial { alpha: 0.0, f: f0, slope: slope0, g: g0.to_vec() };
    let mut alpha = 1.0;
    let (mut lo, mut hi);
    loop {
        let cur = eval_at(problem, w, p, alpha)?;
        evals += 1;
        if !armijo(&cur) || (evals > 1 && cur.f >= prev.f) {
            lo = prev;
            hi = cur;
            break;
        }
        if curvature(&cur) {
            return done(cur, evals);
        }
        if cur.slope >= 0.0 {
            lo = cur;
            hi = prev;
            break;
        }
        if evals >= LINE_SEARCH_MAX_EVALS {
            return Err(Error::LineSearchFail { evals });
        }
        // extrapolate, at least doubling and at most 10x
        let next = cubic_min(&prev, &cur).unwrap_or(f64::NAN);
        alpha = if next.is_finite() && next > 2.0 * cur.alpha {
            next.min(10.0 * cur.alpha)
        } else {
            2.0 * cur.alpha
        };
        prev = cur;
    }

    // zoom: `lo` satisfies Armijo with the lowest value seen, `hi` brackets
    while evals < LINE_SEARCH_MAX_EVALS {
        let (a, b) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
        let width = b - a;
        if width <= f64::EPSILON * b.max(1.0) {
            break;
        }
        let mid = 0.5 * (a + b);
        let alpha = match cubic_min(&lo, &hi) {
            Some(t) if t > a + 0.1 * width && t < b - 0.1 * width => t,
            _ => mid,
        };
        let cur = eval_at(problem, w, p, alpha)?;
        evals += 1;
        if !armijo(&cur) || cur.f >= lo.f {
            hi = cur;
        } else {
            if curvature(&cur) {
                return done(cur, evals);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    Err(Error::LineSearchFail { evals })
}

fn inverse_form_for(policy: PairPolicy) -> InverseForm {
    match policy {
        PairPolicy::EqualsS => InverseForm::Bfgs,
        PairPolicy::EqualsY => InverseForm::Greenstadt,
        PairPolicy::Custom => InverseForm::General,
    }
}

fn steepest(g: &[f64]) -> Vec<f64> {
    let scale = 1.0 / norm2(g).max(1.0);
    g.iter().map(|v| -scale * v).collect()
}

fn check_start<P: Problem + ?Sized>(problem: &P, w0: &[f64], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    check_len(problem.dim(), w0)?;
    if !all_finite(w0) {
        return Err(Error::NonFiniteInput);
    }
    if cfg.policy == PairPolicy::Custom {
        return Err(Error::InvalidConfig("solvers support the s and y pair policies".into()));
    }
    Ok(())
}

/// Quasi-Newton iteration `w <- w - alpha H g` with the compact inverse.
pub fn minimize_linesearch<P: Problem + ?Sized>(problem: &P, w0: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    minimize_linesearch_with_history(problem, w0, cfg).map(|(report, _)| report)
}

/// Same as [`minimize_linesearch`], also returning the final pair history.
pub fn minimize_linesearch_with_history<P: Problem + ?Sized>(
    problem: &P,
    w0: &[f64],
    cfg: &SolverConfig,
) -> Result<(SolveReport, LmHistory)> {
    check_start(problem, w0, cfg)?;
    let form = inverse_form_for(cfg.policy);
    let mut hist = LmHistory::new(w0.len(), cfg.memory, Mode::Inverse, cfg.policy)
        .with_positive_curvature(cfg.policy == PairPolicy::EqualsS);
    let mut w = w0.to_vec();
    let (mut f, mut g) = problem.eval(&w)?;
    let mut evals = 1;
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    if !(f.is_finite() && all_finite(&g)) {
        status = Status::NumericalFail;
    }

    while status == Status::MaxIter {
        if norm_inf(&g) <= cfg.tol_g {
            status = Status::Converged;
            break;
        }
        if trace.len() >= cfg.max_iter {
            break;
        }
        let mut p = if hist.is_empty() {
            steepest(&g)
        } else {
            let hg = CompactInverse::new(&hist, form)?.hv_product(&g)?;
            hg.into_iter().map(|v| -v).collect()
        };
        if !(dot(&p, &g) < 0.0) || !all_finite(&p) {
            debug!("quasi-Newton direction is not a descent direction; resetting history");
            hist.clear();
            p = steepest(&g);
        }
        let ls = match wolfe_linesearch(problem, &w, &p, f, &g, cfg) {
            Ok(ls) => ls,
            Err(Error::LineSearchFail { evals: e }) => {
                evals += e;
                warn!("line search failed; retrying with steepest descent");
                hist.clear();
                p = steepest(&g);
                match wolfe_linesearch(problem, &w, &p, f, &g, cfg) {
                    Ok(ls) => ls,
                    Err(Error::LineSearchFail { evals: e }) => {
                        evals += e;
                        status = Status::LineSearchFail;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        evals += ls.evals;
        let s: Vec<f64> = p.iter().map(|v| ls.alpha * v).collect();
        let y: Vec<f64> = ls.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        for (wi, si) in w.iter_mut().zip(&s) {
            *wi += si;
        }
        f = ls.f;
        g = ls.g;
        if !(f.is_finite() && all_finite(&g)) {
            status = Status::NumericalFail;
            break;
        }
        if all_finite(&s) && all_finite(&y) {
            hist.push_pair(&s, &y, None)?;
        }
        trace.push(TraceRow { k: trace.len() + 1, f, gnorm: norm_inf(&g), step: ls.alpha, accepted: true });
    }
    let report = SolveReport {
        status,
        iterations: trace.len(),
        gnorm_final: norm_inf(&g),
        f_final: f,
        w,
        f_evals: evals,
        g_evals: evals,
        skip_count: hist.skip_count(),
        trace,
    };
    Ok((report, hist))
}

/// Smallest `sigma >= sigma0` (to bisection accuracy) with `||s(sigma)|| <= delta`.
fn trust_region_step(
    eig: &crate::spectral::ImplicitEigen,
    g: &[f64],
    delta: f64,
) -> Result<(Vec<f64>, f64)> {
    let sigma0 = eig.min_shift(PD_MARGIN);
    let first = shifted_solve_with(eig, g, sigma0)?;
    if norm2(&first.s) <= delta {
        return Ok((first.s, sigma0));
    }
    // ||(B + sigma I)^{-1} g|| <= ||g|| / (lambda_min + sigma), so this is feasible
    let mut hi = sigma0 + norm2(g) / delta;
    let mut lo = sigma0;
    let mut best = shifted_solve_with(eig, g, hi)?.s;
    for _ in 0..SHIFT_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let s = shifted_solve_with(eig, g, mid)?.s;
        if norm2(&s) <= delta {
            hi = mid;
            best = s;
        } else {
            lo = mid;
        }
    }
    Ok((best, hi))
}

/// Trust-region iteration with steps from shifted systems `(B + sigma I) s = -g`.
pub fn minimize_trustregion<P: Problem + ?Sized>(problem: &P, w0: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    check_start(problem, w0, cfg)?;
    let form = if cfg.policy == PairPolicy::EqualsS { DirectForm::Psb } else { DirectForm::General };
    let mut hist = LmHistory::new(w0.len(), cfg.memory, Mode::Direct, cfg.policy);
    let mut w = w0.to_vec();
    let (mut f, mut g) = problem.eval(&w)?;
    let mut evals = 1;
    let mut delta = cfg.tr_delta0;
    let mut trace = Vec::new();
    let mut status = Status::MaxIter;
    if !(f.is_finite() && all_finite(&g)) {
        status = Status::NumericalFail;
    }

    while status == Status::MaxIter {
        if norm_inf(&g) <= cfg.tol_g {
            status = Status::Converged;
            break;
        }
        if trace.len() >= cfg.max_iter {
            break;
        }
        let cd = match CompactDirect::new(&hist, form) {
            Ok(cd) => cd,
            Err(Error::SingularTriangular { .. }) => {
                debug!("direct middle matrix is singular; resetting history");
                hist.clear();
                CompactDirect::new(&hist, form)?
            }
            Err(e) => return Err(e),
        };
        let eig = cd.implicit_eig()?;
        let (s, sigma) = trust_region_step(&eig, &g, delta)?;
        let snorm = norm2(&s);
        let pred = -(dot(&g, &s) + 0.5 * quadratic_form(&cd, &s)?);
        drop(cd);

        let trial: Vec<f64> = w.iter().zip(&s).map(|(a, b)| a + b).collect();
        let (f_new, g_new) = problem.eval(&trial)?;
        evals += 1;
        let finite = f_new.is_finite() && all_finite(&g_new);
        let rho = if finite && pred > 0.0 { (f - f_new) / pred } else { f64::NEG_INFINITY };
        let accepted = rho >= cfg.tr_eta && f_new < f;

        if finite {
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            hist.push_pair(&s, &y, None)?;
        }
        if rho < 0.25 {
            delta *= 0.25;
        } else if rho > 0.75 && snorm >= 0.9 * delta {
            delta *= 2.0;
        }
        delta = delta.clamp(TR_RADIUS_MIN, TR_RADIUS_MAX);
        if accepted {
            w = trial;
            f = f_new;
            g = g_new;
        }
        trace.push(TraceRow { k: trace.len() + 1, f, gnorm: norm_inf(&g), step: sigma, accepted });
        if !finite && delta <= TR_RADIUS_MIN {
            status = Status::NumericalFail;
        }
    }
    Ok(SolveReport {
        status,
        iterations: trace.len(),
        gnorm_final: norm_inf(&g),
        f_final: f,
        w,
        f_evals: evals,
        g_evals: evals,
        skip_count: hist.skip_count(),
        trace,
    })
}

/// Search direction used by the stochastic loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StochasticMode {
    /// `p = -g`
    Sgd,
    /// Compact inverse with `v = s`, `H0 = I`.
    CompactS,
    /// Compact inverse with `v = y`, `H0 = I`.
    CompactY,
}

impl StochasticMode {
    pub fn name(self) -> &'static str {
        match self {
            StochasticMode::Sgd => "sgd",
            StochasticMode::CompactS => "compact-s",
            StochasticMode::CompactY => "compact-y",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [StochasticMode::Sgd, StochasticMode::CompactS, StochasticMode::CompactY]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

/// Full-data training loss and holdout accuracy after an epoch (epoch 0 is the start).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub holdout_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochasticReport {
    pub status: Status,
    pub w: Vec<f64>,
    pub steps: usize,
    pub skip_count: usize,
    pub epochs: Vec<EpochRow>,
}

/// Fixed-step mini-batch iteration `w <- w + alpha p`, `p = -H g_batch`.
pub fn minimize_stochastic<P: BatchProblem + ?Sized>(
    problem: &P,
    w0: &[f64],
    cfg: &SolverConfig,
    mode: StochasticMode,
) -> Result<StochasticReport> {
    cfg.validate()?;
    check_len(problem.dim(), w0)?;
    let policy = match mode {
        StochasticMode::CompactY => PairPolicy::EqualsY,
        _ => PairPolicy::EqualsS,
    };
    let mut hist = LmHistory::new(w0.len(), cfg.memory, Mode::Inverse, policy).with_gamma_policy(GammaPolicy::Fixed(1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..problem.n_samples()).collect();
    let mut w = w0.to_vec();
    let mut steps = 0;

    let row = |epoch: usize, w: &[f64]| -> Result<EpochRow> {
        Ok(EpochRow { epoch, train_loss: problem.eval(w)?.0, holdout_acc: problem.holdout_accuracy(w)? })
    };
    let mut epochs = vec![row(0, &w)?];
    let mut status = if epochs[0].train_loss.is_finite() { Status::Completed } else { Status::NumericalFail };

    'outer: for epoch in 1..=cfg.epochs {
        if status != Status::Completed {
            break;
        }
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (fb, g) = problem.batch_eval(&w, batch)?;
            if !(fb.is_finite() && all_finite(&g)) {
                status = Status::NumericalFail;
                break 'outer;
            }
            let p: Vec<f64> = if mode == StochasticMode::Sgd || hist.is_empty() {
                g.iter().map(|v| -v).collect()
            } else {
                let hg = CompactInverse::new(&hist, InverseForm::General)?.hv_product(&g)?;
                hg.into_iter().map(|v| -v).collect()
            };
            let s: Vec<f64> = p.iter().map(|v| cfg.alpha * v).collect();
            for (wi, si) in w.iter_mut().zip(&s) {
                *wi += si;
            }
            steps += 1;
            if mode != StochasticMode::Sgd {
                let (_, g_new) = problem.batch_eval(&w, batch)?;
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if all_finite(&y) && all_finite(&s) {
                    hist.push_pair(&s, &y, None)?;
                }
            }
        }
        let r = row(epoch, &w)?;
        if !r.train_loss.is_finite() {
            status = Status::NumericalFail;
        }
        epochs.push(r);
    }
    Ok(StochasticReport { status, w, steps, skip_count: hist.skip_count(), epochs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problems::{make_synthetic_multiclass, Quadratic, Rosenbrock};

    #[test]
    fn unit_step_on_sphere() {
        let q = Quadratic::identity(3);
        let w = [1.0, 0.0, 0.0];
        let (f0, g0) = q.eval(&w).unwrap();
        let r = wolfe_linesearch(&q, &w, &[-1.0, 0.0, 0.0], f0, &g0, &SolverConfig::default()).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.f, 0.0);
        assert_eq!(r.evals, 1);
    }

    #[test]
    fn wolfe_conditions_hold_on_ill_conditioned_quadratic() {
        let q = Quadratic::new(DenseMatrix::diag(&[1.0, 100.0]), vec![0.0, 0.0]).unwrap();
        let cfg = SolverConfig::default();
        let w = [1.0, 1.0];
        let (f0, g0) = q.eval(&w).unwrap();
        let p: Vec<f64> = g0.iter().map(|v| -v).collect();
        let r = wolfe_linesearch(&q, &w, &p, f0, &g0, &cfg).unwrap();
        let slope0 = dot(&p, &g0);
        assert!(r.f <= f0 + cfg.wolfe_c1 * r.alpha * slope0);
        assert!(dot(&p, &r.g).abs() <= cfg.wolfe_c2 * slope0.abs());
    }

    #[test]
    fn non_descent_rejected() {
        let q = Quadratic::identity(2);
        let (f0, g0) = q.eval(&[1.0, 0.0]).unwrap();
        let r = wolfe_linesearch(&q, &[1.0, 0.0], &[1.0, 0.0], f0, &g0, &SolverConfig::default());
        assert!(matches!(r, Err(Error::NotDescent { .. })));
    }

    #[test]
    fn sphere_converges_quickly() {
        let q = Quadratic::identity(10);
        let r = minimize_linesearch(&q, &[1.0; 10], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.iterations <= 3, "{}", r.iterations);
        assert!(r.gnorm_final <= 1e-5);
    }

    #[test]
    fn rosenbrock_small_both_policies() {
        let p = Rosenbrock::new(8).unwrap();
        for policy in [PairPolicy::EqualsS, PairPolicy::EqualsY] {
            let cfg = SolverConfig { policy, ..SolverConfig::default() };
            let r = minimize_linesearch(&p, &p.start(), &cfg).unwrap();
            assert_eq!(r.status, Status::Converged, "{policy:?}");
            assert_eq!(r.trace.len(), r.iterations);
            assert!(r.f_evals >= r.iterations);
            for pair in r.trace.windows(2) {
                assert!(pair[1].f < pair[0].f);
            }
        }
    }

    #[test]
    fn trust_region_sphere_and_spd() {
        let q = Quadratic::identity(4);
        let cfg = SolverConfig { tr_delta0: 100.0, ..SolverConfig::default() };
        let r = minimize_trustregion(&q, &[1.0, -2.0, 0.5, 3.0], &cfg).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 1);

        let q = Quadratic::random_spd(20, 3);
        let r = minimize_trustregion(&q, &[0.0; 20], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Converged);
        assert!(r.gnorm_final <= 1e-5);
    }

    #[test]
    fn trust_region_handles_saddle() {
        // f = 1/2 (x^2 - y^2) + y^4 / 4 has a saddle at the origin
        struct Saddle;
        impl Problem for Saddle {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
                let (x, y) = (w[0], w[1]);
                Ok((0.5 * (x * x - y * y) + 0.25 * y.powi(4), vec![x, -y + y.powi(3)]))
            }
        }
        let cfg = SolverConfig { policy: PairPolicy::EqualsS, ..SolverConfig::default() };
        let r = minimize_trustregion(&Saddle, &[1.0, 1e-3], &cfg).unwrap();
        assert_eq!(r.status, Status::Converged);
        let mut last = f64::INFINITY;
        let mut saw_shift = false;
        for row in &r.trace {
            if row.accepted {
                assert!(row.f < last);
                last = row.f;
            }
            saw_shift |= row.step > 0.0;
        }
        assert!(saw_shift);
        assert!((r.w[1].abs() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stochastic_zero_step_is_inert() {
        let prob = make_synthetic_multiclass(120, 4, 3, 1, 3.0).unwrap();
        for mode in [StochasticMode::Sgd, StochasticMode::CompactS, StochasticMode::CompactY] {
            let cfg = SolverConfig { alpha: 0.0, batch_size: 16, epochs: 3, memory: 1, ..SolverConfig::default() };
            let r = minimize_stochastic(&prob, &[0.0; 12], &cfg, mode).unwrap();
            assert!(r.w.iter().all(|&v| v == 0.0));
            assert!(r.epochs.iter().all(|e| e.train_loss == r.epochs[0].train_loss));
        }
    }

    #[test]
    fn sgd_decreases_on_separable_data() {
        let prob = make_synthetic_multiclass(600, 4, 2, 7, 6.0).unwrap();
        let cfg = SolverConfig { batch_size: 32, epochs: 5, memory: 1, seed: 3, ..SolverConfig::default() };
        let r = minimize_stochastic(&prob, &[0.0; 8], &cfg, StochasticMode::Sgd).unwrap();
        for pair in r.epochs.windows(2) {
            assert!(pair[1].train_loss < pair[0].train_loss);
        }
        let again = minimize_stochastic(&prob, &[0.0; 8], &cfg, StochasticMode::Sgd).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig { wolfe_c1: 0.95, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
        assert!(SolverConfig { memory: 0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
