//! Command bodies. Each `*_rows` function computes a command's table so the
//! numbers can be checked without going through CSV.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::time::Instant;

use compactqn::linalg::dense_sym_eigenvalues;
use compactqn::oracle::{verification_report, ErrorRow, VerifyMode};
use compactqn::problems::{
    cp_rel_err, make_synthetic_multiclass, random_cp_tensor, CpModel, CpProblem, Problem, Quadratic, Rosenbrock,
    Tensor3,
};
use compactqn::solvers::{
    minimize_linesearch, minimize_linesearch_with_history, minimize_stochastic, minimize_trustregion, EpochRow,
    SolveReport,
};
use compactqn::{CompactInverse, InverseForm, PairPolicy, SolverConfig, Status, StochasticMode};
use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv::{fmt_f64, CsvWriter};
use crate::{
    usage, CliError, CliResult, EigBenchArgs, LogisticArgs, MinimizeArgs, Sinks, TensorArgs, VerifyArgs, EXIT_NOT_CONVERGED,
    EXIT_OK, EXIT_TOLERANCE,
};

pub const VERIFY_TOLERANCE: f64 = 1e-10;
pub const VERIFY_MAX_DIM: usize = 2000;
pub const TENSOR_MAX_ENTRIES: usize = 1_000_000;
pub const FIT_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_SEPARATION: f64 = 4.0;

fn parse_list(s: &str, what: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad {what} entry {t:?}"))))
        .collect()
}

fn thread_pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    if jobs == 0 {
        return usage("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

pub fn verify_rows(args: &VerifyArgs) -> CliResult<Vec<ErrorRow>> {
    let d = args.d.unwrap_or(8);
    let mode_name = args.mode.as_deref().unwrap_or("greenstadt");
    let Some(mode) = VerifyMode::parse(mode_name) else {
        return usage(format!("unknown mode {mode_name:?}"));
    };
    if d == 0 || d > VERIFY_MAX_DIM {
        return usage(format!("--d must be in 1..={VERIFY_MAX_DIM}"));
    }
    Ok(verification_report(mode, d, args.seed.unwrap_or(1), args.k_max.unwrap_or(8))?)
}

pub fn verify(args: &VerifyArgs, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    let rows = verify_rows(args)?;
    let mut w = CsvWriter::new(sinks.table, &["k", "error1", "error2"])?;
    let mut worst: f64 = 0.0;
    for r in &rows {
        w.row(&[r.k.to_string(), fmt_f64(r.error1), fmt_f64(r.error2)])?;
        worst = worst.max(r.error1).max(r.error2);
        if !(r.error1.is_finite() && r.error2.is_finite()) {
            worst = f64::INFINITY;
        }
    }
    writeln!(sinks.summary, "rows={} max_error={}", rows.len(), fmt_f64(worst))?;
    Ok(if worst <= VERIFY_TOLERANCE { EXIT_OK } else { EXIT_TOLERANCE })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigBenchRow {
    pub d: usize,
    /// `None` above the dense cap.
    pub t_dense_s: Option<f64>,
    pub t_implicit_s: f64,
    pub err: Option<f64>,
}

fn median_time(repeats: usize, mut f: impl FnMut() -> CliResult<()>) -> CliResult<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn eig_bench_rows(args: &EigBenchArgs) -> CliResult<Vec<EigBenchRow>> {
    let d_list = parse_list(args.d_list.as_deref().unwrap_or("8,16,32,64,128,256,512,1024,2048,4096,8192"), "d_list")?;
    let l = args.l.unwrap_or(5);
    let iters = args.iters.unwrap_or(10);
    let repeats = args.repeats.unwrap_or(5);
    let dense_max = args.dense_max.unwrap_or(2048);
    if l == 0 || repeats == 0 {
        return usage("--l and --repeats must be at least 1");
    }
    let mut rows = Vec::new();
    for &d in &d_list {
        let problem = Rosenbrock::new(d).map_err(|_| CliError::Usage(format!("dimension {d} must be even and positive")))?;
        let cfg = SolverConfig { memory: l, max_iter: iters, ..SolverConfig::default() };
        let (_, history) = minimize_linesearch_with_history(&problem, &problem.start(), &cfg)?;
        let compact = CompactInverse::new(&history, InverseForm::Bfgs)?;

        let mut implicit = Vec::new();
        let t_implicit_s = median_time(repeats, || {
            implicit = compact.implicit_eig()?.spectrum();
            Ok(())
        })?;
        let (t_dense_s, err) = if d <= dense_max {
            let dense_matrix = compact.materialize()?;
            let mut dense = Vec::new();
            let t = median_time(repeats, || {
                dense = dense_sym_eigenvalues(&dense_matrix)?;
                Ok(())
            })?;
            let sq: f64 = dense.iter().zip(&implicit).map(|(a, b)| (a - b) * (a - b)).sum();
            (Some(t), Some(sq.sqrt() / d as f64))
        } else {
            (None, None)
        };
        rows.push(EigBenchRow { d, t_dense_s, t_implicit_s, err });
    }
    Ok(rows)
}

pub fn eig_bench(args: &EigBenchArgs, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    let rows = eig_bench_rows(args)?;
    let mut w = CsvWriter::new(sinks.table, &["d", "t_dense_s", "t_implicit_s", "err"])?;
    let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), fmt_f64);
    for r in &rows {
        w.row(&[r.d.to_string(), opt(r.t_dense_s), fmt_f64(r.t_implicit_s), opt(r.err)])?;
    }
    for pair in rows.windows(2) {
        if pair[0].d >= 1024 && pair[1].d == 2 * pair[0].d {
            let ratio = pair[1].t_implicit_s / pair[0].t_implicit_s;
            if ratio > 2.5 {
                warn!("implicit eig time grew {ratio:.2}x from d={} to d={}", pair[0].d, pair[1].d);
                writeln!(sinks.summary, "warning: implicit time ratio {ratio:.2} between d={} and d={}", pair[0].d, pair[1].d)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn parse_policy(s: &str) -> CliResult<PairPolicy> {
    match s {
        "s" => Ok(PairPolicy::EqualsS),
        "y" => Ok(PairPolicy::EqualsY),
        other => usage(format!("unknown policy {other:?} (expected s or y)")),
    }
}

pub fn minimize_report(args: &MinimizeArgs) -> CliResult<SolveReport> {
    let d = args.d.unwrap_or(128);
    let cfg = SolverConfig {
        memory: args.l.unwrap_or(5),
        tol_g: args.tol.unwrap_or(1e-5),
        max_iter: args.max_iter.unwrap_or(5000),
        policy: parse_policy(args.policy.as_deref().unwrap_or("s"))?,
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let problem: Box<dyn Problem> = match args.problem.as_deref().unwrap_or("rosenbrock") {
        "rosenbrock" => Box::new(Rosenbrock::new(d).map_err(|_| CliError::Usage("rosenbrock needs an even --d".into()))?),
        "quadratic" if d > 0 => Box::new(Quadratic::random_spd(d, args.seed.unwrap_or(1))),
        other => return usage(format!("unknown problem {other:?} (expected rosenbrock or quadratic)")),
    };
    let w0 = match args.problem.as_deref().unwrap_or("rosenbrock") {
        "rosenbrock" => Rosenbrock::new(d)?.start(),
        _ => vec![0.0; d],
    };
    let report = match args.strategy.as_deref().unwrap_or("linesearch") {
        "linesearch" => minimize_linesearch(problem.as_ref(), &w0, &cfg)?,
        "trustregion" => minimize_trustregion(problem.as_ref(), &w0, &cfg)?,
        other => return usage(format!("unknown strategy {other:?} (expected linesearch or trustregion)")),
    };
    Ok(report)
}

pub fn minimize(args: &MinimizeArgs, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    let report = minimize_report(args)?;
    let mut w = CsvWriter::new(sinks.table, &["k", "f", "gnorm", "step", "accepted"])?;
    for t in &report.trace {
        w.row(&[t.k.to_string(), fmt_f64(t.f), fmt_f64(t.gnorm), fmt_f64(t.step), u8::from(t.accepted).to_string()])?;
    }
    writeln!(
        sinks.summary,
        "status={} iterations={} f_evals={} f={} gnorm={} skipped_pairs={}",
        report.status.name(),
        report.iterations,
        report.f_evals,
        fmt_f64(report.f_final),
        fmt_f64(report.gnorm_final),
        report.skip_count
    )?;
    Ok(if report.status == Status::Converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorRow {
    pub instance: usize,
    pub f_final: f64,
    pub rel_err: f64,
    /// Summed over all restarts.
    pub f_evals: usize,
    pub converged: bool,
}

struct TensorJob {
    model: CpModel,
    noise: f64,
    restarts: usize,
    cfg: SolverConfig,
    seed: u64,
}

impl TensorJob {
    fn rng(&self, instance: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(instance as u64);
        rng
    }

    fn tensor(&self, rng: &mut ChaCha8Rng, input: Option<&Tensor3>) -> CliResult<Tensor3> {
        Ok(match input {
            Some(t) => t.clone(),
            None => random_cp_tensor(&self.model, self.noise, rng)?,
        })
    }

    fn run(&self, instance: usize, input: Option<&Tensor3>) -> CliResult<TensorRow> {
        let mut rng = self.rng(instance);
        let tensor = self.tensor(&mut rng, input)?;
        let problem = CpProblem::new(self.model, tensor)?;
        let mut best: Option<SolveReport> = None;
        let mut f_evals = 0;
        for _ in 0..self.restarts {
            let w0 = self.model.random_point(&mut rng);
            let r = minimize_linesearch(&problem, &w0, &self.cfg)?;
            f_evals += r.f_evals;
            if best.as_ref().is_none_or(|b| r.f_final < b.f_final) {
                best = Some(r);
            }
        }
        let best = best.expect("at least one restart");
        Ok(TensorRow {
            instance,
            f_final: best.f_final,
            rel_err: cp_rel_err(&problem.model, &problem.tensor, &best.w)?,
            f_evals,
            converged: best.status == Status::Converged,
        })
    }
}

pub fn tensor_rows(args: &TensorArgs) -> CliResult<Vec<TensorRow>> {
    let input = match &args.input {
        Some(path) => Some(Tensor3::read_from(BufReader::new(File::open(path)?))?),
        None => None,
    };
    let dims = match (&input, &args.dims) {
        (Some(t), None) => t.dims().to_vec(),
        (_, Some(s)) => parse_list(s, "dims")?,
        (None, None) => vec![10, 10, 10],
    };
    let Ok(shape) = <[usize; 3]>::try_from(dims) else {
        return usage("--dims needs exactly three sizes");
    };
    if shape.contains(&0) || shape.iter().product::<usize>() > TENSOR_MAX_ENTRIES {
        return usage(format!("tensor sizes must be positive with at most {TENSOR_MAX_ENTRIES} entries"));
    }
    let rank = args.rank.unwrap_or(2);
    if rank == 0 {
        return usage("--rank must be at least 1");
    }
    let restarts = args.restarts.unwrap_or(3);
    if restarts == 0 {
        return usage("--restarts must be at least 1");
    }
    let cfg = SolverConfig {
        memory: args.l.unwrap_or(5),
        tol_g: args.tol.unwrap_or(1e-5),
        max_iter: args.max_iter.unwrap_or(5000),
        ..SolverConfig::default()
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let job = TensorJob { model: CpModel::new(shape, rank)?, noise: args.noise.unwrap_or(0.0), restarts, cfg, seed: args.seed.unwrap_or(1) };
    if let Some(t) = &input {
        if t.dims() != shape {
            return usage("--dims does not match the input tensor");
        }
    }
    let n = args.n_instances.unwrap_or(50);

    if let Some(path) = &args.write_tensor {
        let t = job.tensor(&mut job.rng(0), input.as_ref())?;
        let mut file = BufWriter::new(File::create(path)?);
        t.write_to(&mut file)?;
    }

    let pool = thread_pool(args.jobs.unwrap_or(1))?;
    pool.install(|| (0..n).into_par_iter().map(|i| job.run(i, input.as_ref())).collect())
}

fn median_usize(values: &mut [usize]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2]) as f64
    }
}

pub fn tensor(args: &TensorArgs, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    let rows = tensor_rows(args)?;
    let mut w = CsvWriter::new(sinks.table, &["instance", "f_final", "rel_err", "f_evals", "converged"])?;
    for r in &rows {
        w.row(&[
            r.instance.to_string(),
            fmt_f64(r.f_final),
            fmt_f64(r.rel_err),
            r.f_evals.to_string(),
            u8::from(r.converged).to_string(),
        ])?;
    }
    let n = rows.len().max(1) as f64;
    let mut evals: Vec<usize> = rows.iter().map(|r| r.f_evals).collect();
    writeln!(
        sinks.summary,
        "instances={} converged_fraction={} fit_fraction={} median_f_evals={}",
        rows.len(),
        fmt_f64(rows.iter().filter(|r| r.converged).count() as f64 / n),
        fmt_f64(rows.iter().filter(|r| r.rel_err <= FIT_THRESHOLD).count() as f64 / n),
        fmt_f64(median_usize(&mut evals)),
    )?;
    Ok(EXIT_OK)
}

struct LogisticSetup {
    n: usize,
    p: usize,
    classes: usize,
    separation: f64,
    cfg: SolverConfig,
}

impl LogisticSetup {
    fn from_args(args: &LogisticArgs) -> CliResult<Self> {
        let (n, p, classes) = (args.n.unwrap_or(12288), args.p.unwrap_or(64), args.classes.unwrap_or(10));
        if n == 0 || p == 0 || classes == 0 {
            return usage("--n, --p and --classes must be positive");
        }
        let cfg = SolverConfig {
            memory: args.l.unwrap_or(1),
            alpha: args.alpha.unwrap_or(0.5),
            batch_size: args.batch.unwrap_or(256),
            epochs: args.epochs.unwrap_or(10),
            ..SolverConfig::default()
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self { n, p, classes, separation: args.separation.unwrap_or(DEFAULT_SEPARATION), cfg })
    }

    fn run(&self, seed: u64, mode: StochasticMode) -> CliResult<Vec<EpochRow>> {
        let problem = make_synthetic_multiclass(self.n, self.p, self.classes, seed, self.separation)?;
        let cfg = SolverConfig { seed, ..self.cfg.clone() };
        let w0 = vec![0.0; problem.dim()];
        Ok(minimize_stochastic(&problem, &w0, &cfg, mode)?.epochs)
    }
}

fn parse_mode(s: &str) -> CliResult<StochasticMode> {
    StochasticMode::parse(s).map_or_else(|| usage(format!("unknown mode {s:?} (expected sgd, compact-s or compact-y)")), Ok)
}

pub fn logistic_rows(args: &LogisticArgs) -> CliResult<Vec<EpochRow>> {
    let setup = LogisticSetup::from_args(args)?;
    let mode = parse_mode(args.mode.as_deref().unwrap_or("compact-y"))?;
    setup.run(args.seed.unwrap_or(1), mode)
}

/// Final-epoch result of one (seed, mode) run in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub seed: u64,
    pub mode: StochasticMode,
    pub train_loss: f64,
    pub holdout_acc: f64,
}

pub const SWEEP_MODES: [StochasticMode; 3] = [StochasticMode::Sgd, StochasticMode::CompactS, StochasticMode::CompactY];

pub fn logistic_sweep(args: &LogisticArgs, seeds: usize) -> CliResult<Vec<SweepRow>> {
    let setup = LogisticSetup::from_args(args)?;
    let first = args.seed.unwrap_or(1);
    let runs: Vec<(u64, StochasticMode)> =
        (0..seeds as u64).flat_map(|i| SWEEP_MODES.map(|m| (first + i, m))).collect();
    let pool = thread_pool(args.jobs.unwrap_or(1))?;
    pool.install(|| {
        runs.par_iter()
            .map(|&(seed, mode)| {
                let last = *setup.run(seed, mode)?.last().expect("epoch 0 row");
                Ok(SweepRow { seed, mode, train_loss: last.train_loss, holdout_acc: last.holdout_acc })
            })
            .collect()
    })
}

pub fn logistic(args: &LogisticArgs, sinks: &mut Sinks<'_>) -> CliResult<u8> {
    if let Some(seeds) = args.sweep {
        if args.mode.is_some() {
            return usage("--sweep runs every mode; drop --mode");
        }
        let rows = logistic_sweep(args, seeds)?;
        let mut w = CsvWriter::new(sinks.table, &["seed", "mode", "train_loss", "holdout_acc"])?;
        for r in &rows {
            w.row(&[r.seed.to_string(), r.mode.name().into(), fmt_f64(r.train_loss), fmt_f64(r.holdout_acc)])?;
        }
        writeln!(sinks.summary, "{:<10} {:>12} {:>12}", "mode", "mean_loss", "mean_acc")?;
        for mode in SWEEP_MODES {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let k = sel.len().max(1) as f64;
            let loss = sel.iter().map(|r| r.train_loss).sum::<f64>() / k;
            let acc = sel.iter().map(|r| r.holdout_acc).sum::<f64>() / k;
            writeln!(sinks.summary, "{:<10} {:>12.6} {:>12.4}", mode.name(), loss, acc)?;
        }
        let wins = rows
            .chunks(SWEEP_MODES.len())
            .filter(|c| c[2].train_loss < c[0].train_loss)
            .count();
        writeln!(sinks.summary, "compact-y below sgd in {wins} of {seeds} seeds")?;
        return Ok(EXIT_OK);
    }
    let rows = logistic_rows(args)?;
    let mut w = CsvWriter::new(sinks.table, &["epoch", "train_loss", "holdout_acc"])?;
    for r in &rows {
        w.row(&[r.epoch.to_string(), fmt_f64(r.train_loss), fmt_f64(r.holdout_acc)])?;
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    writeln!(
        sinks.summary,
        "initial_loss={} final_loss={} final_acc={}",
        fmt_f64(first.train_loss),
        fmt_f64(last.train_loss),
        fmt_f64(last.holdout_acc)
    )?;
    Ok(if last.train_loss < first.train_loss { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
