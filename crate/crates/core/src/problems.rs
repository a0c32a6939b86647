//! Objectives: even Rosenbrock, softmax multiclass logistic loss, three-way
//! CP tensor fitting, and a plain quadratic used by tests.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{check_len, dot, norm2, DenseMatrix};

/// A smooth objective with analytic gradient.
pub trait Problem: Sync {
    fn dim(&self) -> usize;
    /// Returns `(f(w), grad f(w))`.
    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)>;
}

/// An objective that is a mean over samples and supports mini-batches.
pub trait BatchProblem: Problem {
    fn n_samples(&self) -> usize;
    /// Mean loss and gradient over the listed samples.
    fn batch_eval(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)>;
    /// Fraction of held-out samples classified correctly.
    fn holdout_accuracy(&self, w: &[f64]) -> Result<f64>;
}

/// Worst relative mismatch between the analytic gradient and central
/// differences with step `h_rel * max(1, |w_i|)`.
pub fn gradient_check<P: Problem + ?Sized>(problem: &P, w: &[f64], h_rel: f64) -> Result<f64> {
    let (_, g) = problem.eval(w)?;
    let mut fd = vec![0.0; w.len()];
    let mut probe = w.to_vec();
    for i in 0..w.len() {
        let h = h_rel * w[i].abs().max(1.0);
        probe[i] = w[i] + h;
        let fp = problem.eval(&probe)?.0;
        probe[i] = w[i] - h;
        let fm = problem.eval(&probe)?.0;
        probe[i] = w[i];
        fd[i] = (fp - fm) / (2.0 * h);
    }
    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let scale = norm2(&g).max(norm2(&fd)).max(1e-12);
    Ok(norm2(&diff) / scale)
}

/// `f(w) = 1/2 w^T A w - b^T w`
#[derive(Debug, Clone)]
pub struct Quadratic {
    a: DenseMatrix,
    b: Vec<f64>,
}

impl Quadratic {
    pub fn new(a: DenseMatrix, b: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::ShapeMismatch("quadratic needs a square matrix".into()));
        }
        check_len(a.rows(), &b)?;
        Ok(Self { a, b })
    }

    /// `1/2 ||w||^2`
    pub fn identity(d: usize) -> Self {
        Self { a: DenseMatrix::identity(d), b: vec![0.0; d] }
    }

    /// `A = I + G^T G / d` with Gaussian `G`, and Gaussian `b`.
    pub fn random_spd(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DenseMatrix::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let gtg = g.transpose().matmul(&g).expect("square");
        let a = DenseMatrix::from_fn(d, d, |i, j| gtg[(i, j)] / d as f64 + if i == j { 1.0 } else { 0.0 });
        let b = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        Self { a, b }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.a
    }
}

impl Problem for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim(), w)?;
        let aw = self.a.matvec(w)?;
        let f = 0.5 * dot(w, &aw) - dot(&self.b, w);
        let g = aw.iter().zip(&self.b).map(|(x, y)| x - y).collect();
        Ok((f, g))
    }
}

/// `f(w) = sum_i 100 (w_{2i-1}^2 - w_{2i})^2 + (w_{2i-1} - 1)^2`
#[derive(Debug, Clone, Copy)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::OddDimension(dim));
        }
        Ok(Self { dim })
    }

    /// The customary starting point `(-1.2, 1, -1.2, 1, ...)`.
    pub fn start(&self) -> Vec<f64> {
        (0..self.dim).map(|i| if i % 2 == 0 { -1.2 } else { 1.0 }).collect()
    }
}

pub fn rosenbrock_eval(w: &[f64]) -> Result<(f64, Vec<f64>)> {
    if !w.len().is_multiple_of(2) {
        return Err(Error::OddDimension(w.len()));
    }
    let mut f = 0.0;
    let mut g = vec![0.0; w.len()];
    for i in (0..w.len()).step_by(2) {
        let (a, b) = (w[i], w[i + 1]);
        let t = a * a - b;
        let u = a - 1.0;
        f += 100.0 * t * t + u * u;
        g[i] = 400.0 * t * a + 2.0 * u;
        g[i + 1] = -200.0 * t;
    }
    Ok((f, g))
}

impl Problem for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len(self.dim, w)?;
        rosenbrock_eval(w)
    }
}

/// Row-major samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassData {
    n: usize,
    p: usize,
    classes: usize,
    x: Vec<f64>,
    labels: Vec<usize>,
}

impl MulticlassData {
    pub fn new(p: usize, classes: usize, x: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if p == 0 || classes == 0 {
            return Err(Error::InvalidConfig("features and classes must be positive".into()));
        }
        let n = labels.len();
        if x.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: x.len() });
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self { n, p, classes, x, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn features(&self) -> usize {
        self.p
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Length of the flattened parameter `W` (`C x p`, row-major).
    pub fn param_dim(&self) -> usize {
        self.classes * self.p
    }

    fn scores(&self, w: &[f64], i: usize) -> Vec<f64> {
        let x = self.sample(i);
        (0..self.classes).map(|c| dot(&w[c * self.p..(c + 1) * self.p], x)).collect()
    }

    /// Fraction of samples whose largest score matches the label.
    pub fn accuracy(&self, w: &[f64]) -> Result<f64> {
        check_len(self.param_dim(), w)?;
        if self.n == 0 {
            return Ok(0.0);
        }
        let hits = (0..self.n)
            .filter(|&i| {
                let z = self.scores(w, i);
                let best = (0..self.classes).fold(0, |b, c| if z[c] > z[b] { c } else { b });
                best == self.labels[i]
            })
            .count();
        Ok(hits as f64 / self.n as f64)
    }
}

/// Mean softmax cross-entropy over `batch` (all samples when `None`).
pub fn multiclass_eval(data: &MulticlassData, w: &[f64], batch: Option<&[usize]>) -> Result<(f64, Vec<f64>)> {
    check_len(data.param_dim(), w)?;
    let all: Vec<usize>;
    let idx = match batch {
        Some(b) => b,
        None => {
            all = (0..data.n).collect();
            &all
        }
    };
    let mut g = vec![0.0; w.len()];
    if idx.is_empty() {
        return Ok((0.0, g));
    }
    let mut loss = 0.0;
    for &i in idx {
        if i >= data.n {
            return Err(Error::DimensionMismatch { expected: data.n, got: i });
        }
        let z = data.scores(w, i);
        let zmax = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let total: f64 = exps.iter().sum();
        let label = data.labels[i];
        loss += zmax + total.ln() - z[label];
        let x = data.sample(i);
        for c in 0..data.classes {
            let coef = exps[c] / total - if c == label { 1.0 } else { 0.0 };
            for (gj, xj) in g[c * data.p..(c + 1) * data.p].iter_mut().zip(x) {
                *gj += coef * xj;
            }
        }
    }
    let inv = 1.0 / idx.len() as f64;
    g.iter_mut().for_each(|v| *v *= inv);
    Ok((loss * inv, g))
}

/// Training set plus held-out set.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassProblem {
    pub train: MulticlassData,
    pub holdout: MulticlassData,
}

impl Problem for MulticlassProblem {
    fn dim(&self) -> usize {
        self.train.param_dim()
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        multiclass_eval(&self.train, w, None)
    }
}

impl BatchProblem for MulticlassProblem {
    fn n_samples(&self) -> usize {
        self.train.n()
    }

    fn batch_eval(&self, w: &[f64], batch: &[usize]) -> Result<(f64, Vec<f64>)> {
        multiclass_eval(&self.train, w, Some(batch))
    }

    fn holdout_accuracy(&self, w: &[f64]) -> Result<f64> {
        self.holdout.accuracy(w)
    }
}

/// Gaussian classes: centers `separation * N(0, I/p)`, unit-variance noise,
/// balanced labels, shuffled, then split 5/6 train and 1/6 holdout.
pub fn make_synthetic_multiclass(n: usize, p: usize, classes: usize, seed: u64, separation: f64) -> Result<MulticlassProblem> {
    if n == 0 || p == 0 || classes == 0 {
        return Err(Error::InvalidConfig("n, p and classes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = separation / (p as f64).sqrt();
    let centers: Vec<f64> = (0..classes * p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut x = Vec::with_capacity(n * p);
    for &label in &labels {
        for j in 0..p {
            x.push(centers[label * p + j] + rng.sample::<f64, _>(StandardNormal));
        }
    }
    let n_train = (n * 5).div_ceil(6);
    let (x_train, x_hold) = x.split_at(n_train * p);
    let (l_train, l_hold) = labels.split_at(n_train);
    Ok(MulticlassProblem {
        train: MulticlassData::new(p, classes, x_train.to_vec(), l_train.to_vec())?,
        holdout: MulticlassData::new(p, classes, x_hold.to_vec(), l_hold.to_vec())?,
    })
}

/// Dense three-way tensor, column-major (first index fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

const TENSOR_MAGIC: &[u8; 4] = b"CPT1";

impl Tensor3 {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let len = dims.iter().product();
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!("{} values for dims {dims:?}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(TENSOR_MAGIC)?;
        out.write_all(&3u32.to_le_bytes())?;
        for d in self.dims {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::TensorFormat(e.to_string());
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic).map_err(io)?;
        if &magic != TENSOR_MAGIC {
            return Err(Error::TensorFormat("bad magic".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word).map_err(io)?;
        let order = u32::from_le_bytes(word);
        if order != 3 {
            return Err(Error::TensorFormat(format!("order {order} is not supported")));
        }
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            input.read_exact(&mut word).map_err(io)?;
            *d = u32::from_le_bytes(word) as usize;
        }
        let len: usize = dims.iter().product();
        let mut bytes = vec![0u8; len * 8];
        input.read_exact(&mut bytes).map_err(io)?;
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let mut rest = [0u8; 1];
        if input.read(&mut rest).map_err(io)? != 0 {
            return Err(Error::TensorFormat("trailing bytes".into()));
        }
        Self::new(dims, data)
    }
}

/// Rank-`r` CP model over a `d1 x d2 x d3` tensor. The parameter vector
/// holds the factors `A`, `B`, `C`, each column-major `d_i x r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpModel {
    pub shape: [usize; 3],
    pub rank: usize,
}

impl CpModel {
    pub fn new(shape: [usize; 3], rank: usize) -> Result<Self> {
        if rank == 0 || shape.contains(&0) {
            return Err(Error::InvalidConfig("rank and dims must be positive".into()));
        }
        Ok(Self { shape, rank })
    }

    pub fn dim(&self) -> usize {
        self.shape.iter().sum::<usize>() * self.rank
    }

    fn factors<'w>(&self, w: &'w [f64]) -> [&'w [f64]; 3] {
        let [d1, d2, _] = self.shape;
        let r = self.rank;
        let (a, rest) = w.split_at(d1 * r);
        let (b, c) = rest.split_at(d2 * r);
        [a, b, c]
    }

    /// `sum_r a_r (x) b_r (x) c_r`
    pub fn reconstruct(&self, w: &[f64]) -> Result<Tensor3> {
        check_len(self.dim(), w)?;
        let [d1, d2, d3] = self.shape;
        let [a, b, c] = self.factors(w);
        let mut data = vec![0.0; d1 * d2 * d3];
        for q in 0..self.rank {
            let (aq, bq, cq) = (&a[q * d1..(q + 1) * d1], &b[q * d2..(q + 1) * d2], &c[q * d3..(q + 1) * d3]);
            for k in 0..d3 {
                for j in 0..d2 {
                    let bc = bq[j] * cq[k];
                    let base = (k * d2 + j) * d1;
                    for i in 0..d1 {
                        data[base + i] += aq[i] * bc;
                    }
                }
            }
        }
        Tensor3::new(self.shape, data)
    }

    /// Gaussian factors.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// `f = 1/2 ||T - [[A, B, C]]||_F^2` and its gradient via MTTKRP.
pub fn cp_eval(model: &CpModel, tensor: &Tensor3, w: &[f64]) -> Result<(f64, Vec<f64>)> {
    if tensor.dims != model.shape {
        return Err(Error::ShapeMismatch(format!("tensor {:?} vs model {:?}", tensor.dims, model.shape)));
    }
    check_len(model.dim(), w)?;
    let [d1, d2, d3] = model.shape;
    let r = model.rank;
    let recon = model.reconstruct(w)?;
    let resid: Vec<f64> = recon.data.iter().zip(&tensor.data).map(|(m, t)| m - t).collect();
    let f = 0.5 * dot(&resid, &resid);

    let [a, b, c] = model.factors(w);
    let mut g = vec![0.0; w.len()];
    let (ga, rest) = g.split_at_mut(d1 * r);
    let (gb, gc) = rest.split_at_mut(d2 * r);
    for q in 0..r {
        let (aq, bq, cq) = (&a[q * d1..(q + 1) * d1], &b[q * d2..(q + 1) * d2], &c[q * d3..(q + 1) * d3]);
        for k in 0..d3 {
            for j in 0..d2 {
                let e = &resid[(k * d2 + j) * d1..(k * d2 + j + 1) * d1];
                let bc = bq[j] * cq[k];
                let ea = dot(e, aq);
                for i in 0..d1 {
                    ga[q * d1 + i] += e[i] * bc;
                }
                gb[q * d2 + j] += ea * cq[k];
                gc[q * d3 + k] += ea * bq[j];
            }
        }
    }
    Ok((f, g))
}

/// `||T - [[A, B, C]]||_F / ||T||_F`
pub fn cp_rel_err(model: &CpModel, tensor: &Tensor3, w: &[f64]) -> Result<f64> {
    let (f, _) = cp_eval(model, tensor, w)?;
    let norm = tensor.frobenius_norm();
    Ok(if norm > 0.0 { (2.0 * f).sqrt() / norm } else { (2.0 * f).sqrt() })
}

/// Exact rank-`r` tensor from Gaussian factors plus `noise * N(0, 1)` per entry.
pub fn random_cp_tensor<R: Rng>(model: &CpModel, noise: f64, rng: &mut R) -> Result<Tensor3> {
    let truth = model.random_point(rng);
    let mut t = model.reconstruct(&truth)?;
    if noise != 0.0 {
        for v in t.data.iter_mut() {
            *v += noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(t)
}

/// CP fitting problem over a fixed data tensor.
#[derive(Debug, Clone)]
pub struct CpProblem {
    pub model: CpModel,
    pub tensor: Tensor3,
}

impl CpProblem {
    pub fn new(model: CpModel, tensor: Tensor3) -> Result<Self> {
        if tensor.dims != model.shape {
            return Err(Error::ShapeMismatch(format!("tensor {:?} vs model {:?}", tensor.dims, model.shape)));
        }
        Ok(Self { model, tensor })
    }
}

impl Problem for CpProblem {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn eval(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        cp_eval(&self.model, &self.tensor, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_hand_values() {
        assert_eq!(rosenbrock_eval(&[1.0; 6]).unwrap(), (0.0, vec![0.0; 6]));
        assert_eq!(rosenbrock_eval(&[0.0, 0.0]).unwrap(), (1.0, vec![-2.0, 0.0]));
        assert_eq!(Rosenbrock::new(3).unwrap_err(), Error::OddDimension(3));
        assert!(rosenbrock_eval(&[1.0; 3]).is_err());
    }

    #[test]
    fn rosenbrock_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = Rosenbrock::new(16).unwrap();
        let w: Vec<f64> = (0..16).map(|_| rng.random_range(-2.0..2.0)).collect();
        assert!(gradient_check(&p, &w, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn multiclass_uniform_loss() {
        let data = MulticlassData::new(3, 10, vec![0.5, -1.0, 2.0], vec![4]).unwrap();
        let (f, _) = multiclass_eval(&data, &vec![0.0; 30], None).unwrap();
        assert!((f - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn multiclass_hand_case() {
        let data = MulticlassData::new(1, 2, vec![1.0], vec![0]).unwrap();
        let (f, g) = multiclass_eval(&data, &[0.0, 0.0], None).unwrap();
        assert!((f - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, vec![-0.5, 0.5]);
        assert_eq!(
            MulticlassData::new(1, 2, vec![1.0], vec![2]).unwrap_err(),
            Error::LabelOutOfRange { label: 2, classes: 2 }
        );
    }

    #[test]
    fn multiclass_gradient_and_shift_invariance() {
        let prob = make_synthetic_multiclass(60, 4, 3, 9, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(gradient_check(&prob, &w, 1e-6).unwrap() < 1e-5);

        let (f0, _) = prob.eval(&w).unwrap();
        let shifted: Vec<f64> = w.iter().enumerate().map(|(i, v)| v + [0.3, -1.0, 2.0, 0.7][i % 4]).collect();
        let (f1, _) = prob.eval(&shifted).unwrap();
        assert!((f0 - f1).abs() < 1e-10);

        let batch = [0, 5, 7];
        let (fb, _) = prob.batch_eval(&w, &batch).unwrap();
        let manual: f64 = batch.iter().map(|&i| multiclass_eval(&prob.train, &w, Some(&[i])).unwrap().0).sum::<f64>() / 3.0;
        assert!((fb - manual).abs() < 1e-14);
    }

    #[test]
    fn synthetic_split_and_determinism() {
        let a = make_synthetic_multiclass(120, 5, 4, 3, 1.0).unwrap();
        let b = make_synthetic_multiclass(120, 5, 4, 3, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.train.n(), 100);
        assert_eq!(a.holdout.n(), 20);
        let mut counts = [0usize; 4];
        for &l in a.train.labels().iter().chain(a.holdout.labels()) {
            counts[l] += 1;
        }
        assert_eq!(counts, [30; 4]);
    }

    #[test]
    fn cp_scalar_case() {
        let model = CpModel::new([1, 1, 1], 1).unwrap();
        let t = Tensor3::new([1, 1, 1], vec![5.0]).unwrap();
        let (f, g) = cp_eval(&model, &t, &[1.0, 2.0, 3.0]).unwrap();
        // residual abc - t = 1
        assert_eq!(f, 0.5);
        assert_eq!(g, vec![6.0, 3.0, 2.0]);
    }

    #[test]
    fn cp_perfect_fit_and_gradient() {
        let model = CpModel::new([6, 5, 4], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = model.random_point(&mut rng);
        let t = model.reconstruct(&w).unwrap();
        let (f, g) = cp_eval(&model, &t, &w).unwrap();
        assert_eq!(f, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));

        let noisy = random_cp_tensor(&model, 0.1, &mut rng).unwrap();
        let probe = model.random_point(&mut rng);
        let prob = CpProblem::new(model, noisy).unwrap();
        assert!(gradient_check(&prob, &probe, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn cp_permutation_symmetry() {
        let model = CpModel::new([3, 4, 2], 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_cp_tensor(&model, 0.5, &mut rng).unwrap();
        let w = model.random_point(&mut rng);
        let mut swapped = Vec::new();
        let mut off = 0;
        for d in model.shape {
            swapped.extend_from_slice(&w[off + d..off + 2 * d]);
            swapped.extend_from_slice(&w[off..off + d]);
            off += 2 * d;
        }
        let f0 = cp_eval(&model, &t, &w).unwrap().0;
        let f1 = cp_eval(&model, &t, &swapped).unwrap().0;
        assert!((f0 - f1).abs() <= 1e-12 * f0);
        assert!(cp_eval(&CpModel::new([3, 4, 3], 2).unwrap(), &t, &[0.0; 20]).is_err());
    }

    #[test]
    fn tensor_roundtrip() {
        let t = Tensor3::new([2, 1, 3], vec![1.0, -2.0, 3.5, 0.0, 1e-300, f64::MAX]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CPT1");
        assert_eq!(buf.len(), 4 + 16 + 48);
        assert_eq!(Tensor3::read_from(buf.as_slice()).unwrap(), t);
        buf[0] = b'X';
        assert!(Tensor3::read_from(buf.as_slice()).is_err());
    }

    #[test]
    fn quadratic_gradient() {
        let q = Quadratic::random_spd(7, 2);
        let w: Vec<f64> = (0..7).map(|i| i as f64 * 0.3 - 1.0).collect();
        assert!(gradient_check(&q, &w, 1e-6).unwrap() < 1e-7);
    }
}
