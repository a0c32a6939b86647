//! Compact representations of limited-memory quasi-Newton matrices.
//!
//! The crate stores curvature pairs in [`LmHistory`] and exposes the inverse
//! estimate `H_k` through [`CompactInverse`] and the direct estimate `B_k`
//! through [`CompactDirect`], both without forming `d x d` matrices. Dense
//! recursions in [`oracle`] serve as ground truth, and [`solvers`] contains
//! line-search, trust-region and stochastic drivers.

pub mod direct;
pub mod error;
pub mod history;
pub mod inverse;
pub mod linalg;
pub mod oracle;
pub mod problems;
pub mod solvers;
pub mod spectral;

pub use direct::{CompactDirect, DirectForm, ShiftedSolveResult};
pub use error::{Error, Result};
pub use history::{GammaPolicy, LmHistory, Mode, PairPolicy};
pub use inverse::{CompactInverse, InverseForm, MiddleFactors};
pub use linalg::{DenseMatrix, UpperTriangular};
pub use oracle::{DenseEstimate, ErrorRow, EstimateKind, VerifyMode};
pub use problems::{BatchProblem, CpModel, MulticlassData, Problem, Tensor3};
pub use solvers::{SolveReport, SolverConfig, Status, StochasticMode, TraceRow};
pub use spectral::ImplicitEigen;
