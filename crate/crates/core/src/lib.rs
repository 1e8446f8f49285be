//! Joint moments of principal minors of Wishart random matrices.
//!
//! The crate is `no_std` (with `alloc`) and covers:
//!
//! - [`linalg`]: dense SPD kernels, leading-minor log-determinants and
//!   iterated Schur complements of block-partitioned matrices.
//! - [`specfun`]: the multivariate log-gamma function and its ratios.
//! - [`wishart`]: parameter validation, log-density, and two independent
//!   samplers (Bartlett factor and sum of Gaussian outer products).
//! - [`moments`]: closed-form log-moments of embedded principal minors and of
//!   disjoint minors when the scale matrix is block-diagonal.
//! - [`montecarlo`]: chunked, overflow-safe Monte Carlo estimators with
//!   batch-means standard errors and z-score comparison.
//! - [`gpi`]: numerical exploration of product inequalities for disjoint
//!   Wishart minors and for Gaussian coordinates.
//!
//! Everything is computed in log space. Parallelism is delegated to an
//! [`Executor`](exec::Executor); results never depend on how work is
//! scheduled, only on the seed.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod gpi;
pub mod linalg;
mod math;
pub mod moments;
pub mod montecarlo;
pub mod rng;
pub mod specfun;
pub mod wishart;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use linalg::{BlockPartition, LowerTriangular, SchurChain, SpdMatrix, SymMatrix};
pub use moments::{ExactMoment, MomentQuery};
pub use montecarlo::{ComparisonReport, McEstimate, Verdict};
pub use wishart::{Method, Regime, WishartParams};
