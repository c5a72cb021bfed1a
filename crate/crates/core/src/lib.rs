//! Power-analysis simulation engine for two-sample tests.
//!
//! Estimates statistical power curves γ*(n) by Monte-Carlo simulation, drawing
//! replicates either from known distributions (resampling), from a fixed pool
//! (bootstrap subsampling), or from trained generative models (synthetic
//! sampling), and running two-sample tests (Welch/Student t, Hotelling T²,
//! kernel MMD variants) at each sample size.
//!
//! The numeric foundation ([`linalg`], [`special`], [`autodiff`], [`twosample`],
//! [`pca`]) is generic over the scalar type through the [`scalar::Real`] trait;
//! the orchestration layers ([`gan`], [`sampling`], [`power`], [`neuro`]) and
//! the type aliases at this crate root fix the scalar to `f64`, which is what
//! every pipeline computes in.

// Validation deliberately writes `!(x > 0)` rather than `x <= 0`: the negated
// form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod error;
pub mod gan;
pub mod linalg;
pub mod neuro;
pub mod pca;
pub mod power;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod special;
pub mod twosample;

pub use error::{Error, Result};

/// Scalar type used by every pipeline.
pub type Real = f64;

/// Dense row-major matrix of [`Real`]; the `n×d` sample-matrix unit passed to
/// every test and sampler.
pub type Matrix = linalg::Mat<Real>;

/// Computation graph over [`Real`] payloads.
pub type Graph = autodiff::Graph<Real>;

/// Gradients per trainable parameter of a [`Graph`].
pub type GradientSet = autodiff::GradientSet<Real>;

/// Two-sample test outcome over [`Real`].
pub type TestResult = twosample::TestResult<Real>;

/// Gaussian-kernel specification over [`Real`].
pub type KernelSpec = twosample::KernelSpec<Real>;

/// Fitted principal-component model over [`Real`].
pub type PcaModel = pca::PcaModel<Real>;
