//! Trace-based invariant test for equality of two high-dimensional covariance
//! matrices, with the likelihood-ratio-type competitors, a reproducible Monte
//! Carlo harness and independent numerical oracles for the null law.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beta;
pub mod cholesky;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod matrix;
pub mod null_law;
pub mod oracle;
pub mod rng;
pub mod sim;

pub use beta::{beta_spectrum, beta_spectrum_with, BetaSpectrum, DEFAULT_CLAMP_EPS};
pub use eigen::EigenMethod;
pub use engine::{
    decide, k_statistics, mlrt_statistics, run_test, truncated_sums, Decision, MlrtConfig, Sidedness,
    TestOptions, TestReport, TruncatedSums,
};
pub use error::{Error, Result};
pub use matrix::{scatter, CenteringMode, Matrix, ObservationMatrix, ScatterMatrix};
pub use null_law::{
    centering_terms, lsd_density, mean_variance, spectral_params, KurtosisSpec, NullLaw, Regime, SpectralParams,
};
