//! Linear Gaussian state-space models fitted for long-term prediction.
//!
//! The usual way to fit a structural time-series model is to maximize the
//! one-step-ahead likelihood. This crate also fits the hyperparameters by
//! maximizing a likelihood built from `p`-step-ahead prediction errors, and
//! compares fits through their `j`-step prediction error variances.
//!
//! Layers, bottom up:
//!
//! - [`linalg`]: small dense matrices, Cholesky, symmetric eigen.
//! - [`ssm`]: Kalman filter, horizon prediction, fixed-interval smoother.
//! - [`models`]: trend, seasonal and AR blocks and their composition.
//! - [`criteria`]: concentrated one-step and `p`-step log-likelihoods.
//! - [`optimizer`]: Nelder–Mead over log variance ratios and PARCORs.
//! - [`sweep`]: per-`p` fits, error variance tables, decompositions.
//! - [`io`] and [`cli`]: CSV input, TSV output, the `horizon-ssm` binary.
//!
//! ```
//! use horizon_ssm::criteria::{CriterionConfig, Variant};
//! use horizon_ssm::models::ModelSpec;
//! use horizon_ssm::optimizer::{fit, FitOptions};
//!
//! let y: Vec<Option<f64>> = (0..60).map(|n| Some((n as f64 * 0.3).sin() + 0.05 * n as f64)).collect();
//! let spec = ModelSpec::trend(2);
//! let cfg = CriterionConfig::new(4, Variant::Literal, spec.state_dim());
//! let fitted = fit(&spec, &y, &cfg, &FitOptions::default()).unwrap();
//! assert!(fitted.theta_hat.sigma_sq > 0.0);
//! ```
//!
//! See the `examples/` directory for complete programs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod error;
pub mod io;
pub mod linalg;
pub mod models;
pub mod optimizer;
pub mod ssm;
pub mod sweep;

pub use error::{Error, Result};
