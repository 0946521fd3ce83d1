//! Finite-size secret-key-rate calculator for continuous-variable quantum key
//! distribution under collective Gaussian attacks.
//!
//! The crate models a homodyne-detection, reverse-reconciliation protocol
//! without postselection. It provides:
//!
//! * the modulation-dependent correlation strength for Gaussian, two-state,
//!   four-state and eight-dimensional modulations ([`modulation`]);
//! * the two-mode covariance matrix, Holevo bound and mutual information of
//!   the Gaussian channel model ([`gaussian`]);
//! * finite-size corrections (privacy-amplification penalty, epsilon budget,
//!   reconciliation leakage) and key-rate assembly ([`finite_size`]);
//! * parameter estimation of the normal linear model, worst-case confidence
//!   bounds, and sample planning ([`estimation`]);
//! * a reproducible Monte Carlo harness validating the estimator laws,
//!   confidence-region coverage, and the expectation-integrated key rate
//!   ([`montecarlo`]);
//! * scenario configuration, scans, figure-data generation and data-file
//!   ingestion backing the `cvqkd` command-line tool ([`scenario`]).
//!
//! All variances are expressed in shot-noise units.

// Frozen reference values keep every digit of the arbitrary-precision
// computation that produced them; validation guards use `!(x > 0.0)` so
// that NaN fails them.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod finite_size;
pub mod gaussian;
pub mod modulation;
pub mod montecarlo;
pub mod quadrature;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
pub use modulation::{Modulation, ProtocolSpec};
