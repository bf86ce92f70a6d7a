//! Exponentiated Weibull-logarithmic (EWL) lifetime distributions.
//!
//! The EWL law is the distribution of `Y = max(X_1, ..., X_N)` where the `X_i`
//! are i.i.d. exponentiated Weibull and `N` follows a logarithmic distribution.
//! This crate evaluates the family and its sub-models, draws samples, computes
//! moments and reliability quantities (with series and quadrature backends),
//! fits the model by EM or quasi-Newton maximum likelihood, and produces the
//! usual goodness-of-fit and model-selection diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datasets;
pub mod dist;
pub mod error;
pub mod gof;
pub mod inference;
pub mod moments;
pub mod optimize;
pub mod quadrature;
pub mod special;
pub mod submodels;

pub use dist::{EwlParams, HazardLimit, LimitValue};
pub use error::{EwlError, Result};
pub use gof::GofReport;
pub use inference::{EmConfig, FitMethod, FitOptions, FitResult, LrTestResult};
pub use moments::{MomentMethod, MomentResult};
pub use special::SeriesPolicy;
pub use submodels::FamilyId;
