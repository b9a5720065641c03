//! Survival efficacy measures and their pitfalls.
//!
//! - [`dist`]: Weibull laws, Lehmann transforms, subgroup mixtures and the
//!   quantile / scale solvers used to build scenarios.
//! - [`estim`]: Kaplan-Meier, Weibull MLE, two-arm Cox fits, empirical
//!   living-longer probability, HR/LLP and TR/HR conversions.
//! - [`infer`]: log-rank and Wald tests, the reject-then-compare-medians
//!   decision procedure, and the Mann-Whitney pivot confidence set.
//! - [`sme`]: naive log-averaged stratified ratios versus subgroup mixable
//!   estimation for RR, TR and HR.
//! - [`sim`]: deterministic Monte Carlo studies of the decision procedure.

pub mod dist;
pub mod error;
pub mod estim;
pub mod infer;
pub mod quad;
pub mod rng;
pub mod sim;
pub mod sme;

pub use error::{Error, Result};
