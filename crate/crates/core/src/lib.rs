//! Counterfactual survival under two-course treatment sequences whose timing
//! is informative.
//!
//! The crate estimates `P(T^{a1,a2} > tau)` from cohorts where the waiting
//! time between courses confounds the second treatment decision:
//!
//! - [`ipw`]: continuous-time Hájek IPTW estimators (with and without
//!   censoring weights) and the naive and complete-case comparators;
//! - [`gcomp`]: parametric g-computation;
//! - [`estimate`]: every method behind one call;
//! - [`msm`]: the discrete-time person-interval pipeline with a weighted
//!   pooled-logistic hazard model;
//! - [`glm`]: the logistic and exponential-PH fitting core;
//! - [`dgp`]: synthetic cohorts and interventional ground truth;
//! - [`bootstrap`]: percentile intervals;
//! - [`bench`]: the simulation study and the worked example.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod estimate;
pub mod gcomp;
pub mod glm;
pub mod io;
pub mod ipw;
pub mod model;
pub mod msm;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    CohortDataset, CohortMeta, CovariateSpec, EstimandSpec, Field, FirstEvent, SecondCourse,
    SubjectRecord, SurvivalCurveEstimate, Term,
};
