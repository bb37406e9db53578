//! One entry point for every estimator, evaluated over a grid of horizons.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcomp::gcomputation_curve;
use crate::ipw::{
    cc_iptw, compute_weights, fit_models, hajek_censoring, hajek_no_censoring, has_censoring,
    naive_estimate, Adjustment, PointEstimate,
};
use crate::model::{CohortDataset, EstimandSpec, FirstEvent};
use crate::msm::discrete_curve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ipw")]
    Ipw,
    #[serde(rename = "ipw-unadj")]
    IpwUnadj,
    #[serde(rename = "naive")]
    Naive,
    #[serde(rename = "cc-ipw")]
    CcIpw,
    #[serde(rename = "gcomp")]
    Gcomp,
    #[serde(rename = "msm")]
    Msm,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ipw,
        Method::IpwUnadj,
        Method::Naive,
        Method::CcIpw,
        Method::Gcomp,
        Method::Msm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ipw => "ipw",
            Method::IpwUnadj => "ipw-unadj",
            Method::Naive => "naive",
            Method::CcIpw => "cc-ipw",
            Method::Gcomp => "gcomp",
            Method::Msm => "msm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Settings for the methods that need more than the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodOptions {
    /// Interval width of the discrete-time grid.
    pub width: f64,
    /// Minimum number of intervals; extended to cover the largest horizon.
    pub intervals: u32,
    /// Monte Carlo draws for g-computation.
    pub mc_draws: u64,
    pub mc_seed: u64,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            width: 1.0,
            intervals: 20,
            mc_draws: 100_000,
            mc_seed: 1,
        }
    }
}

/// Estimates at every horizon in `taus` for regime `(a1, a2)`.
///
/// IPW methods fit their models once and reuse the weights across horizons;
/// the adjusted IPW adds censoring weights whenever the data contain
/// censoring.
pub fn estimate_points(
    dataset: &CohortDataset,
    method: Method,
    a1: bool,
    a2: bool,
    taus: &[f64],
    opts: &MethodOptions,
) -> Result<Vec<PointEstimate>> {
    if taus.is_empty() {
        return Err(Error::InvalidArgument("no horizons requested".into()));
    }
    let targets: Vec<EstimandSpec> = taus
        .iter()
        .map(|t| EstimandSpec::new(a1, a2, *t))
        .collect::<Result<_>>()?;
    let base = targets[0];
    let named = |mut p: PointEstimate| {
        p.method = method.name().to_string();
        p
    };
    match method {
        Method::Ipw | Method::IpwUnadj | Method::CcIpw => {
            let adjustment = if method == Method::IpwUnadj {
                Adjustment::Unadjusted
            } else {
                Adjustment::Adjusted
            };
            let censoring = has_censoring(dataset) && method != Method::CcIpw;
            let bundle = fit_models(dataset, adjustment, censoring)?;
            let weights = compute_weights(dataset, &bundle, &base)?;
            targets
                .iter()
                .map(|t| {
                    let p = match (method, censoring) {
                        (Method::CcIpw, _) => cc_iptw(dataset, &weights, t),
                        (_, true) => hajek_censoring(dataset, &weights, t),
                        (_, false) => hajek_no_censoring(dataset, &weights, t),
                    };
                    p.map(named)
                })
                .collect()
        }
        Method::Naive => targets
            .iter()
            .map(|t| naive_estimate(dataset, t).map(named))
            .collect(),
        Method::Gcomp => {
            let values = gcomputation_curve(dataset, &base, taus, opts.mc_draws, opts.mc_seed)?;
            Ok(with_counts(dataset, &base, method, taus, values))
        }
        Method::Msm => {
            let max_tau = taus.iter().copied().fold(0.0, f64::max);
            let needed = (max_tau / opts.width - 1e-9).ceil().max(1.0) as u32;
            let curve = discrete_curve(
                dataset,
                &base,
                opts.width,
                opts.intervals.max(needed),
                Adjustment::Adjusted,
            )?;
            let values = taus
                .iter()
                .map(|t| curve.survival_at(*t))
                .collect::<Result<Vec<_>>>()?;
            Ok(with_counts(dataset, &base, method, taus, values))
        }
    }
}

/// Point estimates only.
pub fn estimate_curve(
    dataset: &CohortDataset,
    method: Method,
    a1: bool,
    a2: bool,
    taus: &[f64],
    opts: &MethodOptions,
) -> Result<Vec<f64>> {
    Ok(estimate_points(dataset, method, a1, a2, taus, opts)?
        .into_iter()
        .map(|p| p.estimate)
        .collect())
}

/// Counts subjects with an observed death who followed the regime, split by
/// whether they reached the second course.
fn with_counts(
    dataset: &CohortDataset,
    target: &EstimandSpec,
    method: Method,
    taus: &[f64],
    values: Vec<f64>,
) -> Vec<PointEstimate> {
    let (mut one, mut two) = (0, 0);
    for s in dataset.iter().filter(|s| s.a1 == target.a1) {
        match (&s.delta1, &s.course2) {
            (FirstEvent::Death, _) => one += 1,
            (FirstEvent::NextTreatment, Some(c)) if c.died && c.a2 == target.a2 => two += 1,
            _ => {}
        }
    }
    taus.iter()
        .zip(values)
        .map(|(tau, estimate)| PointEstimate {
            method: method.name().to_string(),
            tau: *tau,
            estimate,
            n_contributing_one_course: one,
            n_contributing_two_course: two,
        })
        .collect()
}
