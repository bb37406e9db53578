//! Nonparametric percentile bootstrap over subjects.
//!
//! Replicate `b` resamples `n` whole subject records with replacement using
//! stream `b` of the seed, relabels them `1..=n` and reruns the estimator,
//! including any model fitting. Bounds use the nearest-rank percentile.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CohortDataset;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub point: f64,
    /// Successful replicate estimates, in replicate order.
    pub replicates: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub n_failed: usize,
}

/// Resample number `b` of `dataset` under `seed`.
pub fn resample(dataset: &CohortDataset, seed: u64, b: u64) -> CohortDataset {
    let n = dataset.n();
    let mut rng = stream(seed, &[b]);
    let records = (0..n)
        .map(|i| {
            let mut r = dataset.records[rng.random_range(0..n)];
            r.id = i as i64 + 1;
            r
        })
        .collect();
    CohortDataset::new(records, dataset.meta.clone())
}

/// Nearest-rank percentile of sorted data: the smallest element with at
/// least a fraction `q` of the data at or below it.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    // Guard against products like 0.975 * 200 landing just above an integer.
    let rank = ((q * m as f64) - 1e-9).ceil().clamp(1.0, m as f64) as usize;
    sorted[rank - 1]
}

fn check_args(replicates: usize, level: f64) -> Result<()> {
    if replicates < 2 {
        return Err(Error::InvalidArgument(format!(
            "B must be at least 2, got {replicates}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

fn summarize(point: f64, outcomes: Vec<Result<f64>>, level: f64) -> Result<BootstrapResult> {
    let requested = outcomes.len();
    let replicates: Vec<f64> = outcomes
        .into_iter()
        .filter_map(|r| r.ok().filter(|v| v.is_finite()))
        .collect();
    let n_failed = requested - replicates.len();
    if 2 * n_failed > requested {
        return Err(Error::BootstrapDegenerate {
            failed: n_failed,
            requested,
        });
    }
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    Ok(BootstrapResult {
        point,
        lo: nearest_rank(&sorted, alpha / 2.0),
        hi: nearest_rank(&sorted, 1.0 - alpha / 2.0),
        replicates,
        level,
        n_failed,
    })
}

/// Bootstrap of a scalar estimator.
pub fn bootstrap<F>(
    dataset: &CohortDataset,
    estimator: F,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&CohortDataset) -> Result<f64> + Sync,
{
    check_args(replicates, level)?;
    let point = estimator(dataset)?;
    let outcomes: Vec<Result<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| estimator(&resample(dataset, seed, b)))
        .collect();
    summarize(point, outcomes, level)
}

/// Bootstrap of an estimator with `k` components (several methods or
/// horizons) evaluated on the same resamples. Each component fails or
/// succeeds on its own; a component that fails on `dataset` itself is
/// returned as that error.
pub fn bootstrap_many<F>(
    dataset: &CohortDataset,
    k: usize,
    estimator: F,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<Result<BootstrapResult>>>
where
    F: Fn(&CohortDataset) -> Vec<Result<f64>> + Sync,
{
    check_args(replicates, level)?;
    let checked = |ds: &CohortDataset| -> Vec<Result<f64>> {
        let out = estimator(ds);
        assert_eq!(
            out.len(),
            k,
            "estimator returned {} components, expected {k}",
            out.len()
        );
        out
    };
    let points = checked(dataset);
    let mut per_rep: Vec<Vec<Result<f64>>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| checked(&resample(dataset, seed, b)))
        .collect();
    let mut columns: Vec<Vec<Result<f64>>> =
        (0..k).map(|_| Vec::with_capacity(replicates)).collect();
    for rep in per_rep.drain(..) {
        for (col, v) in columns.iter_mut().zip(rep) {
            col.push(v);
        }
    }
    Ok(points
        .into_iter()
        .zip(columns)
        .map(|(point, col)| summarize(point?, col, level))
        .collect())
}
