//! Simulation study and worked example.
//!
//! The simulation study draws `reps` cohorts from a scenario, estimates
//! `P(T^{1,1} > tau)` with each method and a percentile bootstrap interval,
//! and scores the estimates against Monte Carlo truth:
//!
//! - bias: mean of `estimate - truth`
//! - %bias: `100 * bias / truth`
//! - rel. MSE: MSE divided by the adjusted IPW MSE
//! - width: mean of `hi - lo`
//! - coverage: share of intervals containing the truth
//!
//! Each metric uses the replicates where that method (or its interval)
//! succeeded.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::bootstrap_many;
use crate::dgp::{
    generate, generate_worked_example, simulate_truth, DgpParams, TruthEstimate, FROZEN_TRUTH_SEED,
};
use crate::error::{Error, Result};
use crate::estimate::{estimate_curve, Method, MethodOptions};
use crate::model::{CohortDataset, FirstEvent, SurvivalCurveEstimate};
use crate::rng::child_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    pub scenario: u8,
    pub reps: usize,
    pub n: usize,
    pub boot: usize,
    pub tau: f64,
    pub seed: u64,
    pub level: f64,
    pub truth_draws: u64,
    pub truth_seed: u64,
}

impl Table1Config {
    /// Desk-scale defaults: 200 replicates of 2000 subjects, 200 bootstrap
    /// resamples each.
    pub fn desk(scenario: u8) -> Self {
        Self {
            scenario,
            reps: 200,
            n: 2000,
            boot: 200,
            tau: 15.0,
            seed: 1,
            level: 0.95,
            truth_draws: 10_000_000,
            truth_seed: FROZEN_TRUTH_SEED,
        }
    }

    /// 1000 replicates with 500 bootstrap resamples.
    pub fn full(scenario: u8) -> Self {
        Self {
            reps: 1000,
            boot: 500,
            ..Self::desk(scenario)
        }
    }

    /// Methods compared in a scenario.
    pub fn methods(&self) -> [Method; 3] {
        if self.scenario == 1 {
            [Method::Ipw, Method::IpwUnadj, Method::Naive]
        } else {
            [Method::Ipw, Method::IpwUnadj, Method::CcIpw]
        }
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.scenario, 1 | 2) {
            return Err(Error::InvalidArgument(format!(
                "scenario must be 1 or 2, got {}",
                self.scenario
            )));
        }
        if self.reps == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("reps and n must be positive".into()));
        }
        Ok(())
    }
}

/// One method on one simulated cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub rep: usize,
    pub method: String,
    pub estimate: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub bias: f64,
    pub pct_bias: f64,
    pub mse: f64,
    pub rel_mse: f64,
    pub mean_ci_width: f64,
    pub coverage: f64,
    /// Replicates where the point estimate failed.
    pub n_failed: usize,
    /// Replicates with a point estimate but no interval.
    pub n_ci_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudyReport {
    pub config: Table1Config,
    pub truth: TruthEstimate,
    pub methods: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateRow>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Aggregates per-replicate rows for one method against `truth`.
pub fn summarize_method(method: &str, rows: &[ReplicateRow], truth: f64) -> MethodSummary {
    let mine: Vec<&ReplicateRow> = rows.iter().filter(|r| r.method == method).collect();
    let est: Vec<f64> = mine.iter().filter_map(|r| r.estimate).collect();
    let cis: Vec<(f64, f64)> = mine
        .iter()
        .filter(|r| r.estimate.is_some())
        .filter_map(|r| r.lo.zip(r.hi))
        .collect();
    let bias = mean(est.iter().map(|e| e - truth));
    MethodSummary {
        method: method.to_string(),
        bias,
        pct_bias: 100.0 * bias / truth,
        mse: mean(est.iter().map(|e| (e - truth).powi(2))),
        rel_mse: f64::NAN,
        mean_ci_width: mean(cis.iter().map(|(lo, hi)| hi - lo)),
        coverage: mean(
            cis.iter()
                .map(|(lo, hi)| f64::from(u8::from(*lo <= truth && truth <= *hi))),
        ),
        n_failed: mine.len() - est.len(),
        n_ci_failed: est.len() - cis.len(),
    }
}

/// Aggregates every method; rel. MSE is relative to the first (adjusted IPW).
pub fn summarize(methods: &[Method], rows: &[ReplicateRow], truth: f64) -> Vec<MethodSummary> {
    let mut out: Vec<MethodSummary> = methods
        .iter()
        .map(|m| summarize_method(m.name(), rows, truth))
        .collect();
    let base = out[0].mse;
    for s in &mut out {
        s.rel_mse = s.mse / base;
    }
    out
}

pub fn run_table1(config: &Table1Config) -> Result<SimStudyReport> {
    config.validate()?;
    let params = DgpParams::scenario(config.scenario);
    let truth = simulate_truth(
        &params,
        true,
        true,
        config.tau,
        config.truth_draws,
        config.truth_seed,
    )?;
    let methods = config.methods();
    let opts = MethodOptions::default();
    let tau = config.tau;

    let per_rep: Vec<Vec<ReplicateRow>> = (0..config.reps)
        .into_par_iter()
        .map(|rep| -> Result<Vec<ReplicateRow>> {
            let ds = generate(&params, config.n, child_seed(config.seed, 2 * rep as u64))?;
            let estimator = |d: &CohortDataset| -> Vec<Result<f64>> {
                methods
                    .iter()
                    .map(|m| estimate_curve(d, *m, true, true, &[tau], &opts).map(|v| v[0]))
                    .collect()
            };
            let boot_seed = child_seed(config.seed, 2 * rep as u64 + 1);
            let rows = if config.boot >= 2 {
                bootstrap_many(
                    &ds,
                    methods.len(),
                    estimator,
                    config.boot,
                    config.level,
                    boot_seed,
                )?
                .into_iter()
                .zip(&methods)
                .map(|(res, m)| match res {
                    Ok(b) => ReplicateRow {
                        rep,
                        method: m.name().into(),
                        estimate: Some(b.point),
                        lo: Some(b.lo),
                        hi: Some(b.hi),
                    },
                    Err(_) => ReplicateRow {
                        rep,
                        method: m.name().into(),
                        estimate: estimate_curve(&ds, *m, true, true, &[tau], &opts)
                            .ok()
                            .map(|v| v[0]),
                        lo: None,
                        hi: None,
                    },
                })
                .collect()
            } else {
                estimator(&ds)
                    .into_iter()
                    .zip(&methods)
                    .map(|(r, m)| ReplicateRow {
                        rep,
                        method: m.name().into(),
                        estimate: r.ok(),
                        lo: None,
                        hi: None,
                    })
                    .collect()
            };
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let replicates: Vec<ReplicateRow> = per_rep.into_iter().flatten().collect();
    Ok(SimStudyReport {
        config: config.clone(),
        truth,
        methods: summarize(&methods, &replicates, truth.value),
        replicates,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SimStudyReport {
    /// Writes `rep,method,estimate,lo,hi`.
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["rep", "method", "estimate", "lo", "hi"])?;
        for r in &self.replicates {
            w.write_record([
                r.rep.to_string(),
                r.method.clone(),
                cell(r.estimate),
                cell(r.lo),
                cell(r.hi),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_markdown(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "## Scenario {}: P(T^(1,1) > {})\n\ntruth {:.5} (MC s.e. {:.1e}, {} draws); n = {}, reps = {}, B = {}, level = {}\n",
            c.scenario, c.tau, self.truth.value, self.truth.mc_std_error, self.truth.mc_draws, c.n, c.reps, c.boot, c.level
        );
        let _ = writeln!(
            s,
            "| Method | Bias | %Bias | Rel. MSE | Mean CI width | Coverage | Failed | CI failed |"
        );
        let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|---:|");
        for m in &self.methods {
            let _ = writeln!(
                s,
                "| {} | {:.4} | {:.2} | {:.2} | {:.3} | {:.3} | {} | {} |",
                m.method,
                m.bias,
                m.pct_bias,
                m.rel_mse,
                m.mean_ci_width,
                m.coverage,
                m.n_failed,
                m.n_ci_failed
            );
        }
        s
    }

    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method.name())
    }
}

/// Seed of the shipped worked example.
pub const WORKED_EXAMPLE_SEED: u64 = 1031;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountShare {
    pub count: usize,
    pub percent: f64,
}

impl CountShare {
    fn of(count: usize, total: usize) -> Self {
        Self {
            count,
            percent: if total == 0 {
                f64::NAN
            } else {
                100.0 * count as f64 / total as f64
            },
        }
    }
}

/// Course-level description of a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub course1_treated: CountShare,
    pub course1_l: CountShare,
    pub second_course: usize,
    pub died_before_second: usize,
    pub censored_before_second: usize,
    pub course2_treated: CountShare,
    pub course2_l: CountShare,
    /// Median waiting time to the second course among those who reached it.
    pub median_w1: Option<f64>,
    /// Kaplan-Meier median of overall survival.
    pub median_survival: Option<f64>,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Smallest observed death time at which the Kaplan-Meier curve reaches 0.5
/// or below. Censored follow-up counts as at risk through its end.
pub fn km_median(times: &[(f64, bool)]) -> Option<f64> {
    let mut v = times.to_vec();
    // Deaths before censorings at tied times.
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut at_risk = v.len() as f64;
    let mut s = 1.0;
    let mut i = 0;
    while i < v.len() {
        let t = v[i].0;
        let (mut deaths, mut leaving) = (0.0, 0.0);
        while i < v.len() && v[i].0 == t {
            deaths += f64::from(u8::from(v[i].1));
            leaving += 1.0;
            i += 1;
        }
        if deaths > 0.0 {
            s *= 1.0 - deaths / at_risk;
            if s <= 0.5 {
                return Some(t);
            }
        }
        at_risk -= leaving;
    }
    None
}

pub fn summarize_cohort(dataset: &CohortDataset) -> CohortSummary {
    let n = dataset.n();
    let count =
        |f: &dyn Fn(&crate::model::SubjectRecord) -> bool| dataset.iter().filter(|s| f(s)).count();
    let second = count(&|s| s.delta1 == FirstEvent::NextTreatment);
    let w1: Vec<f64> = dataset
        .iter()
        .filter(|s| s.course2.is_some())
        .map(|s| s.w1)
        .collect();
    let surv: Vec<(f64, bool)> = dataset
        .iter()
        .map(|s| (s.follow_up(), s.survival_time().is_some()))
        .collect();
    CohortSummary {
        n,
        course1_treated: CountShare::of(count(&|s| s.a1), n),
        course1_l: CountShare::of(count(&|s| s.l1), n),
        second_course: second,
        died_before_second: count(&|s| s.delta1 == FirstEvent::Death),
        censored_before_second: count(&|s| s.delta1 == FirstEvent::Censored),
        course2_treated: CountShare::of(count(&|s| s.course2.is_some_and(|c| c.a2)), second),
        course2_l: CountShare::of(count(&|s| s.course2.is_some_and(|c| c.l2)), second),
        median_w1: median(&w1),
        median_survival: km_median(&surv),
    }
}

impl CohortSummary {
    pub fn to_markdown(&self) -> String {
        let opt = |v: Option<f64>| {
            v.map(|x| format!("{x:.2}"))
                .unwrap_or_else(|| "not reached".into())
        };
        let pct = |c: &CountShare| format!("{} ({:.1}%)", c.count, c.percent);
        let mut s = String::new();
        let _ = writeln!(s, "| | Course 1 | Course 2 |");
        let _ = writeln!(s, "|---|---:|---:|");
        let _ = writeln!(s, "| At risk | {} | {} |", self.n, self.second_course);
        let _ = writeln!(
            s,
            "| Treated (A = 1) | {} | {} |",
            pct(&self.course1_treated),
            pct(&self.course2_treated)
        );
        let _ = writeln!(
            s,
            "| L = 1 | {} | {} |",
            pct(&self.course1_l),
            pct(&self.course2_l)
        );
        let _ = writeln!(
            s,
            "\nBefore course 2: {} died, {} censored. Median waiting time to course 2: {}. Median overall survival (Kaplan-Meier): {}.",
            self.died_before_second,
            self.censored_before_second,
            opt(self.median_w1),
            opt(self.median_survival)
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkedExample {
    pub seed: u64,
    pub boot: usize,
    pub summary: CohortSummary,
    /// Adjusted IPW, unadjusted IPW and adjusted discrete-time MSM.
    pub curves: Vec<SurvivalCurveEstimate>,
}

impl WorkedExample {
    pub fn curve(&self, method: Method) -> Option<&SurvivalCurveEstimate> {
        self.curves.iter().find(|c| c.method == method.name())
    }
}

/// Horizons of the worked example curves, months 0 to 20.
pub fn worked_example_taus() -> Vec<f64> {
    (0..=20).map(f64::from).collect()
}

/// Worked example with `boot` bootstrap resamples for the bands.
pub fn run_worked_example(seed: u64, boot: usize) -> Result<WorkedExample> {
    let ds = generate_worked_example(seed)?;
    run_curves(&ds, seed, boot)
}

fn run_curves(ds: &CohortDataset, seed: u64, boot: usize) -> Result<WorkedExample> {
    let taus = worked_example_taus();
    let methods = [Method::Ipw, Method::IpwUnadj, Method::Msm];
    let opts = MethodOptions::default();
    let k = taus.len();
    let estimator = |d: &CohortDataset| -> Vec<Result<f64>> {
        methods
            .iter()
            .flat_map(|m| match estimate_curve(d, *m, true, true, &taus, &opts) {
                Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
                Err(e) => {
                    let msg = e.to_string();
                    (0..k).map(|_| Err(Error::Numerical(msg.clone()))).collect()
                }
            })
            .collect()
    };
    let results = bootstrap_many(
        ds,
        methods.len() * k,
        estimator,
        boot,
        0.95,
        child_seed(seed, 1),
    )?;
    let mut curves = Vec::new();
    for (m, chunk) in methods.iter().zip(results.chunks(k)) {
        let mut est = Vec::with_capacity(k);
        let mut lo = Vec::with_capacity(k);
        let mut hi = Vec::with_capacity(k);
        for r in chunk {
            let b = r
                .as_ref()
                .map_err(|e| Error::Numerical(format!("{m}: {e}")))?;
            est.push(b.point);
            lo.push(b.lo);
            hi.push(b.hi);
        }
        let mut c = SurvivalCurveEstimate::new(m.name(), taus.clone(), est);
        c.lo = Some(lo);
        c.hi = Some(hi);
        curves.push(c);
    }
    Ok(WorkedExample {
        seed,
        boot,
        summary: summarize_cohort(ds),
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn km_median_without_censoring_is_order_statistic() {
        let t: Vec<(f64, bool)> = [5.0, 1.0, 3.0, 2.0, 4.0]
            .iter()
            .map(|t| (*t, true))
            .collect();
        assert_eq!(km_median(&t), Some(3.0));
        let even: Vec<(f64, bool)> = [1.0, 2.0, 3.0, 4.0].iter().map(|t| (*t, true)).collect();
        assert_eq!(km_median(&even), Some(2.0));
    }

    #[test]
    fn km_median_with_censoring() {
        // S(1) = 3/4, censored at 2, S(3) = 3/4 * 1/2 = 3/8
        let t = [(1.0, true), (2.0, false), (3.0, true), (4.0, true)];
        assert_eq!(km_median(&t), Some(3.0));
        assert_eq!(
            km_median(&[(1.0, false), (2.0, true), (3.0, false)]),
            Some(2.0)
        );
        assert_eq!(
            km_median(&[(1.0, true), (2.0, false), (3.0, false), (4.0, false)]),
            None
        );
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn metric_definitions() {
        let row =
            |rep, method: &str, e: Option<f64>, lo: Option<f64>, hi: Option<f64>| ReplicateRow {
                rep,
                method: method.into(),
                estimate: e,
                lo,
                hi,
            };
        let rows = vec![
            row(0, "ipw", Some(0.5), Some(0.4), Some(0.6)),
            row(1, "ipw", Some(0.7), Some(0.65), Some(0.75)),
            row(0, "naive", Some(0.9), None, None),
            row(1, "naive", None, None, None),
        ];
        let s = summarize(&[Method::Ipw, Method::Naive], &rows, 0.5);
        assert!((s[0].bias - 0.1).abs() < 1e-15);
        assert!((s[0].pct_bias - 20.0).abs() < 1e-12);
        assert!((s[0].mse - 0.02).abs() < 1e-15);
        assert_eq!(s[0].rel_mse, 1.0);
        assert!((s[0].mean_ci_width - 0.15).abs() < 1e-15);
        assert_eq!(s[0].coverage, 0.5);
        assert_eq!((s[1].n_failed, s[1].n_ci_failed), (1, 1));
        assert!((s[1].rel_mse - 0.16 / 0.02).abs() < 1e-12);
        assert!(s[1].coverage.is_nan());
    }

    #[test]
    fn smoke_single_replicate() {
        let cfg = Table1Config {
            reps: 1,
            n: 400,
            boot: 10,
            truth_draws: 100_000,
            ..Table1Config::desk(2)
        };
        let r = run_table1(&cfg).unwrap();
        assert_eq!(r.methods.len(), 3);
        for m in &r.methods {
            assert!(m.bias.is_finite() && m.pct_bias.is_finite() && m.rel_mse.is_finite());
            assert!(m.mean_ci_width.is_finite() && (0.0..=1.0).contains(&m.coverage));
        }
        assert_eq!(r, run_table1(&cfg).unwrap());
    }

    #[test]
    fn summary_partition() {
        let ds = generate_worked_example(5).unwrap();
        let s = summarize_cohort(&ds);
        assert_eq!(
            s.n,
            s.second_course + s.died_before_second + s.censored_before_second
        );
    }
}
