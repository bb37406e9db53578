//! Synthetic cohorts for the two simulation scenarios (without and with
//! censoring) and Monte Carlo ground truth for `P(T^{a1,a2} > tau)`.
//!
//! Per subject:
//!
//! 1. `L1 ~ Ber(p_l1)`
//! 2. `A1 | L1 ~ Ber(expit(1 - L1))`
//! 3. competing exponential waiting times to death (`exp(-3 - A1 + L1)`),
//!    to the next course (`exp(-3 + A1 + L1)`) and, with censoring, to
//!    dropout (`exp(-4 - A1 + L1)`)
//! 4. survivors to course 2 draw `L2`, `A2`, then the time to death
//!    (`exp(-3 + A2 + L2 - 2 I(W1 > 15))`) and, with censoring, to dropout
//!    (`exp(-4 + A2 + L2 - 2 I(W1 > 15))`)
//!
//! Ties between competing times resolve as death, then treatment, then
//! censoring.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::expit;
use crate::model::{CohortDataset, CohortMeta, FirstEvent, SecondCourse, SubjectRecord};
use crate::rng::{stream, StreamRng};

/// Linear predictor over the generator's covariates. Absent coefficients are 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Linear {
    pub intercept: f64,
    pub l1: f64,
    pub a1: f64,
    pub l2: f64,
    pub a2: f64,
    /// Coefficient on `I(W1 > w1_cutoff)`.
    pub w1_late: f64,
}

/// Covariate values a [`Linear`] predictor is evaluated at.
#[derive(Debug, Clone, Copy, Default)]
struct Point {
    l1: f64,
    a1: f64,
    l2: f64,
    a2: f64,
    w1_late: f64,
}

impl Linear {
    fn eval(&self, p: &Point) -> f64 {
        self.intercept
            + self.l1 * p.l1
            + self.a1 * p.a1
            + self.l2 * p.l2
            + self.a2 * p.a2
            + self.w1_late * p.w1_late
    }

    fn is_finite(&self) -> bool {
        [
            self.intercept,
            self.l1,
            self.a1,
            self.l2,
            self.a2,
            self.w1_late,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpParams {
    pub p_l1: f64,
    pub a1_logit: Linear,
    pub death1_log_rate: Linear,
    pub course2_log_rate: Linear,
    pub censor1_log_rate: Linear,
    pub l2_logit: Linear,
    pub a2_logit: Linear,
    pub death2_log_rate: Linear,
    pub censor2_log_rate: Linear,
    pub censoring_enabled: bool,
    pub w1_cutoff: f64,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self::scenario(2)
    }
}

impl DgpParams {
    /// Scenario 1 has no censoring; any other value enables censoring.
    pub fn scenario(which: u8) -> Self {
        let lin = |intercept, l1, a1, l2, a2, w1_late| Linear {
            intercept,
            l1,
            a1,
            l2,
            a2,
            w1_late,
        };
        Self {
            p_l1: 0.5,
            a1_logit: lin(1.0, -1.0, 0.0, 0.0, 0.0, 0.0),
            death1_log_rate: lin(-3.0, 1.0, -1.0, 0.0, 0.0, 0.0),
            course2_log_rate: lin(-3.0, 1.0, 1.0, 0.0, 0.0, 0.0),
            censor1_log_rate: lin(-4.0, 1.0, -1.0, 0.0, 0.0, 0.0),
            l2_logit: lin(0.5, 0.15, 0.0, 0.0, 0.0, -0.15),
            a2_logit: lin(1.0, 0.0, 0.0, -1.0, 0.0, 1.5),
            death2_log_rate: lin(-3.0, 0.0, 0.0, 1.0, 1.0, -2.0),
            censor2_log_rate: lin(-4.0, 0.0, 0.0, 1.0, 1.0, -2.0),
            censoring_enabled: which != 1,
            w1_cutoff: 15.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_l1) {
            return Err(Error::InvalidArgument(format!(
                "p_l1 = {} outside [0, 1]",
                self.p_l1
            )));
        }
        let all = [
            &self.a1_logit,
            &self.death1_log_rate,
            &self.course2_log_rate,
            &self.censor1_log_rate,
            &self.l2_logit,
            &self.a2_logit,
            &self.death2_log_rate,
            &self.censor2_log_rate,
        ];
        if !all.iter().all(|l| l.is_finite()) || !self.w1_cutoff.is_finite() {
            return Err(Error::InvalidArgument(
                "non-finite generator coefficient".into(),
            ));
        }
        Ok(())
    }

    pub fn scenario_label(&self) -> &'static str {
        if self.censoring_enabled {
            "scenario-2"
        } else {
            "scenario-1"
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }
}

fn exp_draw(rng: &mut StreamRng, log_rate: f64) -> f64 {
    // Exp::new only fails for negative or NaN rates; exp() of a finite value is neither.
    Exp::new(log_rate.exp())
        .expect("finite positive rate")
        .sample(rng)
}

fn bernoulli(rng: &mut StreamRng, p: f64) -> bool {
    rng.random::<f64>() < p
}

/// Draws one subject. `force` fixes `(A1, A2)` for interventional draws.
fn draw_subject(
    params: &DgpParams,
    rng: &mut StreamRng,
    id: i64,
    force: Option<(bool, bool)>,
    censoring: bool,
) -> SubjectRecord {
    let l1 = bernoulli(rng, params.p_l1);
    let mut pt = Point {
        l1: f64::from(u8::from(l1)),
        ..Default::default()
    };
    let a1_natural = bernoulli(rng, expit(params.a1_logit.eval(&pt)));
    let a1 = force.map_or(a1_natural, |f| f.0);
    pt.a1 = f64::from(u8::from(a1));

    let wt1 = exp_draw(rng, params.death1_log_rate.eval(&pt));
    let wa1 = exp_draw(rng, params.course2_log_rate.eval(&pt));
    let c1 = if censoring {
        exp_draw(rng, params.censor1_log_rate.eval(&pt))
    } else {
        f64::INFINITY
    };

    let (w1, delta1) = if wt1 <= wa1 && wt1 <= c1 {
        (wt1, FirstEvent::Death)
    } else if wa1 <= c1 {
        (wa1, FirstEvent::NextTreatment)
    } else {
        (c1, FirstEvent::Censored)
    };
    if delta1 != FirstEvent::NextTreatment {
        return SubjectRecord {
            id,
            l1,
            a1,
            w1,
            delta1,
            course2: None,
        };
    }

    pt.w1_late = f64::from(u8::from(w1 > params.w1_cutoff));
    let l2 = bernoulli(rng, expit(params.l2_logit.eval(&pt)));
    pt.l2 = f64::from(u8::from(l2));
    let a2_natural = bernoulli(rng, expit(params.a2_logit.eval(&pt)));
    let a2 = force.map_or(a2_natural, |f| f.1);
    pt.a2 = f64::from(u8::from(a2));

    let wt2 = exp_draw(rng, params.death2_log_rate.eval(&pt));
    let c2 = if censoring {
        exp_draw(rng, params.censor2_log_rate.eval(&pt))
    } else {
        f64::INFINITY
    };
    let (w2, died) = if wt2 <= c2 { (wt2, true) } else { (c2, false) };
    SubjectRecord {
        id,
        l1,
        a1,
        w1,
        delta1,
        course2: Some(SecondCourse { l2, a2, w2, died }),
    }
}

/// Generates `n` subjects with ids `1..=n`; subject `i` uses stream `i` of
/// `seed`, so output is identical for any thread count.
pub fn generate(params: &DgpParams, n: usize, seed: u64) -> Result<CohortDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    params.validate()?;
    let records: Vec<SubjectRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[i as u64]);
            draw_subject(
                params,
                &mut rng,
                i as i64 + 1,
                None,
                params.censoring_enabled,
            )
        })
        .collect();
    Ok(CohortDataset::new(
        records,
        CohortMeta {
            scenario: Some(params.scenario_label().to_string()),
            seed: Some(seed),
        },
    ))
}

/// Sample size of the worked example cohort.
pub const WORKED_EXAMPLE_N: usize = 600;

/// Scenario-2 cohort of 600 subjects.
pub fn generate_worked_example(seed: u64) -> Result<CohortDataset> {
    let mut ds = generate(&DgpParams::scenario(2), WORKED_EXAMPLE_N, seed)?;
    ds.meta.scenario = Some("worked-example".into());
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEstimate {
    pub value: f64,
    pub mc_draws: u64,
    pub mc_std_error: f64,
}

/// Minimum number of draws accepted by [`simulate_truth`].
pub const MIN_TRUTH_DRAWS: u64 = 100_000;
const TRUTH_BLOCK: u64 = 1 << 16;

/// Interventional Monte Carlo: forces `A1 := a1`, `A2 := a2`, disables
/// censoring and reports the fraction with `T > tau`.
pub fn simulate_truth(
    params: &DgpParams,
    a1: bool,
    a2: bool,
    tau: f64,
    draws: u64,
    seed: u64,
) -> Result<TruthEstimate> {
    if draws < MIN_TRUTH_DRAWS {
        return Err(Error::InvalidArgument(format!(
            "simulate_truth needs at least {MIN_TRUTH_DRAWS} draws, got {draws}"
        )));
    }
    let curve = simulate_truth_curve(params, a1, a2, &[tau], draws, seed)?;
    Ok(curve[0])
}

/// [`simulate_truth`] evaluated at several horizons on the same draws.
pub fn simulate_truth_curve(
    params: &DgpParams,
    a1: bool,
    a2: bool,
    taus: &[f64],
    draws: u64,
    seed: u64,
) -> Result<Vec<TruthEstimate>> {
    params.validate()?;
    if taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("tau must be non-negative".into()));
    }
    let blocks = draws.div_ceil(TRUTH_BLOCK);
    let counts: Vec<u64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, &[u64::MAX, b]);
            let size = TRUTH_BLOCK.min(draws - b * TRUTH_BLOCK);
            let mut counts = vec![0u64; taus.len()];
            for _ in 0..size {
                let s = draw_subject(params, &mut rng, 0, Some((a1, a2)), false);
                let t = s.follow_up();
                for (c, tau) in counts.iter_mut().zip(taus) {
                    if t > *tau {
                        *c += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; taus.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(counts
        .into_iter()
        .map(|c| {
            let value = c as f64 / draws as f64;
            TruthEstimate {
                value,
                mc_draws: draws,
                mc_std_error: (value * (1.0 - value) / draws as f64).sqrt(),
            }
        })
        .collect())
}

/// Seed used to freeze [`FROZEN_TRUTH_11_TAU15`].
pub const FROZEN_TRUTH_SEED: u64 = 20_240_615;
/// `simulate_truth(default params, 1, 1, 15, 10^7, FROZEN_TRUTH_SEED)`.
pub const FROZEN_TRUTH_11_TAU15: f64 = 0.14776;
pub const FROZEN_TRUTH_DRAWS: u64 = 10_000_000;
