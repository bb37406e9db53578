//! Discrete-time marginal structural model.
//!
//! Follow-up is split into `J` intervals of equal width. An event at time `t`
//! falls in interval `ceil(t / width)`; events after `J * width` are outside
//! the grid. Each subject contributes one row per interval until death,
//! censoring or the end of the grid. The marginal hazard in interval `j` is
//! the weighted share of deaths among rule-consistent, uncensored rows, and
//! survival is the running product of `1 - hazard`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{expit, fit_logit, predict_prob, FitOptions, FittedLogit, LogitRow};
use crate::ipw::Adjustment;
use crate::model::{
    bin, validate, CohortDataset, CovariateSpec, Covariates, EstimandSpec, Field,
    SurvivalCurveEstimate, Term,
};

/// One subject-interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersonInterval {
    pub id: i64,
    pub j: u32,
    /// A treatment course takes place in this interval.
    pub v: bool,
    /// Treatment decision; `None` outside a course.
    pub d: Option<bool>,
    /// Covariate assessed at the course; `None` outside a course.
    pub x: Option<bool>,
    pub y: bool,
    pub c: bool,
    /// Interval of the second course, `J + 1` when there is none on the grid.
    pub s: u32,
    pub weight: f64,
    pub l1: bool,
    pub a1: bool,
    /// Second-course history, present on rows `j >= s`.
    pub l2: Option<bool>,
    pub a2: Option<bool>,
}

impl Covariates for PersonInterval {
    fn id(&self) -> i64 {
        self.id
    }

    fn value(&self, field: Field) -> Option<f64> {
        match field {
            Field::L1 => Some(bin(self.l1)),
            Field::A1 => Some(bin(self.a1)),
            Field::L2 => self.l2.map(bin),
            Field::A2 => self.a2.map(bin),
            Field::S => Some(f64::from(self.s)),
            Field::J => Some(f64::from(self.j)),
            Field::W1 | Field::W2 => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonIntervalTable {
    pub width: f64,
    pub intervals: u32,
    /// Sorted by subject, then interval.
    pub rows: Vec<PersonInterval>,
}

impl PersonIntervalTable {
    /// Rows grouped by subject, in table order.
    pub fn subjects(&self) -> impl Iterator<Item = &[PersonInterval]> {
        self.rows.chunk_by(|a, b| a.id == b.id)
    }

    /// Writes `id,j,v,d,x,y,c,weight`, with empty cells for absent values.
    pub fn write_csv_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "j", "v", "d", "x", "y", "c", "weight"])?;
        let opt = |b: Option<bool>| b.map(|b| u8::from(b).to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.id.to_string(),
                r.j.to_string(),
                u8::from(r.v).to_string(),
                opt(r.d),
                opt(r.x),
                u8::from(r.y).to_string(),
                u8::from(r.c).to_string(),
                r.weight.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Interval index `ceil(t / width)`.
pub fn interval_of(t: f64, width: f64) -> u64 {
    (t / width).ceil().max(1.0) as u64
}

/// Builds the person-interval table with unit weights.
///
/// A second course falling in interval 1 is placed in interval 2, since
/// interval 1 holds the first course. A subject who dies or is censored in an
/// earlier interval than their second course has no course row and `s = J + 1`.
pub fn discretize(
    dataset: &CohortDataset,
    width: f64,
    intervals: u32,
) -> Result<PersonIntervalTable> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interval width must be positive, got {width}"
        )));
    }
    if intervals == 0 {
        return Err(Error::InvalidArgument("J must be at least 1".into()));
    }
    let violations = validate(dataset);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let big_j = u64::from(intervals);
    let per_subject: Vec<Vec<PersonInterval>> = dataset
        .records
        .par_iter()
        .map(|s| {
            let end = s.follow_up();
            let end_j = interval_of(end, width);
            let course_j = s
                .course2
                .as_ref()
                .map(|_| interval_of(s.w1, width).max(2))
                .filter(|&k| k <= big_j && k <= end_j);
            let last = end_j.min(big_j);
            let absorbed = end_j <= big_j;
            let (died, censored) = (s.survival_time().is_some(), s.is_censored());
            let sv = course_j.unwrap_or(big_j + 1) as u32;
            (1..=last)
                .map(|j| {
                    let is_course = j == 1 || Some(j) == course_j;
                    let after = course_j.is_some_and(|k| j >= k);
                    let c2 = s.course2.filter(|_| after);
                    PersonInterval {
                        id: s.id,
                        j: j as u32,
                        v: is_course,
                        d: match j {
                            1 => Some(s.a1),
                            _ if is_course => c2.map(|c| c.a2),
                            _ => None,
                        },
                        x: match j {
                            1 => Some(s.l1),
                            _ if is_course => c2.map(|c| c.l2),
                            _ => None,
                        },
                        y: absorbed && j == last && died,
                        c: absorbed && j == last && censored,
                        s: sv,
                        weight: 1.0,
                        l1: s.l1,
                        a1: s.a1,
                        l2: c2.map(|c| c.l2),
                        a2: c2.map(|c| c.a2),
                    }
                })
                .collect()
        })
        .collect();
    Ok(PersonIntervalTable {
        width,
        intervals,
        rows: per_subject.into_iter().flatten().collect(),
    })
}

/// Whether the decision in `row` follows the regime: `a1` at the first
/// course, `a2` at the second, no decision elsewhere.
pub fn rule_consistent(row: &PersonInterval, target: &EstimandSpec) -> bool {
    match (row.j, row.v) {
        (1, _) => row.d == Some(target.a1),
        (_, true) => row.d == Some(target.a2),
        (_, false) => row.d.is_none(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpecs {
    pub a1: CovariateSpec,
    pub a2: CovariateSpec,
    /// Censoring hazard on rows before the second course.
    pub censor_pre: CovariateSpec,
    /// Censoring hazard on rows from the second course on.
    pub censor_post: CovariateSpec,
}

impl DiscreteSpecs {
    /// Default specs; the adjusted second-course terms use `I(S * width > 15)`.
    pub fn new(adjustment: Adjustment, width: f64) -> Self {
        use Term::{Intercept, Raw};
        let timing: Vec<Term> = match adjustment {
            Adjustment::Adjusted => vec![Term::Threshold {
                field: Field::S,
                cutoff: 15.0 / width,
            }],
            Adjustment::Unadjusted => vec![],
        };
        let spec = |mut t: Vec<Term>, timed: bool| {
            if timed {
                t.extend(timing.iter().copied());
            }
            CovariateSpec::new(t).expect("static spec")
        };
        Self {
            a1: spec(vec![Intercept, Raw(Field::L1)], false),
            a2: spec(
                vec![Intercept, Raw(Field::A1), Raw(Field::L1), Raw(Field::L2)],
                true,
            ),
            censor_pre: spec(vec![Intercept, Raw(Field::A1), Raw(Field::L1)], false),
            censor_post: spec(
                vec![
                    Intercept,
                    Raw(Field::A1),
                    Raw(Field::A2),
                    Raw(Field::L1),
                    Raw(Field::L2),
                ],
                true,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModels {
    pub a1: FittedLogit,
    /// `None` when no subject has a second course on the grid.
    pub a2: Option<FittedLogit>,
    /// `None` when the phase has no censoring (hazard 0).
    pub censor_pre: Option<FittedLogit>,
    pub censor_post: Option<FittedLogit>,
}

fn fit_optional(
    spec: &CovariateSpec,
    rows: Vec<LogitRow>,
    opts: &FitOptions,
) -> Result<Option<FittedLogit>> {
    if rows.iter().any(|r| r.y) {
        fit_logit(spec.clone(), &rows, opts).map(Some)
    } else {
        Ok(None)
    }
}

fn unit_row(spec: &CovariateSpec, r: &PersonInterval, y: bool) -> Result<LogitRow> {
    Ok(LogitRow {
        x: spec.row(r)?,
        y,
        weight: 1.0,
    })
}

pub fn fit_discrete_models(
    table: &PersonIntervalTable,
    specs: &DiscreteSpecs,
    opts: &FitOptions,
) -> Result<DiscreteModels> {
    let mut a1_rows = Vec::new();
    let mut a2_rows = Vec::new();
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for r in &table.rows {
        if r.j == 1 {
            a1_rows.push(unit_row(&specs.a1, r, r.a1)?);
        }
        if r.v && r.j == r.s {
            a2_rows.push(unit_row(&specs.a2, r, r.a2.unwrap_or(false))?);
        }
        if r.j < r.s {
            pre.push(unit_row(&specs.censor_pre, r, r.c)?);
        } else {
            post.push(unit_row(&specs.censor_post, r, r.c)?);
        }
    }
    let a1 = fit_logit(specs.a1.clone(), &a1_rows, opts)?;
    let a2 = if a2_rows.is_empty() {
        None
    } else {
        Some(fit_logit(specs.a2.clone(), &a2_rows, opts)?)
    };
    Ok(DiscreteModels {
        a1,
        a2,
        censor_pre: fit_optional(&specs.censor_pre, pre, opts)?,
        censor_post: fit_optional(&specs.censor_post, post, opts)?,
    })
}

fn prob_of(p: f64, d: bool) -> f64 {
    if d {
        p
    } else {
        1.0 - p
    }
}

fn censor_hazard(models: &DiscreteModels, r: &PersonInterval) -> Result<f64> {
    let m = if r.j < r.s {
        &models.censor_pre
    } else {
        &models.censor_post
    };
    m.as_ref().map_or(Ok(0.0), |m| predict_prob(m, r))
}

fn treatment_factor(models: &DiscreteModels, r: &PersonInterval) -> Result<f64> {
    match (r.j, r.v, r.d) {
        (1, _, Some(d)) => Ok(prob_of(predict_prob(&models.a1, r)?, d)),
        (_, true, Some(d)) => {
            let m = models.a2.as_ref().ok_or_else(|| {
                Error::InvalidArgument("second-course row without an A2 model".into())
            })?;
            Ok(prob_of(predict_prob(m, r)?, d))
        }
        _ => Ok(1.0),
    }
}

fn weigh(
    table: &PersonIntervalTable,
    f: impl Fn(&[PersonInterval]) -> Result<Vec<f64>> + Sync,
) -> Result<PersonIntervalTable> {
    let chunks: Vec<&[PersonInterval]> = table.subjects().collect();
    let weights: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|rows| f(rows))
        .collect::<Result<_>>()?;
    let mut out = table.clone();
    for (r, w) in out.rows.iter_mut().zip(weights.into_iter().flatten()) {
        r.weight = w;
    }
    Ok(out)
}

fn positivity(id: i64, what: &str, v: f64) -> Result<()> {
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::Positivity {
            id,
            what: what.to_string(),
        })
    }
}

/// Weight `1 / (treatment factors * P(uncensored through j))`. Treatment
/// factors are the observed first decision and, from `s` on, the observed
/// second decision.
pub fn discrete_weights(
    table: &PersonIntervalTable,
    models: &DiscreteModels,
) -> Result<PersonIntervalTable> {
    weigh(table, |rows| {
        let first = &rows[0];
        let f1 = treatment_factor(models, first)?;
        positivity(first.id, "first treatment factor", f1)?;
        let mut treat = f1;
        let mut uncensored = 1.0;
        let mut out = Vec::with_capacity(rows.len());
        for r in rows {
            if r.v && r.j > 1 {
                let f2 = treatment_factor(models, r)?;
                positivity(r.id, "second treatment factor", f2)?;
                treat *= f2;
            }
            uncensored *= 1.0 - censor_hazard(models, r)?;
            positivity(r.id, "probability of remaining uncensored", uncensored)?;
            out.push(1.0 / (treat * uncensored));
        }
        Ok(out)
    })
}

/// Same weights, computed as the full product over every interval of the
/// decision probability, with probability 1 for intervals without a course.
pub fn discrete_weights_full_product(
    table: &PersonIntervalTable,
    models: &DiscreteModels,
) -> Result<PersonIntervalTable> {
    weigh(table, |rows| {
        let mut out = Vec::with_capacity(rows.len());
        for j in 0..rows.len() {
            let mut denom = 1.0;
            for r in &rows[..=j] {
                denom *= treatment_factor(models, r)? * (1.0 - censor_hazard(models, r)?);
            }
            positivity(rows[j].id, "weight denominator", denom)?;
            out.push(1.0 / denom);
        }
        Ok(out)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHazardCurve {
    pub width: f64,
    /// Hazard per interval `1..=J`; `None` where no at-risk weight remains.
    pub hazard: Vec<Option<f64>>,
    /// Survival at the end of intervals `0..=J`; `survival[0] = 1`.
    pub survival: Vec<f64>,
}

impl DiscreteHazardCurve {
    fn from_hazards(width: f64, hazard: Vec<Option<f64>>) -> Self {
        let mut survival = Vec::with_capacity(hazard.len() + 1);
        survival.push(1.0);
        let mut s = 1.0;
        for h in &hazard {
            s *= 1.0 - h.unwrap_or(0.0);
            survival.push(s);
        }
        Self {
            width,
            hazard,
            survival,
        }
    }

    /// Intervals with undefined hazard (survival carried forward).
    pub fn flagged(&self) -> Vec<u32> {
        (1..)
            .zip(&self.hazard)
            .filter_map(|(j, h)| h.is_none().then_some(j))
            .collect()
    }

    /// Survival at `tau`, the product over intervals `j <= tau / width`.
    pub fn survival_at(&self, tau: f64) -> Result<f64> {
        let max = (self.survival.len() - 1) as f64 * self.width;
        if !(tau >= 0.0) || tau > max * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "tau = {tau} outside the grid [0, {max}]"
            )));
        }
        let k = ((tau / self.width) * (1.0 + 1e-12)).floor() as usize;
        Ok(self.survival[k.min(self.survival.len() - 1)])
    }
}

/// Rows entering the outcome model: uncensored rows of subjects whose
/// decisions followed the regime through that interval.
pub fn msm_rows<'a>(
    table: &'a PersonIntervalTable,
    target: &EstimandSpec,
) -> Vec<&'a PersonInterval> {
    let mut out = Vec::new();
    for rows in table.subjects() {
        for r in rows {
            if !rule_consistent(r, target) {
                break;
            }
            if !r.c {
                out.push(r);
            }
        }
    }
    out
}

/// Weighted hazard ratio per interval.
pub fn fit_msm(table: &PersonIntervalTable, target: &EstimandSpec) -> Result<DiscreteHazardCurve> {
    let big_j = table.intervals as usize;
    let mut deaths = vec![0.0; big_j];
    let mut at_risk = vec![0.0; big_j];
    for r in msm_rows(table, target) {
        let k = r.j as usize - 1;
        at_risk[k] += r.weight;
        if r.y {
            deaths[k] += r.weight;
        }
    }
    if at_risk[0] <= 0.0 {
        return Err(Error::NoConsistentSubjects("msm".into()));
    }
    let hazard = deaths
        .iter()
        .zip(&at_risk)
        .map(|(d, n)| (*n > 0.0).then(|| d / n))
        .collect();
    Ok(DiscreteHazardCurve::from_hazards(table.width, hazard))
}

/// Same curve from a weighted pooled logistic regression with one intercept
/// per interval. Intervals whose hazard is 0 or 1 have no finite intercept
/// and take that hazard directly.
pub fn fit_msm_pooled_logistic(
    table: &PersonIntervalTable,
    target: &EstimandSpec,
    opts: &FitOptions,
) -> Result<DiscreteHazardCurve> {
    let direct = fit_msm(table, target)?;
    let interior: Vec<u32> = (1..)
        .zip(&direct.hazard)
        .filter_map(|(j, h)| h.filter(|h| *h > 0.0 && *h < 1.0).map(|_| j))
        .collect();
    let mut hazard = direct.hazard.clone();
    if interior.is_empty() {
        return Ok(DiscreteHazardCurve::from_hazards(table.width, hazard));
    }
    let terms: Vec<Term> = interior
        .iter()
        .map(|&j| Term::Level {
            field: Field::J,
            value: f64::from(j),
        })
        .collect();
    let spec = CovariateSpec::new(terms)?;
    let rows: Vec<LogitRow> = msm_rows(table, target)
        .into_iter()
        .filter(|r| interior.contains(&r.j))
        .map(|r| {
            Ok(LogitRow {
                x: spec.row(r)?,
                y: r.y,
                weight: r.weight,
            })
        })
        .collect::<Result<_>>()?;
    let fit = fit_logit(spec, &rows, opts)?;
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.iterations,
            max_grad_norm: fit.max_grad_norm,
        });
    }
    for (j, b) in interior.iter().zip(&fit.coef) {
        hazard[*j as usize - 1] = Some(expit(*b));
    }
    Ok(DiscreteHazardCurve::from_hazards(table.width, hazard))
}

/// Discretize, fit nuisance models, weight and fit the MSM.
pub fn discrete_curve(
    dataset: &CohortDataset,
    target: &EstimandSpec,
    width: f64,
    intervals: u32,
    adjustment: Adjustment,
) -> Result<DiscreteHazardCurve> {
    let table = discretize(dataset, width, intervals)?;
    let models = fit_discrete_models(
        &table,
        &DiscreteSpecs::new(adjustment, width),
        &FitOptions::default(),
    )?;
    let weighted = discrete_weights(&table, &models)?;
    fit_msm(&weighted, target)
}

/// [`discrete_curve`] read off at each horizon in `taus`.
pub fn survival_curve_discrete(
    dataset: &CohortDataset,
    target: &EstimandSpec,
    width: f64,
    intervals: u32,
    adjustment: Adjustment,
    taus: &[f64],
) -> Result<SurvivalCurveEstimate> {
    let curve = discrete_curve(dataset, target, width, intervals, adjustment)?;
    let estimates = taus
        .iter()
        .map(|t| curve.survival_at(*t))
        .collect::<Result<_>>()?;
    let method = match adjustment {
        Adjustment::Adjusted => "msm",
        Adjustment::Unadjusted => "msm-unadj",
    };
    Ok(SurvivalCurveEstimate::new(method, taus.to_vec(), estimates))
}
