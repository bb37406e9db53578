//! Continuous-time inverse-probability weighting.
//!
//! Propensity models: `A1 ~ {1, L1}` over everyone and `A2 ~ {1, L1, L2,
//! W1-term}` over subjects who reached the second course. Censoring models
//! are exponential PH fits for the waiting time to dropout after each course.
//! The W1 term is present only in adjusted bundles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{
    fit_exp_ph, fit_logit, logit_rows, predict_prob, predict_surv, surv_rows, FitOptions,
    FittedExpPH, FittedLogit,
};
use crate::model::{
    CohortDataset, CovariateSpec, EstimandSpec, Field, FirstEvent, SubjectRecord, Term,
};

/// Whether models condition on the waiting time between courses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    Adjusted,
    Unadjusted,
}

/// Default W1 term, `I(W1 > 15)`.
pub const W1_THRESHOLD: Term = Term::Threshold {
    field: Field::W1,
    cutoff: 15.0,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpecs {
    pub a1: CovariateSpec,
    pub a2: CovariateSpec,
    pub c1: CovariateSpec,
    pub c2: CovariateSpec,
}

impl ModelSpecs {
    pub fn new(adjustment: Adjustment, w1_term: Term) -> Self {
        use Term::{Intercept, Raw};
        let timing: Vec<Term> = match adjustment {
            Adjustment::Adjusted => vec![w1_term],
            Adjustment::Unadjusted => vec![],
        };
        let with_timing = |mut base: Vec<Term>| {
            base.extend(timing.iter().copied());
            CovariateSpec::new(base).expect("static spec")
        };
        Self {
            a1: CovariateSpec::new(vec![Intercept, Raw(Field::L1)]).expect("static spec"),
            a2: with_timing(vec![Intercept, Raw(Field::L1), Raw(Field::L2)]),
            c1: CovariateSpec::new(vec![Intercept, Raw(Field::A1), Raw(Field::L1)])
                .expect("static spec"),
            c2: with_timing(vec![
                Intercept,
                Raw(Field::A1),
                Raw(Field::A2),
                Raw(Field::L1),
                Raw(Field::L2),
            ]),
        }
    }
}

impl From<Adjustment> for ModelSpecs {
    fn from(adjustment: Adjustment) -> Self {
        Self::new(adjustment, W1_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub a1_model: FittedLogit,
    pub a2_model: FittedLogit,
    /// `None` means no censoring is modelled at that stage (survival 1).
    pub c1_model: Option<FittedExpPH>,
    pub c2_model: Option<FittedExpPH>,
    pub adjustment: Adjustment,
}

/// Fits the bundle with the default specs for `adjustment`.
pub fn fit_models(
    dataset: &CohortDataset,
    adjustment: Adjustment,
    censoring: bool,
) -> Result<ModelBundle> {
    fit_models_with(
        dataset,
        &ModelSpecs::from(adjustment),
        adjustment,
        censoring,
        &FitOptions::default(),
    )
}

/// With `censoring`, a stage whose data contain no censoring events gets no
/// censoring model, which is the limit of its MLE (rate 0).
pub fn fit_models_with(
    dataset: &CohortDataset,
    specs: &ModelSpecs,
    adjustment: Adjustment,
    censoring: bool,
    opts: &FitOptions,
) -> Result<ModelBundle> {
    let a1_rows = logit_rows(&specs.a1, dataset.iter(), |s: &SubjectRecord| Some(s.a1))?;
    let a1_model = fit_logit(specs.a1.clone(), &a1_rows, opts)?;

    let a2_rows = logit_rows(&specs.a2, dataset.iter(), |s: &SubjectRecord| {
        s.course2.map(|c| c.a2)
    })?;
    let a2_model = fit_logit(specs.a2.clone(), &a2_rows, opts)?;

    let (mut c1_model, mut c2_model) = (None, None);
    if censoring {
        let c1_rows = surv_rows(&specs.c1, dataset.iter(), |s: &SubjectRecord| {
            Some((s.w1, s.delta1 == FirstEvent::Censored))
        })?;
        if c1_rows.iter().any(|r| r.event) {
            c1_model = Some(fit_exp_ph(specs.c1.clone(), &c1_rows, opts)?);
        }
        let c2_rows = surv_rows(&specs.c2, dataset.iter(), |s: &SubjectRecord| {
            s.course2.map(|c| (c.w2, !c.died))
        })?;
        if c2_rows.iter().any(|r| r.event) {
            c2_model = Some(fit_exp_ph(specs.c2.clone(), &c2_rows, opts)?);
        }
    }
    Ok(ModelBundle {
        a1_model,
        a2_model,
        c1_model,
        c2_model,
        adjustment,
    })
}

/// Whether a cohort contains any censoring.
pub fn has_censoring(dataset: &CohortDataset) -> bool {
    dataset.iter().any(SubjectRecord::is_censored)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectWeight {
    pub id: i64,
    /// Probability of the target treatment history given covariates.
    pub pi_hat: f64,
    /// Probability of the observed censoring history.
    pub eta_hat: f64,
    pub omega: f64,
    /// Followed the target sequence for as long as they were at risk.
    pub consistent: bool,
    pub contributes_one_course: bool,
    pub contributes_two_course: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTable {
    pub a1: bool,
    pub a2: bool,
    pub rows: Vec<SubjectWeight>,
}

impl WeightTable {
    /// Multiplies every weight by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for r in &mut out.rows {
            r.omega *= c;
        }
        out
    }

    /// Caps weights of contributing subjects at their `pct` percentile
    /// (nearest rank). Not applied by any default pipeline.
    pub fn truncate(&mut self, pct: f64) -> Result<()> {
        if !(pct > 0.0 && pct <= 100.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation percentile {pct} outside (0, 100]"
            )));
        }
        let mut w: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.contributes_one_course || r.contributes_two_course)
            .map(|r| r.omega)
            .collect();
        if w.is_empty() {
            return Ok(());
        }
        w.sort_by(f64::total_cmp);
        let rank = ((pct / 100.0) * w.len() as f64).ceil().max(1.0) as usize;
        let cap = w[rank - 1];
        for r in &mut self.rows {
            r.omega = r.omega.min(cap);
        }
        Ok(())
    }

    fn check_aligned(&self, dataset: &CohortDataset) -> Result<()> {
        if self.rows.len() != dataset.n()
            || self
                .rows
                .iter()
                .zip(dataset.iter())
                .any(|(w, s)| w.id != s.id)
        {
            return Err(Error::InvalidArgument(
                "weight table does not match dataset".into(),
            ));
        }
        Ok(())
    }
}

fn one_minus_if(p: f64, target: bool) -> f64 {
    if target {
        p
    } else {
        1.0 - p
    }
}

pub fn compute_weights(
    dataset: &CohortDataset,
    bundle: &ModelBundle,
    target: &EstimandSpec,
) -> Result<WeightTable> {
    let mut rows = Vec::with_capacity(dataset.n());
    for s in dataset.iter() {
        let mut pi = one_minus_if(predict_prob(&bundle.a1_model, s)?, target.a1);
        let mut eta = match &bundle.c1_model {
            Some(m) => predict_surv(m, s, s.w1)?,
            None => 1.0,
        };
        if let Some(c2) = &s.course2 {
            pi *= one_minus_if(predict_prob(&bundle.a2_model, s)?, target.a2);
            if let Some(m) = &bundle.c2_model {
                eta *= predict_surv(m, s, c2.w2)?;
            }
        }
        if pi <= 0.0 {
            return Err(Error::Positivity {
                id: s.id,
                what: "pi_hat".into(),
            });
        }
        if eta <= 0.0 {
            return Err(Error::Positivity {
                id: s.id,
                what: "eta_hat".into(),
            });
        }
        let consistent = s.a1 == target.a1 && s.course2.is_none_or(|c| c.a2 == target.a2);
        rows.push(SubjectWeight {
            id: s.id,
            pi_hat: pi,
            eta_hat: eta,
            omega: 1.0 / (pi * eta),
            consistent,
            contributes_one_course: consistent && s.delta1 == FirstEvent::Death,
            contributes_two_course: consistent && s.course2.is_some_and(|c| c.died),
        });
    }
    Ok(WeightTable {
        a1: target.a1,
        a2: target.a2,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub method: String,
    pub tau: f64,
    pub estimate: f64,
    pub n_contributing_one_course: usize,
    pub n_contributing_two_course: usize,
}

#[derive(Default)]
struct Ratio {
    num: f64,
    den: f64,
    one: usize,
    two: usize,
}

impl Ratio {
    fn add(&mut self, time: f64, tau: f64, omega: f64, two_course: bool) {
        self.den += omega;
        if time > tau {
            self.num += omega;
        }
        if two_course {
            self.two += 1;
        } else {
            self.one += 1;
        }
    }

    fn finish(self, method: &str, tau: f64) -> Result<PointEstimate> {
        if !(self.den > 0.0) {
            return Err(Error::NoConsistentSubjects(method.to_string()));
        }
        Ok(PointEstimate {
            method: method.to_string(),
            tau,
            estimate: self.num / self.den,
            n_contributing_one_course: self.one,
            n_contributing_two_course: self.two,
        })
    }
}

/// Hájek ratio for data without censoring: deaths before course 2 with
/// `A1 = a1`, plus everyone reaching course 2 with `(A1, A2) = (a1, a2)`.
pub fn hajek_no_censoring(
    dataset: &CohortDataset,
    weights: &WeightTable,
    target: &EstimandSpec,
) -> Result<PointEstimate> {
    weights.check_aligned(dataset)?;
    let mut r = Ratio::default();
    for (s, w) in dataset.iter().zip(&weights.rows) {
        if s.a1 != target.a1 {
            continue;
        }
        match (&s.delta1, &s.course2) {
            (FirstEvent::Death, _) => r.add(s.w1, target.tau, w.omega, false),
            (FirstEvent::NextTreatment, Some(c2)) if c2.a2 == target.a2 => {
                r.add(s.w1 + c2.w2, target.tau, w.omega, true)
            }
            _ => {}
        }
    }
    r.finish("ipw-no-censoring", target.tau)
}

/// Hájek ratio with censoring: only uncensored subjects who followed the
/// target sequence contribute, weighted by `1 / (pi_hat * eta_hat)`.
pub fn hajek_censoring(
    dataset: &CohortDataset,
    weights: &WeightTable,
    target: &EstimandSpec,
) -> Result<PointEstimate> {
    weights.check_aligned(dataset)?;
    if (weights.a1, weights.a2) != (target.a1, target.a2) {
        return Err(Error::InvalidArgument(
            "weight table built for a different regime".into(),
        ));
    }
    let mut r = Ratio::default();
    for (s, w) in dataset.iter().zip(&weights.rows) {
        if w.contributes_one_course {
            r.add(s.w1, target.tau, w.omega, false);
        } else if w.contributes_two_course {
            r.add(s.follow_up(), target.tau, w.omega, true);
        }
    }
    r.finish("ipw", target.tau)
}

/// Unweighted survival fraction among subjects who completed both courses
/// on the target sequence and whose death was observed.
pub fn naive_estimate(dataset: &CohortDataset, target: &EstimandSpec) -> Result<PointEstimate> {
    let mut r = Ratio::default();
    for s in dataset.iter() {
        if let Some(c2) = &s.course2 {
            if s.a1 == target.a1 && c2.a2 == target.a2 && c2.died {
                r.add(s.w1 + c2.w2, target.tau, 1.0, true);
            }
        }
    }
    r.finish("naive", target.tau)
}

/// Complete-case IPTW: drops every censored subject and applies the
/// no-censoring ratio with treatment-only weights `1 / pi_hat`.
pub fn cc_iptw(
    dataset: &CohortDataset,
    weights: &WeightTable,
    target: &EstimandSpec,
) -> Result<PointEstimate> {
    weights.check_aligned(dataset)?;
    let mut r = Ratio::default();
    for (s, w) in dataset.iter().zip(&weights.rows) {
        if s.is_censored() || s.a1 != target.a1 {
            continue;
        }
        match &s.course2 {
            None => r.add(s.w1, target.tau, 1.0 / w.pi_hat, false),
            Some(c2) if c2.a2 == target.a2 => r.add(s.w1 + c2.w2, target.tau, 1.0 / w.pi_hat, true),
            Some(_) => {}
        }
    }
    r.finish("cc-ipw", target.tau)
}
