//! Domain types shared by every estimator: subject records, the cohort
//! container, covariate specifications and the target estimand.
//!
//! Times are in months throughout.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What ended the waiting period after the first course.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstEvent {
    /// Second course initiated (code 1).
    NextTreatment,
    /// Death before the second course (code 0).
    Death,
    /// Censored before the second course (code -1).
    Censored,
}

impl FirstEvent {
    pub fn code(self) -> i8 {
        match self {
            FirstEvent::NextTreatment => 1,
            FirstEvent::Death => 0,
            FirstEvent::Censored => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(FirstEvent::NextTreatment),
            0 => Some(FirstEvent::Death),
            -1 => Some(FirstEvent::Censored),
            _ => None,
        }
    }
}

/// Observation block for subjects who reached the second course.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondCourse {
    pub l2: bool,
    pub a2: bool,
    /// Waiting time from the second course to death or censoring.
    pub w2: f64,
    /// `true` when `w2` ends in death, `false` when it ends in censoring.
    pub died: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: i64,
    pub l1: bool,
    pub a1: bool,
    pub w1: f64,
    pub delta1: FirstEvent,
    pub course2: Option<SecondCourse>,
}

impl SubjectRecord {
    /// Indicator that the first waiting period ended in an observed event
    /// (death or second course) rather than censoring.
    pub fn delta_e(&self) -> bool {
        self.delta1 != FirstEvent::Censored
    }

    /// Total follow-up time, whatever ended it.
    pub fn follow_up(&self) -> f64 {
        match &self.course2 {
            Some(c2) => self.w1 + c2.w2,
            None => self.w1,
        }
    }

    /// Survival time `T`, defined only when death was observed.
    pub fn survival_time(&self) -> Option<f64> {
        match (&self.delta1, &self.course2) {
            (FirstEvent::Death, _) => Some(self.w1),
            (FirstEvent::NextTreatment, Some(c2)) if c2.died => Some(self.w1 + c2.w2),
            _ => None,
        }
    }

    /// Whether follow-up ended in censoring at either stage.
    pub fn is_censored(&self) -> bool {
        match (&self.delta1, &self.course2) {
            (FirstEvent::Censored, _) => true,
            (FirstEvent::NextTreatment, Some(c2)) => !c2.died,
            _ => false,
        }
    }

    pub fn reached_second_course(&self) -> bool {
        self.delta1 == FirstEvent::NextTreatment
    }

    /// Value of a covariate field, `None` when the field does not exist for
    /// this subject (second-course fields for one-course subjects).
    pub fn field(&self, field: Field) -> Option<f64> {
        let c2 = self.course2.as_ref();
        match field {
            Field::L1 => Some(bin(self.l1)),
            Field::A1 => Some(bin(self.a1)),
            Field::W1 => Some(self.w1),
            Field::L2 => c2.map(|c| bin(c.l2)),
            Field::A2 => c2.map(|c| bin(c.a2)),
            Field::W2 => c2.map(|c| c.w2),
            Field::S | Field::J => None,
        }
    }
}

pub(crate) fn bin(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CohortMeta {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDataset {
    pub records: Vec<SubjectRecord>,
    pub meta: CohortMeta,
}

impl CohortDataset {
    pub fn new(records: Vec<SubjectRecord>, meta: CohortMeta) -> Self {
        Self { records, meta }
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SubjectRecord> {
        self.records.iter()
    }

    /// Validated constructor; fails with every violation found.
    pub fn try_new(records: Vec<SubjectRecord>, meta: CohortMeta) -> Result<Self> {
        let ds = Self::new(records, meta);
        let violations = validate(&ds);
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(Error::Validation(violations))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    Course2Forbidden,
    Course2Required,
    NonPositiveW1,
    NonPositiveW2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub id: i64,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::DuplicateId => "duplicate id",
            ViolationKind::Course2Forbidden => "course2 forbidden",
            ViolationKind::Course2Required => "course2 required",
            ViolationKind::NonPositiveW1 => "w1 must be positive and finite",
            ViolationKind::NonPositiveW2 => "w2 must be positive and finite",
        };
        write!(f, "subject {}: {}", self.id, what)
    }
}

/// Checks every record invariant. An empty result means the dataset is valid.
pub fn validate(dataset: &CohortDataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::with_capacity(dataset.n());
    for r in &dataset.records {
        let mut push = |kind| out.push(Violation { id: r.id, kind });
        if !seen.insert(r.id) {
            push(ViolationKind::DuplicateId);
        }
        if !(r.w1.is_finite() && r.w1 > 0.0) {
            push(ViolationKind::NonPositiveW1);
        }
        match (r.delta1, &r.course2) {
            (FirstEvent::NextTreatment, None) => push(ViolationKind::Course2Required),
            (FirstEvent::NextTreatment, Some(c2)) => {
                if !(c2.w2.is_finite() && c2.w2 > 0.0) {
                    push(ViolationKind::NonPositiveW2);
                }
            }
            (_, Some(_)) => push(ViolationKind::Course2Forbidden),
            (_, None) => {}
        }
    }
    out
}

/// Variables a covariate term may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    L1,
    A1,
    W1,
    L2,
    A2,
    W2,
    /// Interval index at which the second course starts (person-interval data).
    S,
    /// Interval index of a person-interval row.
    J,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::L1 => "l1",
            Field::A1 => "a1",
            Field::W1 => "w1",
            Field::L2 => "l2",
            Field::A2 => "a2",
            Field::W2 => "w2",
            Field::S => "s",
            Field::J => "j",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Intercept,
    Raw(Field),
    /// `I(field > cutoff)`.
    Threshold {
        field: Field,
        cutoff: f64,
    },
    /// `I(field == value)`; used for interval-specific intercepts.
    Level {
        field: Field,
        value: f64,
    },
}

impl Term {
    fn field(&self) -> Option<Field> {
        match *self {
            Term::Intercept => None,
            Term::Raw(f) | Term::Threshold { field: f, .. } | Term::Level { field: f, .. } => {
                Some(f)
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Term::Intercept => "(intercept)".to_string(),
            Term::Raw(f) => f.name().to_string(),
            Term::Threshold { field, cutoff } => format!("I({} > {})", field.name(), cutoff),
            Term::Level { field, value } => format!("I({} == {})", field.name(), value),
        }
    }
}

/// Anything that can supply covariate values by field.
pub trait Covariates {
    fn id(&self) -> i64;
    fn value(&self, field: Field) -> Option<f64>;
}

impl Covariates for SubjectRecord {
    fn id(&self) -> i64 {
        self.id
    }

    fn value(&self, field: Field) -> Option<f64> {
        self.field(field)
    }
}

/// Ad-hoc covariate values, e.g. a simulated history during g-computation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Profile {
    pub id: i64,
    pub l1: Option<f64>,
    pub a1: Option<f64>,
    pub w1: Option<f64>,
    pub l2: Option<f64>,
    pub a2: Option<f64>,
    pub w2: Option<f64>,
    pub s: Option<f64>,
    pub j: Option<f64>,
}

impl Covariates for Profile {
    fn id(&self) -> i64 {
        self.id
    }

    fn value(&self, field: Field) -> Option<f64> {
        match field {
            Field::L1 => self.l1,
            Field::A1 => self.a1,
            Field::W1 => self.w1,
            Field::L2 => self.l2,
            Field::A2 => self.a2,
            Field::W2 => self.w2,
            Field::S => self.s,
            Field::J => self.j,
        }
    }
}

/// Ordered list of design-matrix terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Term>", into = "Vec<Term>")]
pub struct CovariateSpec {
    terms: Vec<Term>,
}

impl TryFrom<Vec<Term>> for CovariateSpec {
    type Error = Error;

    fn try_from(terms: Vec<Term>) -> Result<Self> {
        Self::new(terms)
    }
}

impl From<CovariateSpec> for Vec<Term> {
    fn from(spec: CovariateSpec) -> Self {
        spec.terms
    }
}

impl CovariateSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self> {
        let intercepts = terms
            .iter()
            .filter(|t| matches!(t, Term::Intercept))
            .count();
        if intercepts > 1 {
            return Err(Error::InvalidArgument(
                "covariate spec has more than one intercept".into(),
            ));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("covariate spec has no terms".into()));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, Term::Intercept))
    }

    pub fn references(&self, field: Field) -> bool {
        self.terms.iter().any(|t| t.field() == Some(field))
    }

    /// Index of the intercept column, if any.
    pub fn intercept_index(&self) -> Option<usize> {
        self.terms.iter().position(|t| matches!(t, Term::Intercept))
    }

    pub fn labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::label).collect()
    }

    /// Builds one design row.
    pub fn row<C: Covariates + ?Sized>(&self, subject: &C) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let v = match *term {
                Term::Intercept => 1.0,
                Term::Raw(f) => fetch(subject, f)?,
                Term::Threshold { field, cutoff } => bin(fetch(subject, field)? > cutoff),
                Term::Level { field, value } => bin(fetch(subject, field)? == value),
            };
            x.push(v);
        }
        Ok(x)
    }
}

fn fetch<C: Covariates + ?Sized>(subject: &C, field: Field) -> Result<f64> {
    subject.value(field).ok_or_else(|| Error::MissingField {
        field: field.name().to_string(),
        id: subject.id(),
    })
}

/// Target of inference: `P(T^{a1,a2} > tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimandSpec {
    pub a1: bool,
    pub a2: bool,
    pub tau: f64,
}

impl EstimandSpec {
    pub fn new(a1: bool, a2: bool, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must be finite and non-negative, got {tau}"
            )));
        }
        Ok(Self { a1, a2, tau })
    }

    /// Always-treat regime `(1, 1)` at the given horizon.
    pub fn always_treat(tau: f64) -> Self {
        Self {
            a1: true,
            a2: true,
            tau,
        }
    }

    pub fn at(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }
}

/// Survival curve with optional pointwise bootstrap bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurveEstimate {
    pub method: String,
    pub taus: Vec<f64>,
    pub estimates: Vec<f64>,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

impl SurvivalCurveEstimate {
    pub fn new(method: impl Into<String>, taus: Vec<f64>, estimates: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            taus,
            estimates,
            lo: None,
            hi: None,
        }
    }

    /// Largest pointwise absolute gap to another curve on the same grid.
    pub fn sup_gap(&self, other: &SurvivalCurveEstimate) -> f64 {
        self.estimates
            .iter()
            .zip(&other.estimates)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: i64, delta1: FirstEvent, course2: Option<SecondCourse>) -> SubjectRecord {
        SubjectRecord {
            id,
            l1: false,
            a1: true,
            w1: 4.2,
            delta1,
            course2,
        }
    }

    const C2: SecondCourse = SecondCourse {
        l2: false,
        a2: true,
        w2: 3.0,
        died: true,
    };

    fn kinds(ds: &CohortDataset) -> Vec<ViolationKind> {
        validate(ds).into_iter().map(|v| v.kind).collect()
    }

    #[test]
    fn death_with_course2_is_forbidden() {
        let ds = CohortDataset::new(
            vec![rec(1, FirstEvent::Death, Some(C2))],
            Default::default(),
        );
        assert_eq!(kinds(&ds), vec![ViolationKind::Course2Forbidden]);
        assert!(validate(&ds)[0].to_string().contains("course2 forbidden"));
    }

    #[test]
    fn next_treatment_without_course2_is_required() {
        let ds = CohortDataset::new(
            vec![rec(1, FirstEvent::NextTreatment, None)],
            Default::default(),
        );
        assert_eq!(kinds(&ds), vec![ViolationKind::Course2Required]);
    }

    #[test]
    fn well_formed_record_has_no_violations() {
        let ds = CohortDataset::new(
            vec![rec(1, FirstEvent::NextTreatment, Some(C2))],
            Default::default(),
        );
        assert!(validate(&ds).is_empty());
    }

    #[test]
    fn duplicate_ids_and_bad_times() {
        let mut a = rec(3, FirstEvent::Death, None);
        a.w1 = 0.0;
        let mut c2 = C2;
        c2.w2 = f64::NAN;
        let b = rec(3, FirstEvent::NextTreatment, Some(c2));
        let ds = CohortDataset::new(vec![a, b], Default::default());
        assert_eq!(
            kinds(&ds),
            vec![
                ViolationKind::NonPositiveW1,
                ViolationKind::DuplicateId,
                ViolationKind::NonPositiveW2
            ]
        );
    }

    #[test]
    fn derived_accessors() {
        let r = rec(1, FirstEvent::NextTreatment, Some(C2));
        assert_eq!(r.survival_time(), Some(7.2));
        assert!(r.delta_e());
        let d = rec(2, FirstEvent::Death, None);
        assert_eq!(d.survival_time(), Some(4.2));
        let c = rec(3, FirstEvent::Censored, None);
        assert!(!c.delta_e());
        assert!(c.is_censored());
        assert_eq!(c.survival_time(), None);
        let mut cc2 = C2;
        cc2.died = false;
        let cc = rec(4, FirstEvent::NextTreatment, Some(cc2));
        assert!(cc.is_censored() && cc.delta_e());
        assert_eq!(cc.follow_up(), 7.2);
    }

    #[test]
    fn spec_rows_and_missing_fields() {
        let spec = CovariateSpec::new(vec![
            Term::Intercept,
            Term::Raw(Field::L1),
            Term::Threshold {
                field: Field::W1,
                cutoff: 15.0,
            },
        ])
        .unwrap();
        let mut r = rec(9, FirstEvent::Death, None);
        r.l1 = true;
        r.w1 = 15.5;
        assert_eq!(spec.row(&r).unwrap(), vec![1.0, 1.0, 1.0]);
        r.w1 = 15.0;
        assert_eq!(spec.row(&r).unwrap(), vec![1.0, 1.0, 0.0]);

        let needs_l2 = CovariateSpec::new(vec![Term::Raw(Field::L2)]).unwrap();
        match needs_l2.row(&r) {
            Err(Error::MissingField { field, id }) => {
                assert_eq!(field, "l2");
                assert_eq!(id, 9);
            }
            other => panic!("expected MissingField, got {other:?}"),
        }
    }

    #[test]
    fn spec_rejects_two_intercepts() {
        assert!(CovariateSpec::new(vec![Term::Intercept, Term::Intercept]).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec = CovariateSpec::new(vec![
            Term::Intercept,
            Term::Threshold {
                field: Field::W1,
                cutoff: 15.0,
            },
        ])
        .unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            s,
            r#"["intercept",{"threshold":{"field":"w1","cutoff":15.0}}]"#
        );
        let back: CovariateSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn estimand_rejects_negative_tau() {
        assert!(EstimandSpec::new(true, true, -1.0).is_err());
        assert!(EstimandSpec::new(true, true, 0.0).is_ok());
    }
}
