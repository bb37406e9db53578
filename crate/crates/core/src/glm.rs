//! Maximum-likelihood fitting for the nuisance models: weighted logistic
//! regression and the exponential proportional-hazards model with right
//! censoring. Both use Newton's method with step-halving on the
//! log-likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateSpec, Covariates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the max-norm of the score.
    pub tol: f64,
    pub max_iter: usize,
    /// Logistic coefficients beyond this magnitude signal separation.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            separation_bound: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRow {
    pub x: Vec<f64>,
    pub y: bool,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvRow {
    pub x: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLogit {
    pub spec: CovariateSpec,
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_grad_norm: f64,
    pub log_likelihood: f64,
}

/// Exponential PH model; `coef` is on the log-rate scale so the rate is
/// `exp(x . coef)` and the baseline cumulative hazard is `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedExpPH {
    pub spec: CovariateSpec,
    pub coef: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_grad_norm: f64,
    pub log_likelihood: f64,
}

impl FittedLogit {
    /// Model with fixed, known coefficients (not estimated).
    pub fn from_coefficients(spec: CovariateSpec, coef: Vec<f64>) -> Result<Self> {
        check_dims(&spec, &coef)?;
        Ok(Self {
            spec,
            coef,
            converged: true,
            iterations: 0,
            max_grad_norm: 0.0,
            log_likelihood: f64::NAN,
        })
    }

    pub fn linear_predictor<C: Covariates + ?Sized>(&self, subject: &C) -> Result<f64> {
        Ok(dot(&self.spec.row(subject)?, &self.coef))
    }
}

impl FittedExpPH {
    pub fn from_coefficients(spec: CovariateSpec, coef: Vec<f64>) -> Result<Self> {
        check_dims(&spec, &coef)?;
        Ok(Self {
            spec,
            coef,
            converged: true,
            iterations: 0,
            max_grad_norm: 0.0,
            log_likelihood: f64::NAN,
        })
    }

    pub fn rate<C: Covariates + ?Sized>(&self, subject: &C) -> Result<f64> {
        ensure_converged(self.converged, self.iterations, self.max_grad_norm)?;
        Ok(dot(&self.spec.row(subject)?, &self.coef).exp())
    }
}

fn check_dims(spec: &CovariateSpec, coef: &[f64]) -> Result<()> {
    if spec.len() != coef.len() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for {} terms",
            coef.len(),
            spec.len()
        )));
    }
    Ok(())
}

fn ensure_converged(converged: bool, iterations: usize, max_grad_norm: f64) -> Result<()> {
    if converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            iterations,
            max_grad_norm,
        })
    }
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Weighted Bernoulli log-likelihood.
pub fn logit_log_likelihood(coef: &[f64], rows: &[LogitRow]) -> f64 {
    rows.iter()
        .map(|r| {
            let eta = dot(&r.x, coef);
            let y = if r.y { eta } else { 0.0 };
            r.weight * (y - softplus(eta))
        })
        .sum()
}

/// Analytic score of [`logit_log_likelihood`].
pub fn logit_score(coef: &[f64], rows: &[LogitRow]) -> Vec<f64> {
    let mut g = vec![0.0; coef.len()];
    for r in rows {
        let resid = r.weight * (f64::from(u8::from(r.y)) - expit(dot(&r.x, coef)));
        for (gk, xk) in g.iter_mut().zip(&r.x) {
            *gk += resid * xk;
        }
    }
    g
}

/// Exponential PH log-likelihood `sum[event * eta - time * exp(eta)]`.
pub fn exp_ph_log_likelihood(coef: &[f64], rows: &[SurvRow]) -> f64 {
    rows.iter()
        .map(|r| {
            let eta = dot(&r.x, coef);
            let e = if r.event { eta } else { 0.0 };
            e - r.time * eta.exp()
        })
        .sum()
}

pub fn exp_ph_score(coef: &[f64], rows: &[SurvRow]) -> Vec<f64> {
    let mut g = vec![0.0; coef.len()];
    for r in rows {
        let resid = f64::from(u8::from(r.event)) - r.time * dot(&r.x, coef).exp();
        for (gk, xk) in g.iter_mut().zip(&r.x) {
            *gk += resid * xk;
        }
    }
    g
}

struct Eval {
    ll: f64,
    grad: Vec<f64>,
    /// Observed information (negative Hessian), row-major.
    info: Vec<f64>,
}

fn logit_eval(coef: &[f64], rows: &[LogitRow]) -> Eval {
    let p = coef.len();
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    for r in rows {
        let eta = dot(&r.x, coef);
        let mu = expit(eta);
        let y = f64::from(u8::from(r.y));
        ll += r.weight * (y * eta - softplus(eta));
        let resid = r.weight * (y - mu);
        let w = r.weight * mu * (1.0 - mu);
        accumulate(&mut grad, &mut info, &r.x, resid, w);
    }
    Eval { ll, grad, info }
}

fn exp_ph_eval(coef: &[f64], rows: &[SurvRow]) -> Eval {
    let p = coef.len();
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    for r in rows {
        let eta = dot(&r.x, coef);
        let mu = r.time * eta.exp();
        let e = f64::from(u8::from(r.event));
        ll += e * eta - mu;
        accumulate(&mut grad, &mut info, &r.x, e - mu, mu);
    }
    Eval { ll, grad, info }
}

fn accumulate(grad: &mut [f64], info: &mut [f64], x: &[f64], resid: f64, w: f64) {
    let p = x.len();
    for a in 0..p {
        if x[a] == 0.0 {
            continue;
        }
        grad[a] += resid * x[a];
        let wa = w * x[a];
        for b in 0..=a {
            info[a * p + b] += wa * x[b];
        }
    }
}

fn symmetrize(info: &mut [f64], p: usize) {
    for a in 0..p {
        for b in 0..a {
            info[b * p + a] = info[a * p + b];
        }
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` by Cholesky.
/// Returns `None` when `A` is numerically singular.
fn cholesky_solve(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let p = b.len();
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        let s = b[i] - (0..i).map(|k| l[i * p + k] * z[k]).sum::<f64>();
        z[i] = s / l[i * p + i];
    }
    let mut x = vec![0.0; p];
    for i in (0..p).rev() {
        let s = z[i] - (i + 1..p).map(|k| l[k * p + i] * x[k]).sum::<f64>();
        x[i] = s / l[i * p + i];
    }
    Some(x)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct NewtonOutcome {
    coef: Vec<f64>,
    ll: f64,
    converged: bool,
    iterations: usize,
    max_grad_norm: f64,
}

/// Newton ascent with step-halving. `guard` runs after each accepted step and
/// may abort the fit (used for separation detection).
fn newton<E, G>(
    init: Vec<f64>,
    opts: &FitOptions,
    label: &str,
    eval: E,
    guard: G,
) -> Result<NewtonOutcome>
where
    E: Fn(&[f64]) -> Eval,
    G: Fn(&[f64]) -> Result<()>,
{
    let p = init.len();
    let mut coef = init;
    let mut cur = eval(&coef);
    if !cur.ll.is_finite() {
        return Err(Error::Numerical(label.to_string()));
    }
    let mut iterations = 0;
    loop {
        let gmax = max_abs(&cur.grad);
        if gmax <= opts.tol {
            return Ok(NewtonOutcome {
                coef,
                ll: cur.ll,
                converged: true,
                iterations,
                max_grad_norm: gmax,
            });
        }
        if iterations >= opts.max_iter {
            return Ok(NewtonOutcome {
                coef,
                ll: cur.ll,
                converged: false,
                iterations,
                max_grad_norm: gmax,
            });
        }
        symmetrize(&mut cur.info, p);
        let step = match cholesky_solve(&cur.info, &cur.grad) {
            Some(s) => s,
            None => {
                guard(&coef)?;
                return Err(Error::SingularDesign(label.to_string()));
            }
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = coef.iter().zip(&step).map(|(c, s)| c + t * s).collect();
            let next = eval(&cand);
            if next.ll.is_finite() && next.ll >= cur.ll - 1e-12 * cur.ll.abs().max(1.0) {
                accepted = Some((cand, next));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((c, e)) => {
                coef = c;
                cur = e;
                guard(&coef)?;
            }
            None => {
                // No ascent direction left at working precision.
                let gmax = max_abs(&cur.grad);
                return Ok(NewtonOutcome {
                    coef,
                    ll: cur.ll,
                    converged: gmax <= opts.tol,
                    iterations,
                    max_grad_norm: gmax,
                });
            }
        }
    }
}

fn check_rows(
    spec: &CovariateSpec,
    lens: impl Iterator<Item = usize>,
    label: &str,
) -> Result<usize> {
    let mut n = 0;
    for len in lens {
        if len != spec.len() {
            return Err(Error::InvalidArgument(format!(
                "{label}: design row has {len} columns, spec has {}",
                spec.len()
            )));
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument(format!("{label}: no rows")));
    }
    Ok(n)
}

/// Weighted logistic regression by Newton-Raphson.
///
/// A non-converged fit is returned with `converged = false`; separation and
/// rank deficiency are errors.
pub fn fit_logit(spec: CovariateSpec, rows: &[LogitRow], opts: &FitOptions) -> Result<FittedLogit> {
    const LABEL: &str = "logistic";
    check_rows(&spec, rows.iter().map(|r| r.x.len()), LABEL)?;
    if rows
        .iter()
        .any(|r| !(r.weight.is_finite() && r.weight > 0.0))
    {
        return Err(Error::InvalidArgument(
            "logistic weights must be positive and finite".into(),
        ));
    }
    let (w1, wt) = rows.iter().fold((0.0, 0.0), |(a, b), r| {
        (a + if r.y { r.weight } else { 0.0 }, b + r.weight)
    });
    if w1 == 0.0 || w1 == wt {
        return Err(Error::Separation("all outcomes belong to one class".into()));
    }

    let mut init = vec![0.0; spec.len()];
    if let Some(k) = spec.intercept_index() {
        init[k] = logit(w1 / wt);
    }
    let bound = opts.separation_bound;
    let out = newton(
        init,
        opts,
        LABEL,
        |c| logit_eval(c, rows),
        |c| {
            let m = max_abs(c);
            if m > bound {
                Err(Error::Separation(format!("|coefficient| reached {m:.1}")))
            } else {
                Ok(())
            }
        },
    )?;
    let max_eta = rows
        .iter()
        .map(|r| dot(&r.x, &out.coef).abs())
        .fold(0.0, f64::max);
    if max_eta > bound {
        return Err(Error::Separation(format!(
            "|linear predictor| reached {max_eta:.1}"
        )));
    }
    Ok(FittedLogit {
        spec,
        coef: out.coef,
        converged: out.converged,
        iterations: out.iterations,
        max_grad_norm: out.max_grad_norm,
        log_likelihood: out.ll,
    })
}

/// Exponential proportional-hazards fit with right censoring.
pub fn fit_exp_ph(spec: CovariateSpec, rows: &[SurvRow], opts: &FitOptions) -> Result<FittedExpPH> {
    const LABEL: &str = "exponential PH";
    check_rows(&spec, rows.iter().map(|r| r.x.len()), LABEL)?;
    if rows.iter().any(|r| !(r.time.is_finite() && r.time > 0.0)) {
        return Err(Error::InvalidArgument(
            "survival times must be positive and finite".into(),
        ));
    }
    let events = rows.iter().filter(|r| r.event).count();
    if events == 0 {
        return Err(Error::NoEvents(LABEL.to_string()));
    }
    let exposure: f64 = rows.iter().map(|r| r.time).sum();
    let mut init = vec![0.0; spec.len()];
    if let Some(k) = spec.intercept_index() {
        init[k] = (events as f64 / exposure).ln();
    }
    let out = newton(init, opts, LABEL, |c| exp_ph_eval(c, rows), |_| Ok(()))?;
    if out.coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical(LABEL.to_string()));
    }
    Ok(FittedExpPH {
        spec,
        coef: out.coef,
        converged: out.converged,
        iterations: out.iterations,
        max_grad_norm: out.max_grad_norm,
        log_likelihood: out.ll,
    })
}

/// Builds logistic rows from subjects; `outcome` returns `None` to skip a
/// subject.
pub fn logit_rows<'a, C, I, F>(
    spec: &CovariateSpec,
    subjects: I,
    outcome: F,
) -> Result<Vec<LogitRow>>
where
    C: Covariates + 'a,
    I: IntoIterator<Item = &'a C>,
    F: Fn(&C) -> Option<bool>,
{
    let mut rows = Vec::new();
    for s in subjects {
        if let Some(y) = outcome(s) {
            rows.push(LogitRow {
                x: spec.row(s)?,
                y,
                weight: 1.0,
            });
        }
    }
    Ok(rows)
}

/// Builds survival rows; `outcome` returns `(time, event)` or `None` to skip.
pub fn surv_rows<'a, C, I, F>(spec: &CovariateSpec, subjects: I, outcome: F) -> Result<Vec<SurvRow>>
where
    C: Covariates + 'a,
    I: IntoIterator<Item = &'a C>,
    F: Fn(&C) -> Option<(f64, bool)>,
{
    let mut rows = Vec::new();
    for s in subjects {
        if let Some((time, event)) = outcome(s) {
            rows.push(SurvRow {
                x: spec.row(s)?,
                time,
                event,
            });
        }
    }
    Ok(rows)
}

/// `P(outcome = 1 | covariates)` from a converged logistic fit.
pub fn predict_prob<C: Covariates + ?Sized>(m: &FittedLogit, subject: &C) -> Result<f64> {
    ensure_converged(m.converged, m.iterations, m.max_grad_norm)?;
    Ok(expit(m.linear_predictor(subject)?))
}

/// Survival `exp(-t * rate)` from a converged exponential PH fit.
pub fn predict_surv<C: Covariates + ?Sized>(m: &FittedExpPH, subject: &C, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "survival time must be >= 0, got {t}"
        )));
    }
    Ok((-t * m.rate(subject)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Field, Profile, Term};

    fn spec(terms: Vec<Term>) -> CovariateSpec {
        CovariateSpec::new(terms).unwrap()
    }

    fn intercept_rows(ys: &[bool], ws: &[f64]) -> Vec<LogitRow> {
        ys.iter()
            .zip(ws)
            .map(|(&y, &w)| LogitRow {
                x: vec![1.0],
                y,
                weight: w,
            })
            .collect()
    }

    #[test]
    fn intercept_only_is_logit_of_mean() {
        let rows = intercept_rows(&[true, true, true, false], &[1.0; 4]);
        let m = fit_logit(spec(vec![Term::Intercept]), &rows, &FitOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.coef[0] - 3f64.ln()).abs() < 1e-10);
        assert!((m.coef[0] - 1.098612).abs() < 1e-6);
        assert!(m.max_grad_norm <= 1e-8);
    }

    #[test]
    fn weighted_intercept_only() {
        let rows = intercept_rows(&[true, false], &[2.0, 1.0]);
        let m = fit_logit(spec(vec![Term::Intercept]), &rows, &FitOptions::default()).unwrap();
        assert!((m.coef[0] - logit(2.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn perfect_separation_is_detected() {
        let xs = [1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let rows: Vec<LogitRow> = xs
            .iter()
            .map(|&x| LogitRow {
                x: vec![1.0, x],
                y: x == 1.0,
                weight: 1.0,
            })
            .collect();
        let err = fit_logit(
            spec(vec![Term::Intercept, Term::Raw(Field::L1)]),
            &rows,
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Separation(_)), "{err:?}");
    }

    #[test]
    fn single_outcome_class_is_separation() {
        let rows = intercept_rows(&[true, true], &[1.0, 1.0]);
        assert!(matches!(
            fit_logit(spec(vec![Term::Intercept]), &rows, &FitOptions::default()),
            Err(Error::Separation(_))
        ));
    }

    #[test]
    fn duplicated_column_is_singular() {
        let rows: Vec<LogitRow> = [
            (0.0, false),
            (1.0, true),
            (0.0, true),
            (1.0, false),
            (1.0, true),
        ]
        .iter()
        .map(|&(x, y)| LogitRow {
            x: vec![1.0, x, x],
            y,
            weight: 1.0,
        })
        .collect();
        let s = spec(vec![
            Term::Intercept,
            Term::Raw(Field::L1),
            Term::Raw(Field::A1),
        ]);
        assert!(matches!(
            fit_logit(s, &rows, &FitOptions::default()),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn max_iter_reached_reports_not_converged() {
        let rows: Vec<LogitRow> = [
            (0.0, false),
            (1.0, true),
            (0.0, true),
            (1.0, false),
            (1.0, true),
        ]
        .iter()
        .map(|&(x, y)| LogitRow {
            x: vec![1.0, x],
            y,
            weight: 1.0,
        })
        .collect();
        let opts = FitOptions {
            max_iter: 1,
            tol: 1e-14,
            ..Default::default()
        };
        let m = fit_logit(
            spec(vec![Term::Intercept, Term::Raw(Field::L1)]),
            &rows,
            &opts,
        )
        .unwrap();
        assert!(!m.converged);
        let p = Profile {
            l1: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            predict_prob(&m, &p),
            Err(Error::NotConverged { .. })
        ));
    }

    fn surv(times: &[f64], events: &[bool], xs: &[f64]) -> Vec<SurvRow> {
        times
            .iter()
            .zip(events)
            .zip(xs)
            .map(|((&t, &e), &x)| SurvRow {
                x: vec![1.0, x],
                time: t,
                event: e,
            })
            .collect()
    }

    #[test]
    fn exp_ph_intercept_closed_forms() {
        let s = spec(vec![Term::Intercept]);
        let rows = vec![
            SurvRow {
                x: vec![1.0],
                time: 1.0,
                event: true,
            },
            SurvRow {
                x: vec![1.0],
                time: 2.0,
                event: true,
            },
        ];
        let m = fit_exp_ph(s.clone(), &rows, &FitOptions::default()).unwrap();
        assert!((m.coef[0] - (2.0f64 / 3.0).ln()).abs() < 1e-12);

        let rows = vec![
            SurvRow {
                x: vec![1.0],
                time: 1.0,
                event: true,
            },
            SurvRow {
                x: vec![1.0],
                time: 2.0,
                event: false,
            },
        ];
        let m = fit_exp_ph(s, &rows, &FitOptions::default()).unwrap();
        assert!((m.coef[0].exp() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_ph_binary_covariate_matches_cells() {
        // cell 0: 2 events / 6.0 exposure; cell 1: 1 event / 7.5 exposure
        let rows = surv(
            &[1.0, 2.0, 3.0, 2.5, 5.0],
            &[true, true, false, true, false],
            &[0.0, 0.0, 0.0, 1.0, 1.0],
        );
        let m = fit_exp_ph(
            spec(vec![Term::Intercept, Term::Raw(Field::L1)]),
            &rows,
            &FitOptions::default(),
        )
        .unwrap();
        let r0 = m.coef[0].exp();
        let r1 = (m.coef[0] + m.coef[1]).exp();
        assert!((r0 - 2.0 / 6.0).abs() < 1e-10);
        assert!((r1 - 1.0 / 7.5).abs() < 1e-10);
    }

    #[test]
    fn exp_ph_errors() {
        let s = spec(vec![Term::Intercept]);
        let rows = vec![SurvRow {
            x: vec![1.0],
            time: 1.0,
            event: false,
        }];
        assert!(matches!(
            fit_exp_ph(s.clone(), &rows, &FitOptions::default()),
            Err(Error::NoEvents(_))
        ));
        let rows = vec![SurvRow {
            x: vec![1.0],
            time: 0.0,
            event: true,
        }];
        assert!(fit_exp_ph(s, &rows, &FitOptions::default()).is_err());
    }

    #[test]
    fn predictions() {
        let s = spec(vec![Term::Intercept, Term::Raw(Field::L1)]);
        let zero = FittedLogit::from_coefficients(s.clone(), vec![0.0, 0.0]).unwrap();
        let p0 = Profile {
            l1: Some(0.0),
            ..Default::default()
        };
        let p1 = Profile {
            l1: Some(1.0),
            ..Default::default()
        };
        assert_eq!(predict_prob(&zero, &p0).unwrap(), 0.5);

        let m = FittedLogit::from_coefficients(s.clone(), vec![1.0, -1.0]).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((predict_prob(&m, &p0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.7311).abs() < 1e-4);

        let up = FittedLogit::from_coefficients(s.clone(), vec![0.2, 0.7]).unwrap();
        assert!(predict_prob(&up, &p1).unwrap() > predict_prob(&up, &p0).unwrap());

        let ph = FittedExpPH::from_coefficients(s, vec![-5.0, 0.0]).unwrap();
        assert_eq!(predict_surv(&ph, &p0, 0.0).unwrap(), 1.0);
        let s10 = predict_surv(&ph, &p0, 10.0).unwrap();
        assert!((s10 - (-10.0 * (-5.0f64).exp()).exp()).abs() < 1e-15);
        assert!((s10 - 0.934_840_39).abs() < 1e-8);
        let s20 = predict_surv(&ph, &p0, 20.0).unwrap();
        assert!((s20 - s10 * s10).abs() < 1e-14);
        assert!(predict_surv(&ph, &p0, -1.0).is_err());
    }

    #[test]
    fn missing_field_in_prediction() {
        let s = spec(vec![Term::Intercept, Term::Raw(Field::L2)]);
        let m = FittedLogit::from_coefficients(s, vec![0.0, 1.0]).unwrap();
        let p = Profile {
            id: 12,
            ..Default::default()
        };
        assert!(matches!(
            predict_prob(&m, &p),
            Err(Error::MissingField { id: 12, .. })
        ));
    }

    #[test]
    fn coefficient_count_must_match_spec() {
        let s = spec(vec![Term::Intercept]);
        assert!(FittedLogit::from_coefficients(s, vec![0.0, 1.0]).is_err());
    }
}
