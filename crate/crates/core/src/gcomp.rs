//! Parametric g-computation of `P(T^{a1,a2} > tau)`.
//!
//! Components: empirical `P(L1 = 1)`, cause-specific exponential rates for
//! death and for the second course after course 1 (`{1, A1, L1}`), a logistic
//! model for `L2` (`{1, A1, L1, W1-term}`) and an exponential model for the
//! time from course 2 to death (`{1, A1, A2, L1, L2, W1-term}`). The plug-in
//! distribution is evaluated by Monte Carlo with the treatments forced to the
//! target regime.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{DgpParams, Linear};
use crate::error::{Error, Result};
use crate::glm::{
    fit_exp_ph, fit_logit, logit_rows, predict_prob, surv_rows, FitOptions, FittedExpPH,
    FittedLogit,
};
use crate::ipw::W1_THRESHOLD;
use crate::model::{
    CohortDataset, CovariateSpec, EstimandSpec, Field, FirstEvent, Profile, SubjectRecord, Term,
};
use crate::rng::{stream, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcompSpecs {
    pub death1: CovariateSpec,
    pub course2: CovariateSpec,
    pub l2: CovariateSpec,
    pub death2: CovariateSpec,
}

impl GcompSpecs {
    pub fn new(w1_term: Term) -> Self {
        use Term::{Intercept, Raw};
        let spec = |t: Vec<Term>| CovariateSpec::new(t).expect("static spec");
        let stage1 = spec(vec![Intercept, Raw(Field::A1), Raw(Field::L1)]);
        Self {
            death1: stage1.clone(),
            course2: stage1,
            l2: spec(vec![Intercept, Raw(Field::A1), Raw(Field::L1), w1_term]),
            death2: spec(vec![
                Intercept,
                Raw(Field::A1),
                Raw(Field::A2),
                Raw(Field::L1),
                Raw(Field::L2),
                w1_term,
            ]),
        }
    }
}

impl Default for GcompSpecs {
    fn default() -> Self {
        Self::new(W1_THRESHOLD)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcompModels {
    pub p_l1: f64,
    pub death1: FittedExpPH,
    pub course2: FittedExpPH,
    pub l2: FittedLogit,
    pub death2: FittedExpPH,
}

impl GcompModels {
    pub fn fit(dataset: &CohortDataset, specs: &GcompSpecs, opts: &FitOptions) -> Result<Self> {
        if dataset.n() == 0 {
            return Err(Error::InvalidArgument("empty dataset".into()));
        }
        let p_l1 = dataset.iter().filter(|s| s.l1).count() as f64 / dataset.n() as f64;
        let stage1 = |spec: &CovariateSpec, event: FirstEvent| -> Result<FittedExpPH> {
            let rows = surv_rows(spec, dataset.iter(), |s: &SubjectRecord| {
                Some((s.w1, s.delta1 == event))
            })?;
            fit_exp_ph(spec.clone(), &rows, opts)
        };
        let death1 = stage1(&specs.death1, FirstEvent::Death)?;
        let course2 = stage1(&specs.course2, FirstEvent::NextTreatment)?;
        let l2_rows = logit_rows(&specs.l2, dataset.iter(), |s: &SubjectRecord| {
            s.course2.map(|c| c.l2)
        })?;
        let l2 = fit_logit(specs.l2.clone(), &l2_rows, opts)?;
        let d2_rows = surv_rows(&specs.death2, dataset.iter(), |s: &SubjectRecord| {
            s.course2.map(|c| (c.w2, c.died))
        })?;
        let death2 = fit_exp_ph(specs.death2.clone(), &d2_rows, opts)?;
        Ok(Self {
            p_l1,
            death1,
            course2,
            l2,
            death2,
        })
    }

    /// Components set to the generator's own coefficients (default specs with
    /// the generator's cutoff).
    pub fn from_dgp(params: &DgpParams) -> Result<Self> {
        params.validate()?;
        let specs = GcompSpecs::new(Term::Threshold {
            field: Field::W1,
            cutoff: params.w1_cutoff,
        });
        let pick = |lin: &Linear, name: &str, spec: &CovariateSpec| -> Result<Vec<f64>> {
            let mut used = Linear::default();
            let coef = spec
                .terms()
                .iter()
                .map(|t| match t {
                    Term::Intercept => {
                        used.intercept = lin.intercept;
                        lin.intercept
                    }
                    Term::Raw(Field::A1) => {
                        used.a1 = lin.a1;
                        lin.a1
                    }
                    Term::Raw(Field::A2) => {
                        used.a2 = lin.a2;
                        lin.a2
                    }
                    Term::Raw(Field::L1) => {
                        used.l1 = lin.l1;
                        lin.l1
                    }
                    Term::Raw(Field::L2) => {
                        used.l2 = lin.l2;
                        lin.l2
                    }
                    _ => {
                        used.w1_late = lin.w1_late;
                        lin.w1_late
                    }
                })
                .collect();
            if used != *lin {
                return Err(Error::InvalidArgument(format!(
                    "`{name}` has coefficients outside the g-computation model"
                )));
            }
            Ok(coef)
        };
        Ok(Self {
            p_l1: params.p_l1,
            death1: FittedExpPH::from_coefficients(
                specs.death1.clone(),
                pick(&params.death1_log_rate, "death1_log_rate", &specs.death1)?,
            )?,
            course2: FittedExpPH::from_coefficients(
                specs.course2.clone(),
                pick(&params.course2_log_rate, "course2_log_rate", &specs.course2)?,
            )?,
            l2: FittedLogit::from_coefficients(
                specs.l2.clone(),
                pick(&params.l2_logit, "l2_logit", &specs.l2)?,
            )?,
            death2: FittedExpPH::from_coefficients(
                specs.death2.clone(),
                pick(&params.death2_log_rate, "death2_log_rate", &specs.death2)?,
            )?,
        })
    }
}

const BLOCK: u64 = 1 << 16;

fn exp_draw(rng: &mut StreamRng, rate: f64) -> Result<f64> {
    Exp::new(rate)
        .map(|d| d.sample(rng))
        .map_err(|_| Error::Numerical(format!("exponential rate {rate}")))
}

fn draw_time(m: &GcompModels, a1: f64, a2: f64, rng: &mut StreamRng) -> Result<f64> {
    let l1 = f64::from(u8::from(rng.random::<f64>() < m.p_l1));
    let mut p = Profile {
        l1: Some(l1),
        a1: Some(a1),
        ..Default::default()
    };
    let wt1 = exp_draw(rng, m.death1.rate(&p)?)?;
    let wa1 = exp_draw(rng, m.course2.rate(&p)?)?;
    if wt1 <= wa1 {
        return Ok(wt1);
    }
    p.w1 = Some(wa1);
    let l2 = rng.random::<f64>() < predict_prob(&m.l2, &p)?;
    p.l2 = Some(f64::from(u8::from(l2)));
    p.a2 = Some(a2);
    Ok(wa1 + exp_draw(rng, m.death2.rate(&p)?)?)
}

/// Monte Carlo evaluation of the plug-in g-formula at each horizon.
/// Draws are split into fixed blocks with their own streams, so the result
/// does not depend on the thread count.
pub fn gcomp_curve(
    models: &GcompModels,
    a1: bool,
    a2: bool,
    taus: &[f64],
    draws: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("mc_draws must be positive".into()));
    }
    if taus.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument(
            "tau must be finite and non-negative".into(),
        ));
    }
    let (a1, a2) = (f64::from(u8::from(a1)), f64::from(u8::from(a2)));
    let blocks = draws.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| -> Result<Vec<u64>> {
            let mut rng = stream(seed, &[u64::MAX - 1, b]);
            let mut counts = vec![0u64; taus.len()];
            for _ in 0..BLOCK.min(draws - b * BLOCK) {
                let t = draw_time(models, a1, a2, &mut rng)?;
                for (c, tau) in counts.iter_mut().zip(taus) {
                    *c += u64::from(t > *tau);
                }
            }
            Ok(counts)
        })
        .try_reduce(
            || vec![0u64; taus.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    Ok(counts
        .into_iter()
        .map(|c| c as f64 / draws as f64)
        .collect())
}

/// Fits the default components to `dataset` and evaluates the g-formula.
pub fn gcomputation(
    dataset: &CohortDataset,
    target: &EstimandSpec,
    mc_draws: u64,
    seed: u64,
) -> Result<f64> {
    Ok(gcomputation_curve(dataset, target, &[target.tau], mc_draws, seed)?[0])
}

/// [`gcomputation`] at several horizons on the same draws.
pub fn gcomputation_curve(
    dataset: &CohortDataset,
    target: &EstimandSpec,
    taus: &[f64],
    mc_draws: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let models = GcompModels::fit(dataset, &GcompSpecs::default(), &FitOptions::default())?;
    gcomp_curve(&models, target.a1, target.a2, taus, mc_draws, seed)
}
