mod common;

use common::arb_cohort;
use gtiming::dgp::{generate, DgpParams};
use gtiming::glm::{FittedExpPH, FittedLogit};
use gtiming::io::{read_csv_from, write_csv_to};
use gtiming::ipw::{
    cc_iptw, compute_weights, hajek_censoring, hajek_no_censoring, naive_estimate, Adjustment,
    ModelBundle, ModelSpecs, PointEstimate,
};
use gtiming::model::validate;
use gtiming::msm::{
    discrete_weights, discrete_weights_full_product, discretize, fit_msm, DiscreteModels,
    DiscreteSpecs,
};
use gtiming::{CohortDataset, CovariateSpec, EstimandSpec, Result};
use proptest::prelude::*;

fn coefs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn logit_model(spec: &CovariateSpec, coef: &[f64]) -> FittedLogit {
    FittedLogit::from_coefficients(spec.clone(), coef[..spec.len()].to_vec()).unwrap()
}

fn ph_model(spec: &CovariateSpec, coef: &[f64]) -> FittedExpPH {
    let c = censoring_coefs(&coef[..spec.len()]);
    FittedExpPH::from_coefficients(spec.clone(), c).unwrap()
}

/// Censoring hazards near e^-3 so that remaining uncensored stays possible
/// over the whole horizon.
fn censoring_coefs(coef: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = coef.iter().map(|b| 0.25 * b).collect();
    c[0] -= 3.0;
    c
}

fn bundle(adj: Adjustment, c: &[Vec<f64>; 4]) -> ModelBundle {
    let specs = ModelSpecs::from(adj);
    ModelBundle {
        a1_model: logit_model(&specs.a1, &c[0]),
        a2_model: logit_model(&specs.a2, &c[1]),
        c1_model: Some(ph_model(&specs.c1, &c[2])),
        c2_model: Some(ph_model(&specs.c2, &c[3])),
        adjustment: adj,
    }
}

fn discrete_models(width: f64, c: &[Vec<f64>; 4]) -> DiscreteModels {
    let specs = DiscreteSpecs::new(Adjustment::Adjusted, width);
    let pre = censoring_coefs(&c[2]);
    let post = censoring_coefs(&c[3]);
    DiscreteModels {
        a1: logit_model(&specs.a1, &c[0]),
        a2: Some(logit_model(&specs.a2, &c[1])),
        censor_pre: Some(logit_model(&specs.censor_pre, &pre)),
        censor_post: Some(logit_model(&specs.censor_post, &post)),
    }
}

fn arb_coefs() -> impl Strategy<Value = [Vec<f64>; 4]> {
    (coefs(6), coefs(6), coefs(6), coefs(6)).prop_map(|(a, b, c, d)| [a, b, c, d])
}

fn taus() -> Vec<f64> {
    (0..=24).map(|k| f64::from(k) * 1.25).collect()
}

/// Estimates over a horizon grid; `None` when no subject contributes.
fn curve(
    f: impl Fn(&EstimandSpec) -> Result<PointEstimate>,
    base: &EstimandSpec,
) -> Option<Vec<f64>> {
    taus()
        .iter()
        .map(|t| f(&base.at(*t)).ok().map(|p| p.estimate))
        .collect()
}

fn assert_survival_curve(v: &[f64]) -> std::result::Result<(), TestCaseError> {
    prop_assert!(v.iter().all(|s| (0.0..=1.0).contains(s)), "{:?}", v);
    prop_assert!(v.windows(2).all(|w| w[1] <= w[0]), "{:?}", v);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn csv_round_trip_is_lossless(ds in arb_cohort(40)) {
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back.records, ds.records);
    }

    #[test]
    fn generated_cohorts_are_valid(seed in any::<u64>(), n in 1usize..300, scenario in 1u8..=2) {
        let ds = generate(&DgpParams::scenario(scenario), n, seed).unwrap();
        prop_assert!(validate(&ds).is_empty());
        prop_assert_eq!(ds.n(), n);
        let ids: Vec<i64> = ds.iter().map(|s| s.id).collect();
        prop_assert_eq!(ids, (1..=n as i64).collect::<Vec<_>>());
    }

    #[test]
    fn hajek_ratios_are_scale_invariant(
        ds in arb_cohort(40),
        c in arb_coefs(),
        scale in prop_oneof![1e-3f64..1e-1, 0.5f64..2.0, 10.0f64..1e3],
        a1 in any::<bool>(),
        a2 in any::<bool>(),
        tau in 0.0f64..25.0,
    ) {
        let target = EstimandSpec::new(a1, a2, tau).unwrap();
        let w = compute_weights(&ds, &bundle(Adjustment::Adjusted, &c), &target).unwrap();
        let scaled = w.scaled(scale);
        type Est = fn(&CohortDataset, &gtiming::ipw::WeightTable, &EstimandSpec) -> Result<PointEstimate>;
        for f in [hajek_no_censoring as Est, hajek_censoring, cc_iptw] {
            match (f(&ds, &w, &target), f(&ds, &scaled, &target)) {
                (Ok(a), Ok(b)) => prop_assert!((a.estimate - b.estimate).abs() <= 1e-12, "{} vs {}", a.estimate, b.estimate),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "scaling changed whether an estimate exists"),
            }
        }
    }

    #[test]
    fn estimated_curves_are_survival_functions(
        ds in arb_cohort(40),
        c in arb_coefs(),
        adjusted in any::<bool>(),
        a1 in any::<bool>(),
        a2 in any::<bool>(),
    ) {
        let adj = if adjusted { Adjustment::Adjusted } else { Adjustment::Unadjusted };
        let base = EstimandSpec::new(a1, a2, 0.0).unwrap();
        let w = compute_weights(&ds, &bundle(adj, &c), &base).unwrap();
        let curves = [
            curve(|t| hajek_no_censoring(&ds, &w, t), &base),
            curve(|t| hajek_censoring(&ds, &w, t), &base),
            curve(|t| cc_iptw(&ds, &w, t), &base),
            curve(|t| naive_estimate(&ds, t), &base),
        ];
        for v in curves.iter().flatten() {
            prop_assert_eq!(v[0], 1.0);
            assert_survival_curve(v)?;
        }
        let table = discretize(&ds, 1.25, 24).unwrap();
        let weighted = discrete_weights(&table, &discrete_models(1.25, &c)).unwrap();
        if let Ok(m) = fit_msm(&weighted, &base) {
            let v: Vec<f64> = taus().iter().map(|t| m.survival_at(*t).unwrap()).collect();
            prop_assert_eq!(v[0], 1.0);
            assert_survival_curve(&v)?;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn person_interval_invariants(
        ds in arb_cohort(25),
        c in arb_coefs(),
        width in prop_oneof![Just(0.25), Just(0.5), Just(1.0), Just(2.5)],
        big_j in 1u32..40,
    ) {
        let table = discretize(&ds, width, big_j).unwrap();
        let mut subjects = 0;
        for (rows, s) in table.subjects().zip(ds.iter()) {
            subjects += 1;
            prop_assert_eq!(rows[0].id, s.id);
            let expected = ((s.follow_up() / width).ceil().max(1.0) as u32).min(big_j);
            prop_assert_eq!(rows.len() as u32, expected);
            prop_assert!(rows.iter().zip(1..).all(|(r, j)| r.j == j));
            prop_assert!(rows[0].v, "first course is in interval 1");
            prop_assert_eq!(rows[0].d, Some(s.a1));
            prop_assert_eq!(rows[0].x, Some(s.l1));
            let sv = rows[0].s;
            prop_assert!(sv >= 2 && sv <= big_j + 1);
            prop_assert!(rows.iter().all(|r| r.s == sv));
            let courses: Vec<u32> = rows.iter().filter(|r| r.v).map(|r| r.j).collect();
            if sv <= big_j {
                prop_assert_eq!(courses, vec![1, sv]);
            } else {
                prop_assert_eq!(courses, vec![1]);
            }
            prop_assert!(rows.iter().all(|r| r.v || (r.d.is_none() && r.x.is_none())));
            // Absorbing outcome and censoring: only ever on the last row.
            let (init, last) = rows.split_at(rows.len() - 1);
            prop_assert!(init.iter().all(|r| !r.y && !r.c));
            prop_assert!(!(last[0].y && last[0].c));
            if last[0].y {
                prop_assert!(s.survival_time().is_some());
            }
            if last[0].c {
                prop_assert!(s.is_censored());
            }
        }
        prop_assert_eq!(subjects, ds.n());

        let models = discrete_models(width, &c);
        let short = discrete_weights(&table, &models).unwrap();
        let full = discrete_weights_full_product(&table, &models).unwrap();
        for (a, b) in short.rows.iter().zip(&full.rows) {
            prop_assert!(a.weight >= 1.0);
            prop_assert!((a.weight - b.weight).abs() <= 1e-12 * b.weight, "{} vs {}", a.weight, b.weight);
        }
    }
}
