#![allow(dead_code)]

use gtiming::{CohortDataset, CohortMeta, FirstEvent, SecondCourse, SubjectRecord};
use proptest::prelude::*;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Closed-form `P(T^{1,1} > tau)` under the default generator for
/// `tau <= 15`, where the late-course indicator is always 0.
///
/// Given `L1`, death and the second course compete with rates `lt` and `la`.
/// After a course at `s`, death has rate `mu(L2)`, so
/// `P(T > tau) = e^{-(lt+la) tau} + la * sum_l2 p(l2) (e^{-mu tau} - e^{-(lt+la) tau}) / (lt + la - mu)`.
pub fn analytic_truth_11(tau: f64) -> f64 {
    assert!(tau <= 15.0);
    let mut total = 0.0;
    for l1 in [0.0_f64, 1.0] {
        let lt = (-4.0 + l1).exp();
        let la = (-2.0 + l1).exp();
        let big = lt + la;
        let p1 = expit(0.5 + 0.15 * l1);
        let mut s = (-big * tau).exp();
        for (l2, p) in [(0.0, 1.0 - p1), (1.0, p1)] {
            let mu = (-2.0_f64 + l2).exp();
            s += la * p * ((-mu * tau).exp() - (-big * tau).exp()) / (big - mu);
        }
        total += 0.5 * s;
    }
    total
}

/// Arbitrary well-formed records. Times are drawn from a coarse lattice half
/// the time so that some land exactly on interval boundaries.
pub fn arb_record(id: i64) -> impl Strategy<Value = SubjectRecord> {
    let time = prop_oneof![(1u32..80).prop_map(|k| f64::from(k) * 0.25), 0.001f64..25.0];
    (
        any::<bool>(),
        any::<bool>(),
        time.clone(),
        0u8..3,
        any::<bool>(),
        any::<bool>(),
        time,
        any::<bool>(),
    )
        .prop_map(move |(l1, a1, w1, ev, l2, a2, w2, died)| {
            let delta1 = match ev {
                0 => FirstEvent::Death,
                1 => FirstEvent::Censored,
                _ => FirstEvent::NextTreatment,
            };
            SubjectRecord {
                id,
                l1,
                a1,
                w1,
                delta1,
                course2: (delta1 == FirstEvent::NextTreatment).then_some(SecondCourse {
                    l2,
                    a2,
                    w2,
                    died,
                }),
            }
        })
}

pub fn arb_cohort(max_n: usize) -> impl Strategy<Value = CohortDataset> {
    (1..=max_n).prop_flat_map(|n| {
        (1..=n as i64)
            .map(arb_record)
            .collect::<Vec<_>>()
            .prop_map(|records| CohortDataset::new(records, CohortMeta::default()))
    })
}
