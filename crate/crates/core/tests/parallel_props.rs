use std::f64::consts::{LN_2, PI, TAU};

use pmgate_core::array::{ArrayScene, BeamProfile, Position, Site};
use pmgate_core::dynamics::PropagationOptions;
use pmgate_core::parallel::{plan_parallel, propagate_parallel, ParallelPlan, PlanOptions};
use pmgate_core::Error;
use proptest::prelude::*;
use proptest::sample::subsequence;

/// Sites with Ω/2π = 16·2^−m MHz, m = 0..5.
fn ladder() -> ArrayScene {
    let r0 = 7.0;
    let beam = BeamProfile::new(TAU * 16.0, r0, Position::default()).unwrap();
    let sites = (0..5)
        .map(|m| Site { label: format!("m{m}"), position: Position::new(r0 * (m as f64 * LN_2).sqrt(), 0.0, 0.0) })
        .collect();
    ArrayScene::new(beam, sites, "m0").unwrap()
}

fn plan_for(scene: &ArrayScene, targets: &[usize], angle: f64, eps: f64) -> ParallelPlan {
    let t: Vec<(String, f64)> = targets.iter().map(|m| (format!("m{m}"), angle)).collect();
    match plan_parallel(scene, &t, eps, PlanOptions::default()) {
        Ok(p) => p,
        Err(Error::Constraint { suggested_eps_m: Some(e), .. }) => plan_parallel(scene, &t, e, PlanOptions::default()).unwrap(),
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn tone_order_does_not_matter(
        targets in subsequence(vec![0usize, 1, 2, 3], 2..=3).prop_shuffle(),
        shift in 0usize..3,
    ) {
        let scene = ladder();
        let plan = plan_for(&scene, &targets, PI, TAU * 0.125);
        let n = plan.tones.len();
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let opts = PropagationOptions::default();
        let a = propagate_parallel(&scene, &plan, 1, opts).unwrap();
        let b = propagate_parallel(&scene, &plan.permuted(&perm).unwrap(), 1, opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(&x.label, &y.label);
            prop_assert!(x.unitary.distance(&y.unitary) < 1e-12);
        }
    }

    #[test]
    fn common_duration_quantizes_every_tone(
        targets in subsequence(vec![0usize, 1, 2, 3, 4], 1..=4),
        eps_mhz in 0.05f64..0.2,
        angle in prop_oneof![Just(PI), Just(PI / 2.0)],
    ) {
        let scene = ladder();
        let plan = plan_for(&scene, &targets, angle, TAU * eps_mhz);
        for t in &plan.tones {
            let cycles = t.omega_m * plan.total_t / TAU;
            prop_assert!((cycles - cycles.round()).abs() < 1e-9 * cycles.max(1.0));
            prop_assert!((t.eps_m * plan.total_t - angle).abs() < 1e-9);
        }
    }
}

#[test]
fn switching_off_a_tone_leaves_other_targets() {
    let scene = ladder();
    let plan = plan_for(&scene, &[0, 1, 2], PI, TAU * 0.125);
    let opts = PropagationOptions::default();
    let full = propagate_parallel(&scene, &plan, 1, opts).unwrap();
    for i in 0..plan.tones.len() {
        let off = plan.switch_off(i).unwrap();
        let label = &plan.site_assignments[i];
        let recs = propagate_parallel(&scene, &off, 1, opts).unwrap();
        for (a, b) in full.iter().zip(&recs) {
            if &b.label == label {
                assert!(b.tone_index.is_none() && b.crosstalk.is_some());
                assert!(b.fidelity_identity > 0.99, "{label}: {}", b.fidelity_identity);
            } else if b.tone_index.is_some() {
                assert!((a.fidelity_target - b.fidelity_target).abs() < 5e-3);
            }
        }
    }
}
