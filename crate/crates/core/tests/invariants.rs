use num_complex::Complex64 as C64;
use proptest::prelude::*;

use coherence_nulltest::brute_force_oracle::oracle_click_pmf;
use coherence_nulltest::correlator_engine::{
    build_report, null_test, Observable, ReportOptions, Verdict,
};
use coherence_nulltest::experiment_cli::ExperimentConfig;
use coherence_nulltest::field_states::{
    make_coherent, make_fock, make_squeezed, make_thermal, prediction_moments, CutoffPolicy,
    FieldState,
};
use coherence_nulltest::joint_evolution::{evolve, CouplingParams, EvolutionMode};
use coherence_nulltest::measurement_channels::{
    click_pmf, homodyne_pdf, sample_clicks, sample_heterodyne, sample_homodyne, GridSpec,
};
use coherence_nulltest::physical_params::{gamma0_rate, DetectorSpec};

fn state(kind: u8, x: f64) -> FieldState {
    let p = CutoffPolicy::default();
    match kind % 4 {
        0 => make_coherent(C64::new(x, 0.5 * x), p),
        1 => make_fock((2.0 * x) as usize + 1, p),
        2 => make_thermal(x, p),
        _ => make_squeezed(0.2 * x, x, C64::new(0.3, -0.2), p),
    }
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn batches_reproduce_and_respect_cutoff(kind in 0u8..4, x in 0.2f64..2.5, seed in any::<u64>()) {
        let js = evolve(&state(kind, x), &CouplingParams::new(0.02, EvolutionMode::Approximate).unwrap()).unwrap();
        let pmf = click_pmf(&js);
        let a = sample_clicks(&pmf, 500, seed).unwrap();
        prop_assert_eq!(&a, &sample_clicks(&pmf, 500, seed).unwrap());
        prop_assert_eq!(a.count(), 500);
        let k = js.kmax() as u32;
        prop_assert!(a.clicks().unwrap().iter().all(|o| o[0] + o[1] <= k));
        let pdf = homodyne_pdf(&js, &GridSpec::default()).unwrap();
        prop_assert!(pdf.values.iter().all(|v| *v >= 0.0));
        prop_assert!((pdf.mass - 1.0).abs() <= 1e-6);
        let h = sample_homodyne(&pdf, 300, seed).unwrap();
        prop_assert_eq!(&h, &sample_homodyne(&pdf, 300, seed).unwrap());
    }

    #[test]
    fn report_and_verdict_definitions(x in 0.3f64..2.0, seed in any::<u64>(), z in 0.5f64..8.0) {
        let s = make_thermal(x, CutoffPolicy::default()).unwrap();
        let g = 0.01;
        let js = evolve(&s, &CouplingParams::approximate(g).unwrap()).unwrap();
        let batch = sample_heterodyne(&js, 2000, seed).unwrap();
        let m = prediction_moments(&s);
        for obs in [Observable::HeterodyneRe, Observable::HeterodyneCross] {
            let r = build_report(&batch, obs, &m, g, None, ReportOptions::default()).unwrap();
            prop_assert!(r.standard_error > 0.0);
            if obs == Observable::HeterodyneRe {
                let want = (r.empirical_value.as_complex().re - r.analytic_value.as_complex().re) / r.standard_error;
                prop_assert!((r.z_score - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            let v = null_test(&r, z);
            let acoherent = r.empirical_value.modulus() / r.standard_error > z;
            prop_assert_eq!(v.verdict == Verdict::Acoherent, acoherent);
        }
    }

    #[test]
    fn oracle_pmfs_are_normalized(n in 0usize..=12, theta in 0.01f64..1.5) {
        let p = oracle_click_pmf(n, theta).unwrap();
        prop_assert!(p.outcomes.iter().all(|(_, q)| *q >= 0.0));
        prop_assert!((p.total() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn detector_spec_fields_positive(
        m in prop_oneof![Just(-1.0), Just(0.0), Just(f64::NAN), Just(f64::INFINITY), 1.0f64..1e4],
        which in 0usize..5,
    ) {
        let mut v = [1400.0, 1.5, 6283.0, 5e3, 1.0];
        v[which] = m;
        let spec = DetectorSpec { mass: v[0], length: v[1], omega: v[2], speed: v[3], dt: v[4] };
        prop_assert_eq!(gamma0_rate(&spec).is_ok(), m.is_finite() && m > 0.0);
    }

    #[test]
    fn config_requires_seed_samples_and_channels(samples in 0usize..400, with_seed in any::<bool>(), empty in any::<bool>()) {
        let seed = if with_seed { r#","seed":3"# } else { "" };
        let channels = if empty { "[]" } else { r#"["click"]"# };
        let text = format!(
            r#"{{"state":{{"kind":"fock","n":1}},"coupling":{{"gamma0_dt":0.01}},"channels":{channels},"samples":{samples}{seed}}}"#
        );
        let ok = ExperimentConfig::from_json(&text).is_ok();
        prop_assert_eq!(ok, samples >= 100 && with_seed && !empty);
    }
}

#[test]
fn standard_error_scales_with_count() {
    let s = make_fock(4, CutoffPolicy::default()).unwrap();
    let g = 0.02;
    let js = evolve(&s, &CouplingParams::approximate(g).unwrap()).unwrap();
    let pmf = click_pmf(&js);
    let m = prediction_moments(&s);
    let pdf = homodyne_pdf(&js, &GridSpec::default()).unwrap();
    for seed in 0..4 {
        let se = |n: usize, obs| {
            let b = if obs == Observable::ClickProduct {
                sample_clicks(&pmf, n, seed).unwrap()
            } else {
                sample_homodyne(&pdf, n, seed).unwrap()
            };
            build_report(&b, obs, &m, g, None, ReportOptions::default())
                .unwrap()
                .standard_error
        };
        for obs in [Observable::ClickProduct, Observable::QuadratureProduct] {
            let ratio = se(40_000, obs) / se(160_000, obs);
            assert!(
                (ratio / 2.0 - 1.0).abs() < 0.2,
                "{obs:?} seed {seed}: {ratio}"
            );
        }
    }
}

#[test]
fn large_occupancy_thermal_is_resolved() {
    let s = make_thermal(100.0, CutoffPolicy::default()).unwrap();
    let g = 1e-3;
    let js = evolve(&s, &CouplingParams::approximate(g).unwrap()).unwrap();
    let batch = sample_clicks(&click_pmf(&js), 200_000, 8).unwrap();
    let r = build_report(
        &batch,
        Observable::ClickProduct,
        &prediction_moments(&s),
        g,
        None,
        ReportOptions::default(),
    )
    .unwrap();
    let analytic = r.analytic_value.as_complex().re;
    assert!((analytic - 1e-2).abs() < 1e-12);
    assert!(r.z_score.abs() < 5.0, "{}", r.z_score);
    assert_eq!(null_test(&r, 5.0).verdict, Verdict::Acoherent);
}
