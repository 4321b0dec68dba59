//! Acceptance criteria, one PASS/FAIL line each.

use std::fs;
use std::time::Instant;

use num_complex::Complex64 as C64;

use coherence_nulltest::brute_force_oracle::{
    oracle_click_pmf, oracle_moments_from_pmf, validation_suite,
};
use coherence_nulltest::correlator_engine::{
    analytic_click_covariance, analytic_r, analytic_value, build_report, estimate_g2_from_clicks,
    estimate_g2_ratio, g1_cross, null_test, Estimate, Observable, ReportOptions, Scalar, Verdict,
    DEFAULT_Z_STAR,
};
use coherence_nulltest::experiment_cli::{run_experiment, ExperimentConfig};
use coherence_nulltest::field_states::{
    compute_moments, make_coherent, make_fock, make_squeezed, make_thermal, prediction_moments,
    CutoffPolicy, FieldState,
};
use coherence_nulltest::joint_evolution::{
    evolve, evolve_exact, fock_click_pmf_closed_form, CouplingParams, JointDetectorState,
};
use coherence_nulltest::measurement_channels::{
    click_pmf, homodyne_pdf, sample_clicks, sample_heterodyne, sample_homodyne, Channel, GridSpec,
    SampleBatch,
};
use coherence_nulltest::Result;

type Criterion = fn() -> Result<Outcome>;

const COUNT: usize = 1_000_000;
const Z: f64 = 5.0;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, msg: String) {
        self.pass &= ok;
        self.details
            .push(format!("{} {msg}", if ok { "ok  " } else { "MISS" }));
    }
}

fn pol() -> CutoffPolicy {
    CutoffPolicy::default()
}

fn sample(js: &JointDetectorState, ch: Channel, seed: u64) -> Result<SampleBatch> {
    match ch {
        Channel::Click => sample_clicks(&click_pmf(js), COUNT, seed),
        Channel::Homodyne => sample_homodyne(&homodyne_pdf(js, &GridSpec::default())?, COUNT, seed),
        Channel::Heterodyne => sample_heterodyne(js, COUNT, seed),
    }
}

fn within(e: Estimate, target: f64) -> bool {
    (e.value - target).abs() < Z * e.standard_error
}

fn coherent_null_suite() -> Result<Outcome> {
    let mut out = Outcome::new();
    let mut seed = 100;
    for alpha in [C64::new(1.0, 0.0), C64::new(5.0, 0.0), C64::new(0.0, 10.0)] {
        for g in [1e-2, 1e-3] {
            let t0 = Instant::now();
            let state = make_coherent(alpha, pol())?;
            let moments = prediction_moments(&state);
            let js = evolve(&state, &CouplingParams::approximate(g)?)?;
            let mut worst = 0.0f64;
            let mut exact_zero = true;
            for ch in [Channel::Click, Channel::Homodyne, Channel::Heterodyne] {
                seed += 1;
                let batch = sample(&js, ch, seed)?;
                for &obs in Observable::for_channel(ch) {
                    let r = build_report(&batch, obs, &moments, g, None, ReportOptions::default())?;
                    exact_zero &= r.analytic_value.modulus() == 0.0;
                    worst = worst.max(r.empirical_value.modulus() / r.standard_error);
                }
            }
            let secs = t0.elapsed().as_secs_f64();
            out.check(
                worst < Z && exact_zero && secs < 60.0,
                format!("alpha={alpha} g={g:e}: max |cov|/SE = {worst:.2}, analytic zero = {exact_zero}, {secs:.1} s"),
            );
        }
    }
    Ok(out)
}

fn click_formula() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = 1e-3;
    let cp = CouplingParams::exact(g)?;
    let mut states: Vec<FieldState> = (1..=8)
        .map(|n| make_fock(n, pol()))
        .collect::<Result<_>>()?;
    states.push(make_thermal(1.0, pol())?);
    states.push(make_thermal(3.0, pol())?);
    for s in &states {
        let pmf = click_pmf(&evolve_exact(s, &cp)?);
        let m = oracle_moments_from_pmf(pmf.iter().map(|(a, b, p)| ((a, b), p)));
        let a = analytic_click_covariance(&prediction_moments(s), g)?.value;
        let rel = ((m.covariance - a) / a).abs();
        out.check(
            rel <= 3.0 * g,
            format!(
                "{}: cov = {:.6e}, formula = {a:.6e}, rel = {rel:.2e}",
                s.label(),
                m.covariance
            ),
        );
    }
    Ok(out)
}

fn g2_chain() -> Result<Outcome> {
    let mut out = Outcome::new();
    let states = [
        make_coherent(C64::new(1.5, -0.5), pol())?,
        make_fock(3, pol())?,
        make_thermal(2.0, pol())?,
        make_squeezed(0.5, 0.3, C64::new(0.4, 0.0), pol())?,
    ];
    for s in &states {
        let m = compute_moments(s);
        let r = analytic_r(&m)?;
        let g2 = m.g2.expect("non-vacuum");
        out.check(
            (r - g2).abs() <= 1e-10,
            format!("{}: R = {r:.12}, g2 = {g2:.12}", s.label()),
        );
    }
    let g = 0.01;
    for (s, target, seed) in [
        (make_coherent(C64::new(5.0, 0.0), pol())?, 1.0, 301),
        (make_thermal(3.0, pol())?, 2.0, 302),
    ] {
        let js = evolve(&s, &CouplingParams::approximate(g)?)?;
        let batch = sample_clicks(&click_pmf(&js), COUNT, seed)?;
        let ratio = estimate_g2_ratio(&batch)?;
        let single = estimate_g2_from_clicks(&batch, 0)?;
        let analytic = analytic_r(&prediction_moments(&s))?;
        let sep =
            (ratio.value - single.value).abs() / ratio.standard_error.hypot(single.standard_error);
        out.check(
            within(ratio, analytic)
                && within(single, analytic)
                && sep < Z
                && (analytic - target).abs() < 1e-12,
            format!(
                "{}: ratio = {:.4} +- {:.4}, 2P2P0/P1^2 = {:.4} +- {:.4}, analytic = {analytic}",
                s.label(),
                ratio.value,
                ratio.standard_error,
                single.value,
                single.standard_error
            ),
        );
    }
    Ok(out)
}

fn homodyne_covariance() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = 0.01;
    let cases = [
        (make_fock(5, pol())?, 0.05, 401),
        (
            make_squeezed(1.0, std::f64::consts::PI, C64::new(0.0, 0.0), pol())?,
            -4.3233e-3,
            402,
        ),
    ];
    for (i, (s, target, seed)) in cases.into_iter().enumerate() {
        let js = evolve(&s, &CouplingParams::approximate(g)?)?;
        let pdf = homodyne_pdf(&js, &GridSpec::default())?;
        let grid = pdf.moments().cov;
        let batch = sample_homodyne(&pdf, COUNT, seed)?;
        let r = build_report(
            &batch,
            Observable::QuadratureProduct,
            &prediction_moments(&s),
            g,
            None,
            ReportOptions::default(),
        )?;
        let emp = r.empirical_value.as_complex().re;
        let sampled_ok = (emp - target).abs() < Z * r.standard_error;
        let grid_ok = i > 0 || (grid - target).abs() <= 1e-6;
        let sign_ok = i == 0 || emp < 0.0;
        out.check(
            sampled_ok && grid_ok && sign_ok,
            format!(
                "{}: grid = {grid:.9e}, sampled = {emp:.4e} +- {:.1e}, target = {target:e}",
                s.label(),
                r.standard_error
            ),
        );
    }
    Ok(out)
}

fn heterodyne() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = 0.01;
    for (s, re_t, cross_t, seed) in [
        (make_thermal(3.0, pol())?, 0.015, 0.03, 501),
        (make_coherent(C64::new(2.0, 1.0), pol())?, 0.0, 0.0, 502),
    ] {
        let js = evolve(&s, &CouplingParams::approximate(g)?)?;
        let batch = sample_heterodyne(&js, COUNT, seed)?;
        let m = prediction_moments(&s);
        let re = build_report(
            &batch,
            Observable::HeterodyneRe,
            &m,
            g,
            None,
            ReportOptions::default(),
        )?;
        let cr = build_report(
            &batch,
            Observable::HeterodyneCross,
            &m,
            g,
            None,
            ReportOptions::default(),
        )?;
        let re_v = re.empirical_value.as_complex().re;
        let cr_v = cr.empirical_value.modulus();
        out.check(
            (re_v - re_t).abs() < Z * re.standard_error && (cr_v - cross_t).abs() < Z * cr.standard_error,
            format!(
                "{}: Re cov = {re_v:.5} +- {:.1e} (target {re_t}), |cross| = {cr_v:.5} +- {:.1e} (target {cross_t}), acceptance = {:.3}",
                s.label(),
                re.standard_error,
                cr.standard_error,
                batch.acceptance_rate.unwrap_or(f64::NAN)
            ),
        );
    }
    Ok(out)
}

fn g1_universality() -> Result<Outcome> {
    let mut out = Outcome::new();
    let cp = CouplingParams::exact(0.01)?;
    for s in [
        make_coherent(C64::new(1.0, 2.0), pol())?,
        make_fock(5, pol())?,
        make_thermal(3.0, pol())?,
        make_squeezed(1.0, 0.0, C64::new(1.0, 0.5), pol())?,
    ] {
        let g1 = g1_cross(&evolve_exact(&s, &cp)?)?;
        out.check(
            (g1 - 1.0).abs() <= 1e-10,
            format!("{}: |g1| - 1 = {:.2e}", s.label(), g1 - 1.0),
        );
    }
    Ok(out)
}

fn distance(a: &JointDetectorState, b: &JointDetectorState) -> (f64, &'static str) {
    match a.joint_trace_distance(b) {
        Some(d) => (d, "joint"),
        None => (a.detector_trace_distance(b), "detector"),
    }
}

fn approximation_control() -> Result<Outcome> {
    let mut out = Outcome::new();
    let s = make_coherent(C64::new(3.0, 0.0), pol())?;
    let gs = [1e-2, 1e-3, 1e-4];
    let mut approx = Vec::new();
    let mut seq = Vec::new();
    let mut kinds = Vec::new();
    for g in gs {
        let ex = evolve_exact(&s, &CouplingParams::exact(g)?)?;
        let (da, ka) = distance(&ex, &evolve(&s, &CouplingParams::approximate(g)?)?);
        let (ds, ks) = distance(&ex, &evolve(&s, &CouplingParams::sequential(g, g)?)?);
        approx.push(da);
        seq.push(ds);
        kinds.push((ka, ks));
    }
    for (name, d, kind) in [
        ("exact vs approximate", &approx, kinds[0].0),
        ("exact vs sequential", &seq, kinds[0].1),
    ] {
        let ratios = [d[0] / d[1], d[1] / d[2]];
        out.check(
            ratios.iter().all(|r| (5.0..=20.0).contains(r)),
            format!(
                "{name} ({kind} trace distance): {:.4e}, {:.4e}, {:.4e}; ratios {:.2}, {:.2}",
                d[0], d[1], d[2], ratios[0], ratios[1]
            ),
        );
    }
    Ok(out)
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut out = Outcome::new();
    for theta in [0.05, 0.2, 0.5] {
        let mut worst = 0.0f64;
        for n in 0..=8 {
            let oracle = oracle_click_pmf(n, theta)?;
            let closed = fock_click_pmf_closed_form(n, theta);
            let g = theta * theta / 2.0;
            let exact = click_pmf(&evolve_exact(
                &make_fock(n, pol())?,
                &CouplingParams::exact(g)?,
            )?);
            for i in 0..=n {
                for j in 0..=n - i {
                    let o = oracle.get(i, j);
                    worst = worst
                        .max((o - closed.get(i, j)).abs())
                        .max((o - exact.get(i, j)).abs());
                }
            }
        }
        out.check(
            worst <= 1e-12,
            format!("theta={theta}: max |oracle - fast| = {worst:.2e}"),
        );
    }
    let suite = validation_suite()?;
    let failed = suite.iter().filter(|c| !c.passed()).count();
    out.check(
        failed == 0,
        format!("validation suite: {} checks, {failed} failed", suite.len()),
    );
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let mut out = Outcome::new();
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let config = |dir: &std::path::Path| {
        ExperimentConfig::from_json(&format!(
            r#"{{"state":{{"kind":"thermal","nbar":2.0}},"coupling":{{"gamma0_dt":0.01}},
                "channels":["click","homodyne","heterodyne"],"samples":100000,"seed":20241014,
                "output_dir":{:?},"formats":["csv"]}}"#,
            dir.to_string_lossy()
        ))
    };
    for d in &dirs {
        run_experiment(&config(d.path())?)?;
    }
    for name in ["click.csv", "homodyne.csv", "heterodyne.csv"] {
        let a = fs::read(dirs[0].path().join(name))?;
        let b = fs::read(dirs[1].path().join(name))?;
        out.check(
            a == b && !a.is_empty(),
            format!("{name}: {} bytes, identical = {}", a.len(), a == b),
        );
    }
    Ok(out)
}

fn inconclusiveness() -> Result<Outcome> {
    let mut out = Outcome::new();
    let g = 0.01;
    let s = make_fock(5, pol())?;
    let m = prediction_moments(&s);
    let js = evolve(&s, &CouplingParams::approximate(g)?)?;
    for (ch, obs, want, seed) in [
        (
            Channel::Click,
            Observable::ClickProduct,
            Verdict::ConsistentWithCoherent,
            1001,
        ),
        (
            Channel::Homodyne,
            Observable::QuadratureProduct,
            Verdict::Acoherent,
            1002,
        ),
    ] {
        let batch = sample(&js, ch, seed)?;
        let r = build_report(&batch, obs, &m, g, Some(&js), ReportOptions::default())?;
        let v = null_test(&r, DEFAULT_Z_STAR);
        let analytic = match analytic_value(obs, &m, g)? {
            Scalar::Real(x) => x,
            Scalar::Complex { re, .. } => re,
        };
        out.check(
            v.verdict == want,
            format!(
                "{}: statistic = {:.4e} +- {:.1e} (analytic {analytic:.3e}), verdict {:?}, wanted {want:?}",
                ch.as_str(),
                r.empirical_value.as_complex().re,
                r.standard_error,
                v.verdict
            ),
        );
    }
    Ok(out)
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("coherent null suite", coherent_null_suite),
        ("click covariance formula", click_formula),
        ("g2 identity chain", g2_chain),
        ("homodyne covariance", homodyne_covariance),
        ("heterodyne covariances", heterodyne),
        ("g1 universality", g1_universality),
        ("approximation control", approximation_control),
        ("oracle equivalence", oracle_equivalence),
        ("determinism", determinism),
        ("click/homodyne complementarity", inconclusiveness),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, details) = match f() {
            Ok(o) => (o.pass, o.details),
            Err(e) => (false, vec![format!("MISS error: {e}")]),
        };
        passed += ok as usize;
        println!(
            "{} {:>2} {name} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            t0.elapsed().as_secs_f64()
        );
        for d in details {
            println!("        {d}");
        }
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed != criteria.len() {
        std::process::exit(1);
    }
}
