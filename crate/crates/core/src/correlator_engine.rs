//! Analytic detector correlators, their Monte-Carlo estimates, and the null
//! test of the coherent-state hypothesis.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_states::FieldMoments;
use crate::fock::CompensatedSum;
use crate::joint_evolution::JointDetectorState;
use crate::measurement_channels::{Channel, Quadrature, SampleBatch};

pub const DEFAULT_Z_STAR: f64 = 5.0;
pub const MIN_SAMPLES: usize = 100;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
const VACUUM_OCCUPANCY: f64 = 1e-14;

/// Which per-detector product a correlator is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// `n1 n2`
    ClickProduct,
    /// `x1 x2`
    QuadratureProduct,
    /// `Re beta1 Re beta2`
    HeterodyneRe,
    /// `conj(beta1) beta2`
    HeterodyneCross,
}

impl Observable {
    pub fn channel(&self) -> Channel {
        match self {
            Observable::ClickProduct => Channel::Click,
            Observable::QuadratureProduct => Channel::Homodyne,
            Observable::HeterodyneRe | Observable::HeterodyneCross => Channel::Heterodyne,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::ClickProduct => "click_product",
            Observable::QuadratureProduct => "quadrature_product",
            Observable::HeterodyneRe => "heterodyne_re",
            Observable::HeterodyneCross => "heterodyne_cross",
        }
    }

    /// The observables read out on a channel.
    pub fn for_channel(channel: Channel) -> &'static [Observable] {
        match channel {
            Channel::Click => &[Observable::ClickProduct],
            Channel::Homodyne => &[Observable::QuadratureProduct],
            Channel::Heterodyne => &[Observable::HeterodyneRe, Observable::HeterodyneCross],
        }
    }
}

/// A real or complex correlator value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Scalar {
    pub fn complex(z: C64) -> Self {
        Scalar::Complex { re: z.re, im: z.im }
    }

    pub fn as_complex(&self) -> C64 {
        match *self {
            Scalar::Real(x) => C64::new(x, 0.0),
            Scalar::Complex { re, im } => C64::new(re, im),
        }
    }

    pub fn modulus(&self) -> f64 {
        self.as_complex().norm()
    }
}

/// Analytic value with a flag for the vacuum, where `Q` is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticValue {
    pub value: f64,
    pub undefined_for_vacuum: bool,
}

fn check_coupling(gamma0_dt: f64) -> Result<()> {
    if gamma0_dt > 0.0 && gamma0_dt < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gamma0_dt = {gamma0_dt} not in (0, 1)"
        )))
    }
}

/// `(gamma0 dt)^2 Q <a^+ a>`; zero with a flag for the vacuum.
pub fn analytic_click_covariance(m: &FieldMoments, gamma0_dt: f64) -> Result<AnalyticValue> {
    check_coupling(gamma0_dt)?;
    Ok(match m.mandel_q {
        Some(q) => AnalyticValue {
            value: gamma0_dt * gamma0_dt * q * m.n_mean,
            undefined_for_vacuum: false,
        },
        None => AnalyticValue {
            value: 0.0,
            undefined_for_vacuum: true,
        },
    })
}

/// `<N1 N2> / (<N1><N2>) = 1 + Q / <n>`.
pub fn analytic_r(m: &FieldMoments) -> Result<f64> {
    match (m.mandel_q, m.n_mean > 0.0) {
        (Some(q), true) => Ok(1.0 + q / m.n_mean),
        _ => Err(Error::UndefinedForVacuum),
    }
}

/// `gamma0 dt (<dP^2> - 1/2)`.
pub fn analytic_homodyne_covariance(m: &FieldMoments, gamma0_dt: f64) -> Result<f64> {
    check_coupling(gamma0_dt)?;
    Ok(gamma0_dt * (m.p_var - 0.5))
}

/// `gamma0 dt (<dP^2> - 1/2) / 2`.
pub fn analytic_heterodyne_re_covariance(m: &FieldMoments, gamma0_dt: f64) -> Result<f64> {
    check_coupling(gamma0_dt)?;
    Ok(0.5 * gamma0_dt * (m.p_var - 0.5))
}

/// `gamma0 dt (<a^+ a> - |<a>|^2)`.
pub fn analytic_heterodyne_cross(m: &FieldMoments, gamma0_dt: f64) -> Result<C64> {
    check_coupling(gamma0_dt)?;
    Ok(C64::new(gamma0_dt * (m.n_mean - m.a_mean.norm_sqr()), 0.0))
}

/// Weak-coupling prediction for an observable.
pub fn analytic_value(obs: Observable, m: &FieldMoments, gamma0_dt: f64) -> Result<Scalar> {
    Ok(match obs {
        Observable::ClickProduct => Scalar::Real(analytic_click_covariance(m, gamma0_dt)?.value),
        Observable::QuadratureProduct => Scalar::Real(analytic_homodyne_covariance(m, gamma0_dt)?),
        Observable::HeterodyneRe => Scalar::Real(analytic_heterodyne_re_covariance(m, gamma0_dt)?),
        Observable::HeterodyneCross => Scalar::complex(analytic_heterodyne_cross(m, gamma0_dt)?),
    })
}

/// The covariance carried by a detector state, without the weak-coupling
/// expansion.
pub fn state_covariance(
    js: &JointDetectorState,
    obs: Observable,
    quadrature: Quadrature,
) -> Scalar {
    let (b1, b2) = js.detector_amplitudes();
    let bb = js.b1_b2();
    let bdb = js.b1_dag_b2();
    match obs {
        Observable::ClickProduct => {
            let (m1, m2, m12) = js.click_pmf().moments();
            Scalar::Real(m12 - m1 * m2)
        }
        Observable::QuadratureProduct => Scalar::Real(match quadrature {
            Quadrature::X => bb.re + bdb.re - 2.0 * b1.re * b2.re,
            Quadrature::P => bdb.re - bb.re - 2.0 * b1.im * b2.im,
        }),
        Observable::HeterodyneRe => Scalar::Real(0.5 * (bb.re + bdb.re) - b1.re * b2.re),
        Observable::HeterodyneCross => Scalar::complex(bdb - b1.conj() * b2),
    }
}

/// `|<b1^+ b2>| / sqrt(<b1^+ b1><b2^+ b2>)` evaluated on the state.
pub fn g1_cross(js: &JointDetectorState) -> Result<f64> {
    let (n1, n2) = js.detector_means();
    if n1 <= VACUUM_OCCUPANCY || n2 <= VACUUM_OCCUPANCY {
        return Err(Error::VacuumDetectors);
    }
    Ok(js.b1_dag_b2().norm() / (n1 * n2).sqrt())
}

/// An estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

/// Complex covariance estimate; the error is `sqrt(E|z - c|^2 / n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexEstimate {
    pub value: C64,
    pub standard_error: f64,
}

fn mean(v: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    for x in v {
        s.add(*x);
    }
    s.value() / v.len() as f64
}

fn mean_of(n: usize, f: impl Fn(usize) -> f64) -> f64 {
    let mut s = CompensatedSum::default();
    for i in 0..n {
        s.add(f(i));
    }
    s.value() / n as f64
}

/// Unbiased sample covariance with a delta-method standard error from the
/// centred fourth moment.
pub fn covariance(x: &[f64], y: &[f64]) -> Result<Estimate> {
    let n = x.len().min(y.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let (mx, my) = (mean(&x[..n]), mean(&y[..n]));
    let m11 = mean_of(n, |i| (x[i] - mx) * (y[i] - my));
    let m22 = mean_of(n, |i| ((x[i] - mx) * (y[i] - my)).powi(2));
    let nf = n as f64;
    Ok(Estimate {
        value: m11 * nf / (nf - 1.0),
        standard_error: ((m22 - m11 * m11).max(0.0) / nf).sqrt(),
    })
}

/// Covariance `E[conj(z1 - m1)(z2 - m2)]`.
pub fn complex_covariance(z1: &[C64], z2: &[C64]) -> Result<ComplexEstimate> {
    let n = z1.len().min(z2.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let m1 = C64::new(mean_of(n, |i| z1[i].re), mean_of(n, |i| z1[i].im));
    let m2 = C64::new(mean_of(n, |i| z2[i].re), mean_of(n, |i| z2[i].im));
    let prod = |i: usize| (z1[i] - m1).conj() * (z2[i] - m2);
    let c = C64::new(mean_of(n, |i| prod(i).re), mean_of(n, |i| prod(i).im));
    let spread = mean_of(n, |i| (prod(i) - c).norm_sqr());
    let nf = n as f64;
    Ok(ComplexEstimate {
        value: c * (nf / (nf - 1.0)),
        standard_error: (spread / nf).sqrt(),
    })
}

/// Sample covariance of the selected observable on a batch.
pub fn estimate_covariance(batch: &SampleBatch, obs: Observable) -> Result<(Scalar, f64)> {
    if batch.channel() != obs.channel() {
        return Err(Error::ChannelMismatch {
            got: batch.channel().as_str().into(),
            wanted: obs.as_str().into(),
        });
    }
    match obs {
        Observable::HeterodyneCross => {
            let (z1, z2) = batch.complex_columns()?;
            let e = complex_covariance(&z1, &z2)?;
            Ok((Scalar::complex(e.value), e.standard_error))
        }
        _ => {
            let (x, y) = batch.real_columns();
            let e = covariance(&x, &y)?;
            Ok((Scalar::Real(e.value), e.standard_error))
        }
    }
}

/// Seeded bootstrap standard error of the covariance estimator.
pub fn bootstrap_covariance_se(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    let n = x.len().min(y.len());
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..n);
        }
        let mx = mean_of(n, |i| x[idx[i]]);
        let my = mean_of(n, |i| y[idx[i]]);
        stats.push(
            mean_of(n, |i| (x[idx[i]] - mx) * (y[idx[i]] - my)) * n as f64 / (n as f64 - 1.0),
        );
    }
    let m = mean(&stats);
    Ok((stats.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (resamples as f64 - 1.0)).sqrt())
}

/// `mean(n1 n2) / (mean(n1) mean(n2))` with a delta-method error.
pub fn estimate_g2_ratio(batch: &SampleBatch) -> Result<Estimate> {
    let clicks = batch.clicks()?;
    let n = clicks.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let a_i = |i: usize| (clicks[i][0] as f64) * (clicks[i][1] as f64);
    let b_i = |i: usize| clicks[i][0] as f64;
    let c_i = |i: usize| clicks[i][1] as f64;
    let (a, b, c) = (mean_of(n, a_i), mean_of(n, b_i), mean_of(n, c_i));
    if b == 0.0 || c == 0.0 {
        return Err(Error::ZeroMarginalMean);
    }
    let r = a / (b * c);
    // gradient of A/(BC) and the sample covariance of (n1 n2, n1, n2)
    let g = [1.0 / (b * c), -r / b, -r / c];
    let dev = |i: usize| [a_i(i) - a, b_i(i) - b, c_i(i) - c];
    let mut var = 0.0;
    for p in 0..3 {
        for q in 0..3 {
            var += g[p] * g[q] * mean_of(n, |i| dev(i)[p] * dev(i)[q]);
        }
    }
    Ok(Estimate {
        value: r,
        standard_error: (var.max(0.0) / n as f64).sqrt(),
    })
}

/// `2 P2 P0 / P1^2` from one detector's marginal frequencies.
///
/// The multinomial delta method gives `var(ln g) = (1/P0 + 4/P1 + 1/P2)/N`.
/// With no two-click events the estimate is 0 and the error is the scale of
/// a single event, `2 P0 / (P1^2 N)`.
pub fn estimate_g2_from_clicks(batch: &SampleBatch, detector: usize) -> Result<Estimate> {
    let clicks = batch.clicks()?;
    let n = clicks.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            got: n,
        });
    }
    let mut counts = [0usize; 3];
    for o in clicks {
        let k = o[detector.min(1)] as usize;
        if k < 3 {
            counts[k] += 1;
        }
    }
    if counts[1] == 0 {
        return Err(Error::ZeroP1(detector));
    }
    let nf = n as f64;
    let p = counts.map(|c| c as f64 / nf);
    let g = 2.0 * p[2] * p[0] / (p[1] * p[1]);
    let se = if counts[2] == 0 || counts[0] == 0 {
        2.0 * p[0].max(1.0 / nf) / (p[1] * p[1] * nf)
    } else {
        g * ((1.0 / p[0] + 4.0 / p[1] + 1.0 / p[2]) / nf).sqrt()
    };
    Ok(Estimate {
        value: g,
        standard_error: se,
    })
}

/// One channel's analytic prediction against its Monte-Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorReport {
    pub channel: Channel,
    pub observable: Observable,
    pub analytic_value: Scalar,
    pub empirical_value: Scalar,
    pub standard_error: f64,
    pub sample_count: usize,
    pub z_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_standard_error: Option<f64>,
    pub auxiliary: BTreeMap<String, f64>,
}

/// Options for [`build_report`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReportOptions {
    pub quadrature: Quadrature,
    /// Seed for a bootstrap cross-check of the error; off when `None`.
    pub bootstrap_seed: Option<u64>,
}

/// Estimates `obs` on `batch` and compares it with the weak-coupling
/// prediction. With a detector state, the state's own covariance and its
/// difference from the prediction are recorded as `state_value` and
/// `approximation_error` (real part for complex correlators).
pub fn build_report(
    batch: &SampleBatch,
    obs: Observable,
    moments: &FieldMoments,
    gamma0_dt: f64,
    js: Option<&JointDetectorState>,
    opts: ReportOptions,
) -> Result<CorrelatorReport> {
    let analytic = analytic_value(obs, moments, gamma0_dt)?;
    let (empirical, se) = estimate_covariance(batch, obs)?;
    let diff = (empirical.as_complex() - analytic.as_complex()).norm();
    let signed = match (empirical, analytic) {
        (Scalar::Real(e), Scalar::Real(a)) => e - a,
        _ => diff,
    };
    let z_score = if se > 0.0 {
        signed / se
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(signed)
    };

    let mut aux = BTreeMap::new();
    if obs == Observable::ClickProduct {
        if let Ok(r) = analytic_r(moments) {
            aux.insert("R".to_string(), r);
        }
        if let Ok(e) = estimate_g2_ratio(batch) {
            aux.insert("g2_ratio".to_string(), e.value);
            aux.insert("g2_ratio_se".to_string(), e.standard_error);
        }
        if let Ok(e) = estimate_g2_from_clicks(batch, 0) {
            aux.insert("g2_clicks".to_string(), e.value);
            aux.insert("g2_clicks_se".to_string(), e.standard_error);
        }
    }
    if let Some(js) = js {
        let sv = state_covariance(js, obs, opts.quadrature);
        aux.insert("state_value".to_string(), sv.as_complex().re);
        aux.insert(
            "approximation_error".to_string(),
            sv.as_complex().re - analytic.as_complex().re,
        );
        if let Ok(g1) = g1_cross(js) {
            aux.insert("g1_modulus".to_string(), g1);
        }
    }
    let bootstrap_standard_error = match (opts.bootstrap_seed, obs) {
        (Some(_), Observable::HeterodyneCross) => None,
        (Some(seed), _) => {
            let (x, y) = batch.real_columns();
            Some(bootstrap_covariance_se(&x, &y, BOOTSTRAP_RESAMPLES, seed)?)
        }
        (None, _) => None,
    };
    Ok(CorrelatorReport {
        channel: obs.channel(),
        observable: obs,
        analytic_value: analytic,
        empirical_value: empirical,
        standard_error: se,
        sample_count: batch.count(),
        z_score,
        bootstrap_standard_error,
        auxiliary: aux,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentWithCoherent,
    Acoherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullTestVerdict {
    pub channel: Channel,
    pub observable: Observable,
    /// The empirical covariance, tested against zero.
    pub statistic: Scalar,
    pub standard_error: f64,
    pub z_star: f64,
    pub analytic_prediction: Scalar,
    pub verdict: Verdict,
    pub note: String,
}

/// Acoherent iff `|statistic| / standard_error > z_star`.
pub fn null_test(report: &CorrelatorReport, z_star: f64) -> NullTestVerdict {
    let stat = report.empirical_value.modulus();
    let se = report.standard_error;
    let z = if se > 0.0 {
        stat / se
    } else if stat == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let verdict = if z > z_star {
        Verdict::Acoherent
    } else {
        Verdict::ConsistentWithCoherent
    };
    let mut note = format!("|statistic|/SE = {z:.3} against z* = {z_star}");
    if verdict == Verdict::ConsistentWithCoherent && report.analytic_value.modulus() > 0.0 {
        note.push_str(
            "; predicted correlation is nonzero but below resolution at this sample count",
        );
    }
    NullTestVerdict {
        channel: report.channel,
        observable: report.observable,
        statistic: report.empirical_value,
        standard_error: se,
        z_star,
        analytic_prediction: report.analytic_value,
        verdict,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_states::{
        compute_moments, make_coherent, make_fock, make_squeezed, make_thermal, prediction_moments,
        CutoffPolicy,
    };
    use crate::joint_evolution::{evolve, evolve_exact, CouplingParams};
    use crate::measurement_channels::{click_pmf, sample_clicks, Outcomes};
    use proptest::prelude::*;

    fn pol() -> CutoffPolicy {
        CutoffPolicy::default()
    }

    fn click_batch(data: Vec<[u32; 2]>) -> SampleBatch {
        SampleBatch {
            seed: 0,
            generator_id: "test".into(),
            outcomes: Outcomes::Click(data),
            acceptance_rate: None,
        }
    }

    #[test]
    fn analytic_examples() {
        let coh = compute_moments(&make_coherent(C64::new(1.3, -0.4), pol()).unwrap());
        assert!(analytic_click_covariance(&coh, 0.01).unwrap().value.abs() < 1e-14);
        let fock = compute_moments(&make_fock(5, pol()).unwrap());
        assert!((analytic_click_covariance(&fock, 0.01).unwrap().value + 5e-4).abs() < 1e-15);
        assert!((analytic_r(&fock).unwrap() - 0.8).abs() < 1e-15);
        assert!((analytic_homodyne_covariance(&fock, 0.01).unwrap() - 0.05).abs() < 1e-15);
        assert!((analytic_heterodyne_re_covariance(&fock, 0.01).unwrap() - 0.025).abs() < 1e-15);
        assert!(
            (analytic_heterodyne_cross(&fock, 0.01).unwrap() - C64::new(0.05, 0.0)).norm() < 1e-15
        );
        let th = compute_moments(&make_thermal(3.0, pol()).unwrap());
        assert!((analytic_click_covariance(&th, 0.01).unwrap().value - 9e-4).abs() < 1e-11);
        assert!((analytic_r(&th).unwrap() - 2.0).abs() < 1e-8);
        assert!((analytic_heterodyne_re_covariance(&th, 0.01).unwrap() - 0.015).abs() < 1e-10);
        assert!((analytic_heterodyne_cross(&th, 0.01).unwrap().re - 0.03).abs() < 1e-10);
        let sq = compute_moments(
            &make_squeezed(1.0, std::f64::consts::PI, C64::new(0.0, 0.0), pol()).unwrap(),
        );
        let h = analytic_homodyne_covariance(&sq, 0.01).unwrap();
        assert!((h - 0.01 * ((-2.0f64).exp() / 2.0 - 0.5)).abs() < 1e-12);
        assert!((h + 4.323_323_583_816_936e-3).abs() < 1e-12);
        let vac = compute_moments(&make_fock(0, pol()).unwrap());
        assert!(
            analytic_click_covariance(&vac, 0.01)
                .unwrap()
                .undefined_for_vacuum
        );
        assert!(matches!(analytic_r(&vac), Err(Error::UndefinedForVacuum)));
        assert!(matches!(
            analytic_homodyne_covariance(&vac, 1.5),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn constant_batch_has_zero_error() {
        let b = click_batch(vec![[2, 3]; 500]);
        let (c, se) = estimate_covariance(&b, Observable::ClickProduct).unwrap();
        assert_eq!(c, Scalar::Real(0.0));
        assert_eq!(se, 0.0);
        assert!(matches!(
            estimate_covariance(&click_batch(vec![[0, 0]; 10]), Observable::ClickProduct),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(matches!(
            estimate_g2_ratio(&click_batch(vec![[0, 1]; 200])),
            Err(Error::ZeroMarginalMean)
        ));
        assert!(matches!(
            estimate_g2_from_clicks(&click_batch(vec![[0, 1]; 200]), 0),
            Err(Error::ZeroP1(0))
        ));
    }

    #[test]
    fn fock_one_has_no_coincidences() {
        let js = evolve_exact(
            &make_fock(1, pol()).unwrap(),
            &CouplingParams::exact(0.2).unwrap(),
        )
        .unwrap();
        let b = sample_clicks(&click_pmf(&js), 10_000, 4).unwrap();
        assert_eq!(estimate_g2_ratio(&b).unwrap().value, 0.0);
    }

    #[test]
    fn coherent_click_estimators() {
        let s = make_coherent(C64::new(10.0, 0.0), pol()).unwrap();
        let js = evolve(&s, &CouplingParams::approximate(0.01).unwrap()).unwrap();
        let b = sample_clicks(&click_pmf(&js), 1_000_000, 8).unwrap();
        let (c, se) = estimate_covariance(&b, Observable::ClickProduct).unwrap();
        assert!(c.modulus() < 5.0 * se);
        let r = estimate_g2_ratio(&b).unwrap();
        assert!((r.value - 1.0).abs() < 5.0 * r.standard_error);
        let g = estimate_g2_from_clicks(&b, 0).unwrap();
        assert!((g.value - 1.0).abs() < 5.0 * g.standard_error);
        let comb = (r.standard_error.powi(2) + g.standard_error.powi(2)).sqrt();
        assert!((r.value - g.value).abs() < 5.0 * comb);
        // bootstrap agrees with the delta method
        let (x, y) = b.real_columns();
        let boot = bootstrap_covariance_se(&x[..20_000], &y[..20_000], 200, 3).unwrap();
        let delta = covariance(&x[..20_000], &y[..20_000])
            .unwrap()
            .standard_error;
        assert!((boot / delta - 1.0).abs() < 0.2, "{boot} vs {delta}");
    }

    #[test]
    fn standard_error_scaling() {
        let s = make_thermal(2.0, pol()).unwrap();
        let js = evolve_exact(&s, &CouplingParams::exact(0.05).unwrap()).unwrap();
        let pmf = click_pmf(&js);
        let small = sample_clicks(&pmf, 50_000, 1).unwrap();
        let large = sample_clicks(&pmf, 200_000, 2).unwrap();
        let (_, s1) = estimate_covariance(&small, Observable::ClickProduct).unwrap();
        let (_, s2) = estimate_covariance(&large, Observable::ClickProduct).unwrap();
        assert!((s1 / s2 / 2.0 - 1.0).abs() < 0.2);
    }

    #[test]
    fn g1_is_unity_on_exact_path() {
        for s in [
            make_coherent(C64::new(1.0, 1.0), pol()).unwrap(),
            make_fock(5, pol()).unwrap(),
            make_thermal(3.0, pol()).unwrap(),
            make_squeezed(1.0, std::f64::consts::PI, C64::new(0.5, 0.5), pol()).unwrap(),
        ] {
            let js = evolve_exact(&s, &CouplingParams::exact(0.01).unwrap()).unwrap();
            assert!((g1_cross(&js).unwrap() - 1.0).abs() < 1e-10);
        }
        let vac = evolve_exact(
            &make_fock(0, pol()).unwrap(),
            &CouplingParams::exact(0.01).unwrap(),
        )
        .unwrap();
        assert!(matches!(g1_cross(&vac), Err(Error::VacuumDetectors)));
    }

    #[test]
    fn state_covariance_matches_weak_coupling_on_approximate_path() {
        let s = make_thermal(3.0, pol()).unwrap();
        let m = compute_moments(&s);
        let js = evolve(&s, &CouplingParams::approximate(0.01).unwrap()).unwrap();
        for obs in [
            Observable::ClickProduct,
            Observable::QuadratureProduct,
            Observable::HeterodyneRe,
            Observable::HeterodyneCross,
        ] {
            let a = analytic_value(obs, &m, 0.01).unwrap().as_complex();
            let b = state_covariance(&js, obs, Quadrature::X).as_complex();
            assert!((a - b).norm() < 1e-9, "{obs:?}: {a} vs {b}");
        }
        let f = make_fock(5, pol()).unwrap();
        let mf = compute_moments(&f);
        let js = evolve(&f, &CouplingParams::approximate(0.01).unwrap()).unwrap();
        for obs in [
            Observable::ClickProduct,
            Observable::QuadratureProduct,
            Observable::HeterodyneRe,
            Observable::HeterodyneCross,
        ] {
            let a = analytic_value(obs, &mf, 0.01).unwrap().as_complex();
            let b = state_covariance(&js, obs, Quadrature::X).as_complex();
            assert!((a - b).norm() < 1e-12, "{obs:?}: {a} vs {b}");
        }
    }

    #[test]
    fn verdict_rule() {
        let make = |emp: f64, se: f64| CorrelatorReport {
            channel: Channel::Click,
            observable: Observable::ClickProduct,
            analytic_value: Scalar::Real(0.0),
            empirical_value: Scalar::Real(emp),
            standard_error: se,
            sample_count: 1000,
            z_score: emp / se,
            bootstrap_standard_error: None,
            auxiliary: BTreeMap::new(),
        };
        assert_eq!(
            null_test(&make(4.9, 1.0), 5.0).verdict,
            Verdict::ConsistentWithCoherent
        );
        assert_eq!(null_test(&make(-5.1, 1.0), 5.0).verdict, Verdict::Acoherent);
        assert_eq!(
            null_test(&make(0.0, 0.0), 5.0).verdict,
            Verdict::ConsistentWithCoherent
        );
        let json = serde_json::to_string(&null_test(&make(-5.1, 1.0), 5.0)).unwrap();
        assert!(json.contains("\"verdict\":\"acoherent\""));
    }

    fn any_moments() -> impl Strategy<Value = FieldMoments> {
        prop_oneof![
            (-3.0f64..3.0, -3.0f64..3.0)
                .prop_map(|(a, b)| compute_moments(&make_coherent(C64::new(a, b), pol()).unwrap())),
            (1usize..20).prop_map(|n| compute_moments(&make_fock(n, pol()).unwrap())),
            (0.01f64..10.0).prop_map(|n| compute_moments(&make_thermal(n, pol()).unwrap())),
            (0.01f64..1.5, 0.0f64..6.3).prop_map(|(r, p)| compute_moments(
                &make_squeezed(r, p, C64::new(0.2, -0.1), pol()).unwrap()
            )),
        ]
    }

    proptest! {
        #[test]
        fn identity_chain_and_scale_laws(m in any_moments(), g in 0.001f64..0.4) {
            let r = analytic_r(&m).unwrap();
            prop_assert!((r - m.g2.unwrap()).abs() < 1e-10);
            prop_assert!((r - (1.0 + m.mandel_q.unwrap() / m.n_mean)).abs() < 1e-10);
            let c1 = analytic_click_covariance(&m, g).unwrap().value;
            let c2 = analytic_click_covariance(&m, 2.0 * g).unwrap().value;
            prop_assert!((c2 - 4.0 * c1).abs() <= 1e-12 * c2.abs().max(1e-300));
            let h1 = analytic_homodyne_covariance(&m, g).unwrap();
            let h2 = analytic_homodyne_covariance(&m, 2.0 * g).unwrap();
            prop_assert!((h2 - 2.0 * h1).abs() <= 1e-12 * h2.abs().max(1e-300));
            prop_assert_eq!(h1 < 0.0, m.p_var < 0.5);
            if m.mandel_q.unwrap().abs() > 1e-9 {
                prop_assert_eq!(c1 < 0.0, m.mandel_q.unwrap() < 0.0);
            }
        }

        #[test]
        fn coherent_null_family(a in -6.0f64..6.0, b in -6.0f64..6.0, g in 0.0001f64..0.9) {
            let m = prediction_moments(&make_coherent(C64::new(a, b), pol()).unwrap());
            prop_assert_eq!(analytic_click_covariance(&m, g).unwrap().value, 0.0);
            prop_assert_eq!(analytic_homodyne_covariance(&m, g).unwrap(), 0.0);
            prop_assert_eq!(analytic_heterodyne_re_covariance(&m, g).unwrap(), 0.0);
            prop_assert_eq!(analytic_heterodyne_cross(&m, g).unwrap(), C64::new(0.0, 0.0));
        }
    }
}
