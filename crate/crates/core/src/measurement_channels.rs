//! Readout of the two-detector state: photon counting, homodyne and
//! heterodyne detection, with seeded Monte-Carlo sampling.
//!
//! Samplers split a batch into fixed-size streams. Stream `k` draws from a
//! ChaCha8 generator seeded with `seed` on stream `k`, and the batch is the
//! concatenation of the streams in order, so the output does not depend on
//! the number of worker threads.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    coherent_amplitudes_into, inv_sqrt_table, minus_i_pow, oscillator_eigenfunctions, PairBasis,
};
use crate::joint_evolution::JointDetectorState;

/// Samples per RNG stream.
pub const STREAM_LEN: usize = 1 << 16;
pub const DEFAULT_GRID_POINTS: usize = 241;
const GRID_MASS_TOL: f64 = 1e-6;
const BOUNDARY_MASS_TOL: f64 = 1e-8;
const EIGEN_DROP: f64 = 1e-15;

const CLICK_GENERATOR: &str = "click-inverse-cdf/chacha8/stream65536";
const HOMODYNE_GENERATOR: &str = "homodyne-grid-inverse-cdf/chacha8/stream65536";
const HETERODYNE_GENERATOR: &str = "heterodyne-rejection/chacha8/stream65536";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Click,
    Homodyne,
    Heterodyne,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Click => "click",
            Channel::Homodyne => "homodyne",
            Channel::Heterodyne => "heterodyne",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "click" => Ok(Channel::Click),
            "homodyne" => Ok(Channel::Homodyne),
            "heterodyne" => Ok(Channel::Heterodyne),
            other => Err(Error::Config(format!("unknown channel `{other}`"))),
        }
    }
}

/// Joint click distribution over the pair basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickPmf {
    kmax: usize,
    probs: Vec<f64>,
}

impl ClickPmf {
    pub fn from_probs(kmax: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), PairBasis::dim_for(kmax));
        Self { kmax, probs }
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        if n1 + n2 > self.kmax {
            0.0
        } else {
            self.probs[PairBasis::index(n1, n2)]
        }
    }

    /// `(n1, n2, p)` in pair-basis order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        PairBasis::new(self.kmax)
            .pairs()
            .zip(&self.probs)
            .map(|((a, b), p)| (a, b, *p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal distribution of one detector.
    pub fn marginal(&self, detector: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.kmax + 1];
        for (a, b, p) in self.iter() {
            m[if detector == 0 { a } else { b }] += p;
        }
        m
    }

    /// `(E[n1], E[n2], E[n1 n2])`.
    pub fn moments(&self) -> (f64, f64, f64) {
        self.iter().fold((0.0, 0.0, 0.0), |acc, (a, b, p)| {
            (
                acc.0 + a as f64 * p,
                acc.1 + b as f64 * p,
                acc.2 + (a * b) as f64 * p,
            )
        })
    }
}

pub fn click_pmf(js: &JointDetectorState) -> ClickPmf {
    js.click_pmf()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcomes {
    Click(Vec<[u32; 2]>),
    Homodyne(Vec<[f64; 2]>),
    Heterodyne(Vec<[C64; 2]>),
}

/// A reproducible batch of joint outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub generator_id: String,
    pub outcomes: Outcomes,
    /// Fraction of accepted proposals for the heterodyne sampler.
    pub acceptance_rate: Option<f64>,
}

impl SampleBatch {
    pub fn channel(&self) -> Channel {
        match self.outcomes {
            Outcomes::Click(_) => Channel::Click,
            Outcomes::Homodyne(_) => Channel::Homodyne,
            Outcomes::Heterodyne(_) => Channel::Heterodyne,
        }
    }

    pub fn count(&self) -> usize {
        match &self.outcomes {
            Outcomes::Click(v) => v.len(),
            Outcomes::Homodyne(v) => v.len(),
            Outcomes::Heterodyne(v) => v.len(),
        }
    }

    /// Real-valued outcome columns: counts, quadratures, or `Re beta`.
    pub fn real_columns(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.outcomes {
            Outcomes::Click(v) => v.iter().map(|o| (o[0] as f64, o[1] as f64)).unzip(),
            Outcomes::Homodyne(v) => v.iter().map(|o| (o[0], o[1])).unzip(),
            Outcomes::Heterodyne(v) => v.iter().map(|o| (o[0].re, o[1].re)).unzip(),
        }
    }

    /// Complex outcome columns; heterodyne only.
    pub fn complex_columns(&self) -> Result<(Vec<C64>, Vec<C64>)> {
        match &self.outcomes {
            Outcomes::Heterodyne(v) => Ok(v.iter().map(|o| (o[0], o[1])).unzip()),
            _ => Err(Error::ChannelMismatch {
                got: self.channel().as_str().into(),
                wanted: "heterodyne".into(),
            }),
        }
    }

    pub fn clicks(&self) -> Result<&[[u32; 2]]> {
        match &self.outcomes {
            Outcomes::Click(v) => Ok(v),
            _ => Err(Error::ChannelMismatch {
                got: self.channel().as_str().into(),
                wanted: "click".into(),
            }),
        }
    }

    /// CSV with header `channel,seed,index,out1_a,out1_b,out2_a,out2_b`.
    /// Clicks and homodyne leave the `_b` columns empty; heterodyne writes
    /// real and imaginary parts.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "channel", "seed", "index", "out1_a", "out1_b", "out2_a", "out2_b",
        ])?;
        let ch = self.channel().as_str();
        let seed = self.seed.to_string();
        let mut write = |i: usize, a: String, b: String, c: String, d: String| -> Result<()> {
            wr.write_record([ch, seed.as_str(), &i.to_string(), &a, &b, &c, &d])?;
            Ok(())
        };
        match &self.outcomes {
            Outcomes::Click(v) => {
                for (i, o) in v.iter().enumerate() {
                    write(
                        i,
                        o[0].to_string(),
                        String::new(),
                        o[1].to_string(),
                        String::new(),
                    )?;
                }
            }
            Outcomes::Homodyne(v) => {
                for (i, o) in v.iter().enumerate() {
                    write(i, fmt_f(o[0]), String::new(), fmt_f(o[1]), String::new())?;
                }
            }
            Outcomes::Heterodyne(v) => {
                for (i, o) in v.iter().enumerate() {
                    write(
                        i,
                        fmt_f(o[0].re),
                        fmt_f(o[0].im),
                        fmt_f(o[1].re),
                        fmt_f(o[1].im),
                    )?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

fn stream_rng(seed: u64, stream: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Runs `f(rng, n)` on each stream in parallel and concatenates the results.
fn per_stream<T: Send>(
    count: usize,
    seed: u64,
    f: impl Fn(&mut ChaCha8Rng, usize) -> Result<Vec<T>> + Sync,
) -> Result<Vec<T>> {
    let streams = count.div_ceil(STREAM_LEN);
    let parts: Vec<Result<Vec<T>>> = (0..streams)
        .into_par_iter()
        .map(|k| {
            let n = STREAM_LEN.min(count - k * STREAM_LEN);
            f(&mut stream_rng(seed, k), n)
        })
        .collect();
    let mut out = Vec::with_capacity(count);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Inverse-CDF draws over outcomes ordered lexicographically in `(n1, n2)`.
pub fn sample_clicks(pmf: &ClickPmf, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let k = pmf.kmax();
    let mut outcomes = Vec::with_capacity(PairBasis::dim_for(k));
    let mut cdf = Vec::with_capacity(outcomes.capacity());
    let mut acc = 0.0;
    for n1 in 0..=k {
        for n2 in 0..=k - n1 {
            let p = pmf.get(n1, n2);
            if p > 0.0 {
                acc += p;
                outcomes.push([n1 as u32, n2 as u32]);
                cdf.push(acc);
            }
        }
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidState("click distribution has no mass".into()));
    }
    let total = acc;
    let data = per_stream(count, seed, |rng, n| {
        Ok((0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * total;
                let i = cdf.partition_point(|c| *c <= u).min(outcomes.len() - 1);
                outcomes[i]
            })
            .collect())
    })?;
    Ok(SampleBatch {
        seed,
        generator_id: CLICK_GENERATOR.into(),
        outcomes: Outcomes::Click(data),
        acceptance_rate: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    /// `(b + b^+)/sqrt(2)`.
    #[default]
    X,
    /// `(b - b^+)/(sqrt(2) i)`.
    P,
}

/// Uniform axis of cell centres `min + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub step: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn centered(center: f64, half_width: f64, points: usize) -> Self {
        let points = points.max(3);
        let step = 2.0 * half_width / (points - 1) as f64;
        Self {
            min: center - half_width,
            step,
            points,
        }
    }

    pub fn at(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    pub fn max(&self) -> f64 {
        self.at(self.points - 1)
    }
}

/// Grid request for [`homodyne_pdf`]. Missing ranges are chosen from the
/// detector moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    pub half_width: Option<f64>,
    pub quadrature: Quadrature,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            half_width: None,
            quadrature: Quadrature::X,
        }
    }
}

/// Joint density on a rectangular grid, row-major in `x1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPdf {
    pub x1: GridAxis,
    pub x2: GridAxis,
    pub values: Vec<f64>,
    pub mass: f64,
    pub quadrature: Quadrature,
}

impl GridPdf {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.x2.points + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.x1.step * self.x2.step
    }

    /// `(<x1>, <x2>, cov(x1, x2), var x1, var x2)` by Riemann sums.
    pub fn moments(&self) -> GridMoments {
        let da = self.cell_area();
        let (mut m1, mut m2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..self.x1.points {
            let x = self.x1.at(i);
            for j in 0..self.x2.points {
                let y = self.x2.at(j);
                let p = self.value(i, j) * da;
                m1 += x * p;
                m2 += y * p;
                s11 += x * x * p;
                s22 += y * y * p;
                s12 += x * y * p;
            }
        }
        let t = self.mass;
        let (m1, m2) = (m1 / t, m2 / t);
        GridMoments {
            mean1: m1,
            mean2: m2,
            var1: s11 / t - m1 * m1,
            var2: s22 / t - m2 * m2,
            cov: s12 / t - m1 * m2,
        }
    }

    /// Marginal density of detector 1 at the `x1` grid points.
    pub fn marginal1(&self) -> Vec<f64> {
        (0..self.x1.points)
            .map(|i| (0..self.x2.points).map(|j| self.value(i, j)).sum::<f64>() * self.x2.step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMoments {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

/// Quadrature mean and variance of one detector.
fn quadrature_stats(js: &JointDetectorState, detector: usize, q: Quadrature) -> (f64, f64) {
    let (b1, b2) = js.detector_amplitudes();
    let b = if detector == 0 { b1 } else { b2 };
    let (bb, n) = js.local_second_moments(detector);
    match q {
        Quadrature::X => {
            let mean = std::f64::consts::SQRT_2 * b.re;
            (mean, (2.0 * n + 1.0 + 2.0 * bb.re) / 2.0 - mean * mean)
        }
        Quadrature::P => {
            let mean = std::f64::consts::SQRT_2 * b.im;
            (mean, (2.0 * n + 1.0 - 2.0 * bb.re) / 2.0 - mean * mean)
        }
    }
}

/// The quadrature density `<x1, x2|rho12|x1, x2>` on a grid.
pub fn homodyne_pdf(js: &JointDetectorState, spec: &GridSpec) -> Result<GridPdf> {
    let k = js.kmax();
    let basis = js.basis();
    let pairs: Vec<(usize, usize)> = basis.pairs().collect();
    let dim = pairs.len();

    // <p|n> = (-i)^n psi_n(p): fold the phases into the matrix
    let rho = match spec.quadrature {
        Quadrature::X => js.rho12().clone(),
        Quadrature::P => DMatrix::from_fn(dim, dim, |i, j| {
            let (a, b) = pairs[i];
            let (c, d) = pairs[j];
            minus_i_pow(a + b) * js.rho12()[(i, j)] * minus_i_pow(c + d).conj()
        }),
    };

    let axis = |det: usize| {
        let (mean, var) = quadrature_stats(js, det, spec.quadrature);
        let half = spec
            .half_width
            .unwrap_or(8.0 * std::f64::consts::FRAC_1_SQRT_2 + 8.0 * var.max(0.0).sqrt());
        let center = if spec.half_width.is_some() { 0.0 } else { mean };
        GridAxis::centered(center, half, spec.points)
    };
    let (ax1, ax2) = (axis(0), axis(1));

    let table = |ax: &GridAxis| -> Vec<Vec<f64>> {
        (0..ax.points)
            .map(|i| {
                let mut buf = vec![0.0; k + 1];
                oscillator_eigenfunctions(ax.at(i), &mut buf);
                buf
            })
            .collect()
    };
    let (t1, t2) = (table(&ax1), table(&ax2));

    let rows: Vec<Vec<f64>> = (0..ax1.points)
        .into_par_iter()
        .map(|i| {
            let psi = &t1[i];
            // reduce over detector 1 at fixed x1
            let mut m = DMatrix::<C64>::zeros(k + 1, k + 1);
            for (a, &(n1, n2)) in pairs.iter().enumerate() {
                let wa = psi[n1];
                for (b, &(m1, m2)) in pairs.iter().enumerate() {
                    m[(n2, m2)] += rho[(a, b)] * (wa * psi[m1]);
                }
            }
            t2.iter()
                .map(|phi| {
                    let mut acc = 0.0;
                    for n2 in 0..=k {
                        for m2 in 0..=k {
                            acc += phi[n2] * phi[m2] * m[(n2, m2)].re;
                        }
                    }
                    acc.max(0.0)
                })
                .collect()
        })
        .collect();
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let da = ax1.step * ax2.step;
    let mass = values.iter().sum::<f64>() * da;

    let (n1, n2) = (ax1.points, ax2.points);
    let mut boundary = 0.0;
    for i in 0..n1 {
        for j in 0..n2 {
            if i == 0 || j == 0 || i == n1 - 1 || j == n2 - 1 {
                boundary += values[i * n2 + j] * da;
            }
        }
    }
    if boundary > BOUNDARY_MASS_TOL {
        return Err(Error::GridTooSmall {
            boundary_mass: boundary,
        });
    }
    if (mass - js.trace()).abs() > GRID_MASS_TOL {
        return Err(Error::GridTooSmall {
            boundary_mass: (mass - js.trace()).abs(),
        });
    }
    Ok(GridPdf {
        x1: ax1,
        x2: ax2,
        values,
        mass,
        quadrature: spec.quadrature,
    })
}

/// Draws `x1` from the grid marginal and `x2` from the conditional row, each
/// uniformly within the chosen cell.
pub fn sample_homodyne(pdf: &GridPdf, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let (n1, n2) = (pdf.x1.points, pdf.x2.points);
    let mut row_cdf = Vec::with_capacity(n1);
    let mut cond_cdf = Vec::with_capacity(n1 * n2);
    let mut acc = 0.0;
    for i in 0..n1 {
        let mut racc = 0.0;
        for j in 0..n2 {
            racc += pdf.value(i, j);
            cond_cdf.push(racc);
        }
        acc += racc;
        row_cdf.push(acc);
    }
    let draw_cell = |cdf: &[f64], u: f64| -> (usize, f64) {
        let total = *cdf.last().unwrap();
        let target = u * total;
        let i = cdf.partition_point(|c| *c <= target).min(cdf.len() - 1);
        let lo = if i == 0 { 0.0 } else { cdf[i - 1] };
        let width = cdf[i] - lo;
        let frac = if width > 0.0 {
            ((target - lo) / width).clamp(0.0, 1.0)
        } else {
            0.5
        };
        (i, frac)
    };
    let data = per_stream(count, seed, |rng, n| {
        Ok((0..n)
            .map(|_| {
                let (i, f1) = draw_cell(&row_cdf, rng.random::<f64>());
                let (j, f2) = draw_cell(&cond_cdf[i * n2..(i + 1) * n2], rng.random::<f64>());
                [
                    pdf.x1.at(i) + (f1 - 0.5) * pdf.x1.step,
                    pdf.x2.at(j) + (f2 - 0.5) * pdf.x2.step,
                ]
            })
            .collect())
    })?;
    Ok(SampleBatch {
        seed,
        generator_id: HOMODYNE_GENERATOR.into(),
        outcomes: Outcomes::Homodyne(data),
        acceptance_rate: None,
    })
}

/// Factorized `rho12 = sum_m w_m w_m^+` for fast coherent-state overlaps.
pub struct HusimiEvaluator {
    kmax: usize,
    factors: Vec<Vec<C64>>,
    inv_sqrt: Vec<f64>,
}

impl HusimiEvaluator {
    pub fn new(js: &JointDetectorState) -> Self {
        let rho = js.rho12();
        let k = js.kmax();
        let dim = rho.nrows();
        let mut block_diagonal = true;
        'outer: for s in 0..=k {
            for sp in 0..=k {
                if s == sp {
                    continue;
                }
                for a in 0..=s {
                    for b in 0..=sp {
                        if rho[(
                            PairBasis::sector_start(s) + a,
                            PairBasis::sector_start(sp) + b,
                        )] != C64::new(0.0, 0.0)
                        {
                            block_diagonal = false;
                            break 'outer;
                        }
                    }
                }
            }
        }
        let mut comps: Vec<(f64, Vec<C64>)> = Vec::new();
        let mut push_eigen = |m: DMatrix<C64>, offset: usize| {
            let rows = m.nrows();
            let eig = m.symmetric_eigen();
            for (c, lam) in eig.eigenvalues.iter().enumerate() {
                if *lam > 0.0 {
                    let mut v = vec![C64::new(0.0, 0.0); dim];
                    for r in 0..rows {
                        v[offset + r] = eig.eigenvectors[(r, c)] * lam.sqrt();
                    }
                    comps.push((*lam, v));
                }
            }
        };
        if block_diagonal {
            for s in 0..=k {
                let i0 = PairBasis::sector_start(s);
                push_eigen(rho.view((i0, i0), (s + 1, s + 1)).into_owned(), i0);
            }
        } else {
            push_eigen(rho.clone(), 0);
        }
        comps.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut dropped = 0.0;
        while let Some((lam, _)) = comps.last() {
            if dropped + lam > EIGEN_DROP {
                break;
            }
            dropped += lam;
            comps.pop();
        }
        Self {
            kmax: k,
            factors: comps.into_iter().map(|c| c.1).collect(),
            inv_sqrt: inv_sqrt_table(k + 1),
        }
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// `<beta1, beta2|rho12|beta1, beta2> / pi^2`.
    pub fn density(&self, b1: C64, b2: C64) -> f64 {
        let k = self.kmax;
        let mut c1 = vec![C64::new(0.0, 0.0); k + 1];
        let mut c2 = vec![C64::new(0.0, 0.0); k + 1];
        coherent_amplitudes_into(b1, &self.inv_sqrt, &mut c1);
        coherent_amplitudes_into(b2, &self.inv_sqrt, &mut c2);
        let v: Vec<C64> = PairBasis::new(k)
            .pairs()
            .map(|(a, b)| (c1[a] * c2[b]).conj())
            .collect();
        let mut q = 0.0;
        for w in &self.factors {
            let mut ov = C64::new(0.0, 0.0);
            for (x, y) in v.iter().zip(w) {
                ov += x * y;
            }
            q += ov.norm_sqr();
        }
        q / (std::f64::consts::PI * std::f64::consts::PI)
    }
}

/// Husimi density of the detectors at `(beta1, beta2)`.
pub fn heterodyne_density(js: &JointDetectorState, b1: C64, b2: C64) -> f64 {
    HusimiEvaluator::new(js).density(b1, b2)
}

/// Product Gaussian proposal for heterodyne rejection sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub center: [C64; 2],
    /// `E|beta_i - center_i|^2` of each proposal factor.
    pub variance: [f64; 2],
    /// Bound on density / proposal.
    pub scale: f64,
}

impl Envelope {
    /// Centred on `<b_i>` with variance `2 (1 + <b_i^+ b_i> - |<b_i>|^2)` and
    /// bound `v1 v2`.
    pub fn for_state(js: &JointDetectorState) -> Self {
        let (b1, b2) = js.detector_amplitudes();
        let (n1, n2) = js.detector_means();
        let v1 = 2.0 * (1.0 + (n1 - b1.norm_sqr()).max(0.0));
        let v2 = 2.0 * (1.0 + (n2 - b2.norm_sqr()).max(0.0));
        Self {
            center: [b1, b2],
            variance: [v1, v2],
            scale: v1 * v2,
        }
    }

    pub fn density(&self, b: [C64; 2]) -> f64 {
        let pi = std::f64::consts::PI;
        (0..2)
            .map(|i| {
                (-(b[i] - self.center[i]).norm_sqr() / self.variance[i]).exp()
                    / (pi * self.variance[i])
            })
            .product()
    }
}

/// Rejection sampling from the Husimi density with [`Envelope::for_state`].
pub fn sample_heterodyne(js: &JointDetectorState, count: usize, seed: u64) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let husimi = HusimiEvaluator::new(js);
    let env = Envelope::for_state(js);
    let sd = [
        (env.variance[0] / 2.0).sqrt(),
        (env.variance[1] / 2.0).sqrt(),
    ];
    let proposals = std::sync::atomic::AtomicU64::new(0);
    let data = per_stream(count, seed, |rng, n| {
        let mut out = Vec::with_capacity(n);
        let mut tries = 0u64;
        while out.len() < n {
            tries += 1;
            let mut b = [C64::new(0.0, 0.0); 2];
            for i in 0..2 {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                b[i] = env.center[i] + C64::new(sd[i] * re, sd[i] * im);
            }
            let ratio = husimi.density(b[0], b[1]) / (env.scale * env.density(b));
            if ratio > 1.0 {
                return Err(Error::EnvelopeTooTight { ratio });
            }
            if rng.random::<f64>() < ratio {
                out.push(b);
            }
        }
        proposals.fetch_add(tries, std::sync::atomic::Ordering::Relaxed);
        Ok(out)
    })?;
    let rate = count as f64 / proposals.into_inner() as f64;
    Ok(SampleBatch {
        seed,
        generator_id: HETERODYNE_GENERATOR.into(),
        outcomes: Outcomes::Heterodyne(data),
        acceptance_rate: Some(rate),
    })
}
