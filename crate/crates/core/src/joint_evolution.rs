//! Field-detector interaction and the reduced two-detector state.
//!
//! Both detectors couple to the field through `a^+ b_i + b_i^+ a` with the
//! same strength. Only the symmetric normal mode `d+ = (b1 + b2)/sqrt(2)`
//! couples to the field, so the exact interaction is a single beam splitter
//! between `a` and `d+` with mixing angle `theta = sqrt(2 gamma0 dt)`, while
//! `d- = (b1 - b2)/sqrt(2)` stays in vacuum.
//!
//! Detector states live in the [`PairBasis`] (total occupancy capped at
//! `kmax`), with the cap chosen from the detectors' total-number
//! distribution and the tail-mass target.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_states::{ClassicalP, CutoffPolicy, FieldState, FockMatrix};
use crate::fock::{coherent_amplitudes, gauss_laguerre, ln_factorials, BeamSplitter, PairBasis};
use crate::measurement_channels::ClickPmf;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Largest `gamma0 dt` accepted by the weak-coupling path.
pub const APPROXIMATION_LIMIT: f64 = 0.1;
/// Entries of the retained field-detector amplitude matrix above which it is
/// dropped.
const MAX_JOINT_ENTRIES: usize = 1 << 22;
const LAGUERRE_NODES: usize = 64;
const QUADRATURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionMode {
    Exact,
    Sequential,
    Approximate,
}

/// Coupling of the field to the two detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// The dimensionless product `gamma0 dt`.
    pub gamma0_dt: f64,
    pub mode: EvolutionMode,
    /// `(gamma0 dt1, gamma0 dt2)` for the sequential path; defaults to
    /// `(gamma0_dt, gamma0_dt)`.
    pub dt_split: Option<(f64, f64)>,
    /// Truncation of the detector space; `max_dim` bounds the pair-basis
    /// dimension.
    pub detector_cutoff: CutoffPolicy,
}

impl CouplingParams {
    pub fn new(gamma0_dt: f64, mode: EvolutionMode) -> Result<Self> {
        let cp = Self {
            gamma0_dt,
            mode,
            dt_split: None,
            detector_cutoff: CutoffPolicy::default(),
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn exact(gamma0_dt: f64) -> Result<Self> {
        Self::new(gamma0_dt, EvolutionMode::Exact)
    }

    pub fn approximate(gamma0_dt: f64) -> Result<Self> {
        Self::new(gamma0_dt, EvolutionMode::Approximate)
    }

    pub fn sequential(first: f64, second: f64) -> Result<Self> {
        let cp = Self {
            gamma0_dt: 0.5 * (first + second),
            mode: EvolutionMode::Sequential,
            dt_split: Some((first, second)),
            detector_cutoff: CutoffPolicy::default(),
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g < 1.0;
        if !ok(self.gamma0_dt) {
            return Err(Error::InvalidParameter(format!(
                "gamma0_dt = {} not in (0, 1)",
                self.gamma0_dt
            )));
        }
        if let Some((a, b)) = self.dt_split {
            if !ok(a) || !ok(b) {
                return Err(Error::InvalidParameter(format!(
                    "dt_split = ({a}, {b}) not in (0, 1)"
                )));
            }
        }
        Ok(())
    }

    /// Normal-mode mixing angle `sqrt(2 gamma0 dt)`.
    pub fn theta(&self) -> f64 {
        (2.0 * self.gamma0_dt).sqrt()
    }

    fn split(&self) -> (f64, f64) {
        self.dt_split.unwrap_or((self.gamma0_dt, self.gamma0_dt))
    }
}

/// Which computation produced a [`JointDetectorState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionPath {
    Exact,
    Sequential,
    /// Mixture of product coherent states over a proper P-function.
    ApproximateClassical,
    /// Linear extension of the weak-coupling map to states without a proper
    /// P-function.
    WeakCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: EvolutionMode,
    pub path: EvolutionPath,
    pub source_label: String,
    pub coupling: CouplingParams,
    /// Detector probability mass dropped by the pair-basis cap.
    pub detector_tail_mass: f64,
}

/// What is left of the field after the interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldResidual {
    pub populations: Vec<f64>,
    /// Amplitudes `Psi[r, i]` of the pure field-detector state, rows indexed
    /// by the field level `r` and columns by the detector pair basis. Only
    /// kept for pure sources of moderate size.
    pub joint_amplitudes: Option<DMatrix<C64>>,
}

impl FieldResidual {
    pub fn n_mean(&self) -> f64 {
        self.populations
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }
}

/// Reduced density matrix of detectors `b1`, `b2`.
#[derive(Debug, Clone)]
pub struct JointDetectorState {
    rho12: DMatrix<C64>,
    basis: PairBasis,
    field_residual: Option<FieldResidual>,
    provenance: Provenance,
}

impl JointDetectorState {
    /// Wraps an explicit detector density matrix over `PairBasis::new(kmax)`.
    pub fn from_matrix(rho12: DMatrix<C64>, kmax: usize, provenance: Provenance) -> Result<Self> {
        let basis = PairBasis::new(kmax);
        if rho12.nrows() != basis.dim() || rho12.ncols() != basis.dim() {
            return Err(Error::InvalidState(format!(
                "detector matrix is {}x{}, pair basis needs {}",
                rho12.nrows(),
                rho12.ncols(),
                basis.dim()
            )));
        }
        let js = Self {
            rho12,
            basis,
            field_residual: None,
            provenance,
        };
        js.validate()?;
        Ok(js)
    }

    pub fn rho12(&self) -> &DMatrix<C64> {
        &self.rho12
    }

    pub fn basis(&self) -> PairBasis {
        self.basis
    }

    pub fn kmax(&self) -> usize {
        self.basis.kmax
    }

    pub fn field_residual(&self) -> Option<&FieldResidual> {
        self.field_residual.as_ref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn trace(&self) -> f64 {
        self.rho12.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if !(1.0 - 1e-10..=1.0 + 1e-12).contains(&tr) {
            return Err(Error::InvalidState(format!(
                "detector trace {tr} outside [1-1e-10, 1]"
            )));
        }
        let d = self.rho12.nrows();
        for i in 0..d {
            for j in i..d {
                if (self.rho12[(i, j)] - self.rho12[(j, i)].conj()).norm() > 1e-12 {
                    return Err(Error::InvalidState(format!(
                        "detector matrix not Hermitian at ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(<b1^+ b1>, <b2^+ b2>)`.
    pub fn detector_means(&self) -> (f64, f64) {
        let mut m = (0.0, 0.0);
        for (i, (n1, n2)) in self.basis.pairs().enumerate() {
            let p = self.rho12[(i, i)].re;
            m.0 += n1 as f64 * p;
            m.1 += n2 as f64 * p;
        }
        m
    }

    /// `<b1^+ b2>`.
    pub fn b1_dag_b2(&self) -> C64 {
        let mut acc = ZERO;
        for (i, (n1, n2)) in self.basis.pairs().enumerate() {
            if n2 == 0 {
                continue;
            }
            let j = PairBasis::index(n1 + 1, n2 - 1);
            acc += self.rho12[(i, j)] * ((n1 + 1) as f64 * n2 as f64).sqrt();
        }
        acc
    }

    /// `<b_1>` and `<b_2>`.
    pub fn detector_amplitudes(&self) -> (C64, C64) {
        let (mut b1, mut b2) = (ZERO, ZERO);
        for (i, (n1, n2)) in self.basis.pairs().enumerate() {
            // tr(rho b) = sum_i rho[i, j] <j|b|i> with j the lowered state
            if n1 > 0 {
                b1 += self.rho12[(i, PairBasis::index(n1 - 1, n2))] * (n1 as f64).sqrt();
            }
            if n2 > 0 {
                b2 += self.rho12[(i, PairBasis::index(n1, n2 - 1))] * (n2 as f64).sqrt();
            }
        }
        (b1, b2)
    }

    /// Second moments `(<b_i^2>, <b_i^+ b_i>)` of one detector.
    pub(crate) fn local_second_moments(&self, detector: usize) -> (C64, f64) {
        let mut bb = ZERO;
        let mut nn = 0.0;
        for (i, (n1, n2)) in self.basis.pairs().enumerate() {
            let n = if detector == 0 { n1 } else { n2 };
            nn += n as f64 * self.rho12[(i, i)].re;
            if n >= 2 {
                let j = if detector == 0 {
                    PairBasis::index(n1 - 2, n2)
                } else {
                    PairBasis::index(n1, n2 - 2)
                };
                bb += self.rho12[(i, j)] * ((n * (n - 1)) as f64).sqrt();
            }
        }
        (bb, nn)
    }

    /// `<b1 b2>`.
    pub(crate) fn b1_b2(&self) -> C64 {
        let mut acc = ZERO;
        for (i, (n1, n2)) in self.basis.pairs().enumerate() {
            if n1 > 0 && n2 > 0 {
                let j = PairBasis::index(n1 - 1, n2 - 1);
                acc += self.rho12[(i, j)] * ((n1 * n2) as f64).sqrt();
            }
        }
        acc
    }

    /// Reduced state of one detector (`0` or `1`), `(kmax+1)^2`.
    pub fn reduced(&self, detector: usize) -> DMatrix<C64> {
        let k = self.basis.kmax;
        let mut out = DMatrix::<C64>::zeros(k + 1, k + 1);
        for a in 0..=k {
            for b in 0..=k {
                let mut acc = ZERO;
                for other in 0..=k {
                    if a + other > k || b + other > k {
                        continue;
                    }
                    let (i, j) = if detector == 0 {
                        (PairBasis::index(a, other), PairBasis::index(b, other))
                    } else {
                        (PairBasis::index(other, a), PairBasis::index(other, b))
                    };
                    acc += self.rho12[(i, j)];
                }
                out[(a, b)] = acc;
            }
        }
        out
    }

    /// The same state with detector labels exchanged.
    pub fn swap_detectors(&self) -> Self {
        let d = self.basis.dim();
        let perm: Vec<usize> = self
            .basis
            .pairs()
            .map(|(a, b)| PairBasis::index(b, a))
            .collect();
        let rho12 = DMatrix::from_fn(d, d, |i, j| self.rho12[(perm[i], perm[j])]);
        Self {
            rho12,
            basis: self.basis,
            field_residual: None,
            provenance: self.provenance.clone(),
        }
    }

    /// Click distribution `<n1,n2|rho12|n1,n2>`.
    pub fn click_pmf(&self) -> ClickPmf {
        let probs = self
            .rho12
            .diagonal()
            .iter()
            .map(|c| c.re.max(0.0))
            .collect();
        ClickPmf::from_probs(self.basis.kmax, probs)
    }

    /// Trace distance between the detector states, `||rho - sigma||_1 / 2`.
    pub fn detector_trace_distance(&self, other: &Self) -> f64 {
        let k = self.kmax().max(other.kmax());
        let d = PairBasis::dim_for(k);
        let diff = DMatrix::from_fn(d, d, |i, j| {
            let a = if i < self.rho12.nrows() && j < self.rho12.nrows() {
                self.rho12[(i, j)]
            } else {
                ZERO
            };
            let b = if i < other.rho12.nrows() && j < other.rho12.nrows() {
                other.rho12[(i, j)]
            } else {
                ZERO
            };
            a - b
        });
        0.5 * diff
            .symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
    }

    /// Trace distance between the full field-detector pure states when both
    /// were retained.
    pub fn joint_trace_distance(&self, other: &Self) -> Option<f64> {
        let a = self.field_residual.as_ref()?.joint_amplitudes.as_ref()?;
        let b = other.field_residual.as_ref()?.joint_amplitudes.as_ref()?;
        let rows = a.nrows().min(b.nrows());
        let cols = a.ncols().min(b.ncols());
        let mut overlap = ZERO;
        for c in 0..cols {
            for r in 0..rows {
                overlap += a[(r, c)].conj() * b[(r, c)];
            }
        }
        let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>();
        Some(
            0.5 * ((na + nb).powi(2) - 4.0 * overlap.norm_sqr())
                .max(0.0)
                .sqrt(),
        )
    }
}

/// Dispatches on the coupling mode. In approximate mode, states with a
/// proper P-function use [`evolve_approx_classical`]; others use
/// [`evolve_weak_coupling`].
pub fn evolve(state: &FieldState, cp: &CouplingParams) -> Result<JointDetectorState> {
    match cp.mode {
        EvolutionMode::Exact => evolve_exact(state, cp),
        EvolutionMode::Sequential => evolve_sequential(state, cp),
        EvolutionMode::Approximate => {
            if state.classical_p().is_some() {
                evolve_approx_classical(state, cp)
            } else {
                evolve_weak_coupling(state, cp)
            }
        }
    }
}

/// Exact simultaneous interaction with both detectors.
pub fn evolve_exact(state: &FieldState, cp: &CouplingParams) -> Result<JointDetectorState> {
    cp.validate()?;
    let theta = cp.theta();
    let mut js = normal_mode_evolution(state, cp, theta, EvolutionPath::Exact)?;
    js.provenance.mode = cp.mode;
    Ok(js)
}

/// Weak-coupling map for arbitrary inputs.
///
/// Uses the normal-mode beam splitter with `sin(theta)/sqrt(2) = sqrt(gamma0
/// dt)`, which sends every coherent input to the product
/// `|-i alpha sqrt(gamma0 dt)>|-i alpha sqrt(gamma0 dt)>`; by linearity this is
/// the unique extension of the coherent-state mixture map. The field is
/// reported undepleted.
pub fn evolve_weak_coupling(state: &FieldState, cp: &CouplingParams) -> Result<JointDetectorState> {
    cp.validate()?;
    if cp.gamma0_dt > APPROXIMATION_LIMIT {
        return Err(Error::ApproximationDomain(cp.gamma0_dt));
    }
    let theta = (2.0 * cp.gamma0_dt).sqrt().asin();
    let mut js = normal_mode_evolution(state, cp, theta, EvolutionPath::WeakCoupling)?;
    if let Some(res) = js.field_residual.as_mut() {
        res.populations = state.matrix().populations();
        res.joint_amplitudes = None;
    }
    Ok(js)
}

fn pick_cap(
    mut sector_mass: impl FnMut(usize) -> f64,
    limit: usize,
    total: f64,
    policy: &CutoffPolicy,
) -> Result<(usize, Vec<f64>)> {
    let mut masses = Vec::new();
    let mut acc = 0.0;
    for s in 0..=limit {
        let q = sector_mass(s);
        masses.push(q);
        acc += q;
        if acc >= total - policy.tail_mass || s == limit {
            let dim = PairBasis::dim_for(s);
            if dim > policy.max_dim {
                return Err(Error::CutoffOverflow {
                    required: dim,
                    max: policy.max_dim,
                });
            }
            return Ok((s, masses));
        }
        if PairBasis::dim_for(s + 1) > policy.max_dim {
            return Err(Error::CutoffOverflow {
                required: PairBasis::dim_for(s + 1),
                max: policy.max_dim,
            });
        }
    }
    unreachable!("loop returns at s == limit")
}

/// `sqrt(C(s, j) / 2^s)`: amplitude of `|j, s-j>` in `|s>_{d+}`.
fn split_coefficients(kmax: usize) -> Vec<Vec<f64>> {
    let lf = ln_factorials(kmax);
    (0..=kmax)
        .map(|s| {
            (0..=s)
                .map(|j| {
                    (0.5 * (lf[s] - lf[j] - lf[s - j]) - 0.5 * s as f64 * std::f64::consts::LN_2)
                        .exp()
                })
                .collect()
        })
        .collect()
}

/// Beam splitter between the field and `d+` with angle `theta`, then `d+`
/// spread over the two detectors with `d-` in vacuum.
fn normal_mode_evolution(
    state: &FieldState,
    cp: &CouplingParams,
    theta: f64,
    path: EvolutionPath,
) -> Result<JointDetectorState> {
    let d = state.dim();
    let bs = BeamSplitter::new(theta, d);
    let matrix = state.matrix();
    let pops = matrix.populations();
    let total: f64 = pops.iter().sum();

    // total detector number k: q_k = sum_r rho_{r+k,r+k} |A(r+k, k)|^2
    let sector_mass = |k: usize| -> f64 { (k..d).map(|n| pops[n] * bs.probability(n, k)).sum() };
    let (kmax, masses) = pick_cap(sector_mass, d - 1, total, &cp.detector_cutoff)?;
    let kept: f64 = masses.iter().sum();

    // reduced d+ state sigma_{k k'}
    let mut sigma = DMatrix::<C64>::zeros(kmax + 1, kmax + 1);
    match matrix {
        FockMatrix::Diagonal(_) => {
            for (k, q) in masses.iter().enumerate() {
                sigma[(k, k)] = C64::new(*q, 0.0);
            }
        }
        FockMatrix::Pure(c) => {
            for r in 0..d {
                let chi: Vec<C64> = (0..=kmax)
                    .map(|k| {
                        if r + k < d {
                            c[r + k] * bs.amplitude(r + k, k)
                        } else {
                            ZERO
                        }
                    })
                    .collect();
                for k in 0..=kmax {
                    if chi[k] == ZERO {
                        continue;
                    }
                    for kp in 0..=kmax {
                        sigma[(k, kp)] += chi[k] * chi[kp].conj();
                    }
                }
            }
        }
        FockMatrix::Dense(rho) => {
            for r in 0..d {
                for k in 0..=kmax.min(d - 1 - r) {
                    let ak = bs.amplitude(r + k, k);
                    for kp in 0..=kmax.min(d - 1 - r) {
                        sigma[(k, kp)] +=
                            rho[(r + k, r + kp)] * ak * bs.amplitude(r + kp, kp).conj();
                    }
                }
            }
        }
    }

    let split = split_coefficients(kmax);
    let basis = PairBasis::new(kmax);
    let dim = basis.dim();
    let mut rho12 = DMatrix::<C64>::zeros(dim, dim);
    for s in 0..=kmax {
        for sp in 0..=kmax {
            let v = sigma[(s, sp)];
            if v == ZERO {
                continue;
            }
            let (i0, j0) = (PairBasis::sector_start(s), PairBasis::sector_start(sp));
            for (a, ca) in split[s].iter().enumerate() {
                for (b, cb) in split[sp].iter().enumerate() {
                    rho12[(i0 + a, j0 + b)] = v * (ca * cb);
                }
            }
        }
    }
    hermitize(&mut rho12);

    // field residual: p'_r = sum_k rho_{r+k,r+k} |A(r+k,k)|^2
    let residual_pops: Vec<f64> = (0..d)
        .map(|r| {
            (0..d - r)
                .map(|k| pops[r + k] * bs.probability(r + k, k))
                .sum()
        })
        .collect();
    let joint = match matrix {
        FockMatrix::Pure(c) if d * dim <= MAX_JOINT_ENTRIES => {
            let mut psi = DMatrix::<C64>::zeros(d, dim);
            for r in 0..d {
                for s in 0..=kmax.min(d - 1 - r) {
                    let amp = c[r + s] * bs.amplitude(r + s, s);
                    for (j, cj) in split[s].iter().enumerate() {
                        psi[(r, PairBasis::sector_start(s) + j)] = amp * *cj;
                    }
                }
            }
            Some(psi)
        }
        _ => None,
    };

    Ok(JointDetectorState {
        rho12,
        basis,
        field_residual: Some(FieldResidual {
            populations: residual_pops,
            joint_amplitudes: joint,
        }),
        provenance: Provenance {
            mode: cp.mode,
            path,
            source_label: state.label().to_string(),
            coupling: *cp,
            detector_tail_mass: (total - kept).max(0.0),
        },
    })
}

fn hermitize(m: &mut DMatrix<C64>) {
    let d = m.nrows();
    for i in 0..d {
        m[(i, i)].im = 0.0;
        for j in i + 1..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Field meets detector 1 (angle `sqrt(gamma0 dt1)`), then detector 2
/// (angle `sqrt(gamma0 dt2)`).
pub fn evolve_sequential(state: &FieldState, cp: &CouplingParams) -> Result<JointDetectorState> {
    cp.validate()?;
    let (g1, g2) = cp.split();
    let d = state.dim();
    let bs1 = BeamSplitter::new(g1.sqrt(), d);
    let bs2 = BeamSplitter::new(g2.sqrt(), d);
    let matrix = state.matrix();
    let pops = matrix.populations();
    let total: f64 = pops.iter().sum();

    // amplitude |n> -> |n-k-j>_a |k>_1 |j>_2
    let amp =
        |n: usize, k: usize, j: usize| -> C64 { bs1.amplitude(n, k) * bs2.amplitude(n - k, j) };
    let prob =
        |n: usize, k: usize, j: usize| -> f64 { bs1.probability(n, k) * bs2.probability(n - k, j) };

    let sector_mass = |s: usize| -> f64 {
        let mut acc = 0.0;
        for n in s..d {
            if pops[n] == 0.0 {
                continue;
            }
            for k in 0..=s {
                acc += pops[n] * prob(n, k, s - k);
            }
        }
        acc
    };
    let (kmax, masses) = pick_cap(sector_mass, d - 1, total, &cp.detector_cutoff)?;
    let kept: f64 = masses.iter().sum();
    let basis = PairBasis::new(kmax);
    let dim = basis.dim();
    let pairs: Vec<(usize, usize)> = basis.pairs().collect();

    let mut joint = None;
    let rho12 = match matrix {
        FockMatrix::Pure(c) => {
            let mut psi = DMatrix::<C64>::zeros(d, dim);
            for f in 0..d {
                for (i, &(k, j)) in pairs.iter().enumerate() {
                    let n = f + k + j;
                    if n < d {
                        psi[(f, i)] = c[n] * amp(n, k, j);
                    }
                }
            }
            let rho = psi.transpose() * psi.conjugate();
            if d * dim <= MAX_JOINT_ENTRIES {
                joint = Some(psi);
            }
            rho
        }
        FockMatrix::Diagonal(p) => {
            let mut rho = DMatrix::<C64>::zeros(dim, dim);
            let mut v = Vec::with_capacity(kmax + 1);
            for (n, pn) in p.iter().enumerate() {
                if *pn == 0.0 {
                    continue;
                }
                for s in 0..=kmax.min(n) {
                    v.clear();
                    v.extend((0..=s).map(|k| amp(n, k, s - k)));
                    let i0 = PairBasis::sector_start(s);
                    for a in 0..=s {
                        for b in 0..=s {
                            rho[(i0 + a, i0 + b)] += *pn * v[a] * v[b].conj();
                        }
                    }
                }
            }
            rho
        }
        FockMatrix::Dense(m) => {
            let mut rho = DMatrix::<C64>::zeros(dim, dim);
            let mut u = vec![ZERO; dim];
            for f in 0..d {
                for (i, &(k, j)) in pairs.iter().enumerate() {
                    let n = f + k + j;
                    u[i] = if n < d { amp(n, k, j) } else { ZERO };
                }
                for (a, &(k, j)) in pairs.iter().enumerate() {
                    if u[a] == ZERO {
                        continue;
                    }
                    for (b, &(kp, jp)) in pairs.iter().enumerate() {
                        if u[b] == ZERO {
                            continue;
                        }
                        rho[(a, b)] += m[(f + k + j, f + kp + jp)] * u[a] * u[b].conj();
                    }
                }
            }
            rho
        }
    };
    let mut rho12 = rho12;
    hermitize(&mut rho12);

    let residual_pops: Vec<f64> = (0..d)
        .map(|f| {
            let mut acc = 0.0;
            for n in f..d {
                if pops[n] == 0.0 {
                    continue;
                }
                let s = n - f;
                for k in 0..=s {
                    acc += pops[n] * prob(n, k, s - k);
                }
            }
            acc
        })
        .collect();

    Ok(JointDetectorState {
        rho12,
        basis,
        field_residual: Some(FieldResidual {
            populations: residual_pops,
            joint_amplitudes: joint,
        }),
        provenance: Provenance {
            mode: cp.mode,
            path: EvolutionPath::Sequential,
            source_label: state.label().to_string(),
            coupling: *cp,
            detector_tail_mass: (total - kept).max(0.0),
        },
    })
}

/// Mixture over `P(alpha)` of `|-i alpha sqrt(g)>_1 |-i alpha sqrt(g)>_2`.
///
/// Coherent sources give the product state directly. Thermal sources are
/// phase-averaged analytically and integrated over `|alpha|^2` with
/// Gauss-Laguerre quadrature; the rule is accepted when doubling the node
/// count moves no entry by more than `1e-9`.
pub fn evolve_approx_classical(
    state: &FieldState,
    cp: &CouplingParams,
) -> Result<JointDetectorState> {
    cp.validate()?;
    let g = cp.gamma0_dt;
    if g > APPROXIMATION_LIMIT {
        return Err(Error::ApproximationDomain(g));
    }
    let p = *state
        .classical_p()
        .ok_or_else(|| Error::NotPRepresentable(state.label().to_string()))?;
    let policy = &cp.detector_cutoff;
    let provenance = |tail: f64| Provenance {
        mode: cp.mode,
        path: EvolutionPath::ApproximateClassical,
        source_label: state.label().to_string(),
        coupling: *cp,
        detector_tail_mass: tail,
    };
    match p {
        ClassicalP::Coherent { alpha } => {
            let beta = C64::new(0.0, -1.0) * alpha * g.sqrt();
            // total detector number is Poisson(2 |beta|^2)
            let mu = 2.0 * beta.norm_sqr();
            let lf = ln_factorials(4096);
            let poisson = |s: usize| -> f64 {
                if mu == 0.0 {
                    return if s == 0 { 1.0 } else { 0.0 };
                }
                (-mu + s as f64 * mu.ln() - lf[s]).exp()
            };
            let (kmax, masses) = pick_cap(poisson, 4095, 1.0, policy)?;
            let kept: f64 = masses.iter().sum();
            let single = coherent_amplitudes(beta, kmax + 1);
            let basis = PairBasis::new(kmax);
            let v: Vec<C64> = basis.pairs().map(|(a, b)| single[a] * single[b]).collect();
            let dim = v.len();
            let mut rho12 = DMatrix::from_fn(dim, dim, |i, j| v[i] * v[j].conj());
            hermitize(&mut rho12);
            let field = match state.matrix() {
                FockMatrix::Pure(c) => c.clone(),
                _ => coherent_amplitudes(alpha, state.dim()),
            };
            let joint = if field.len() * dim <= MAX_JOINT_ENTRIES {
                Some(DMatrix::from_fn(field.len(), dim, |r, i| field[r] * v[i]))
            } else {
                None
            };
            Ok(JointDetectorState {
                rho12,
                basis,
                field_residual: Some(FieldResidual {
                    populations: state.matrix().populations(),
                    joint_amplitudes: joint,
                }),
                provenance: provenance((1.0 - kept).max(0.0)),
            })
        }
        ClassicalP::Thermal { nbar } => {
            let lambda = g * nbar;
            let weights_64 = thermal_sector_weights(lambda, LAGUERRE_NODES, 4095);
            let lf = ln_factorials(4096);
            // sector mass: w_s * sum_{n1} 1/(n1! n2!) = w_s 2^s / s!
            let sector = |s: usize| -> f64 {
                weights_64[s] * (s as f64 * std::f64::consts::LN_2 - lf[s]).exp()
            };
            let (kmax, masses) = pick_cap(sector, 4095, 1.0, policy)?;
            let kept: f64 = masses.iter().sum();
            let weights_128 = thermal_sector_weights(lambda, 2 * LAGUERRE_NODES, kmax);
            let build = |w: &[f64]| -> DMatrix<C64> {
                let basis = PairBasis::new(kmax);
                let dim = basis.dim();
                let mut rho = DMatrix::<C64>::zeros(dim, dim);
                for s in 0..=kmax {
                    let i0 = PairBasis::sector_start(s);
                    for a in 0..=s {
                        for b in 0..=s {
                            let ln_norm = -0.5 * (lf[a] + lf[s - a] + lf[b] + lf[s - b]);
                            rho[(i0 + a, i0 + b)] = C64::new(w[s] * ln_norm.exp(), 0.0);
                        }
                    }
                }
                rho
            };
            let rho12 = build(&weights_64);
            let check = build(&weights_128);
            let shift = (&rho12 - &check)
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if shift > QUADRATURE_TOL {
                return Err(Error::QuadratureNotConverged { shift });
            }
            Ok(JointDetectorState {
                rho12,
                basis: PairBasis::new(kmax),
                field_residual: Some(FieldResidual {
                    populations: state.matrix().populations(),
                    joint_amplitudes: None,
                }),
                provenance: provenance((1.0 - kept).max(0.0)),
            })
        }
    }
}

/// `w_s = int_0^inf e^{-u} e^{-2 lambda u} (lambda u)^s du` by Gauss-Laguerre.
fn thermal_sector_weights(lambda: f64, nodes: usize, smax: usize) -> Vec<f64> {
    if lambda == 0.0 {
        let mut w = vec![0.0; smax + 1];
        w[0] = 1.0;
        return w;
    }
    let (x, w) = gauss_laguerre(nodes);
    (0..=smax)
        .map(|s| {
            x.iter()
                .zip(&w)
                .filter(|(_, w)| **w > 0.0)
                .map(|(x, w)| {
                    let t = lambda * x;
                    (w.ln() - 2.0 * t + s as f64 * t.ln()).exp()
                })
                .sum()
        })
        .collect()
}

/// Closed-form click distribution for a Fock input under the exact
/// interaction: `C(n,s) (sin^2 theta)^s (cos^2 theta)^(n-s) C(s,n1) / 2^s`
/// with `s = n1 + n2`.
pub fn fock_click_pmf_closed_form(n: usize, theta: f64) -> ClickPmf {
    let lf = ln_factorials(n.max(1));
    let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
    let basis = PairBasis::new(n);
    let probs = basis
        .pairs()
        .map(|(n1, n2)| {
            let s = n1 + n2;
            let ln_p = lf[n] - lf[s] - lf[n - s] + lf[s]
                - lf[n1]
                - lf[n2]
                - s as f64 * std::f64::consts::LN_2;
            let mut p = ln_p.exp();
            if s > 0 {
                p *= s2.powi(s as i32);
            }
            if n > s {
                p *= c2.powi((n - s) as i32);
            }
            p
        })
        .collect();
    ClickPmf::from_probs(n, probs)
}
