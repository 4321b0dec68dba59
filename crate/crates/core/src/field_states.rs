//! Single-mode field states in a truncated Fock basis and their moment bundle.
//!
//! The canonical object is the truncated density matrix. Pure and diagonal
//! states keep a compact representation; [`FieldState::fock_matrix`]
//! materializes the full matrix on demand. States whose Glauber-Sudarshan
//! P-function is a proper probability density (coherent, thermal) carry it as
//! [`ClassicalP`] metadata, used by the weak-coupling path and by
//! [`PSampler`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::coherent_amplitudes;

pub const DEFAULT_TAIL_MASS: f64 = 1e-12;
pub const DEFAULT_MAX_DIM: usize = 4096;

const TRACE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;
const DIAG_TOL: f64 = 1e-14;
const VACUUM_N: f64 = 1e-14;

/// How far to truncate the Fock basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffPolicy {
    /// Largest probability mass allowed outside the retained basis.
    pub tail_mass: f64,
    /// Largest basis dimension the constructors may allocate.
    pub max_dim: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        Self {
            tail_mass: DEFAULT_TAIL_MASS,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

/// Storage for the truncated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum FockMatrix {
    /// `|psi><psi|` with the given number-basis amplitudes.
    Pure(Vec<C64>),
    /// `sum_n p_n |n><n|`.
    Diagonal(Vec<f64>),
    Dense(DMatrix<C64>),
}

impl FockMatrix {
    pub fn dim(&self) -> usize {
        match self {
            FockMatrix::Pure(v) => v.len(),
            FockMatrix::Diagonal(p) => p.len(),
            FockMatrix::Dense(m) => m.nrows(),
        }
    }

    /// `rho_{mn} = <m|rho|n>`.
    pub fn entry(&self, m: usize, n: usize) -> C64 {
        match self {
            FockMatrix::Pure(v) => v[m] * v[n].conj(),
            FockMatrix::Diagonal(p) => {
                if m == n {
                    C64::new(p[m], 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            FockMatrix::Dense(mat) => mat[(m, n)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            FockMatrix::Dense(m) => m.clone(),
            _ => {
                let d = self.dim();
                DMatrix::from_fn(d, d, |m, n| self.entry(m, n))
            }
        }
    }

    pub fn populations(&self) -> Vec<f64> {
        match self {
            FockMatrix::Pure(v) => v.iter().map(|c| c.norm_sqr()).collect(),
            FockMatrix::Diagonal(p) => p.clone(),
            FockMatrix::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
        }
    }
}

/// P-function metadata for classical states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalP {
    Coherent { alpha: C64 },
    Thermal { nbar: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    matrix: FockMatrix,
    classical_p: Option<ClassicalP>,
    label: String,
    tail_mass: f64,
}

impl FieldState {
    /// Builds a state from an explicit matrix after checking the trace,
    /// Hermiticity, and diagonal-positivity invariants.
    pub fn from_matrix(matrix: DMatrix<C64>, label: impl Into<String>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidState(
                "density matrix must be square and non-empty".into(),
            ));
        }
        let state = Self::assemble(FockMatrix::Dense(matrix), None, label.into())?;
        Ok(state)
    }

    fn assemble(
        matrix: FockMatrix,
        classical_p: Option<ClassicalP>,
        label: String,
    ) -> Result<Self> {
        let trace: f64 = matrix.populations().iter().sum();
        let state = Self {
            matrix,
            classical_p,
            label,
            tail_mass: (1.0 - trace).max(0.0),
        };
        state.validate()?;
        Ok(state)
    }

    /// Checks the representation invariants.
    pub fn validate(&self) -> Result<()> {
        let pops = self.matrix.populations();
        let trace: f64 = pops.iter().sum();
        if !(1.0 - TRACE_TOL..=1.0 + 1e-12).contains(&trace) {
            return Err(Error::InvalidState(format!(
                "trace {trace} outside [1-1e-10, 1]"
            )));
        }
        if let Some(p) = pops.iter().find(|p| **p < -DIAG_TOL) {
            return Err(Error::InvalidState(format!("negative population {p}")));
        }
        if let FockMatrix::Dense(m) = &self.matrix {
            let d = m.nrows();
            for i in 0..d {
                for j in i..d {
                    if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL {
                        return Err(Error::InvalidState(format!("not Hermitian at ({i},{j})")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self) -> &FockMatrix {
        &self.matrix
    }

    /// Full `(d+1) x (d+1)` density matrix.
    pub fn fock_matrix(&self) -> DMatrix<C64> {
        self.matrix.to_dense()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Highest retained Fock level `d`.
    pub fn cutoff(&self) -> usize {
        self.dim() - 1
    }

    pub fn classical_p(&self) -> Option<&ClassicalP> {
        self.classical_p.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Probability mass lost to truncation.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn trace(&self) -> f64 {
        self.matrix.populations().iter().sum()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Moment bundle consumed by the analytic correlators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldMoments {
    /// `<a^+ a>`
    pub n_mean: f64,
    /// `<a^+2 a^2>`
    pub n2_normal: f64,
    /// `<a>`
    pub a_mean: C64,
    /// `<a^2>`
    pub a2_mean: C64,
    /// Variance of `P = (a - a^+)/(sqrt(2) i)`.
    pub p_var: f64,
    /// Variance of `X = (a + a^+)/sqrt(2)`.
    pub x_var: f64,
    /// `None` for the vacuum.
    pub mandel_q: Option<f64>,
    /// `None` for the vacuum.
    pub g2: Option<f64>,
    pub trace: f64,
}

/// Ladder-operator contraction of the Fock matrix.
pub fn compute_moments(state: &FieldState) -> FieldMoments {
    let m = state.matrix();
    let d = m.dim();
    let mut trace = 0.0;
    let mut n_mean = 0.0;
    let mut n2_normal = 0.0;
    let mut a_mean = C64::new(0.0, 0.0);
    let mut a2_mean = C64::new(0.0, 0.0);
    match m {
        FockMatrix::Pure(v) => {
            for n in 0..d {
                let p = v[n].norm_sqr();
                let nf = n as f64;
                trace += p;
                n_mean += nf * p;
                n2_normal += nf * (nf - 1.0) * p;
                if n >= 1 {
                    a_mean += nf.sqrt() * v[n - 1].conj() * v[n];
                }
                if n >= 2 {
                    a2_mean += (nf * (nf - 1.0)).sqrt() * v[n - 2].conj() * v[n];
                }
            }
        }
        FockMatrix::Diagonal(p) => {
            for (n, p) in p.iter().enumerate() {
                let nf = n as f64;
                trace += p;
                n_mean += nf * p;
                n2_normal += nf * (nf - 1.0) * p;
            }
        }
        FockMatrix::Dense(mat) => {
            for n in 0..d {
                let p = mat[(n, n)].re;
                let nf = n as f64;
                trace += p;
                n_mean += nf * p;
                n2_normal += nf * (nf - 1.0) * p;
                // tr(rho a) = sum_n sqrt(n) rho_{n, n-1}
                if n >= 1 {
                    a_mean += nf.sqrt() * mat[(n, n - 1)];
                }
                if n >= 2 {
                    a2_mean += (nf * (nf - 1.0)).sqrt() * mat[(n, n - 2)];
                }
            }
        }
    }
    let p_mean = std::f64::consts::SQRT_2 * a_mean.im;
    let x_mean = std::f64::consts::SQRT_2 * a_mean.re;
    let p_var = (2.0 * n_mean + trace - 2.0 * a2_mean.re) / 2.0 - p_mean * p_mean;
    let x_var = (2.0 * n_mean + trace + 2.0 * a2_mean.re) / 2.0 - x_mean * x_mean;
    let (mandel_q, g2) = if n_mean < VACUUM_N {
        (None, None)
    } else {
        (
            Some((n2_normal - n_mean * n_mean) / n_mean),
            Some(n2_normal / (n_mean * n_mean)),
        )
    };
    FieldMoments {
        n_mean,
        n2_normal,
        a_mean,
        a2_mean,
        p_var,
        x_var,
        mandel_q,
        g2,
        trace,
    }
}

impl FieldMoments {
    /// Untruncated moments of a state with a proper P-function.
    pub fn closed_form(p: &ClassicalP) -> Self {
        match *p {
            ClassicalP::Coherent { alpha } => {
                let n = alpha.norm_sqr();
                let vac = n < VACUUM_N;
                FieldMoments {
                    n_mean: n,
                    n2_normal: n * n,
                    a_mean: alpha,
                    a2_mean: alpha * alpha,
                    p_var: 0.5,
                    x_var: 0.5,
                    mandel_q: if vac { None } else { Some(0.0) },
                    g2: if vac { None } else { Some(1.0) },
                    trace: 1.0,
                }
            }
            ClassicalP::Thermal { nbar } => {
                let vac = nbar < VACUUM_N;
                FieldMoments {
                    n_mean: nbar,
                    n2_normal: 2.0 * nbar * nbar,
                    a_mean: C64::new(0.0, 0.0),
                    a2_mean: C64::new(0.0, 0.0),
                    p_var: nbar + 0.5,
                    x_var: nbar + 0.5,
                    mandel_q: if vac { None } else { Some(nbar) },
                    g2: if vac { None } else { Some(2.0) },
                    trace: 1.0,
                }
            }
        }
    }
}

/// Moments for analytic predictions: closed form when the state carries a
/// proper P-function, otherwise [`compute_moments`].
pub fn prediction_moments(state: &FieldState) -> FieldMoments {
    match state.classical_p() {
        Some(p) => FieldMoments::closed_form(p),
        None => compute_moments(state),
    }
}

fn check_policy(policy: &CutoffPolicy) -> Result<()> {
    if !(policy.tail_mass > 0.0 && policy.tail_mass < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail mass {} not in (0,1)",
            policy.tail_mass
        )));
    }
    if policy.max_dim == 0 {
        return Err(Error::InvalidParameter("max_dim must be positive".into()));
    }
    Ok(())
}

/// Coherent state `|alpha>`, truncated at the smallest level whose retained
/// trace reaches `1 - tail_mass`.
pub fn make_coherent(alpha: C64, policy: CutoffPolicy) -> Result<FieldState> {
    check_policy(&policy)?;
    let mean = alpha.norm_sqr();
    if !mean.is_finite() || mean > 1e6 {
        return Err(Error::InvalidParameter(format!(
            "|alpha|^2 = {mean} exceeds 1e6"
        )));
    }
    let dim = poisson_cutoff(mean, policy.tail_mass, policy.max_dim)?;
    let amps = coherent_amplitudes(alpha, dim);
    FieldState::assemble(
        FockMatrix::Pure(amps),
        Some(ClassicalP::Coherent { alpha }),
        format!("coherent(alpha={}{:+}i)", alpha.re, alpha.im),
    )
}

/// Smallest dimension whose Poisson(mean) mass reaches `1 - tail`.
fn poisson_cutoff(mean: f64, tail: f64, max_dim: usize) -> Result<usize> {
    if mean == 0.0 {
        return Ok(1);
    }
    let ln_mean = mean.ln();
    let mut ln_fact = 0.0;
    let mut retained = 0.0;
    let mut n = 0usize;
    loop {
        if n > 0 {
            ln_fact += (n as f64).ln();
        }
        retained += (-mean + n as f64 * ln_mean - ln_fact).exp();
        if retained >= 1.0 - tail && n as f64 >= mean {
            let dim = n + 1;
            if dim > max_dim {
                return Err(Error::CutoffOverflow {
                    required: dim,
                    max: max_dim,
                });
            }
            return Ok(dim);
        }
        n += 1;
        // bail out once far beyond any useful size
        if n > 64 * max_dim.max(1) {
            return Err(Error::CutoffOverflow {
                required: n,
                max: max_dim,
            });
        }
    }
}

/// Number state `|n>`.
pub fn make_fock(n: usize, policy: CutoffPolicy) -> Result<FieldState> {
    if n + 1 > policy.max_dim {
        return Err(Error::CutoffOverflow {
            required: n + 1,
            max: policy.max_dim,
        });
    }
    let mut amps = vec![C64::new(0.0, 0.0); n + 1];
    amps[n] = C64::new(1.0, 0.0);
    FieldState::assemble(FockMatrix::Pure(amps), None, format!("fock(n={n})"))
}

/// Thermal (Bose-Einstein) state with mean occupancy `nbar`.
pub fn make_thermal(nbar: f64, policy: CutoffPolicy) -> Result<FieldState> {
    check_policy(&policy)?;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "nbar = {nbar} must be >= 0"
        )));
    }
    let label = format!("thermal(nbar={nbar})");
    if nbar == 0.0 {
        return FieldState::assemble(
            FockMatrix::Diagonal(vec![1.0]),
            Some(ClassicalP::Thermal { nbar }),
            label,
        );
    }
    let q = nbar / (1.0 + nbar);
    // tail after level d is q^(d+1)
    let needed = (policy.tail_mass.ln() / q.ln()).ceil().max(1.0);
    if !needed.is_finite() || needed > policy.max_dim as f64 {
        return Err(Error::CutoffOverflow {
            required: needed.min(usize::MAX as f64) as usize,
            max: policy.max_dim,
        });
    }
    let mut dim = needed as usize;
    // guard against rounding in the log estimate
    while q.powi(dim as i32) > policy.tail_mass {
        dim += 1;
    }
    if dim > policy.max_dim {
        return Err(Error::CutoffOverflow {
            required: dim,
            max: policy.max_dim,
        });
    }
    let p0 = 1.0 / (1.0 + nbar);
    let pops: Vec<f64> = (0..dim).map(|n| p0 * q.powi(n as i32)).collect();
    FieldState::assemble(
        FockMatrix::Diagonal(pops),
        Some(ClassicalP::Thermal { nbar }),
        label,
    )
}

/// Displaced squeezed state `D(alpha) S(xi)|0>` with `xi = r e^{i phi}` and
/// `S(xi) = exp[(xi^* a^2 - xi a^+2)/2]`. `phi = pi` squeezes `P`.
pub fn make_squeezed(
    r: f64,
    phi: f64,
    displacement: C64,
    policy: CutoffPolicy,
) -> Result<FieldState> {
    check_policy(&policy)?;
    if !(r.abs() <= 5.0) || !phi.is_finite() || !displacement.norm_sqr().is_finite() {
        return Err(Error::InvalidParameter(format!(
            "squeezing r = {r} must satisfy |r| <= 5"
        )));
    }
    let label = format!(
        "squeezed(r={r},phi={phi},alpha={}{:+}i)",
        displacement.re, displacement.im
    );
    let (ch, sh) = (r.cosh(), r.sinh());
    let e_phi = C64::from_polar(1.0, phi);
    let alpha = displacement;
    // annihilated by cosh r (a - alpha) + e^{i phi} sinh r (a^+ - alpha^*)
    let gamma = alpha * ch + alpha.conj() * e_phi * sh;
    let ln_c0 = C64::new(-0.5 * ch.ln() - 0.5 * alpha.norm_sqr(), 0.0)
        - 0.5 * alpha.conj() * alpha.conj() * e_phi * r.tanh();

    let mut amps: Vec<C64> = Vec::new();
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    let mut ln_scale = 0.0;
    let mut retained = 0.0;
    let mut n = 0usize;
    let expected_n = alpha.norm_sqr() + sh * sh;
    loop {
        let amp = cur * (ln_c0 + ln_scale).exp();
        retained += amp.norm_sqr();
        amps.push(amp);
        if retained >= 1.0 - policy.tail_mass && n as f64 >= expected_n {
            break;
        }
        if amps.len() >= policy.max_dim {
            return Err(Error::NonConvergedTail {
                tail: 1.0 - retained,
                target: policy.tail_mass,
                max: policy.max_dim,
            });
        }
        let nf = n as f64;
        let next = (gamma * cur - e_phi * sh * nf.sqrt() * prev) / (ch * (nf + 1.0).sqrt());
        prev = cur;
        cur = next;
        let mag = cur.norm().max(prev.norm());
        if mag > 1e100 {
            prev /= 1e100;
            cur /= 1e100;
            ln_scale += 100.0 * std::f64::consts::LN_10;
        } else if mag < 1e-100 && mag > 0.0 {
            prev *= 1e100;
            cur *= 1e100;
            ln_scale -= 100.0 * std::f64::consts::LN_10;
        }
        n += 1;
    }
    FieldState::assemble(FockMatrix::Pure(amps), None, label)
}

/// Seeded stream of draws from a proper P-function.
pub struct PSampler {
    kind: ClassicalP,
    rng: ChaCha8Rng,
}

impl Iterator for PSampler {
    type Item = C64;

    fn next(&mut self) -> Option<C64> {
        Some(match self.kind {
            ClassicalP::Coherent { alpha } => alpha,
            ClassicalP::Thermal { nbar } => {
                let s = (nbar / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(&mut self.rng);
                let im: f64 = StandardNormal.sample(&mut self.rng);
                C64::new(s * re, s * im)
            }
        })
    }
}

/// Draws `alpha ~ P(alpha)`; fails for states without a proper P-function.
pub fn classical_p_sampler(state: &FieldState, seed: u64) -> Result<PSampler> {
    let kind = *state
        .classical_p()
        .ok_or_else(|| Error::NotPRepresentable(state.label().to_string()))?;
    Ok(PSampler {
        kind,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}
