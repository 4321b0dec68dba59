//! Shared Fock-space numerics: factorial tables, ladder amplitudes, oscillator
//! eigenfunctions, the two-mode basis ordering, and Gauss-Laguerre rules.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// `ln k!` for k in `0..=n`.
pub(crate) fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `(-i)^k`.
pub(crate) fn minus_i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, -1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 1.0),
    }
}

/// Coherent-state amplitudes `<n|alpha>` for `n in 0..len`, evaluated in log
/// space so large `|alpha|` does not underflow.
pub(crate) fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let lf = ln_factorials(len.saturating_sub(1));
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); len];
        if len > 0 {
            v[0] = C64::new(1.0, 0.0);
        }
        return v;
    }
    let ln_r = alpha.norm().ln();
    let phase = alpha.arg();
    (0..len)
        .map(|n| {
            let ln_mag = -0.5 * r2 + n as f64 * ln_r - 0.5 * lf[n];
            C64::from_polar(ln_mag.exp(), n as f64 * phase)
        })
        .collect()
}

/// Forward recurrence for `<n|beta>`; cheaper than [`coherent_amplitudes`]
/// for the small amplitudes that reach the detectors.
#[inline]
pub(crate) fn coherent_amplitudes_into(beta: C64, inv_sqrt: &[f64], out: &mut [C64]) {
    if out.is_empty() {
        return;
    }
    out[0] = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
    for n in 1..out.len() {
        out[n] = out[n - 1] * beta * inv_sqrt[n];
    }
}

pub(crate) fn inv_sqrt_table(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| if n == 0 { 0.0 } else { 1.0 / (n as f64).sqrt() })
        .collect()
}

/// Beam-splitter amplitude `<n-k|_a <k|_d U |n>_a |0>_d` for the coupling
/// `exp[-i theta (a^+ d + d^+ a)]`:
/// `sqrt(C(n,k)) cos^(n-k)(theta) (-i sin theta)^k`.
pub(crate) struct BeamSplitter {
    ln_cos: f64,
    ln_sin: f64,
    lf: Vec<f64>,
}

impl BeamSplitter {
    pub(crate) fn new(theta: f64, nmax: usize) -> Self {
        Self {
            ln_cos: theta.cos().ln(),
            ln_sin: theta.sin().ln(),
            lf: ln_factorials(nmax),
        }
    }

    pub(crate) fn amplitude(&self, n: usize, k: usize) -> C64 {
        debug_assert!(k <= n);
        let ln_binom = self.lf[n] - self.lf[k] - self.lf[n - k];
        let ln_mag = 0.5 * ln_binom + (n - k) as f64 * self.ln_cos + k as f64 * self.ln_sin;
        minus_i_pow(k) * ln_mag.exp()
    }

    pub(crate) fn probability(&self, n: usize, k: usize) -> f64 {
        let ln_binom = self.lf[n] - self.lf[k] - self.lf[n - k];
        (ln_binom + 2.0 * (n - k) as f64 * self.ln_cos + 2.0 * k as f64 * self.ln_sin).exp()
    }
}

/// Two-mode number basis truncated on the total occupancy `n1 + n2 <= kmax`,
/// ordered by total number and then by `n1`. A basis with a smaller cap is a
/// prefix of one with a larger cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairBasis {
    pub kmax: usize,
}

impl PairBasis {
    pub fn new(kmax: usize) -> Self {
        Self { kmax }
    }

    pub fn dim(&self) -> usize {
        Self::dim_for(self.kmax)
    }

    pub fn dim_for(kmax: usize) -> usize {
        (kmax + 1) * (kmax + 2) / 2
    }

    #[inline]
    pub fn index(n1: usize, n2: usize) -> usize {
        let s = n1 + n2;
        s * (s + 1) / 2 + n1
    }

    /// Start offset of the sector with total occupancy `s`.
    #[inline]
    pub fn sector_start(s: usize) -> usize {
        s * (s + 1) / 2
    }

    #[inline]
    pub fn pair(idx: usize) -> (usize, usize) {
        // largest s with s(s+1)/2 <= idx
        let mut s = (((8 * idx + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
        while Self::sector_start(s + 1) <= idx {
            s += 1;
        }
        while Self::sector_start(s) > idx {
            s -= 1;
        }
        let n1 = idx - Self::sector_start(s);
        (n1, s - n1)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let kmax = self.kmax;
        (0..=kmax).flat_map(|s| (0..=s).map(move |n1| (n1, s - n1)))
    }
}

/// Real oscillator eigenfunctions `psi_n(x)` for `n in 0..len`, unit mass and
/// frequency, so `|psi_0|^2` has variance 1/2.
pub(crate) fn oscillator_eigenfunctions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len() - 1 {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Gauss-Laguerre nodes and weights for `int_0^inf e^{-u} f(u) du`, from the
/// eigen-decomposition of the Jacobi matrix.
pub(crate) fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = (2 * i + 1) as f64;
        if i + 1 < n {
            let off = (i + 1) as f64;
            jac[(i, i + 1)] = off;
            jac[(i + 1, i)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
