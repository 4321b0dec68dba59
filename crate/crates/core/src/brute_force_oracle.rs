//! Slow reference computations for validating the fast paths.
//!
//! Nothing here calls into the production numerics: the Fock oracle expands
//! `(cos theta a^+ - i sin theta (b1^+ + b2^+)/sqrt 2)^n |0> / sqrt(n!)` term by
//! term on a sparse map of tripartite occupation numbers, and the Gaussian
//! oracle integrates the P-function on a plain trapezoid grid.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field_states::ClassicalP;

pub const MAX_ORACLE_LEVEL: usize = 12;

/// Neumaier summation, kept separate from the production kernels.
#[derive(Default, Clone, Copy)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        self.c += if self.s.abs() >= x.abs() {
            (self.s - t) + x
        } else {
            (x - t) + self.s
        };
        self.s = t;
    }

    fn get(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Default, Clone, Copy)]
struct CAcc {
    re: Acc,
    im: Acc,
}

impl CAcc {
    fn add(&mut self, z: C64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn get(&self) -> C64 {
        C64::new(self.re.get(), self.im.get())
    }
}

/// Click outcomes with probabilities, in lexicographic `(n1, n2)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePmf {
    pub outcomes: Vec<((usize, usize), f64)>,
    pub source: String,
}

impl OraclePmf {
    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        self.outcomes
            .iter()
            .find(|(k, _)| *k == (n1, n2))
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        let mut a = Acc::default();
        for (_, p) in &self.outcomes {
            a.add(*p);
        }
        a.get()
    }
}

/// Click distribution for the Fock input `|n>` under the exact interaction
/// with normal-mode angle `theta`.
pub fn oracle_click_pmf(n: usize, theta: f64) -> Result<OraclePmf> {
    if n > MAX_ORACLE_LEVEL {
        return Err(Error::InvalidParameter(format!(
            "oracle level {n} > {MAX_ORACLE_LEVEL}"
        )));
    }
    let ca = C64::new(theta.cos(), 0.0);
    let cb = C64::new(0.0, -theta.sin() / 2f64.sqrt());
    // occupation (field, b1, b2) -> amplitude
    let mut state: BTreeMap<(usize, usize, usize), C64> = BTreeMap::new();
    state.insert((0, 0, 0), C64::new(1.0, 0.0));
    for _ in 0..n {
        let mut next: BTreeMap<(usize, usize, usize), CAcc> = BTreeMap::new();
        for (&(f, x, y), &amp) in &state {
            next.entry((f + 1, x, y))
                .or_default()
                .add(amp * ca * ((f + 1) as f64).sqrt());
            next.entry((f, x + 1, y))
                .or_default()
                .add(amp * cb * ((x + 1) as f64).sqrt());
            next.entry((f, x, y + 1))
                .or_default()
                .add(amp * cb * ((y + 1) as f64).sqrt());
        }
        state = next.into_iter().map(|(k, v)| (k, v.get())).collect();
    }
    let mut fact = 1.0f64;
    for k in 2..=n {
        fact *= k as f64;
    }
    let norm = 1.0 / fact;
    let mut probs: BTreeMap<(usize, usize), Acc> = BTreeMap::new();
    for (&(_, x, y), amp) in &state {
        probs.entry((x, y)).or_default().add(amp.norm_sqr() * norm);
    }
    Ok(OraclePmf {
        outcomes: probs.into_iter().map(|(k, a)| (k, a.get())).collect(),
        source: format!("fock n={n}, theta={theta}"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMoments {
    pub n1: f64,
    pub n2: f64,
    pub n1n2: f64,
    pub covariance: f64,
}

/// Weighted sums over any `(n1, n2, p)` list.
pub fn oracle_moments_from_pmf(
    pmf: impl IntoIterator<Item = ((usize, usize), f64)>,
) -> OracleMoments {
    let (mut a, mut b, mut c) = (Acc::default(), Acc::default(), Acc::default());
    for ((x, y), p) in pmf {
        a.add(x as f64 * p);
        b.add(y as f64 * p);
        c.add((x * y) as f64 * p);
    }
    let (n1, n2, n1n2) = (a.get(), b.get(), c.get());
    OracleMoments {
        n1,
        n2,
        n1n2,
        covariance: n1n2 - n1 * n2,
    }
}

/// First and second moments of the joint `X` quadrature density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianJoint {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

/// Mixture over the P-function of the product Gaussians
/// `N(sqrt(2 g) Im alpha, 1/2)` for each detector in the weak-coupling
/// picture.
pub fn oracle_gaussian_joint(source: &ClassicalP, gamma0_dt: f64) -> Result<GaussianJoint> {
    let s = (2.0 * gamma0_dt).sqrt();
    let (m, v) = match *source {
        ClassicalP::Coherent { alpha } => (alpha.im, 0.0),
        ClassicalP::Thermal { nbar } => {
            if nbar == 0.0 {
                (0.0, 0.0)
            } else {
                // Im alpha ~ N(0, nbar/2); integrate y and y^2 against it
                let sd = (nbar / 2.0).sqrt();
                let pts = 4001;
                let half = 14.0 * sd;
                let h = 2.0 * half / (pts - 1) as f64;
                let (mut w0, mut w1, mut w2) = (Acc::default(), Acc::default(), Acc::default());
                for i in 0..pts {
                    let y = -half + i as f64 * h;
                    let end = if i == 0 || i == pts - 1 { 0.5 } else { 1.0 };
                    let rho = end * h * (-(y * y) / (2.0 * sd * sd)).exp()
                        / (sd * (2.0 * std::f64::consts::PI).sqrt());
                    w0.add(rho);
                    w1.add(rho * y);
                    w2.add(rho * y * y);
                }
                let z = w0.get();
                let mean = w1.get() / z;
                (mean, w2.get() / z - mean * mean)
            }
        }
    };
    Ok(GaussianJoint {
        mean1: s * m,
        mean2: s * m,
        var1: 0.5 + s * s * v,
        var2: 0.5 + s * s * v,
        cov: s * s * v,
    })
}

/// Accepts a state description only if it has a proper P-function.
pub fn oracle_gaussian_for(
    p: Option<&ClassicalP>,
    label: &str,
    gamma0_dt: f64,
) -> Result<GaussianJoint> {
    match p {
        Some(p) => oracle_gaussian_joint(p, gamma0_dt),
        None => Err(Error::NotPRepresentable(label.to_string())),
    }
}

/// One line of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

/// Fast paths against the oracles on small instances.
pub fn validation_suite() -> Result<Vec<OracleCheck>> {
    use crate::field_states::{make_coherent, make_fock, make_thermal, CutoffPolicy};
    use crate::joint_evolution::{
        evolve, evolve_exact, fock_click_pmf_closed_form, CouplingParams,
    };
    use crate::measurement_channels::{homodyne_pdf, GridSpec};

    let mut out = Vec::new();
    for &theta in &[0.05, 0.2, 0.5] {
        let (mut closed, mut fast) = (0.0f64, 0.0f64);
        for n in 0..=8 {
            let o = oracle_click_pmf(n, theta)?;
            let c = fock_click_pmf_closed_form(n, theta);
            let cp = CouplingParams::exact(theta * theta / 2.0)?;
            let js = evolve_exact(&make_fock(n, CutoffPolicy::default())?, &cp)?;
            let f = js.click_pmf();
            for n1 in 0..=n {
                for n2 in 0..=n - n1 {
                    closed = closed.max((o.get(n1, n2) - c.get(n1, n2)).abs());
                    fast = fast.max((o.get(n1, n2) - f.get(n1, n2)).abs());
                }
            }
        }
        out.push(OracleCheck {
            name: format!("fock clicks n<=8, theta={theta}: closed form"),
            max_error: closed,
            tolerance: 1e-12,
        });
        out.push(OracleCheck {
            name: format!("fock clicks n<=8, theta={theta}: exact evolution"),
            max_error: fast,
            tolerance: 1e-12,
        });
    }
    let g = 0.01;
    for (name, state) in [
        (
            "coherent 2i",
            make_coherent(C64::new(0.0, 2.0), CutoffPolicy::default())?,
        ),
        ("thermal 3", make_thermal(3.0, CutoffPolicy::default())?),
    ] {
        let want = oracle_gaussian_for(state.classical_p(), state.label(), g)?;
        let js = evolve(&state, &CouplingParams::approximate(g)?)?;
        let got = homodyne_pdf(&js, &GridSpec::default())?.moments();
        let err = [
            got.mean1 - want.mean1,
            got.mean2 - want.mean2,
            got.var1 - want.var1,
            got.var2 - want.var2,
            got.cov - want.cov,
        ]
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()));
        out.push(OracleCheck {
            name: format!("homodyne moments, {name}"),
            max_error: err,
            tolerance: 1e-6,
        });
    }
    Ok(out)
}
