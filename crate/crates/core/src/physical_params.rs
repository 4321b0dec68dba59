//! Physical detector parameters and the dimensionless coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint_evolution::APPROXIMATION_LIMIT;

/// Newtonian constant in SI units.
pub const G_NEWTON: f64 = 6.67430e-11;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Default propagation speed in the rate denominator: a typical sound speed
/// in a metal bar, m/s.
pub const DEFAULT_SOUND_SPEED: f64 = 5.0e3;

/// A resonant-mass detector in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// rad/s
    pub omega: f64,
    /// m/s
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// s
    pub dt: f64,
}

fn default_speed() -> f64 {
    DEFAULT_SOUND_SPEED
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("length", self.length),
            ("omega", self.omega),
            ("speed", self.speed),
            ("dt", self.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} must be positive and finite"
                )));
            }
        }
        Ok(())
    }
}

/// `8 G M L^2 omega^4 / (pi^4 v^5)`.
pub fn gamma0_rate(spec: &DetectorSpec) -> Result<f64> {
    spec.validate()?;
    gamma0_with_constant(spec.mass, spec.length, spec.omega, spec.speed, G_NEWTON)
}

fn gamma0_with_constant(m: f64, l: f64, omega: f64, v: f64, g: f64) -> Result<f64> {
    let pi = std::f64::consts::PI;
    let ratio = omega / (pi * v);
    let rate = 8.0 * g * m * l * l * ratio.powi(4) / v;
    if !rate.is_finite() || rate == 0.0 {
        return Err(Error::NonFinite(format!("gamma0 = {rate}")));
    }
    Ok(rate)
}

/// Probability of a stimulated absorption in one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulatedAbsorption {
    pub probability: f64,
    /// `probability` in `[0.1, 10]`.
    pub feasible: bool,
}

/// `gamma0 dt <n>`; only defined where `gamma0 dt <= 0.1`.
pub fn stimulated_absorption_probability(
    gamma0: f64,
    dt: f64,
    n_mean: f64,
) -> Result<StimulatedAbsorption> {
    let g = gamma0 * dt;
    if !(g.is_finite() && g >= 0.0 && n_mean >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma0 dt = {g}, n_mean = {n_mean}"
        )));
    }
    if g > APPROXIMATION_LIMIT {
        return Err(Error::ApproximationDomain(g));
    }
    let probability = g * n_mean;
    Ok(StimulatedAbsorption {
        probability,
        feasible: (0.1..=10.0).contains(&probability),
    })
}

/// Occupancy that makes `gamma0 dt <n>` equal `target`.
pub fn required_occupancy(gamma0: f64, dt: f64, target: f64) -> f64 {
    target / (gamma0 * dt)
}
