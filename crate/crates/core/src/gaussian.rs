//! Free Gaussian packets and the constants of the frozen-Gaussian integrand.

use std::f64::consts::PI;

use serde::Serialize;

use crate::{Complex, Error, PhaseSpacePoint, PhysicalScenario, Result};

const I: Complex = Complex::new(0.0, 1.0);

/// Initial packet centred at `center` with velocity `velocity`.
pub fn psi_initial(s: &PhysicalScenario, x: f64, center: f64, velocity: f64) -> Complex {
    let d = x - center;
    let norm = (PI * s.sigma * s.sigma).powf(-0.25);
    let exponent = Complex::new(
        -d * d / (2.0 * s.sigma * s.sigma),
        s.mass * velocity * d / s.hbar,
    );
    norm * exponent.exp()
}

/// Free-particle propagator from `x_from` to `x` over a time `tau > 0`.
pub fn free_propagator(s: &PhysicalScenario, x: f64, x_from: f64, tau: f64) -> Result<Complex> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive for the free propagator"));
    }
    let d = x - x_from;
    let pref = (Complex::new(s.mass, 0.0) / (2.0 * PI * s.hbar * tau * I)).sqrt();
    Ok(pref * Complex::new(0.0, s.mass * d * d / (2.0 * s.hbar * tau)).exp())
}

/// Natural logarithm of the freely evolved packet at `(x, tau)`.
///
/// Summing logarithms lets callers multiply several packets with a single
/// exponential.
pub fn psi_free_ln(s: &PhysicalScenario, x: f64, center: f64, velocity: f64, tau: f64) -> Complex {
    let st = tau / s.spreading_time();
    let width_sq = s.sigma * s.sigma * (1.0 + st * st);
    let d = x - (center + velocity * tau);
    let g = d * d / (2.0 * width_sq);
    let k = s.mass * velocity / s.hbar;
    let phase = g * st + k * d + 0.5 * k * velocity * tau - 0.5 * st.atan();
    Complex::new(-0.25 * (PI * width_sq).ln() - g, phase)
}

/// Freely evolved packet at `(x, tau)`.
pub fn psi_free(s: &PhysicalScenario, x: f64, center: f64, velocity: f64, tau: f64) -> Complex {
    psi_free_ln(s, x, center, velocity, tau).exp()
}

/// Complex width parameter `1 / (2 sigma^2 (1 + i hbar tau / (m sigma^2)))`.
pub fn alpha_tau(s: &PhysicalScenario, tau: Complex) -> Result<Complex> {
    let denom = 1.0 + I * tau / s.spreading_time();
    if denom.norm() < 1e-14 {
        return Err(Error::Pole(format!("alpha at tau = {tau}")));
    }
    Ok(1.0 / (2.0 * s.sigma * s.sigma * denom))
}

pub(crate) fn alpha_real(s: &PhysicalScenario, tau: f64) -> Complex {
    1.0 / (2.0 * s.sigma * s.sigma * Complex::new(1.0, tau / s.spreading_time()))
}

/// Constants of the frozen-Gaussian integrand
/// `omega_prefactor * chi(tau) * exp(phi(tau))` at one phase-space point, with
/// `phi(tau) = strength_in / (tau - tau_in) + strength_out / (tau - tau_out) + omega_log`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrozenConstants {
    /// Essential singularity of the incoming packet, `i m sigma^2 / hbar`.
    pub tau_in: Complex,
    /// Essential singularity of the outgoing packet, `t - i m sigma^2 / hbar`.
    pub tau_out: Complex,
    pub strength_in: Complex,
    pub strength_out: Complex,
    /// A square root of `strength_in / strength_out`. Either branch works.
    pub ratio_root: Complex,
    pub omega_prefactor: Complex,
    /// Kept separate from the prefactor; it can be far below the `f64` range.
    pub omega_log: f64,
}

impl FrozenConstants {
    /// The square root of `strength_in * strength_out` that matches `ratio_root`.
    pub fn coupling(&self) -> Complex {
        self.ratio_root * self.strength_out
    }

    /// Argument of the Bessel expansion of the essential singularity.
    pub fn bessel_argument(&self) -> Complex {
        2.0 * self.coupling() / (self.tau_out - self.tau_in)
    }

    pub fn with_flipped_branch(&self) -> Self {
        FrozenConstants {
            ratio_root: -self.ratio_root,
            ..*self
        }
    }

    /// Singular part of the exponent; no check for the singularities.
    pub(crate) fn pole_terms(&self, tau: Complex) -> Complex {
        self.strength_in / (tau - self.tau_in) + self.strength_out / (tau - self.tau_out)
    }

}

pub fn frozen_constants(s: &PhysicalScenario, p: &PhaseSpacePoint) -> FrozenConstants {
    let tau_s = s.spreading_time();
    let lam = s.reduced_wavelength();
    let lam_p = p.reduced_wavelength(s);
    let sig2 = s.sigma * s.sigma;
    let chirp_in = Complex::new(1.0, lam * s.x0.abs() / sig2);
    let chirp_out = Complex::new(1.0, lam_p * p.x / sig2);
    let q_in = (s.sigma / lam).powi(2);
    let q_out = (s.sigma / lam_p).powi(2);
    let strength_in = -0.5 * I * q_in * chirp_in * chirp_in * tau_s;
    let strength_out = 0.5 * I * q_out * chirp_out * chirp_out * tau_s;
    let omega_prefactor = (p.v / s.sigma * chirp_out + s.v0 / s.sigma * chirp_in) / (2.0 * PI.sqrt());
    FrozenConstants {
        tau_in: Complex::new(0.0, tau_s),
        tau_out: Complex::new(s.t, -tau_s),
        strength_in,
        strength_out,
        ratio_root: (strength_in / strength_out).sqrt(),
        omega_prefactor,
        omega_log: -0.5 * q_out - 0.5 * q_in,
    }
}

/// Full exponent of the frozen integrand, including `omega_log`.
pub fn phi(fc: &FrozenConstants, tau: Complex) -> Result<Complex> {
    let scale = fc.tau_in.norm().max(fc.tau_out.norm());
    for (name, pole) in [("tau_in", fc.tau_in), ("tau_out", fc.tau_out)] {
        if (tau - pole).norm() <= 1e-14 * scale {
            return Err(Error::Pole(format!("phi at {name} = {pole}")));
        }
    }
    Ok(fc.pole_terms(tau) + fc.omega_log)
}
