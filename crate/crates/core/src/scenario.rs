//! Physical parameters of the incoming packet and phase-space points.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reduced Planck constant in SI units.
pub const HBAR_SI: f64 = 1.0545718e-34;
/// Unified atomic mass unit in kilograms.
pub const AMU_KG: f64 = 1.66053906660e-27;
/// Default separation factor used to decide "much smaller than".
pub const DEFAULT_MARGIN: f64 = 10.0;
/// Mass of a rubidium-87 atom in atomic mass units.
pub const RB87_MASS_U: f64 = 86.9091805;

/// A Gaussian packet of width `sigma` starting at `x0 < 0` with velocity
/// `v0 > 0`, observed at time `t`. The barrier sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalScenario {
    pub mass: f64,
    pub hbar: f64,
    pub sigma: f64,
    pub x0: f64,
    pub v0: f64,
    pub t: f64,
}

impl PhysicalScenario {
    pub fn new(mass: f64, hbar: f64, sigma: f64, x0: f64, v0: f64, t: f64) -> Result<Self> {
        let positive = [("mass", mass), ("hbar", hbar), ("sigma", sigma), ("v0", v0), ("t", t)];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
            if value <= 0.0 {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if !x0.is_finite() {
            return Err(Error::invalid("x0", "must be finite"));
        }
        if x0 >= 0.0 {
            return Err(Error::invalid("x0", "must be negative"));
        }
        Ok(PhysicalScenario { mass, hbar, sigma, x0, v0, t })
    }

    /// Classical arrival time at the barrier.
    pub fn t_c(&self) -> f64 {
        self.x0.abs() / self.v0
    }

    /// Reduced de Broglie wavelength `hbar / (m v0)`.
    pub fn reduced_wavelength(&self) -> f64 {
        self.hbar / (self.mass * self.v0)
    }

    /// Time scale `m sigma^2 / hbar` of free spreading.
    pub fn spreading_time(&self) -> f64 {
        self.mass * self.sigma * self.sigma / self.hbar
    }

    /// Width of a freely evolved packet after time `tau`.
    pub fn sigma_at(&self, tau: f64) -> f64 {
        let s = tau / self.spreading_time();
        self.sigma * (1.0 + s * s).sqrt()
    }

    /// Distance travelled past the barrier by the classical trajectory at `t`.
    pub fn distance_past_barrier(&self) -> f64 {
        self.v0 * (self.t - self.t_c())
    }

    /// Where the classical trajectory sits in phase space at time `t`.
    pub fn classical_point(&self) -> PhaseSpacePoint {
        PhaseSpacePoint::new(self.distance_past_barrier(), self.v0)
    }

    /// Rubidium-87 packet: `sigma = 30 um`, `x0 = -0.15 mm`, `v0 = 3 mm/s`,
    /// observed at `t = 2 t_c = 100 ms`.
    pub fn rubidium_reference() -> Self {
        PhysicalScenario {
            mass: RB87_MASS_U * AMU_KG,
            hbar: HBAR_SI,
            sigma: 30e-6,
            x0: -0.15e-3,
            v0: 3e-3,
            t: 0.1,
        }
    }

    /// Units with `m = hbar = sigma = 1`, `x0 = -10`, `v0 = 1`, `t = 20`.
    pub fn dimensionless_reference() -> Self {
        PhysicalScenario {
            mass: 1.0,
            hbar: 1.0,
            sigma: 1.0,
            x0: -10.0,
            v0: 1.0,
            t: 20.0,
        }
    }

    pub fn with_time(&self, t: f64) -> Result<Self> {
        Self::new(self.mass, self.hbar, self.sigma, self.x0, self.v0, t)
    }

    /// TOML text that [`load_scenario`] reads back to an identical value.
    pub fn to_toml_string(&self) -> String {
        let raw = ScenarioFile {
            mass_u: None,
            mass_kg: Some(self.mass),
            hbar: Some(self.hbar),
            sigma_m: Some(self.sigma),
            x0_m: Some(self.x0),
            v0_mps: Some(self.v0),
            t_s: Some(self.t),
        };
        toml::to_string(&raw).expect("scenario serializes")
    }
}

/// A phase-space point (position, velocity) at which the distribution is probed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub x: f64,
    pub v: f64,
}

impl PhaseSpacePoint {
    pub fn new(x: f64, v: f64) -> Self {
        PhaseSpacePoint { x, v }
    }

    /// `hbar / (m v)` for this point's velocity.
    pub fn reduced_wavelength(&self, s: &PhysicalScenario) -> f64 {
        s.hbar / (s.mass * self.v)
    }

    /// Time a classical particle at the barrier needs to reach `x` with velocity `v`.
    pub fn arrival_time(&self) -> f64 {
        self.x / self.v
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    mass_u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mass_kg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hbar: Option<f64>,
    sigma_m: Option<f64>,
    x0_m: Option<f64>,
    v0_mps: Option<f64>,
    t_s: Option<f64>,
}

/// Parse a scenario from TOML text.
///
/// Keys: `mass_u` or `mass_kg`, optional `hbar`, `sigma_m`, `x0_m`, `v0_mps`, `t_s`.
/// Dimensionless scenarios use the same keys with `hbar` set explicitly.
pub fn load_scenario(text: &str) -> Result<PhysicalScenario> {
    let raw: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
    let mass = match (raw.mass_u, raw.mass_kg) {
        (Some(_), Some(_)) => return Err(Error::invalid("mass", "given twice (mass_u and mass_kg)")),
        (Some(u), None) => u * AMU_KG,
        (None, Some(kg)) => kg,
        (None, None) => return Err(Error::invalid("mass", "is missing (mass_u or mass_kg)")),
    };
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::invalid(key, "is missing"));
    PhysicalScenario::new(
        mass,
        raw.hbar.unwrap_or(HBAR_SI),
        need(raw.sigma_m, "sigma_m")?,
        need(raw.x0_m, "x0_m")?,
        need(raw.v0_mps, "v0_mps")?,
        need(raw.t_s, "t_s")?,
    )
}

pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<PhysicalScenario> {
    load_scenario(&std::fs::read_to_string(path)?)
}

/// Ratios behind the frozen-Gaussian approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    /// Ratios that must be much smaller than one.
    pub ratios: BTreeMap<String, f64>,
    /// `|x0| / (v0 (t - t_c))`, required to be at most of order one.
    pub ordering_ratio: f64,
    /// `ordering_ratio <= margin_factor`.
    pub ordering_ok: bool,
    /// Every entry of `ratios` is below `1 / margin_factor`.
    pub passed: bool,
    pub margin_factor: f64,
}

impl RegimeReport {
    /// Names of ratios that are not below `1 / margin_factor`.
    pub fn failing(&self) -> Vec<&str> {
        self.ratios
            .iter()
            .filter(|(_, &r)| r >= 1.0 / self.margin_factor)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Check the chain `sigma << |x0| ~ v0 (t - t_c) << m sigma^2 v0 / hbar`
/// together with `hbar t / (m sigma^2) << 1`.
pub fn check_frozen_regime(s: &PhysicalScenario, margin_factor: f64) -> RegimeReport {
    let travel = s.distance_past_barrier();
    let spread_length = s.spreading_time() * s.v0;
    let mut ratios = BTreeMap::new();
    ratios.insert("sigma_over_x0".to_string(), s.sigma / s.x0.abs());
    ratios.insert("travel_over_spread_length".to_string(), travel / spread_length);
    ratios.insert("t_over_spreading_time".to_string(), s.t / s.spreading_time());
    let ordering_ratio = s.x0.abs() / travel;
    let passed = ratios.values().all(|&r| r.is_finite() && r >= 0.0 && r < 1.0 / margin_factor);
    RegimeReport {
        ratios,
        ordering_ratio,
        ordering_ok: ordering_ratio.is_finite() && ordering_ratio > 0.0 && ordering_ratio <= margin_factor,
        passed,
        margin_factor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const RB87: &str = "mass_u = 86.9091805\nsigma_m = 30e-6\nx0_m = -0.15e-3\nv0_mps = 3e-3\nt_s = 0.1\n";

    #[test]
    fn rb87_loads_with_amu_conversion() {
        let s = load_scenario(RB87).unwrap();
        assert_eq!(s.mass, 86.9091805 * AMU_KG);
        assert_eq!(s.hbar, HBAR_SI);
        assert!((s.t_c() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn dimensionless_arrival_time() {
        let s = PhysicalScenario::new(1.0, 1.0, 1.0, -10.0, 1.0, 20.0).unwrap();
        assert_eq!(s.t_c(), 10.0);
        assert_eq!(s.classical_point(), PhaseSpacePoint::new(10.0, 1.0));
    }

    #[test]
    fn errors_name_the_field() {
        let e = PhysicalScenario::new(1.0, 1.0, 1.0, -10.0, -1.0, 20.0).unwrap_err();
        assert_eq!(e.to_string(), "v0 must be positive");
        let e = PhysicalScenario::new(1.0, 1.0, 1.0, 10.0, 1.0, 20.0).unwrap_err();
        assert_eq!(e.to_string(), "x0 must be negative");
        let e = load_scenario("mass_kg = 1.0\nsigma_m = 1.0\nx0_m = -1.0\nv0_mps = 1.0\n").unwrap_err();
        assert_eq!(e.to_string(), "t_s is missing");
        assert!(load_scenario("mass_kg = 1.0\nbogus = 2\n").is_err());
    }

    #[test]
    fn regime_chain_for_rb87() {
        let s = load_scenario(RB87).unwrap();
        let spread_mm = s.spreading_time() * s.v0 * 1e3;
        assert!((3.6..=3.8).contains(&spread_mm), "{spread_mm}");
        let r = check_frozen_regime(&s, DEFAULT_MARGIN);
        assert!((r.ordering_ratio - 1.0).abs() < 1e-12);
        assert!(r.ordering_ok);
        // sigma / |x0| = 0.2 is the one ratio that misses a factor of ten
        assert_eq!(r.failing(), vec!["sigma_over_x0"]);
        assert!(check_frozen_regime(&s, 4.0).passed);
        let late = s.with_time(10.0).unwrap();
        assert!(!check_frozen_regime(&late, 4.0).passed);
    }

    #[test]
    fn dimensionless_scenario_is_outside_regime() {
        let s = PhysicalScenario::new(1.0, 1.0, 1.0, -10.0, 1.0, 20.0).unwrap();
        let r = check_frozen_regime(&s, DEFAULT_MARGIN);
        assert_eq!(r.ratios["t_over_spreading_time"], 20.0);
        assert!(!r.passed);
    }

    fn scenario() -> impl Strategy<Value = PhysicalScenario> {
        (1e-30f64..1e3, 1e-36f64..1e2, 1e-8f64..1e3, -1e3f64..-1e-8, 1e-6f64..1e4, 1e-6f64..1e4)
            .prop_map(|(m, h, s, x0, v0, t)| PhysicalScenario::new(m, h, s, x0, v0, t).unwrap())
    }

    proptest! {
        #[test]
        fn arrival_time_consistent(s in scenario()) {
            prop_assert!((s.t_c() * s.v0 - s.x0.abs()).abs() <= 1e-15 * s.x0.abs());
        }

        #[test]
        fn serialization_round_trips(s in scenario()) {
            let back = load_scenario(&s.to_toml_string()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn passed_is_monotone_in_margin(s in scenario(), m1 in 1.0f64..100.0, m2 in 1.0f64..100.0) {
            let (lo, hi) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
            if check_frozen_regime(&s, hi).passed {
                prop_assert!(check_frozen_regime(&s, lo).passed);
            }
        }
    }
}
