//! Apodized time windows `chi(tau) = 1 / (1 + (nu (tau - t_op))^n)` and
//! gratings built from several of them.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Complex, Error, Result};

/// Anything that can act as the time-dependent aperture of the barrier.
pub trait Window: Sync {
    fn value(&self, tau: f64) -> f64;

    /// Times where the window changes on a short scale. Quadrature splits there.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64) -> f64 + Sync> Window for F {
    fn value(&self, tau: f64) -> f64 {
        self(tau)
    }
}

/// A single smooth opening of even order `order`, inverse width `sharpness`
/// and centre `opening_time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApodizationBarrier {
    order: u32,
    sharpness: f64,
    opening_time: f64,
}

impl ApodizationBarrier {
    pub fn new(order: u32, sharpness: f64, opening_time: f64) -> Result<Self> {
        if order < 2 || order % 2 != 0 {
            return Err(Error::invalid("n", "must be even and at least 2"));
        }
        if !(sharpness.is_finite() && sharpness > 0.0) {
            return Err(Error::invalid("nu", "must be positive"));
        }
        if !opening_time.is_finite() {
            return Err(Error::invalid("t_op", "must be finite"));
        }
        Ok(ApodizationBarrier {
            order,
            sharpness,
            opening_time,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn opening_time(&self) -> f64 {
        self.opening_time
    }

    /// `sharpness^order`, the coefficient in front of the polynomial.
    pub fn scale(&self) -> f64 {
        self.sharpness.powi(self.order as i32)
    }

    pub fn chi(&self, tau: f64) -> f64 {
        let w = self.sharpness * (tau - self.opening_time);
        1.0 / (1.0 + w.powi(self.order as i32))
    }

    /// Analytic continuation of the window. Fails within `1e-12` of a pole.
    pub fn chi_complex(&self, z: Complex) -> Result<Complex> {
        let w = (z - self.opening_time) * self.sharpness;
        let denom = 1.0 + w.powi(self.order as i32);
        if denom.norm() < 1e-12 {
            return Err(Error::Pole(format!("window at {z}")));
        }
        Ok(1.0 / denom)
    }

    /// All `order` poles, `t_op + exp(i pi (2j + 1) / n) / nu` for `j = 0..n`.
    /// The first `n / 2` lie in the upper half plane.
    pub fn poles(&self) -> Vec<Complex> {
        let n = self.order as f64;
        (0..self.order)
            .map(|j| {
                let angle = PI * (2 * j + 1) as f64 / n;
                self.opening_time + Complex::from_polar(1.0 / self.sharpness, angle)
            })
            .collect()
    }

    pub fn poles_upper(&self) -> Vec<Complex> {
        let mut p = self.poles();
        p.truncate(self.order as usize / 2);
        p
    }

    fn edges(&self) -> [f64; 3] {
        let h = 1.0 / self.sharpness;
        [self.opening_time - h, self.opening_time, self.opening_time + h]
    }

    fn tails(&self, t: f64) -> Result<(f64, f64)> {
        let nu = self.sharpness;
        let t_op = self.opening_time;
        if self.order > 2 {
            if nu * t_op < 1.0 {
                return Err(Error::Precondition(format!(
                    "nu * t_op >= 1 is required for the n > 2 tail bound, got {}",
                    nu * t_op
                )));
            }
            if nu * (t - t_op) < 1.0 {
                return Err(Error::Precondition(format!(
                    "nu * (t - t_op) >= 1 is required for the n > 2 tail bound, got {}",
                    nu * (t - t_op)
                )));
            }
        }
        let left = (0.5 * PI - (nu * t_op).atan()) / nu;
        let right = (0.5 * PI - (nu * (t - t_op)).atan()) / nu;
        Ok((left, right))
    }
}

impl Window for ApodizationBarrier {
    fn value(&self, tau: f64) -> f64 {
        self.chi(tau)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.edges().to_vec()
    }
}

/// Slit sharpness of the rubidium reference grating, in 1/s.
pub const RUBIDIUM_SHARPNESS_HZ: f64 = 36_537.0;

/// Equal-weight superposition of barriers sharing order and sharpness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrating {
    slits: Vec<ApodizationBarrier>,
}

impl TimeGrating {
    pub fn new(order: u32, sharpness: f64, opening_times: &[f64]) -> Result<Self> {
        if opening_times.is_empty() {
            return Err(Error::invalid("t_ops", "must list at least one opening time"));
        }
        if opening_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("t_ops", "must be strictly increasing"));
        }
        let slits = opening_times
            .iter()
            .map(|&t| ApodizationBarrier::new(order, sharpness, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(TimeGrating { slits })
    }

    /// Two Lorentzian slits at 45 ms and 55 ms with `nu = 36.537 kHz`, matching
    /// [`PhysicalScenario::rubidium_reference`](crate::PhysicalScenario::rubidium_reference).
    pub fn rubidium_double_slit() -> Self {
        TimeGrating::new(2, RUBIDIUM_SHARPNESS_HZ, &[0.045, 0.055]).expect("valid reference grating")
    }

    pub fn single(barrier: ApodizationBarrier) -> Self {
        TimeGrating { slits: vec![barrier] }
    }

    pub fn slits(&self) -> &[ApodizationBarrier] {
        &self.slits
    }

    pub fn order(&self) -> u32 {
        self.slits[0].order
    }

    pub fn sharpness(&self) -> f64 {
        self.slits[0].sharpness
    }

    pub fn opening_times(&self) -> Vec<f64> {
        self.slits.iter().map(|s| s.opening_time).collect()
    }

    /// `1 / M` for `M` slits.
    pub fn weight(&self) -> f64 {
        1.0 / self.slits.len() as f64
    }

    pub fn chi(&self, tau: f64) -> f64 {
        self.weight() * self.slits.iter().map(|s| s.chi(tau)).sum::<f64>()
    }

    pub fn chi_complex(&self, z: Complex) -> Result<Complex> {
        let mut acc = Complex::new(0.0, 0.0);
        for s in &self.slits {
            acc += s.chi_complex(z)?;
        }
        Ok(acc * self.weight())
    }

    pub fn with_sharpness(&self, sharpness: f64) -> Result<Self> {
        TimeGrating::new(self.order(), sharpness, &self.opening_times())
    }
}

impl Window for TimeGrating {
    fn value(&self, tau: f64) -> f64 {
        self.chi(tau)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.slits.iter().flat_map(|s| s.edges()).collect()
    }
}

/// Upper-half-plane poles of every slit, sorted by real then imaginary part.
pub fn chi_poles_upper(g: &TimeGrating) -> Vec<Complex> {
    let mut p: Vec<Complex> = g.slits.iter().flat_map(|s| s.poles_upper()).collect();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p
}

/// Outcome of the large-arc check used when closing the contour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayWitness {
    pub holds: bool,
    /// Upper bound on `R * sup |chi|` over the arc of radius `R`.
    pub arc_bound: f64,
}

/// Bound `R |chi(z)|` on `|z| = R`, which decays like `1 / (nu^n R^(n-1))`.
pub fn decay_condition_ok(b: &ApodizationBarrier, radius: f64) -> DecayWitness {
    let gap = radius - b.opening_time.abs();
    let lower = (b.sharpness * gap).powi(b.order as i32) - 1.0;
    if gap <= 0.0 || lower <= 0.0 {
        return DecayWitness {
            holds: false,
            arc_bound: f64::INFINITY,
        };
    }
    DecayWitness {
        holds: true,
        arc_bound: radius / lower,
    }
}

/// Integrals of `chi` over `(-inf, 0]` and `[t, inf)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIntegrals {
    pub left: f64,
    pub right: f64,
    /// Exact for `n = 2`, upper bounds for larger `n`.
    pub exact: bool,
    pub notes: Vec<String>,
}

pub fn tail_integrals(g: &TimeGrating, t: f64) -> Result<TailIntegrals> {
    let mut left = 0.0;
    let mut right = 0.0;
    let mut notes = Vec::new();
    for s in &g.slits {
        if !(s.opening_time > 0.0 && s.opening_time < t) {
            notes.push(format!("t_op = {} lies outside (0, t)", s.opening_time));
        }
        let (l, r) = s.tails(t)?;
        left += l;
        right += r;
    }
    Ok(TailIntegrals {
        left: left * g.weight(),
        right: right * g.weight(),
        exact: g.order() == 2,
        notes,
    })
}

/// On-disk description of a grating.
///
/// `nu_dimensionless` is read in the time unit of the scenario; it is an
/// alias of `nu_hz` for scenarios that are not in SI units.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GratingFile {
    pub n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_dimensionless: Option<f64>,
    pub t_ops_s: Vec<f64>,
}

impl GratingFile {
    pub fn build(&self) -> Result<TimeGrating> {
        let nu = match (self.nu_hz, self.nu_dimensionless) {
            (Some(_), Some(_)) => return Err(Error::invalid("nu", "given twice (nu_hz and nu_dimensionless)")),
            (Some(v), None) | (None, Some(v)) => v,
            (None, None) => return Err(Error::invalid("nu", "is missing (nu_hz or nu_dimensionless)")),
        };
        TimeGrating::new(self.n, nu, &self.t_ops_s)
    }
}

pub fn load_grating(text: &str) -> Result<TimeGrating> {
    let raw: GratingFile = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
    raw.build()
}

pub fn load_grating_file(path: impl AsRef<Path>) -> Result<TimeGrating> {
    load_grating(&std::fs::read_to_string(path)?)
}
