//! Husimi distributions on rectangular phase-space grids.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::gaussian::frozen_constants;
use crate::parallel::{try_map_indexed, try_map_indexed_sequential};
use crate::quadrature::{f_froz_quadrature, husimi_amplitude_exact, QuadratureConfig};
use crate::residue::{f_froz_analytic, ResidueOptions};
use crate::slitforms::f_multislit;
use crate::{Error, PhaseSpacePoint, PhysicalScenario, Result, TimeGrating};

/// Largest number of cells a grid may hold unless configured otherwise.
pub const DEFAULT_CELL_CAP: usize = 4_000_000;

/// How each grid cell is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Adaptive quadrature of the full integrand.
    QuadratureExact,
    /// Adaptive quadrature of the frozen-Gaussian integrand.
    QuadratureFrozen,
    /// Residue expansion of the frozen-Gaussian integrand.
    Residue,
    /// Narrow-slit closed forms (Lorentzian slits only).
    Slit,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::QuadratureExact, Method::QuadratureFrozen, Method::Residue, Method::Slit];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::QuadratureExact => "quadrature_exact",
            Method::QuadratureFrozen => "quadrature_frozen",
            Method::Residue => "residue",
            Method::Slit => "slit",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("method", format!("'{s}' is not one of quadrature_exact, quadrature_frozen, residue, slit")))
    }
}

/// Evaluates the Husimi distribution of one scenario and grating.
#[derive(Debug, Clone)]
pub struct Evaluator {
    scenario: PhysicalScenario,
    grating: TimeGrating,
    method: Method,
    pub quadrature: QuadratureConfig,
    pub residue: ResidueOptions,
}

impl Evaluator {
    /// Fails if `method` cannot handle `grating` for this scenario.
    pub fn new(scenario: PhysicalScenario, grating: TimeGrating, method: Method) -> Result<Self> {
        let ev = Evaluator {
            scenario,
            grating,
            method,
            quadrature: QuadratureConfig::default(),
            residue: ResidueOptions::default(),
        };
        ev.check_compatible()?;
        Ok(ev)
    }

    fn check_compatible(&self) -> Result<()> {
        match self.method {
            Method::Slit if self.grating.order() != 2 => Err(Error::Precondition(format!(
                "method slit needs a Lorentzian grating (n = 2), got n = {}",
                self.grating.order()
            ))),
            Method::Residue => {
                let fc = frozen_constants(&self.scenario, &self.scenario.classical_point());
                let modulus = fc.bessel_argument().norm();
                if modulus > self.residue.z_cap {
                    Err(Error::Precondition(format!(
                        "method residue is unusable here: Bessel argument |z| = {modulus:.3e} exceeds the cap {:.1e}; \
                         use slit or quadrature_exact",
                        self.residue.z_cap
                    )))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn scenario(&self) -> &PhysicalScenario {
        &self.scenario
    }

    pub fn grating(&self) -> &TimeGrating {
        &self.grating
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// `F = |f|^2` at `p`.
    pub fn husimi(&self, p: &PhaseSpacePoint) -> Result<f64> {
        let (s, g) = (&self.scenario, &self.grating);
        let value = match self.method {
            Method::QuadratureExact => husimi_amplitude_exact(s, p, g, &self.quadrature)
                .require_converged()?
                .value
                .norm_sqr(),
            Method::QuadratureFrozen => f_froz_quadrature(s, p, g, &self.quadrature)
                .require_converged()?
                .value
                .norm_sqr(),
            Method::Residue => f_froz_analytic(s, p, g, &self.residue)?.0.norm_sqr(),
            Method::Slit => f_multislit(s, p, g)?.norm_sqr(),
        };
        if !value.is_finite() {
            return Err(Error::NonConvergence(format!(
                "non-finite value at (x, v) = ({:e}, {:e})",
                p.x, p.v
            )));
        }
        Ok(value)
    }
}

/// Rectangular grid in the positive quadrant of phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub nx: usize,
    pub nv: usize,
}

impl GridSpec {
    pub fn validate(&self, cell_cap: usize) -> Result<()> {
        for (name, value) in [("x_min", self.x_min), ("x_max", self.x_max), ("v_min", self.v_min), ("v_max", self.v_max)] {
            if !value.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.x_min < 0.0 {
            return Err(Error::invalid("x_min", "must not be negative"));
        }
        if self.v_min <= 0.0 {
            return Err(Error::invalid("v_min", "must be positive"));
        }
        if !(self.x_max > self.x_min) {
            return Err(Error::invalid("x_range", "must be increasing"));
        }
        if !(self.v_max > self.v_min) {
            return Err(Error::invalid("v_range", "must be increasing"));
        }
        if self.nx < 2 || self.nv < 2 {
            return Err(Error::invalid("nx, nv", "must both be at least 2"));
        }
        let cells = self.nx.saturating_mul(self.nv);
        if cells > cell_cap {
            return Err(Error::invalid("grid", format!("has {cells} cells, above the cap of {cell_cap}")));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.nx * self.nv
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
    }

    pub fn v_at(&self, j: usize) -> f64 {
        self.v_min + (self.v_max - self.v_min) * j as f64 / (self.nv - 1) as f64
    }

    pub fn point(&self, i: usize, j: usize) -> PhaseSpacePoint {
        PhaseSpacePoint::new(self.x_at(i), self.v_at(j))
    }

    /// Grid spanning 60% to 140% of the classical point in both directions.
    pub fn around_classical_point(s: &PhysicalScenario, nx: usize, nv: usize) -> Self {
        let c = s.classical_point();
        let x = c.x.abs().max(s.sigma);
        GridSpec {
            x_min: (c.x - 0.4 * x).max(0.0),
            x_max: c.x + 0.4 * x,
            v_min: 0.6 * c.v,
            v_max: 1.4 * c.v,
            nx,
            nv,
        }
    }
}

/// Summary written next to a grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridMeta {
    pub scenario: PhysicalScenario,
    pub grating: TimeGrating,
    pub method: Method,
    pub quadrature: QuadratureConfig,
    pub residue: ResidueOptions,
    /// Seconds since the Unix epoch when evaluation finished.
    pub timestamp: u64,
    pub elapsed_s: f64,
    pub parallel: bool,
    pub min_value: f64,
    pub max_value: f64,
}

/// Values of `F`, rows ordered by velocity and positions within each row.
#[derive(Debug, Clone, Serialize)]
pub struct HusimiGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub meta: GridMeta,
}

impl HusimiGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.spec.nx + i]
    }

    /// CSV with header `x_tilde_m,v_tilde_mps,F`, velocity in the outer loop.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x_tilde_m,v_tilde_mps,F")?;
        for j in 0..self.spec.nv {
            let v = self.spec.v_at(j);
            for i in 0..self.spec.nx {
                writeln!(out, "{:.16e},{:.16e},{:.16e}", self.spec.x_at(i), v, self.value(i, j))?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Interior cells larger than all eight neighbours and at least
    /// `rel_floor` times the grid maximum, as `(i, j)` pairs.
    pub fn local_maxima(&self, rel_floor: f64) -> Vec<(usize, usize)> {
        let floor = rel_floor * self.meta.max_value;
        let mut found = Vec::new();
        for j in 1..self.spec.nv.saturating_sub(1) {
            for i in 1..self.spec.nx.saturating_sub(1) {
                let c = self.value(i, j);
                if c < floor {
                    continue;
                }
                let is_peak = (j - 1..=j + 1)
                    .flat_map(|jj| (i - 1..=i + 1).map(move |ii| (ii, jj)))
                    .filter(|&(ii, jj)| (ii, jj) != (i, j))
                    .all(|(ii, jj)| self.value(ii, jj) < c);
                if is_peak {
                    found.push((i, j));
                }
            }
        }
        found
    }
}

fn assemble(ev: &Evaluator, spec: &GridSpec, rows: Vec<Vec<f64>>, started: Instant, parallel: bool) -> HusimiGrid {
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    let min_value = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    HusimiGrid {
        spec: spec.clone(),
        values,
        meta: GridMeta {
            scenario: ev.scenario,
            grating: ev.grating.clone(),
            method: ev.method,
            quadrature: ev.quadrature.clone(),
            residue: ev.residue.clone(),
            timestamp,
            elapsed_s: started.elapsed().as_secs_f64(),
            parallel,
            min_value,
            max_value,
        },
    }
}

fn row(ev: &Evaluator, spec: &GridSpec, j: usize) -> Result<Vec<f64>> {
    (0..spec.nx).map(|i| ev.husimi(&spec.point(i, j))).collect()
}

/// Evaluates every cell, rows in parallel when the feature is enabled.
pub fn evaluate_grid(ev: &Evaluator, spec: &GridSpec, cell_cap: usize) -> Result<HusimiGrid> {
    spec.validate(cell_cap)?;
    let started = Instant::now();
    let rows = try_map_indexed(spec.nv, |j| row(ev, spec, j))?;
    Ok(assemble(ev, spec, rows, started, crate::parallel::is_parallel()))
}

/// Same as [`evaluate_grid`] on the calling thread only.
pub fn evaluate_grid_sequential(ev: &Evaluator, spec: &GridSpec, cell_cap: usize) -> Result<HusimiGrid> {
    spec.validate(cell_cap)?;
    let started = Instant::now();
    let rows = try_map_indexed_sequential(spec.nv, |j| row(ev, spec, j))?;
    Ok(assemble(ev, spec, rows, started, false))
}
