//! Validation, tail-bound and fringe reports.
//!
//! Every report carries an [`InputEcho`] so it can be reproduced from its own
//! contents. Reports serialize to JSON and also render as plain text.

use std::fmt;

use serde::Serialize;

use crate::aperture::ApodizationBarrier;
use crate::gaussian::frozen_constants;
use crate::grid::{Evaluator, Method};
use crate::quadrature::{
    contour_circle_integral, f_froz_quadrature, frozen_integrand, frozen_integrand_complex, integrate_from_minus_infinity,
    integrate_to_infinity, residue_oracle_radius, QuadratureConfig,
};
use crate::residue::{f_froz_analytic, residue_at_tau0, tail_bound_parts, ResidueOptions, TailBoundParts};
use crate::slitforms::{
    find_peaks_on_line, fringe_line, fringe_positions, line_point, ExtremumKind, FringeLine, LineExtremum, Parity,
};
use crate::{Error, PhaseSpacePoint, PhysicalScenario, Result, TimeGrating};

/// Inputs a report was produced from.
#[derive(Debug, Clone, Serialize)]
pub struct InputEcho {
    pub scenario: PhysicalScenario,
    pub grating: TimeGrating,
    pub quadrature: QuadratureConfig,
    pub residue: ResidueOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: Option<f64>,
    pub limit: Option<f64>,
    pub detail: String,
}

impl Check {
    fn compare(name: impl Into<String>, measured: f64, limit: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: if measured <= limit { Status::Pass } else { Status::Fail },
            measured: Some(measured),
            limit: Some(limit),
            detail: detail.into(),
        }
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Check {
            name: name.into(),
            status: Status::Fail,
            measured: None,
            limit: None,
            detail: err.to_string(),
        }
    }

    fn skipped(name: impl Into<String>, why: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: Status::Skip,
            measured: None,
            limit: None,
            detail: why.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub input: InputEcho,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

/// Sharpness times `t_c` above which the slit closed forms are checked.
pub const SLIT_REGIME_MIN: f64 = 100.0;
/// Allowed relative offset in `x` between matched extrema.
pub const FRINGE_REL_TOL: f64 = 0.01;
/// Trapezoidal nodes on the residue oracle circle.
const ORACLE_SAMPLES: usize = 4096;

/// Settings shared by the report builders.
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    pub quadrature: QuadratureConfig,
    pub residue: ResidueOptions,
}

impl ReportOptions {
    fn echo(&self, s: &PhysicalScenario, g: &TimeGrating) -> InputEcho {
        InputEcho {
            scenario: *s,
            grating: g.clone(),
            quadrature: self.quadrature.clone(),
            residue: self.residue.clone(),
        }
    }
}

/// Points `(1 + dx) x_c, (1 + dv) v_c` around the classical point.
fn patch(s: &PhysicalScenario) -> Vec<PhaseSpacePoint> {
    let c = s.classical_point();
    let x = c.x.abs().max(s.sigma);
    let mut pts = Vec::new();
    for dv in [-0.05, 0.0, 0.05] {
        for dx in [-0.05, 0.0, 0.05] {
            pts.push(PhaseSpacePoint::new(c.x + dx * x, c.v * (1.0 + dv)));
        }
    }
    pts
}

fn residue_usable(s: &PhysicalScenario, opts: &ResidueOptions) -> std::result::Result<(), String> {
    let z = frozen_constants(s, &s.classical_point()).bessel_argument().norm();
    if z > opts.z_cap {
        Err(format!("Bessel argument |z| = {z:.3e} exceeds the cap {:.1e}", opts.z_cap))
    } else {
        Ok(())
    }
}

fn residue_checks(s: &PhysicalScenario, g: &TimeGrating, opts: &ReportOptions, checks: &mut Vec<Check>) {
    if let Err(why) = residue_usable(s, &opts.residue) {
        checks.push(Check::skipped("residue_vs_quadrature", why.clone()));
        checks.push(Check::skipped("residue_vs_circle", why));
        return;
    }
    let mut worst = 0.0f64;
    let mut failure = None;
    for p in patch(s) {
        let analytic = match f_froz_analytic(s, &p, g, &opts.residue) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let quad = f_froz_quadrature(s, &p, g, &opts.quadrature);
        let diff = (analytic.0.to_complex() - quad.value).norm();
        let allowed = analytic.1.i_tail_bound + 10.0 * quad.error_estimate;
        // points where the tail bound is unavailable prove nothing either way
        if !allowed.is_finite() {
            continue;
        }
        let ratio = if diff == 0.0 { 0.0 } else { diff / allowed };
        worst = worst.max(ratio);
    }
    checks.push(match failure {
        Some(e) => Check::failed("residue_vs_quadrature", &e),
        None => Check::compare(
            "residue_vs_quadrature",
            worst,
            1.0,
            "max |analytic - quadrature| / (tail bound + 10 quadrature error) on a 3x3 patch",
        ),
    });

    let p = s.classical_point();
    let fc = frozen_constants(s, &p);
    let mut worst = 0.0f64;
    for b in g.slits() {
        match residue_vs_circle(&fc, b, &opts.residue) {
            Ok(rel) => worst = worst.max(rel),
            Err(e) => {
                checks.push(Check::failed("residue_vs_circle", &e));
                return;
            }
        }
    }
    checks.push(Check::compare(
        "residue_vs_circle",
        worst,
        1e-8,
        "relative difference of the residue at tau_in and a trapezoidal circle integral",
    ));
}

fn residue_vs_circle(fc: &crate::FrozenConstants, b: &ApodizationBarrier, opts: &ResidueOptions) -> Result<f64> {
    let (res, _) = residue_at_tau0(fc, b, opts)?;
    let oracle = contour_circle_integral(
        |z| frozen_integrand_complex(fc, b, z).unwrap_or_default(),
        fc.tau_in,
        residue_oracle_radius(fc, b),
        ORACLE_SAMPLES,
    )?;
    Ok((res.to_complex() - oracle).norm() / oracle.norm())
}

/// Whether `g` is a symmetric pair of Lorentzian slits around `t_c`.
fn symmetric_pair(s: &PhysicalScenario, g: &TimeGrating) -> Option<(f64, f64)> {
    let times = g.opening_times();
    if g.order() != 2 || times.len() != 2 {
        return None;
    }
    fringe_line(s, times[0], times[1]).ok().map(|_| (times[0], times[1]))
}

/// Matches each extremum of `reference` with the nearest one in `found`;
/// returns the worst relative offset and whether all kinds agree.
fn match_extrema(reference: &[(f64, ExtremumKind)], found: &[LineExtremum]) -> (f64, bool) {
    let mut worst = 0.0f64;
    let mut kinds = true;
    for &(x, kind) in reference {
        match found.iter().min_by(|a, b| (a.x - x).abs().total_cmp(&(b.x - x).abs())) {
            Some(e) => {
                worst = worst.max((e.x - x).abs() / x.abs());
                kinds &= e.kind == kind;
            }
            None => return (f64::INFINITY, false),
        }
    }
    (worst, kinds)
}

fn slit_checks(s: &PhysicalScenario, g: &TimeGrating, opts: &ReportOptions, checks: &mut Vec<Check>) -> Result<()> {
    let names = ["slit_vs_quadrature_extrema", "fringe_positions"];
    if g.order() != 2 {
        for n in names {
            checks.push(Check::skipped(n, "slit closed forms need n = 2"));
        }
        return Ok(());
    }
    let regime = g.sharpness() * s.t_c();
    if regime < SLIT_REGIME_MIN {
        for n in names {
            checks.push(Check::skipped(n, format!("nu t_c = {regime:.3e} is below {SLIT_REGIME_MIN}")));
        }
        return Ok(());
    }
    let mut quad = Evaluator::new(*s, g.clone(), Method::QuadratureExact)?;
    quad.quadrature = opts.quadrature.clone();
    let slit = Evaluator::new(*s, g.clone(), Method::Slit)?;
    let range = match symmetric_pair(s, g) {
        Some((t0, t1)) => {
            let set = fringe_positions(s, t0, t1, -4, 4)?;
            let lo = set.points.first().map(|p| p.x).unwrap_or(s.x0.abs());
            let hi = set.points.last().map(|p| p.x).unwrap_or(s.x0.abs());
            (0.97 * lo, 1.03 * hi)
        }
        None => (0.6 * s.x0.abs(), 1.4 * s.x0.abs()),
    };
    let numeric = find_peaks_on_line(s, |p| quad.husimi(p), range, 400)?;
    let analytic = find_peaks_on_line(s, |p| slit.husimi(p), range, 400)?;
    let reference: Vec<(f64, ExtremumKind)> = analytic.iter().map(|e| (e.x, e.kind)).collect();
    let (offset, kinds) = match_extrema(&reference, &numeric);
    checks.push(if kinds && analytic.len() == numeric.len() {
        Check::compare(
            "slit_vs_quadrature_extrema",
            offset,
            FRINGE_REL_TOL,
            format!("{} extrema along the fringe line", analytic.len()),
        )
    } else {
        Check {
            name: "slit_vs_quadrature_extrema".into(),
            status: Status::Fail,
            measured: Some(offset),
            limit: Some(FRINGE_REL_TOL),
            detail: format!(
                "extrema differ in number or kind: {} analytic, {} numeric",
                analytic.len(),
                numeric.len()
            ),
        }
    });
    match symmetric_pair(s, g) {
        Some((t0, t1)) => {
            let set = fringe_positions(s, t0, t1, -4, 4)?;
            let reference: Vec<(f64, ExtremumKind)> = set
                .points
                .iter()
                .map(|p| (p.x, if p.parity == Parity::Bright { ExtremumKind::Max } else { ExtremumKind::Min }))
                .collect();
            let (offset, kinds) = match_extrema(&reference, &numeric);
            checks.push(if kinds {
                Check::compare("fringe_positions", offset, FRINGE_REL_TOL, "predicted k = -4..4 vs numeric extrema")
            } else {
                Check {
                    name: "fringe_positions".into(),
                    status: Status::Fail,
                    measured: Some(offset),
                    limit: Some(FRINGE_REL_TOL),
                    detail: "a predicted fringe has the wrong parity".into(),
                }
            });
        }
        None => checks.push(Check::skipped("fringe_positions", "grating is not a symmetric pair of slits")),
    }
    Ok(())
}

/// Runs the residue and slit checks that apply to this scenario and grating.
pub fn validate(s: &PhysicalScenario, g: &TimeGrating, opts: &ReportOptions) -> Result<ValidationReport> {
    let mut checks = Vec::new();
    residue_checks(s, g, opts, &mut checks);
    slit_checks(s, g, opts, &mut checks)?;
    Ok(ValidationReport {
        input: opts.echo(s, g),
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundRow {
    pub nu: f64,
    pub parts: TailBoundParts,
    /// `|int_{-inf}^0 f| + |int_t^inf f|` by quadrature, when it converged.
    pub measured: Option<f64>,
    pub measured_error: Option<f64>,
}

impl BoundRow {
    pub fn holds(&self) -> Option<bool> {
        self.measured.map(|m| self.parts.bound >= m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub input: InputEcho,
    pub point: PhaseSpacePoint,
    pub rows: Vec<BoundRow>,
    /// Bound never increases along the sweep.
    pub monotone: bool,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.monotone && self.rows.iter().all(|r| r.holds() != Some(false))
    }
}

/// Sweep length: `nu, 2 nu, ..., 128 nu`, a little over two decades.
pub const SWEEP_STEPS: usize = 8;

/// Tail bound and measured tails at `p`, for the grating's sharpness and a
/// factor-two sweep above it.
pub fn bounds(s: &PhysicalScenario, g: &TimeGrating, p: &PhaseSpacePoint, opts: &ReportOptions) -> Result<BoundsReport> {
    let fc = frozen_constants(s, p);
    let mut rows = Vec::with_capacity(SWEEP_STEPS);
    for k in 0..SWEEP_STEPS {
        let nu = g.sharpness() * f64::powi(2.0, k as i32);
        let gk = g.with_sharpness(nu)?;
        let parts = tail_bound_parts(s, p, &gk)?;
        let f = frozen_integrand(&fc, &gk);
        let left = integrate_from_minus_infinity(&f, 0.0, &opts.quadrature);
        let right = integrate_to_infinity(&f, s.t, &opts.quadrature);
        let (measured, measured_error) = if left.converged && right.converged {
            (
                Some(left.value.norm() + right.value.norm()),
                Some(left.error_estimate + right.error_estimate),
            )
        } else {
            (None, None)
        };
        rows.push(BoundRow {
            nu,
            parts,
            measured,
            measured_error,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].parts.bound <= w[0].parts.bound);
    Ok(BoundsReport {
        input: opts.echo(s, g),
        point: *p,
        rows,
        monotone,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FringeRow {
    pub k: i64,
    pub predicted_x: f64,
    pub predicted_v: f64,
    pub parity: Parity,
    pub found_x: Option<f64>,
    pub found_kind: Option<ExtremumKind>,
    pub rel_offset: Option<f64>,
    /// Slit closed form over the evaluated value at the found extremum.
    pub slit_over_numeric: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FringesReport {
    pub input: InputEcho,
    pub method: Method,
    pub line: Option<FringeLine>,
    pub rows: Vec<FringeRow>,
    pub extrema: Vec<LineExtremum>,
    pub notes: Vec<String>,
}

impl FringesReport {
    /// All predicted fringes found with the right kind within [`FRINGE_REL_TOL`].
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| {
            let want = if r.parity == Parity::Bright { ExtremumKind::Max } else { ExtremumKind::Min };
            r.found_kind == Some(want) && r.rel_offset.is_some_and(|o| o < FRINGE_REL_TOL)
        })
    }
}

/// Predicted fringes for `k` in `k_range` against extrema of `F` located
/// numerically with `method`. Gratings that are not a symmetric slit pair
/// get a peaks-only report.
pub fn fringes(
    s: &PhysicalScenario,
    g: &TimeGrating,
    k_range: (i64, i64),
    method: Method,
    samples: usize,
    opts: &ReportOptions,
) -> Result<FringesReport> {
    let mut ev = Evaluator::new(*s, g.clone(), method)?;
    ev.quadrature = opts.quadrature.clone();
    ev.residue = opts.residue.clone();
    let mut notes = Vec::new();
    let pair = {
        let times = g.opening_times();
        if g.order() == 2 && times.len() == 2 {
            match fringe_line(s, times[0], times[1]) {
                Ok(line) => Some((times[0], times[1], line)),
                Err(e) => {
                    notes.push(format!("no fringe prediction: {e}"));
                    None
                }
            }
        } else {
            notes.push("no fringe prediction: grating is not a pair of Lorentzian slits".into());
            None
        }
    };
    let Some((t0, t1, line)) = pair else {
        let extrema = find_peaks_on_line(s, |p| ev.husimi(p), (0.6 * s.x0.abs(), 1.4 * s.x0.abs()), samples)?;
        return Ok(FringesReport {
            input: opts.echo(s, g),
            method,
            line: None,
            rows: Vec::new(),
            extrema,
            notes,
        });
    };
    notes.extend(line.warnings.iter().cloned());
    let set = fringe_positions(s, t0, t1, k_range.0, k_range.1)?;
    notes.extend(set.notes.iter().cloned());
    if set.points.is_empty() {
        return Err(Error::invalid("k_range", "contains no reachable fringe"));
    }
    let lo = set.points.first().map(|p| p.x).unwrap_or(s.x0.abs());
    let hi = set.points.last().map(|p| p.x).unwrap_or(s.x0.abs());
    // room for one more fringe on either side so the end points are bracketed
    let pad = 0.03 * hi.max(lo);
    let extrema = find_peaks_on_line(s, |p| ev.husimi(p), ((lo - pad).max(0.0), hi + pad), samples)?;
    let mut rows = Vec::with_capacity(set.points.len());
    for fp in &set.points {
        let nearest = extrema
            .iter()
            .min_by(|a, b| (a.x - fp.x).abs().total_cmp(&(b.x - fp.x).abs()));
        let slit_over_numeric = match (method, nearest) {
            (Method::Slit, _) | (_, None) => None,
            (_, Some(e)) if e.kind == ExtremumKind::Max && e.value > 0.0 => {
                let slit = crate::slitforms::f_multislit(s, &line_point(s, e.x), g)?.norm_sqr();
                Some(slit / e.value)
            }
            _ => None,
        };
        rows.push(FringeRow {
            k: fp.k,
            predicted_x: fp.x,
            predicted_v: fp.v,
            parity: fp.parity,
            found_x: nearest.map(|e| e.x),
            found_kind: nearest.map(|e| e.kind),
            rel_offset: nearest.map(|e| (e.x - fp.x).abs() / fp.x),
            slit_over_numeric,
        });
    }
    Ok(FringesReport {
        input: opts.echo(s, g),
        method,
        line: Some(line),
        rows,
        extrema,
        notes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6e}"))
}

impl fmt::Display for InputEcho {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.scenario;
        writeln!(
            f,
            "scenario: m = {:e} kg, hbar = {:e}, sigma = {:e}, x0 = {:e}, v0 = {:e}, t = {:e}",
            s.mass, s.hbar, s.sigma, s.x0, s.v0, s.t
        )?;
        writeln!(
            f,
            "grating: n = {}, nu = {:e}, t_ops = {:?}",
            self.grating.order(),
            self.grating.sharpness(),
            self.grating.opening_times()
        )?;
        writeln!(
            f,
            "tolerances: quadrature rel {:e}, residue tol {:e}, k_max {}, z_cap {:e}",
            self.quadrature.rel_tol, self.residue.tol, self.residue.k_max, self.residue.z_cap
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input)?;
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            writeln!(
                f,
                "{tag} {:<28} measured {:>13} limit {:>13}  {}",
                c.name,
                opt(c.measured),
                opt(c.limit),
                c.detail
            )?;
        }
        writeln!(f, "overall: {}", if self.passed() { "pass" } else { "FAIL" })
    }
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input)?;
        writeln!(f, "point: x = {:e}, v = {:e}", self.point.x, self.point.v)?;
        writeln!(
            f,
            "{:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13} {:>13}",
            "nu", "gamma_up", "gauss_left", "gauss_right", "chi_left", "chi_right", "bound", "measured"
        )?;
        for r in &self.rows {
            let p = &r.parts;
            writeln!(
                f,
                "{:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13}{}",
                r.nu,
                p.gamma_up,
                p.gauss_left,
                p.gauss_right,
                p.chi_left,
                p.chi_right,
                p.bound,
                opt(r.measured),
                if r.holds() == Some(false) { "  VIOLATED" } else { "" }
            )?;
        }
        writeln!(f, "monotone in nu: {}", if self.monotone { "yes" } else { "NO" })
    }
}

impl fmt::Display for FringesReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.input)?;
        writeln!(f, "method: {}", self.method)?;
        if let Some(line) = &self.line {
            writeln!(
                f,
                "line: v = alpha x with alpha = {:.6e} (exact root {:.6e}), epsilon = {:.4}",
                line.alpha, line.alpha_exact, line.epsilon
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        if !self.rows.is_empty() {
            writeln!(
                f,
                "{:>4} {:>13} {:>13} {:>7} {:>13} {:>5} {:>11} {:>11}",
                "k", "x_k", "v_k", "parity", "found_x", "kind", "offset", "slit/num"
            )?;
            for r in &self.rows {
                let kind = match r.found_kind {
                    Some(ExtremumKind::Max) => "max",
                    Some(ExtremumKind::Min) => "min",
                    None => "-",
                };
                let parity = if r.parity == Parity::Bright { "bright" } else { "dark" };
                writeln!(
                    f,
                    "{:>4} {:>13.6e} {:>13.6e} {:>7} {:>13} {:>5} {:>11} {:>11}",
                    r.k,
                    r.predicted_x,
                    r.predicted_v,
                    parity,
                    opt(r.found_x),
                    kind,
                    r.rel_offset.map_or_else(|| "-".into(), |o| format!("{o:.3e}")),
                    r.slit_over_numeric.map_or_else(|| "-".into(), |o| format!("{o:.4}")),
                )?;
            }
        } else {
            writeln!(f, "extrema along v = v0 x / |x0|:")?;
            for e in &self.extrema {
                writeln!(f, "  {:?} at x = {:.6e}, v = {:.6e}, F = {:.6e}", e.kind, e.x, e.v, e.value)?;
            }
        }
        Ok(())
    }
}
