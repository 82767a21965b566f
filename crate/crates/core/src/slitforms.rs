//! Closed forms for narrow Lorentzian slits (`n = 2`, `nu` large).
//!
//! In this regime a slit opening at `t_op` contributes
//! `(pi / nu) Omega exp(gamma_0 + gamma_1)` to the amplitude, where
//! `gamma_{0,1} = T_{0,1} / (t_op - tau_{0,1})`. Gratings are sums of such
//! terms. The double slit is also available in the factored form
//! `g1 e^{g2} (cosh f1 + cos f2)` used for fringe analysis.

use std::f64::consts::PI;

use serde::Serialize;

use crate::gaussian::frozen_constants;
use crate::parallel::try_map_indexed;
use crate::{Complex, Error, PhaseSpacePoint, PhysicalScenario, Result, ScaledComplex, TimeGrating};

/// Real and imaginary parts of `gamma_0(t_op)` and `gamma_1(x, v, t; t_op)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlitGamma {
    pub re_gamma0: f64,
    pub im_gamma0: f64,
    pub re_gamma1: f64,
    pub im_gamma1: f64,
}

impl SlitGamma {
    pub fn gamma0(&self) -> Complex {
        Complex::new(self.re_gamma0, self.im_gamma0)
    }

    pub fn gamma1(&self) -> Complex {
        Complex::new(self.re_gamma1, self.im_gamma1)
    }
}

pub fn gamma_components(s: &PhysicalScenario, p: &PhaseSpacePoint, t_op: f64) -> SlitGamma {
    let ts = s.spreading_time();
    let sig2 = s.sigma * s.sigma;
    let x0 = s.x0.abs();
    let (x, v) = (p.x, p.v);
    let half_k = s.mass / (2.0 * s.hbar);
    let d_in = 1.0 + (t_op / ts).powi(2);
    let lag = t_op - s.t;
    let d_out = 1.0 + (lag / ts).powi(2);
    SlitGamma {
        re_gamma0: (2.0 * t_op * x0 * s.v0 - x0 * x0 + ts * ts * s.v0 * s.v0) / (2.0 * sig2 * d_in),
        im_gamma0: half_k * (2.0 * x0 * s.v0 - t_op * (s.v0 * s.v0 - x0 * x0 / (ts * ts))) / d_in,
        re_gamma1: -(2.0 * lag * x * v + x * x - ts * ts * v * v) / (2.0 * sig2 * d_out),
        im_gamma1: half_k * (2.0 * x * v + lag * (v * v - x * x / (ts * ts))) / d_out,
    }
}

/// `(gamma_0, gamma_1)` by complex division of the frozen-Gaussian constants.
pub fn gamma_direct(s: &PhysicalScenario, p: &PhaseSpacePoint, t_op: f64) -> (Complex, Complex) {
    let fc = frozen_constants(s, p);
    let t = Complex::new(t_op, 0.0);
    (fc.strength_in / (t - fc.tau_in), fc.strength_out / (t - fc.tau_out))
}

/// `Re(gamma_0 + gamma_1)` plus the Gaussian normalisation exponent, summed
/// without the large cancelling terms.
fn slit_log_envelope(s: &PhysicalScenario, p: &PhaseSpacePoint, t_op: f64) -> f64 {
    let w_in = s.sigma_at(t_op);
    let w_out = s.sigma_at(s.t - t_op);
    let a = s.x0 + s.v0 * t_op;
    let b = p.x - p.v * (s.t - t_op);
    -a * a / (2.0 * w_in * w_in) - b * b / (2.0 * w_out * w_out)
}

/// Prefactor `Omega` without its Gaussian exponent.
fn omega(s: &PhysicalScenario, p: &PhaseSpacePoint) -> Complex {
    let rate = 1.0 / s.spreading_time();
    Complex::new(p.v + s.v0, rate * (p.x + s.x0.abs())) / (2.0 * PI.sqrt() * s.sigma)
}

/// `g1 = (v + v0)^2 + (x + |x0|)^2 hbar^2 / (m^2 sigma^4)`.
pub fn g1(s: &PhysicalScenario, p: &PhaseSpacePoint) -> f64 {
    let rate = 1.0 / s.spreading_time();
    (p.v + s.v0).powi(2) + (rate * (p.x + s.x0.abs())).powi(2)
}

/// Amplitude of one narrow slit of sharpness `nu` opening at `t_op`.
pub fn f_1slit(s: &PhysicalScenario, p: &PhaseSpacePoint, nu: f64, t_op: f64) -> ScaledComplex {
    let gamma = gamma_components(s, p, t_op);
    let exponent = Complex::new(slit_log_envelope(s, p, t_op), gamma.im_gamma0 + gamma.im_gamma1);
    ScaledComplex::from_exp(exponent) * (omega(s, p) * (PI / nu))
}

/// `|f_1slit|^2`.
pub fn husimi_1slit(s: &PhysicalScenario, p: &PhaseSpacePoint, nu: f64, t_op: f64) -> f64 {
    PI / (4.0 * s.sigma * s.sigma * nu * nu) * g1(s, p) * (2.0 * slit_log_envelope(s, p, t_op)).exp()
}

/// `|f_1slit|^2` in the form it takes for `t_op = t_c` and `t = 2 t_c`; the
/// time stored in `s` is ignored.
pub fn husimi_1slit_symmetric(s: &PhysicalScenario, p: &PhaseSpacePoint, nu: f64) -> f64 {
    let tc = s.t_c();
    let width = s.sigma_at(tc);
    let shift = p.x - p.v * tc;
    PI / (4.0 * s.sigma * s.sigma * nu * nu) * g1(s, p) * (-shift * shift / (width * width)).exp()
}

/// Equal-weight sum of narrow slits at `opening_times`. Repeated times are
/// allowed.
pub fn f_slits(s: &PhysicalScenario, p: &PhaseSpacePoint, nu: f64, opening_times: &[f64]) -> Result<ScaledComplex> {
    if opening_times.is_empty() {
        return Err(Error::invalid("t_ops", "must list at least one opening time"));
    }
    let weight = 1.0 / opening_times.len() as f64;
    let sum: ScaledComplex = opening_times.iter().map(|&t_op| f_1slit(s, p, nu, t_op)).sum();
    Ok(sum.scale(weight))
}

/// Slit-regime amplitude of a Lorentzian grating.
pub fn f_multislit(s: &PhysicalScenario, p: &PhaseSpacePoint, g: &TimeGrating) -> Result<ScaledComplex> {
    if g.order() != 2 {
        return Err(Error::Precondition(format!(
            "slit closed forms need Lorentzian slits (n = 2), got n = {}",
            g.order()
        )));
    }
    f_slits(s, p, g.sharpness(), &g.opening_times())
}

/// The factors of `F_2slit = pi / (8 sigma^2 nu^2) g1 e^{g2} (cosh f1 + cos f2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSlitParts {
    pub g1: f64,
    pub g2: f64,
    pub f1: f64,
    pub f2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSlitValue {
    pub value: f64,
    pub parts: TwoSlitParts,
}

/// `g1, g2, f1, f2` composed from the slit exponents; valid for any `t`.
pub fn two_slit_parts(s: &PhysicalScenario, p: &PhaseSpacePoint, t_op0: f64, t_op1: f64) -> TwoSlitParts {
    let e0 = slit_log_envelope(s, p, t_op0);
    let e1 = slit_log_envelope(s, p, t_op1);
    let a = gamma_components(s, p, t_op0);
    let b = gamma_components(s, p, t_op1);
    TwoSlitParts {
        g1: g1(s, p),
        g2: e0 + e1,
        f1: e0 - e1,
        f2: a.im_gamma0 + a.im_gamma1 - b.im_gamma0 - b.im_gamma1,
    }
}

/// Expanded polynomial forms of `g2, f1, f2`, valid when `t = t_op0 + t_op1`.
pub fn two_slit_parts_expanded(
    s: &PhysicalScenario,
    p: &PhaseSpacePoint,
    t_op0: f64,
    t_op1: f64,
) -> Result<TwoSlitParts> {
    let sum = t_op0 + t_op1;
    if (s.t - sum).abs() > 1e-9 * s.t {
        return Err(Error::Precondition(format!(
            "expanded two-slit forms need t = t_op0 + t_op1 (t = {}, sum = {sum})",
            s.t
        )));
    }
    let ts = s.spreading_time();
    let kappa = 1.0 / (ts * ts);
    let sig2 = s.sigma * s.sigma;
    let (x0, v0, x, v) = (s.x0.abs(), s.v0, p.x, p.v);
    let prod = t_op0 * t_op1;
    let diff = t_op1 - t_op0;
    let denom = (1.0 + kappa * t_op0 * t_op0) * (1.0 + kappa * t_op1 * t_op1);
    let cross = x0 * v0 + x * v;
    let cross_diff = x0 * v0 - x * v;
    let g2 = (2.0 * sum * (1.0 + kappa * prod) * cross
        + (2.0 + kappa * (t_op0 * t_op0 + t_op1 * t_op1)) * (ts * ts * (v * v + v0 * v0) - (x * x + x0 * x0)))
        / (2.0 * sig2 * denom)
        - ts * ts * (v * v + v0 * v0) / sig2;
    let f1 = diff
        * (2.0 * (-1.0 + kappa * prod) * cross_diff + sum * (v0 * v0 - v * v + kappa * (x * x - x0 * x0)))
        / (2.0 * sig2 * denom);
    let f2 = s.mass / (2.0 * s.hbar) * diff
        * (2.0 * kappa * sum * cross_diff + (-1.0 + kappa * prod) * (v * v - v0 * v0 + kappa * (x0 * x0 - x * x)))
        / denom;
    Ok(TwoSlitParts { g1: g1(s, p), g2, f1, f2 })
}

/// Double-slit distribution and its factors.
pub fn husimi_2slit_structured(
    s: &PhysicalScenario,
    p: &PhaseSpacePoint,
    nu: f64,
    t_op0: f64,
    t_op1: f64,
) -> TwoSlitValue {
    let parts = two_slit_parts(s, p, t_op0, t_op1);
    // e^{g2} cosh f1 split so that neither factor overflows alone
    let e0 = 0.5 * (parts.g2 + parts.f1);
    let e1 = 0.5 * (parts.g2 - parts.f1);
    let bracket = 0.5 * (2.0 * e0).exp() + 0.5 * (2.0 * e1).exp() + parts.g2.exp() * parts.f2.cos();
    let value = PI / (8.0 * s.sigma * s.sigma * nu * nu) * parts.g1 * bracket.max(0.0);
    TwoSlitValue { value, parts }
}

/// The line `v = alpha x + beta` carrying the fringes of a symmetric double
/// slit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeLine {
    /// Leading-order slope `1 / t_c`.
    pub alpha: f64,
    /// Leading-order intercept, zero.
    pub beta: f64,
    /// Positive root of the slope condition.
    pub alpha_exact: f64,
    /// Negative root, discarded.
    pub alpha_minus: f64,
    /// Half the slit separation in units of `t_c`.
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

/// Slits farther apart than this fraction of `t_c` get a warning.
pub const EPSILON_WARN: f64 = 0.3;
/// Allowed relative offset of `(t_op0 + t_op1) / 2` from `t_c`.
pub const SYMMETRY_TOL: f64 = 1e-9;

pub fn fringe_line(s: &PhysicalScenario, t_op0: f64, t_op1: f64) -> Result<FringeLine> {
    if !(t_op1 > t_op0) {
        return Err(Error::invalid("t_ops", "must satisfy t_op0 < t_op1"));
    }
    let tc = s.t_c();
    let sum = t_op0 + t_op1;
    let offset = (sum - 2.0 * tc).abs() / tc;
    if offset >= SYMMETRY_TOL {
        return Err(Error::Precondition(format!(
            "slits are not symmetric about t_c (|t_op0 + t_op1 - 2 t_c| / t_c = {offset:.3e}); \
             locate fringes numerically with find_peaks_on_line"
        )));
    }
    let epsilon = (t_op1 - t_op0) / (2.0 * tc);
    let mut warnings = Vec::new();
    if epsilon > EPSILON_WARN {
        warnings.push(format!(
            "epsilon = {epsilon:.3} is not small; the fringe line is only approximate"
        ));
    }
    let ts = s.spreading_time();
    let kappa = 1.0 / (ts * ts);
    let prod = t_op0 * t_op1;
    let linear = 2.0 * (1.0 - kappa * prod) / sum;
    let discriminant =
        4.0 / (sum * sum) * (1.0 + kappa * (t_op0 * t_op0 + t_op1 * t_op1) + (kappa * prod).powi(2));
    let alpha_exact = 0.5 * (linear + discriminant.sqrt());
    // the roots multiply to -kappa
    let alpha_minus = -kappa / alpha_exact;
    Ok(FringeLine {
        alpha: 1.0 / tc,
        beta: 0.0,
        alpha_exact,
        alpha_minus,
        epsilon,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringePoint {
    pub k: i64,
    pub x: f64,
    pub v: f64,
    pub parity: Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FringeSet {
    pub k_range: (i64, i64),
    pub points: Vec<FringePoint>,
    pub notes: Vec<String>,
}

/// Predicted fringe positions for `k_min <= k <= k_max`, on the line
/// `v = v0 x / |x0|`.
pub fn fringe_positions(s: &PhysicalScenario, t_op0: f64, t_op1: f64, k_min: i64, k_max: i64) -> Result<FringeSet> {
    if k_min > k_max {
        return Err(Error::invalid("k_range", format!("is empty ({k_min} > {k_max})")));
    }
    if !(t_op1 > t_op0) {
        return Err(Error::invalid("t_ops", "must satisfy t_op0 < t_op1"));
    }
    let step = 2.0 * s.hbar * PI / (s.mass * s.v0 * s.v0 * (t_op1 - t_op0));
    let mut points = Vec::new();
    let mut notes = Vec::new();
    for k in k_min..=k_max {
        let radicand = 1.0 + step * k as f64;
        if radicand <= 0.0 {
            notes.push(format!("k = {k} omitted: radicand {radicand:.3e} is not positive"));
            continue;
        }
        let root = radicand.sqrt();
        points.push(FringePoint {
            k,
            x: s.x0.abs() * root,
            v: s.v0 * root,
            parity: if k % 2 == 0 { Parity::Bright } else { Parity::Dark },
        });
    }
    Ok(FringeSet {
        k_range: (k_min, k_max),
        points,
        notes,
    })
}

/// Point at position `x` on the line `v = v0 x / |x0|`.
pub fn line_point(s: &PhysicalScenario, x: f64) -> PhaseSpacePoint {
    PhaseSpacePoint::new(x, s.v0 * x / s.x0.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineExtremum {
    pub x: f64,
    pub v: f64,
    pub value: f64,
    pub kind: ExtremumKind,
}

/// Relative width in `x` at which extrema are considered located.
pub const PEAK_X_TOL: f64 = 1e-6;

/// Local extrema of `profile` along `v = v0 x / |x0|` for `x` in `x_range`.
///
/// `profile` is sampled at `samples` evenly spaced points; each strict
/// interior extremum is refined by golden-section search.
pub fn find_peaks_on_line<F>(
    s: &PhysicalScenario,
    profile: F,
    x_range: (f64, f64),
    samples: usize,
) -> Result<Vec<LineExtremum>>
where
    F: Fn(&PhaseSpacePoint) -> Result<f64> + Sync + Send,
{
    if samples < 100 {
        return Err(Error::invalid("samples", "must be at least 100"));
    }
    let (lo, hi) = x_range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid("x_range", "must be finite and increasing"));
    }
    let h = (hi - lo) / (samples - 1) as f64;
    let xs: Vec<f64> = (0..samples).map(|i| lo + h * i as f64).collect();
    let ys = try_map_indexed(samples, |i| profile(&line_point(s, xs[i])))?;
    let mut found = Vec::new();
    for i in 1..samples - 1 {
        let kind = if ys[i] > ys[i - 1] && ys[i] > ys[i + 1] {
            ExtremumKind::Max
        } else if ys[i] < ys[i - 1] && ys[i] < ys[i + 1] {
            ExtremumKind::Min
        } else {
            continue;
        };
        let sign = if kind == ExtremumKind::Max { -1.0 } else { 1.0 };
        let objective = |x: f64| profile(&line_point(s, x)).map(|y| sign * y);
        let (x, y) = golden_section(objective, xs[i - 1], xs[i + 1], (ys[i], xs[i]))?;
        let p = line_point(s, x);
        found.push(LineExtremum {
            x,
            v: p.v,
            value: sign * y,
            kind,
        });
    }
    Ok(found)
}

/// Minimiser of a unimodal `f` on `[a, b]`; `best` is a known sample
/// `(value, x)` that the result never does worse than.
fn golden_section<F>(f: F, mut a: f64, mut b: f64, best: (f64, f64)) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let target = PEAK_X_TOL * 0.5 * (a.abs() + b.abs()).max(f64::MIN_POSITIVE);
    while b - a > target {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (x, y) = if fc < fd { (c, fc) } else { (d, fd) };
    Ok(if y <= best.0 { (x, y) } else { (best.1, best.0) })
}
