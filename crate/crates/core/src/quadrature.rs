//! Adaptive Gauss-Kronrod (7/15) quadrature for complex integrands, and the
//! integrals built on it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::aperture::{ApodizationBarrier, Window};
use crate::gaussian::{alpha_real, frozen_constants, phi, psi_free_ln, FrozenConstants};
use crate::{Complex, Error, PhaseSpacePoint, PhysicalScenario, Result};

// QUADPACK digits, kept verbatim
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    /// Absolute tolerance. `None` means `1e-13` times the integral of `|f|`,
    /// a little above the rounding floor of the error estimate.
    pub abs_tol: Option<f64>,
    /// Upper limit on the number of subintervals.
    pub max_subdivisions: usize,
    /// Extra split points on top of those the integrand supplies.
    pub forced_breakpoints: Vec<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: None,
            max_subdivisions: 2000,
            forced_breakpoints: Vec::new(),
        }
    }
}

impl QuadratureConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: Complex,
    pub error_estimate: f64,
    pub subdivisions_used: usize,
    pub converged: bool,
}

impl QuadratureResult {
    /// Error unless the tolerance was met.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence(format!(
                "quadrature stopped after {} subdivisions with error estimate {:e}",
                self.subdivisions_used, self.error_estimate
            )))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: Complex,
    error: f64,
    abs_integral: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err;
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn kronrod15<F: Fn(f64) -> Complex>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut gauss = f_center * WG[3];
    let mut kronrod = f_center * WGK[7];
    let mut res_abs = WGK[7] * f_center.norm();
    let mut pairs = [(Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)); 7];
    for (j, pair) in pairs.iter_mut().enumerate() {
        let dx = half * XGK[j];
        let lo = f(center - dx);
        let hi = f(center + dx);
        *pair = (lo, hi);
        kronrod += WGK[j] * (lo + hi);
        res_abs += WGK[j] * (lo.norm() + hi.norm());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (lo + hi);
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[7] * (f_center - mean).norm();
    for (j, (lo, hi)) in pairs.iter().enumerate() {
        res_asc += WGK[j] * ((lo - mean).norm() + (hi - mean).norm());
    }
    let h = half.abs();
    let error = rescale_error(((kronrod - gauss) * half).norm(), res_abs * h, res_asc * h);
    Segment {
        a,
        b,
        value: kronrod * half,
        error,
        abs_integral: res_abs * h,
    }
}

/// Integrate `f` over `[a, b]`, splitting first at `breakpoints` inside the interval.
pub fn integrate<F: Fn(f64) -> Complex>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .chain(cfg.forced_breakpoints.iter())
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap: BinaryHeap<Segment> = cuts.windows(2).map(|w| kronrod15(&f, w[0], w[1])).collect();
    let initial = heap.len();
    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter().fold((Complex::new(0.0, 0.0), 0.0, 0.0), |(v, e, m), s| {
            (v + s.value, e + s.error, m + s.abs_integral)
        })
    };
    let (mut value, mut error, mut abs_integral) = totals(&heap);
    let tolerance = |value: Complex, abs_integral: f64| {
        let abs_tol = cfg.abs_tol.unwrap_or(1e-13 * abs_integral);
        abs_tol.max(cfg.rel_tol * value.norm())
    };
    let mut converged = false;
    loop {
        if error <= tolerance(value, abs_integral) {
            // re-sum to drop drift from the running updates before accepting
            (value, error, abs_integral) = totals(&heap);
            if error <= tolerance(value, abs_integral) {
                converged = true;
                break;
            }
        }
        if heap.len() >= cfg.max_subdivisions.max(initial) {
            break;
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            heap.push(worst);
            break;
        }
        let left = kronrod15(&f, worst.a, mid);
        let right = kronrod15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        abs_integral += left.abs_integral + right.abs_integral - worst.abs_integral;
        heap.push(left);
        heap.push(right);
    }
    if !converged {
        (value, error, _) = totals(&heap);
    }
    QuadratureResult {
        value,
        error_estimate: error,
        subdivisions_used: heap.len(),
        converged,
    }
}

/// Integrate over `[a, inf)` after mapping `tau = a + u / (1 - u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> Complex>(f: F, a: f64, cfg: &QuadratureConfig) -> QuadratureResult {
    let g = |u: f64| {
        let w = 1.0 - u;
        f(a + u / w) / (w * w)
    };
    integrate(g, 0.0, 1.0, &[], cfg)
}

/// Integrate over `(-inf, b]` after mapping `tau = b - u / (1 - u)`.
pub fn integrate_from_minus_infinity<F: Fn(f64) -> Complex>(f: F, b: f64, cfg: &QuadratureConfig) -> QuadratureResult {
    integrate_to_infinity(|s| f(2.0 * b - s), b, cfg)
}

fn window_breakpoints<W: Window + ?Sized>(w: &W, t: f64) -> Vec<f64> {
    w.breakpoints().into_iter().filter(|&x| x > 0.0 && x < t).collect()
}

/// Integrand of the Husimi amplitude without the frozen-Gaussian approximation.
pub fn exact_integrand<'a, W: Window + ?Sized>(
    s: &'a PhysicalScenario,
    p: &'a PhaseSpacePoint,
    w: &'a W,
) -> impl Fn(f64) -> Complex + 'a {
    let alpha_out = alpha_real(s, p.arrival_time());
    let alpha_in = alpha_real(s, s.t_c());
    move |tau: f64| {
        let chi = w.value(tau);
        if chi == 0.0 {
            return Complex::new(0.0, 0.0);
        }
        let weight = p.v * alpha_real(s, s.t - tau) / alpha_out + s.v0 * alpha_real(s, tau) / alpha_in;
        let ln_packets = psi_free_ln(s, 0.0, p.x, -p.v, s.t - tau) + psi_free_ln(s, 0.0, s.x0, s.v0, tau);
        0.5 * chi * weight * ln_packets.exp()
    }
}

/// Husimi amplitude at `p`, integrated over `[0, t]`.
pub fn husimi_amplitude_exact<W: Window + ?Sized>(
    s: &PhysicalScenario,
    p: &PhaseSpacePoint,
    w: &W,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    integrate(exact_integrand(s, p, w), 0.0, s.t, &window_breakpoints(w, s.t), cfg)
}

/// Frozen-Gaussian integrand `omega_prefactor chi(tau) exp(phi(tau))` on the real axis.
pub fn frozen_integrand<'a, W: Window + ?Sized>(fc: &'a FrozenConstants, w: &'a W) -> impl Fn(f64) -> Complex + 'a {
    move |tau: f64| {
        let chi = w.value(tau);
        if chi == 0.0 {
            return Complex::new(0.0, 0.0);
        }
        let tau = Complex::new(tau, 0.0);
        fc.omega_prefactor * chi * (fc.pole_terms(tau) + fc.omega_log).exp()
    }
}

/// Frozen-Gaussian integrand for one barrier at a complex time `z`.
pub fn frozen_integrand_complex(fc: &FrozenConstants, b: &ApodizationBarrier, z: Complex) -> Result<Complex> {
    Ok(fc.omega_prefactor * b.chi_complex(z)? * (phi(fc, z)?).exp())
}

/// Frozen-Gaussian amplitude at `p`, integrated over `[0, t]`.
pub fn f_froz_quadrature<W: Window + ?Sized>(
    s: &PhysicalScenario,
    p: &PhaseSpacePoint,
    w: &W,
    cfg: &QuadratureConfig,
) -> QuadratureResult {
    let fc = frozen_constants(s, p);
    integrate(frozen_integrand(&fc, w), 0.0, s.t, &window_breakpoints(w, s.t), cfg)
}

/// `(1 / 2 pi i)` times the counter-clockwise integral over the circle, by the
/// trapezoidal rule with `samples` nodes.
pub fn contour_circle_integral<F: Fn(Complex) -> Complex>(
    f: F,
    center: Complex,
    radius: f64,
    samples: usize,
) -> Result<Complex> {
    if samples < 16 {
        return Err(Error::invalid("samples", "must be at least 16"));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let mut acc = Complex::new(0.0, 0.0);
    for k in 0..samples {
        let e = Complex::from_polar(1.0, 2.0 * PI * k as f64 / samples as f64);
        acc += f(center + radius * e) * e;
    }
    Ok(acc * radius / samples as f64)
}

/// Distance from `tau_in` to the nearest other singularity of the frozen integrand.
pub fn isolation_radius(fc: &FrozenConstants, b: &ApodizationBarrier) -> f64 {
    b.poles()
        .iter()
        .map(|z| (fc.tau_in - z).norm())
        .fold((fc.tau_in - fc.tau_out).norm(), f64::min)
}

/// Default circle radius for the residue oracle around `tau_in`.
pub fn residue_oracle_radius(fc: &FrozenConstants, b: &ApodizationBarrier) -> f64 {
    0.5 * isolation_radius(fc, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aperture::TimeGrating;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x| c(x.powi(5) - 3.0 * x * x), -1.0, 2.0, &[], &QuadratureConfig::default());
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value.re - exact).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn oscillatory_complex_integrand() {
        // int_0^10 exp(i 7 x) dx
        let r = integrate(|x| Complex::new(0.0, 7.0 * x).exp(), 0.0, 10.0, &[], &QuadratureConfig::default());
        let exact = (Complex::new(0.0, 70.0).exp() - 1.0) / Complex::new(0.0, 7.0);
        assert!((r.value - exact).norm() < 1e-11);
    }

    #[test]
    fn semi_infinite_lorentzian() {
        let cfg = QuadratureConfig::default();
        let r = integrate_to_infinity(|x| c(1.0 / (1.0 + x * x)), 0.0, &cfg);
        assert!((r.value.re - PI / 2.0).abs() < 1e-10);
        let l = integrate_from_minus_infinity(|x| c(1.0 / (1.0 + (x - 1.0).powi(2))), 0.0, &cfg);
        assert!((l.value.re - PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn narrow_peak_needs_breakpoints() {
        let nu = 1e5;
        let f = |x: f64| c(1.0 / (1.0 + (nu * (x - 0.3)).powi(2)));
        let cfg = QuadratureConfig::default();
        let r = integrate(f, 0.0, 1.0, &[0.3 - 1.0 / nu, 0.3, 0.3 + 1.0 / nu], &cfg);
        let exact = ((nu * 0.7).atan() + (nu * 0.3).atan()) / nu;
        assert!((r.value.re - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn circle_integral_picks_residue() {
        let r = contour_circle_integral(|z| 3.0 / (z - 0.2) + z * z, c(0.0), 1.0, 64).unwrap();
        assert!((r - 3.0).norm() < 1e-13);
        assert!(contour_circle_integral(|z| z, c(0.0), 1.0, 8).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = QuadratureConfig {
            max_subdivisions: 3,
            ..QuadratureConfig::default()
        };
        let r = integrate(|x| c((1.0 / x).sin()), 1e-6, 1.0, &[], &cfg);
        assert!(!r.converged);
        assert!(r.require_converged().is_err());
    }

    fn dimless() -> PhysicalScenario {
        PhysicalScenario::new(1.0, 1.0, 1.0, -10.0, 1.0, 20.0).unwrap()
    }

    #[test]
    fn zero_window_gives_zero() {
        let s = dimless();
        let p = PhaseSpacePoint::new(10.0, 1.0);
        let zero = |_: f64| 0.0;
        let cfg = QuadratureConfig::default();
        assert_eq!(husimi_amplitude_exact(&s, &p, &zero, &cfg).value, c(0.0));
        assert_eq!(f_froz_quadrature(&s, &p, &zero, &cfg).value, c(0.0));
    }

    #[test]
    fn linear_in_the_window() {
        let s = dimless();
        let p = PhaseSpacePoint::new(9.5, 1.05);
        let b = ApodizationBarrier::new(4, 5.0, 10.0).unwrap();
        let twice = |tau: f64| 2.0 * b.chi(tau);
        let cfg = QuadratureConfig::default();
        let one = f_froz_quadrature(&s, &p, &b, &cfg).value;
        let two = f_froz_quadrature(&s, &p, &twice, &cfg).value;
        assert!((two - 2.0 * one).norm() < 1e-9 * one.norm());
        let g = TimeGrating::single(b);
        let via_grating = husimi_amplitude_exact(&s, &p, &g, &cfg).value;
        let via_barrier = husimi_amplitude_exact(&s, &p, &b, &cfg).value;
        assert_eq!(via_grating, via_barrier);
    }

    proptest! {
        #[test]
        fn tighter_tolerance_stays_within_estimate(
            n in prop::sample::select(vec![2u32, 4, 6]),
            nu in 2.0f64..20.0, t_op in 6.0f64..14.0,
            x in 9.0f64..11.0, v in 0.9f64..1.1,
        ) {
            let s = dimless();
            let p = PhaseSpacePoint::new(x, v);
            let b = ApodizationBarrier::new(n, nu, t_op).unwrap();
            let loose = f_froz_quadrature(&s, &p, &b, &QuadratureConfig::default().with_rel_tol(1e-8));
            let tight = f_froz_quadrature(&s, &p, &b, &QuadratureConfig::default().with_rel_tol(5e-9));
            prop_assert!(loose.converged && tight.converged);
            prop_assert!((loose.value - tight.value).norm() <= loose.error_estimate + 1e-15);
        }
    }
}
