//! Closed-contour evaluation of the frozen-Gaussian amplitude.
//!
//! The real-axis integral is closed in the upper half plane. It picks up the
//! window poles and the essential singularity at `tau_in`. A Mobius map sends
//! `tau_in` to infinity and `tau_out` to the origin, which turns the
//! exponential into a Bessel generating function. The window becomes a
//! rational function whose poles are the images of the window poles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::aperture::{tail_integrals, ApodizationBarrier, TimeGrating};
use crate::cbessel::{bessel_j_sequence_scaled, DEFAULT_Z_CAP};
use crate::gaussian::{frozen_constants, FrozenConstants};
use crate::scaled::ScaledComplex;
use crate::{Complex, Error, PhaseSpacePoint, PhysicalScenario, Result};

const I: Complex = Complex::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidueOptions {
    /// Stop the Bessel series after three consecutive terms below `tol * |sum|`.
    pub tol: f64,
    pub k_max: usize,
    pub z_cap: f64,
    /// Relative perturbation applied to the first partial-fraction coefficient
    /// before it is cross-checked. Only for exercising the validation path.
    #[doc(hidden)]
    pub coefficient_fault: f64,
}

impl Default for ResidueOptions {
    fn default() -> Self {
        ResidueOptions {
            tol: 1e-16,
            k_max: 500,
            z_cap: DEFAULT_Z_CAP,
            coefficient_fault: 0.0,
        }
    }
}

/// Window poles and their images under the Mobius map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleData {
    /// All window poles, upper half plane first.
    pub window_poles: Vec<Complex>,
    /// Images `-Z (tau_out - p) / (tau_in - p)` of the window poles.
    pub mapped: Vec<Complex>,
    /// Partial-fraction coefficients of `(z + Z)^(n-2) / prod (z - mapped_j)`.
    pub coefficients: Vec<Complex>,
    /// `Z^2 / (1 + nu^n (tau_in - t_op)^n)`.
    pub prefactor: Complex,
}

impl PoleData {
    /// The mapped window, `prefactor * sum_j A_j / (z - z_j)`.
    pub fn mapped_window(&self, z: Complex) -> Complex {
        self.prefactor
            * self
                .mapped
                .iter()
                .zip(&self.coefficients)
                .map(|(zj, a)| a / (z - zj))
                .sum::<Complex>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidueDiagnostics {
    pub bessel_terms_used: usize,
    pub last_term_magnitude: f64,
    /// Bound on the neglected real-axis tails; infinite when its
    /// preconditions do not hold.
    pub i_tail_bound: f64,
    pub bessel_argument: Complex,
}

/// The mapped rational window evaluated directly, for cross-checks.
pub fn mapped_window_direct(fc: &FrozenConstants, b: &ApodizationBarrier, z: Complex) -> Complex {
    let n = b.order() as i32;
    let w = z / fc.ratio_root;
    let shifted = (fc.tau_in - b.opening_time()) * w + fc.tau_out - b.opening_time();
    (w + 1.0).powi(n - 2) / ((w + 1.0).powi(n) + b.scale() * shifted.powi(n))
}

pub fn mapped_poles(fc: &FrozenConstants, b: &ApodizationBarrier, opts: &ResidueOptions) -> Result<PoleData> {
    let n = b.order() as usize;
    let window_poles = b.poles();
    let z = fc.ratio_root;
    let mapped: Vec<Complex> = window_poles
        .iter()
        .map(|p| -z * (fc.tau_out - p) / (fc.tau_in - p))
        .collect();

    let scale = mapped.iter().map(|m| m.norm()).fold(0.0, f64::max);
    for (j, a) in mapped.iter().enumerate() {
        if a.norm() <= 1e-12 * scale {
            return Err(Error::DegeneratePoles(format!("mapped pole {j} sits at the origin")));
        }
        for (k, b) in mapped.iter().enumerate().skip(j + 1) {
            if (a - b).norm() <= 1e-12 * scale {
                return Err(Error::DegeneratePoles(format!("mapped poles {j} and {k} coincide")));
            }
        }
    }

    let mut coefficients: Vec<Complex> = mapped
        .iter()
        .enumerate()
        .map(|(j, zj)| {
            let denom: Complex = mapped
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, zk)| zj - zk)
                .product();
            (zj + z).powi(n as i32 - 2) / denom
        })
        .collect();
    coefficients[0] *= 1.0 + opts.coefficient_fault;

    let solved = solve_coefficients(&mapped, z, n)?;
    let top = coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let gap = coefficients
        .iter()
        .zip(&solved)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if gap > 1e-8 * top {
        return Err(Error::CoefficientMismatch(format!(
            "residue formula and linear solve differ by {:e} relative",
            gap / top
        )));
    }

    let prefactor = z * z / (1.0 + b.scale() * (fc.tau_in - b.opening_time()).powi(n as i32));
    Ok(PoleData {
        window_poles,
        mapped,
        coefficients,
        prefactor,
    })
}

/// Partial-fraction coefficients from a collocation solve.
///
/// Works in `s = (z - c) / rho` with `c` the centroid and `rho` the spread of
/// the poles, so clustered poles do not spoil the conditioning.
fn solve_coefficients(mapped: &[Complex], z: Complex, n: usize) -> Result<Vec<Complex>> {
    let c = mapped.iter().sum::<Complex>() / n as f64;
    let rho = mapped.iter().map(|m| (m - c).norm()).fold(0.0, f64::max);
    if rho == 0.0 {
        return Err(Error::DegeneratePoles("all mapped poles coincide".into()));
    }
    let nodes: Vec<Complex> = mapped.iter().map(|m| (m - c) / rho).collect();
    let samples: Vec<Complex> = (0..n)
        .map(|i| Complex::from_polar(2.0, 2.0 * PI * (i as f64 + 0.5) / n as f64))
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| 1.0 / (samples[i] - nodes[j]));
    let rhs = DVector::from_iterator(
        n,
        samples.iter().map(|s| {
            let prod: Complex = nodes.iter().map(|w| s - w).product();
            (c + rho * s + z).powi(n as i32 - 2) / (rho.powi(n as i32 - 1) * prod)
        }),
    );
    let sol = matrix
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DegeneratePoles("collocation system is singular".into()))?;
    Ok(sol.iter().copied().collect())
}

/// Coefficients, lowest degree first, of `prod (x - root)`.
fn poly_from_roots(roots: &[Complex]) -> Vec<Complex> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

/// Coefficients, lowest degree first, of `(scale * x + shift)^power`.
fn poly_binomial(scale: Complex, shift: Complex, power: usize) -> Vec<Complex> {
    let mut c = vec![Complex::new(1.0, 0.0)];
    for _ in 0..power {
        let mut next = vec![Complex::new(0.0, 0.0); c.len() + 1];
        for (i, a) in c.iter().enumerate() {
            next[i + 1] += a * scale;
            next[i] += a * shift;
        }
        c = next;
    }
    c
}

/// Taylor coefficients of `num / den` by long division, `den[0] != 0`.
struct SeriesQuotient {
    num: Vec<Complex>,
    den: Vec<Complex>,
    out: Vec<Complex>,
}

impl SeriesQuotient {
    fn new(num: Vec<Complex>, den: Vec<Complex>) -> Self {
        SeriesQuotient { num, den, out: Vec::new() }
    }

    fn next(&mut self) -> Complex {
        let m = self.out.len();
        let mut acc = self.num.get(m).copied().unwrap_or_default();
        for i in 1..self.den.len().min(m + 1) {
            acc -= self.den[i] * self.out[m - i];
        }
        let v = acc / self.den[0];
        self.out.push(v);
        v
    }
}

/// Residue at the origin of the mapped window times the Bessel generating function.
///
/// Equal to `-prefactor * sum_j A_j sum_k (-1)^k z_j^{-k} J_k`. The inner sums
/// over `j` are Taylor coefficients of the mapped window at the origin; they
/// are generated by long division because summing the partial fractions
/// cancels badly when the mapped poles cluster.
pub fn essential_residue(
    fc: &FrozenConstants,
    pd: &PoleData,
    opts: &ResidueOptions,
) -> Result<(ScaledComplex, ResidueDiagnostics)> {
    let arg = fc.bessel_argument();
    let seq = bessel_j_sequence_scaled(opts.k_max, arg, opts.z_cap)?;
    let n = pd.mapped.len();
    // work in zeta = z / radius so the poles sit at |zeta| >= 1
    let radius = pd.mapped.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let roots: Vec<Complex> = pd.mapped.iter().map(|z| z / radius).collect();
    let mut den = poly_from_roots(&roots);
    let num = poly_binomial(Complex::new(radius, 0.0), fc.ratio_root, n - 2);
    let lead = radius.powi(n as i32);
    for d in den.iter_mut() {
        *d *= lead;
    }
    let mut taylor = SeriesQuotient::new(num, den);
    let ln_radius = radius.ln();

    let mut sum = ScaledComplex::ZERO;
    let mut quiet = 0;
    let mut last = f64::INFINITY;
    let mut used = 0;
    for k in 1..=opts.k_max {
        let coeff = taylor.next();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = ScaledComplex::from_parts(
            sign * seq.values[k] * coeff,
            seq.log_scale - (k - 1) as f64 * ln_radius,
        );
        sum = sum + term;
        used = k;
        last = term.abs();
        let rel = (term.ln_abs() - sum.ln_abs()).exp();
        if term.is_zero() || rel < opts.tol {
            quiet += 1;
            if quiet >= 3 {
                return Ok((
                    sum * pd.prefactor,
                    ResidueDiagnostics {
                        bessel_terms_used: used,
                        last_term_magnitude: last,
                        i_tail_bound: f64::NAN,
                        bessel_argument: arg,
                    },
                ));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence(format!(
        "Bessel series not converged after {used} terms (last term {last:e}, argument {arg})"
    )))
}

/// Sum of [`pole_residues_mapped`].
///
/// When the mapped poles form a tight cluster the individual residues are
/// large and cancel. There the sum is taken from the Laurent coefficients at
/// infinity of the mapped window about the cluster centre, paired with the
/// Taylor coefficients of the exponential.
pub fn mapped_residue_sum(fc: &FrozenConstants, pd: &PoleData) -> ScaledComplex {
    let n = pd.mapped.len();
    let center = pd.mapped.iter().sum::<Complex>() / n as f64;
    let spread = pd.mapped.iter().map(|z| (z - center).norm()).fold(0.0, f64::max);
    if spread > 0.25 * center.norm() {
        return pole_residues_mapped(fc, pd).into_iter().sum();
    }
    let c = fc.coupling() / (fc.tau_out - fc.tau_in);

    // H(eta) = P(spread eta) / prod (eta - eta_j) = sum_l h_l eta^{-l}
    let etas: Vec<Complex> = pd.mapped.iter().map(|z| (z - center) / spread).collect();
    let q = poly_from_roots(&etas);
    let p = poly_binomial(Complex::new(spread, 0.0), center + fc.ratio_root, n - 2);
    let num: Vec<Complex> = (0..=n - 2).map(|i| p[n - 2 - i]).collect();
    let den: Vec<Complex> = (0..=n).map(|i| q[n - i]).collect();
    let mut laurent = SeriesQuotient::new(num, den);

    // exp(c (z - 1/z)) about the centre, in powers of (z - center) / spread
    let h0 = c * (center - 1.0 / center);
    let mut h = vec![Complex::new(0.0, 0.0)];
    let ratio = -spread / center;
    let mut pw = Complex::new(1.0, 0.0) / center;
    for k in 1..400 {
        pw *= ratio;
        // coefficient of u^k in -c/z, scaled by spread^k
        let mut v = -c * pw;
        if k == 1 {
            v += c * spread;
        }
        h.push(v);
    }
    let mut e = vec![Complex::new(1.0, 0.0)];
    let mut sum = Complex::new(0.0, 0.0);
    let mut quiet = 0;
    for m in 1..400 {
        let em = (1..=m).map(|k| k as f64 * h[k] * e[m - k]).sum::<Complex>() / m as f64;
        e.push(em);
        let term = em * laurent.next();
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    ScaledComplex::from_exp(h0) * (pd.prefactor * sum / spread.powi(n as i32 - 1))
}

/// Residues of the mapped integrand at each mapped pole.
pub fn pole_residues_mapped(fc: &FrozenConstants, pd: &PoleData) -> Vec<ScaledComplex> {
    let c = fc.coupling() / (fc.tau_out - fc.tau_in);
    pd.mapped
        .iter()
        .zip(&pd.coefficients)
        .map(|(z, a)| ScaledComplex::from_exp(c * (z - 1.0 / z)) * (pd.prefactor * a))
        .collect()
}

/// Residues of the frozen integrand at every window pole, upper half plane first.
pub fn pole_residues_chi(fc: &FrozenConstants, b: &ApodizationBarrier) -> Vec<ScaledComplex> {
    let poles = b.poles();
    poles
        .iter()
        .enumerate()
        .map(|(j, zj)| {
            let denom: Complex = poles
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, zk)| zj - zk)
                .product();
            let exponent = fc.pole_terms(*zj) + fc.omega_log;
            ScaledComplex::from_exp(exponent) * (fc.omega_prefactor / (b.scale() * denom))
        })
        .collect()
}

/// Residue of the frozen integrand at its essential singularity `tau_in`.
pub fn residue_at_tau0(
    fc: &FrozenConstants,
    b: &ApodizationBarrier,
    opts: &ResidueOptions,
) -> Result<(ScaledComplex, ResidueDiagnostics)> {
    let pd = mapped_poles(fc, b, opts)?;
    let (essential, diag) = essential_residue(fc, &pd, opts)?;
    let mapped = mapped_residue_sum(fc, &pd);
    let span = fc.tau_out - fc.tau_in;
    let outer = ScaledComplex::from_exp((fc.strength_in - fc.strength_out) / span + fc.omega_log)
        * (fc.omega_prefactor * span / fc.ratio_root);
    Ok((outer * (essential + mapped), diag))
}

/// Contour value of the frozen amplitude for one barrier:
/// `2 pi i` times the residues enclosed by the upper half plane.
pub fn contour_value(
    fc: &FrozenConstants,
    b: &ApodizationBarrier,
    opts: &ResidueOptions,
) -> Result<(ScaledComplex, ResidueDiagnostics)> {
    let (at_tau0, diag) = residue_at_tau0(fc, b, opts)?;
    let upper = b.order() as usize / 2;
    let poles: ScaledComplex = pole_residues_chi(fc, b).into_iter().take(upper).sum();
    Ok(((at_tau0 + poles) * (2.0 * PI * I), diag))
}

/// Frozen amplitude from residues, up to the real-axis tails outside `[0, t]`.
pub fn f_froz_analytic(
    s: &PhysicalScenario,
    p: &PhaseSpacePoint,
    g: &TimeGrating,
    opts: &ResidueOptions,
) -> Result<(ScaledComplex, ResidueDiagnostics)> {
    let fc = frozen_constants(s, p);
    let mut total = ScaledComplex::ZERO;
    let mut diag = ResidueDiagnostics {
        bessel_terms_used: 0,
        last_term_magnitude: 0.0,
        i_tail_bound: f64::INFINITY,
        bessel_argument: fc.bessel_argument(),
    };
    for b in g.slits() {
        let (v, d) = contour_value(&fc, b, opts)?;
        total = total + v;
        diag.bessel_terms_used = diag.bessel_terms_used.max(d.bessel_terms_used);
        diag.last_term_magnitude = diag.last_term_magnitude.max(d.last_term_magnitude);
    }
    if let Ok(bound) = error_bound_tails(s, p, g) {
        diag.i_tail_bound = bound;
    }
    Ok((total.scale(g.weight()), diag))
}

/// Pieces of the tail bound, each a plain factor (not a logarithm).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBoundParts {
    pub gamma_up: f64,
    pub envelope_left: f64,
    pub envelope_right: f64,
    pub gauss_left: f64,
    pub gauss_right: f64,
    pub chi_left: f64,
    pub chi_right: f64,
    pub chi_exact: bool,
    pub bound: f64,
}

/// Factors of the bound on `|int_{-inf}^0 f| + |int_t^inf f|` for the frozen integrand.
pub fn tail_bound_parts(s: &PhysicalScenario, p: &PhaseSpacePoint, g: &TimeGrating) -> Result<TailBoundParts> {
    let tails = tail_integrals(g, s.t)?;
    let lam = s.reduced_wavelength();
    let lam_p = p.reduced_wavelength(s);
    let sig2 = s.sigma * s.sigma;
    let gamma_up = (p.v * (1.0 + (lam_p * p.x / sig2).powi(2)).sqrt()
        + s.v0 * (1.0 + (lam * s.x0.abs() / sig2).powi(2)).sqrt())
        / (2.0 * PI.sqrt() * s.sigma);
    let ln_envelope = |start: f64, velocity: f64, tau: f64| {
        let w = s.sigma_at(tau);
        -(start + velocity * tau).powi(2) / (2.0 * w * w)
    };
    let ln_env_left = ln_envelope(p.x, -p.v, s.t.max(p.arrival_time()));
    let ln_env_right = ln_envelope(s.x0, s.v0, s.t);
    let ln_gauss_left = (-0.5 * (s.sigma / lam).powi(2)).max(-0.5 * (s.x0 / s.sigma).powi(2));
    let ln_gauss_right = (-0.5 * (p.x / s.sigma).powi(2)).max(-0.5 * (s.sigma / lam_p).powi(2));
    let ln_left = gamma_up.ln() + ln_env_left + ln_gauss_left + tails.left.ln();
    let ln_right = gamma_up.ln() + ln_env_right + ln_gauss_right + tails.right.ln();
    Ok(TailBoundParts {
        gamma_up,
        envelope_left: ln_env_left.exp(),
        envelope_right: ln_env_right.exp(),
        gauss_left: ln_gauss_left.exp(),
        gauss_right: ln_gauss_right.exp(),
        chi_left: tails.left,
        chi_right: tails.right,
        chi_exact: tails.exact,
        // each exponential underflows to 0 rather than failing
        bound: ln_left.exp() + ln_right.exp(),
    })
}

pub fn error_bound_tails(s: &PhysicalScenario, p: &PhaseSpacePoint, g: &TimeGrating) -> Result<f64> {
    Ok(tail_bound_parts(s, p, g)?.bound)
}
