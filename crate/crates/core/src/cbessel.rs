//! Bessel functions of the first kind, integer order, complex argument.
//!
//! Small arguments use the ascending series. Otherwise Miller's backward
//! recurrence is normalized with `exp(-+ i z) = J_0 + 2 sum (-+i)^k J_k`,
//! picking the sign whose left side is large so the sum does not cancel.

use crate::{Complex, Error, Result};

/// Largest `|z|` accepted by default.
pub const DEFAULT_Z_CAP: f64 = 1e3;

/// Below this modulus the ascending series is used.
const SERIES_LIMIT: f64 = 2.0;

/// `J_k(z) = values[k] * exp(log_scale)` for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledBesselSequence {
    pub values: Vec<Complex>,
    pub log_scale: f64,
}

/// `J_0(z) ..= J_k_max(z)`. Fails when `|z|` exceeds [`DEFAULT_Z_CAP`] or the
/// values would overflow `f64`.
pub fn bessel_j_sequence(k_max: usize, z: Complex) -> Result<Vec<Complex>> {
    let seq = bessel_j_sequence_scaled(k_max, z, DEFAULT_Z_CAP)?;
    if seq.log_scale > 700.0 {
        return Err(Error::ArgumentTooLarge {
            modulus: z.norm(),
            cap: 700.0,
        });
    }
    let f = seq.log_scale.exp();
    Ok(seq.values.into_iter().map(|v| v * f).collect())
}

/// Like [`bessel_j_sequence`] with the growth `exp(|Im z|)` factored out.
pub fn bessel_j_sequence_scaled(k_max: usize, z: Complex, cap: f64) -> Result<ScaledBesselSequence> {
    let r = z.norm();
    if !r.is_finite() || r > cap {
        return Err(Error::ArgumentTooLarge { modulus: r, cap });
    }
    if r < SERIES_LIMIT {
        return Ok(ScaledBesselSequence {
            values: series(k_max, z),
            log_scale: 0.0,
        });
    }
    Ok(miller(k_max, z))
}

fn series(k_max: usize, z: Complex) -> Vec<Complex> {
    let half = z * 0.5;
    let q = -half * half;
    let mut lead = Complex::new(1.0, 0.0); // (z/2)^k / k!
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            lead = lead * half / k as f64;
        }
        let mut term = lead;
        let mut sum = term;
        let mut m = 1usize;
        while term.norm() > 1e-18 * sum.norm() && m < 200 {
            term = term * q / (m * (m + k)) as f64;
            sum += term;
            m += 1;
        }
        out.push(sum);
    }
    out
}

fn miller(k_max: usize, z: Complex) -> ScaledBesselSequence {
    let r = z.norm();
    // k_max + |z| + 40, widened by the Airy transition width for large |z|
    let start = k_max + r.ceil() as usize + 40 + (10.0 * (0.5 * r).cbrt()).ceil() as usize;
    // e^{-iz} is large when Im z > 0, e^{+iz} when Im z < 0
    let unit = if z.im >= 0.0 {
        Complex::new(0.0, -1.0)
    } else {
        Complex::new(0.0, 1.0)
    };
    let two_over_z = 2.0 / z;

    let mut values = vec![Complex::new(0.0, 0.0); k_max + 1];
    let mut next = Complex::new(0.0, 0.0);
    let mut cur = Complex::new(1e-30, 0.0);
    // sum over k >= 1 of unit^k f_k, built from the top down
    let mut norm_sum = Complex::new(0.0, 0.0);
    let mut unit_pow = unit.powi(start as i32 % 4);
    let unit_inv = unit.conj();
    for k in (1..=start).rev() {
        if k <= k_max {
            values[k] = cur;
        }
        norm_sum += unit_pow * cur;
        let prev = two_over_z * k as f64 * cur - next;
        next = cur;
        cur = prev;
        unit_pow *= unit_inv;
        if cur.norm() > 1e150 {
            let s = 1e-150;
            cur *= s;
            next *= s;
            norm_sum *= s;
            for v in values.iter_mut().skip(k) {
                *v *= s;
            }
        }
    }
    values[0] = cur;
    let total = cur + 2.0 * norm_sum;
    // exp(-+ i z) exp(-|Im z|) has modulus one
    let target = Complex::from_polar(1.0, -z.re * if z.im >= 0.0 { 1.0 } else { -1.0 });
    // Complex division squares the modulus; divide by it first
    let modulus = total.norm();
    let factor = target * (total / modulus).conj() / modulus;
    for v in values.iter_mut() {
        *v *= factor;
    }
    ScaledBesselSequence {
        values,
        log_scale: z.im.abs(),
    }
}
