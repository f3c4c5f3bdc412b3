//! Closed-form heat kernels on the line and the torus, used as zero-noise
//! oracles and in small-time bounds.

use crate::error::{Error, Result};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Standard heat kernel `q_t(x) = (2 pi t)^{-1/2} exp(-x^2 / (2t))`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok((TAU * t).sqrt().recip() * (-x * x / (2.0 * t)).exp())
}

fn dq(t: f64, x: f64) -> f64 {
    // d/dx q_t(x)
    -(x / t) * (TAU * t).sqrt().recip() * (-x * x / (2.0 * t)).exp()
}

/// Wrapping range for the image sums: Gaussian tail below 1e-15.
fn wrap_range(t: f64) -> i64 {
    (6.0 * t.sqrt()).ceil() as i64 + 2
}

/// Periodized heat kernel `G_t(x) = sum_n q_t(x + n)`.
///
/// For `t >= 1` the Fourier series `1 + 2 sum_k exp(-2 pi^2 k^2 t) cos(2 pi k x)`
/// converges faster and is used instead; the two branches agree to 1e-12 at
/// the crossover.
pub fn torus_heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("torus kernel needs t > 0, got {t}")));
    }
    let xw = x - x.round(); // nearest-image reduction
    if t >= 1.0 {
        let mut acc = 1.0;
        for k in 1..64 {
            let kk = k as f64;
            let term = (-2.0 * std::f64::consts::PI.powi(2) * kk * kk * t).exp();
            if term < 1e-18 {
                break;
            }
            acc += 2.0 * term * (TAU * kk * xw).cos();
        }
        return Ok(acc);
    }
    let m = wrap_range(t);
    let mut acc = 0.0;
    for n in -m..=m {
        acc += heat_kernel(t, xw + n as f64)?;
    }
    Ok(acc)
}

/// Wrapped absolute derivative kernel `Q_t(x) = sum_n |d/dx q_t(x + n)|`.
pub fn torus_abs_derivative_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("Q kernel needs t > 0, got {t}")));
    }
    let xw = x - x.round();
    let m = wrap_range(t).max(3);
    let mut acc = 0.0;
    for n in -m..=m {
        acc += dq(t, xw + n as f64).abs();
    }
    Ok(acc)
}

/// Spatial derivative of the periodized heat kernel (signed, not wrapped in
/// absolute value). Used by zero-noise oracles for log-derivative fields.
pub fn torus_heat_kernel_dx(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("kernel needs t > 0, got {t}")));
    }
    let xw = x - x.round();
    if t >= 0.5 {
        let mut acc = 0.0;
        for k in 1..64 {
            let kk = k as f64;
            let term = (-2.0 * std::f64::consts::PI.powi(2) * kk * kk * t).exp();
            if term < 1e-18 {
                break;
            }
            acc -= 2.0 * term * TAU * kk * (TAU * kk * xw).sin();
        }
        return Ok(acc);
    }
    let m = wrap_range(t);
    let mut acc = 0.0;
    for n in -m..=m {
        acc += dq(t, xw + n as f64);
    }
    Ok(acc)
}
