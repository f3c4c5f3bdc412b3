//! FFT-backed periodic operators: exact heat semigroups, Crank-Nicolson
//! multipliers for the lattice Laplacian, spectral derivatives and
//! antiderivatives.
//!
//! All operators act on length-`n` real profiles sampled at `x_i = i/n` and
//! are diagonal in the discrete Fourier basis. Multipliers are kept
//! conjugate-symmetric so the inverse transform stays real; the Nyquist mode
//! carries no drift phase (it is treated as a pure cosine mode).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Wavenumber `k` for bin `i` of an `n`-point transform, in `-n/2..=n/2`.
fn signed_k(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Cached FFT plans for one grid size.
pub struct SpectralOps {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Per-thread scratch buffers for [`SpectralOps`].
pub struct Workspace {
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl SpectralOps {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        SpectralOps { n, fwd, inv }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn workspace(&self) -> Workspace {
        let len = self
            .fwd
            .get_inplace_scratch_len()
            .max(self.inv.get_inplace_scratch_len());
        Workspace {
            buf: vec![Complex::new(0.0, 0.0); self.n],
            scratch: vec![Complex::new(0.0, 0.0); len],
        }
    }

    /// Forward transform of a real profile into `ws.buf` (unnormalized).
    fn forward(&self, f: &[f64], ws: &mut Workspace) {
        debug_assert_eq!(f.len(), self.n);
        for (b, &v) in ws.buf.iter_mut().zip(f) {
            *b = Complex::new(v, 0.0);
        }
        self.fwd.process_with_scratch(&mut ws.buf, &mut ws.scratch);
    }

    /// Inverse transform of `ws.buf` back into a real profile, including the
    /// `1/n` normalization.
    fn inverse_into(&self, out: &mut [f64], ws: &mut Workspace) {
        self.inv.process_with_scratch(&mut ws.buf, &mut ws.scratch);
        let scale = 1.0 / self.n as f64;
        for (o, b) in out.iter_mut().zip(&ws.buf) {
            *o = b.re * scale;
        }
    }

    /// In-place application of a diagonal Fourier multiplier.
    pub fn apply_multiplier(&self, f: &mut [f64], mult: &[Complex<f64>], ws: &mut Workspace) {
        self.forward(f, ws);
        for (b, m) in ws.buf.iter_mut().zip(mult) {
            *b *= m;
        }
        self.inverse_into(f, ws);
    }

    /// Spectral derivative, Nyquist mode dropped.
    pub fn derivative(&self, f: &[f64], out: &mut [f64], ws: &mut Workspace) {
        self.forward(f, ws);
        self.scale_by_ik(false, ws);
        self.inverse_into(out, ws);
    }

    /// Spectral derivative with the 2/3-rule dealiasing mask, for fields that
    /// feed quadratic observables downstream.
    pub fn derivative_dealiased(&self, f: &[f64], out: &mut [f64], ws: &mut Workspace) {
        self.forward(f, ws);
        self.scale_by_ik(true, ws);
        self.inverse_into(out, ws);
    }

    fn scale_by_ik(&self, dealias: bool, ws: &mut Workspace) {
        let n = self.n;
        let cutoff = n as i64 / 3;
        for (i, b) in ws.buf.iter_mut().enumerate() {
            let k = signed_k(i, n);
            if k.unsigned_abs() as usize == n / 2 || (dealias && k.abs() > cutoff) {
                *b = Complex::new(0.0, 0.0);
            } else {
                let om = 2.0 * std::f64::consts::PI * k as f64;
                *b *= Complex::new(0.0, om);
            }
        }
    }

    /// Mean-free spectral antiderivative (the zero mode of the output is 0).
    pub fn antiderivative(&self, f: &[f64], out: &mut [f64], ws: &mut Workspace) {
        self.forward(f, ws);
        let n = self.n;
        for (i, b) in ws.buf.iter_mut().enumerate() {
            let k = signed_k(i, n);
            if k == 0 || k.unsigned_abs() as usize == n / 2 {
                *b = Complex::new(0.0, 0.0);
            } else {
                let om = 2.0 * std::f64::consts::PI * k as f64;
                *b /= Complex::new(0.0, om);
            }
        }
        self.inverse_into(out, ws);
    }

    /// Fourier coefficients `c_k = X_k / n` of a real profile, for trig
    /// interpolation at off-grid points.
    pub fn coefficients(&self, f: &[f64], ws: &mut Workspace) -> Vec<Complex<f64>> {
        self.forward(f, ws);
        let scale = 1.0 / self.n as f64;
        ws.buf.iter().map(|b| b * scale).collect()
    }

    /// Joint companion step: `m <- S m + S' z` and `z <- S z` in Fourier
    /// space, one forward/inverse transform per field.
    pub fn apply_pair_multiplier(
        &self,
        z: &mut [f64],
        m: &mut [f64],
        s: &[Complex<f64>],
        s_prime: &[Complex<f64>],
        ws_z: &mut Workspace,
        ws_m: &mut Workspace,
    ) {
        self.forward(z, ws_z);
        self.forward(m, ws_m);
        for i in 0..self.n {
            let zh = ws_z.buf[i];
            ws_m.buf[i] = s[i] * ws_m.buf[i] + s_prime[i] * zh;
            ws_z.buf[i] = s[i] * zh;
        }
        self.inverse_into(z, ws_z);
        self.inverse_into(m, ws_m);
    }
}

/// Evaluate the trig interpolant with coefficients from
/// [`SpectralOps::coefficients`] at an arbitrary torus point.
pub fn eval_interpolant(coeffs: &[Complex<f64>], x: f64) -> f64 {
    let n = coeffs.len();
    let tau = 2.0 * std::f64::consts::PI;
    let mut acc = coeffs[0].re;
    for (i, c) in coeffs.iter().enumerate().skip(1) {
        let k = signed_k(i, n);
        if k.unsigned_abs() as usize == n / 2 {
            // Nyquist as cosine mode; counted once.
            acc += c.re * (tau * k as f64 * x).cos();
        } else if k > 0 {
            let phase = Complex::new(0.0, tau * k as f64 * x).exp();
            acc += 2.0 * (c * phase).re;
        }
    }
    acc
}

/// Multiplier of the exact periodic heat semigroup `exp((dt/2) Lap)`.
pub fn heat_multiplier(n: usize, dt: f64) -> Vec<Complex<f64>> {
    (0..n)
        .map(|i| {
            let k = signed_k(i, n) as f64;
            let om = 2.0 * std::f64::consts::PI * k;
            Complex::new((-0.5 * om * om * dt).exp(), 0.0)
        })
        .collect()
}

/// Multiplier of `exp(dt (Lap/2 + theta d/dx + theta^2/2))`, the exact
/// semigroup of the exponentially tilted heat operator. The drift phase is
/// dropped on the Nyquist mode to keep the multiplier conjugate-symmetric.
pub fn tilted_heat_multiplier(n: usize, dt: f64, theta: f64) -> Vec<Complex<f64>> {
    (0..n)
        .map(|i| {
            let k = signed_k(i, n);
            let om = 2.0 * std::f64::consts::PI * k as f64;
            let re = dt * (-0.5 * om * om + 0.5 * theta * theta);
            let im = if k.unsigned_abs() as usize == n / 2 {
                0.0
            } else {
                dt * theta * om
            };
            (Complex::new(re, im)).exp()
        })
        .collect()
}

/// d/dtheta of [`tilted_heat_multiplier`]; `dt (i omega + theta)` times the
/// semigroup, with the drift phase again dropped at Nyquist.
pub fn tilted_heat_multiplier_dtheta(n: usize, dt: f64, theta: f64) -> Vec<Complex<f64>> {
    let mult = tilted_heat_multiplier(n, dt, theta);
    (0..n)
        .map(|i| {
            let k = signed_k(i, n);
            let om = if k.unsigned_abs() as usize == n / 2 {
                0.0
            } else {
                2.0 * std::f64::consts::PI * k as f64
            };
            dt * Complex::new(theta, om) * mult[i]
        })
        .collect()
}

/// Heat semigroup multiplier on a torus of circumference `period` (used by
/// extended-domain oracles; the main grids live on the unit torus).
pub fn heat_multiplier_period(n: usize, dt: f64, period: f64) -> Vec<Complex<f64>> {
    (0..n)
        .map(|i| {
            let k = signed_k(i, n) as f64;
            let om = 2.0 * std::f64::consts::PI * k / period;
            Complex::new((-0.5 * om * om * dt).exp(), 0.0)
        })
        .collect()
}

/// Crank-Nicolson multiplier for `dt/2` of the second-difference Laplacian
/// (white-noise mode). Eigenvalue of `Lap_h/2` at mode `k` is
/// `-2 sin^2(pi k / n) / dx^2`.
pub fn cn_multiplier(n: usize, dt: f64, dx: f64) -> Vec<Complex<f64>> {
    tilted_cn_multiplier(n, dt, dx, 0.0)
}

/// Crank-Nicolson multiplier for the tilted lattice operator
/// `Lap_h/2 + theta D_h + theta^2/2` with the centered difference `D_h`.
pub fn tilted_cn_multiplier(n: usize, dt: f64, dx: f64, theta: f64) -> Vec<Complex<f64>> {
    let pi = std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let s = (pi * i as f64 / n as f64).sin();
            let lap = -2.0 * s * s / (dx * dx);
            // sin(2 pi k / n) is identical for bin i and wavenumber k mod n.
            let drift = (2.0 * pi * i as f64 / n as f64).sin() / dx;
            let l = Complex::new(lap + 0.5 * theta * theta, theta * drift);
            let half = 0.5 * dt;
            (Complex::new(1.0, 0.0) + half * l) / (Complex::new(1.0, 0.0) - half * l)
        })
        .collect()
}

/// d/dtheta of [`tilted_cn_multiplier`] at fixed `(n, dt, dx)`; used by the
/// winding-mean companion field so the discrete theta-derivative is exact.
pub fn tilted_cn_multiplier_dtheta(n: usize, dt: f64, dx: f64, theta: f64) -> Vec<Complex<f64>> {
    let pi = std::f64::consts::PI;
    (0..n)
        .map(|i| {
            let s = (pi * i as f64 / n as f64).sin();
            let lap = -2.0 * s * s / (dx * dx);
            let drift = (2.0 * pi * i as f64 / n as f64).sin() / dx;
            let l = Complex::new(lap + 0.5 * theta * theta, theta * drift);
            let lp = Complex::new(theta, drift);
            let half = 0.5 * dt;
            let denom = Complex::new(1.0, 0.0) - half * l;
            dt * lp / (denom * denom)
        })
        .collect()
}
