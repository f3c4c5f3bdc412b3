//! Periodic Gaussian forcing: covariance spec, seeded sampling of per-step
//! increments, and the shear transformation.
//!
//! Increments are synthesized on demand from `(seed, step)` with a
//! counter-based stream split, so realizations are order-independent,
//! parallel-safe, and need no storage even for long white-noise runs.

use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Spatial covariance of the forcing.
///
/// The smooth case is the truncated cosine series
/// `R(x) = lambda_0 + sum_k lambda_k cos(2 pi k x)` with nonnegative weights;
/// the white case is `R = amplitude * delta`.
#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceSpec {
    Smooth { mode_weights: Vec<f64> },
    White { amplitude: f64 },
}

impl CovarianceSpec {
    pub fn smooth(mode_weights: Vec<f64>) -> Result<Self> {
        if mode_weights.is_empty() {
            return Err(Error::Domain("need at least lambda_0".into()));
        }
        if mode_weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Domain("mode weights must be nonnegative".into()));
        }
        Ok(CovarianceSpec::Smooth { mode_weights })
    }

    /// Default weights used by the experiments when none are configured.
    pub fn default_smooth() -> Self {
        CovarianceSpec::Smooth {
            mode_weights: vec![0.0, 0.5, 0.25],
        }
    }

    /// Identically-zero forcing; used by deterministic oracles.
    pub fn zero() -> Self {
        CovarianceSpec::Smooth {
            mode_weights: vec![0.0],
        }
    }

    pub fn white() -> Self {
        CovarianceSpec::White { amplitude: 1.0 }
    }

    pub fn white_with_amplitude(amplitude: f64) -> Self {
        CovarianceSpec::White { amplitude }
    }

    pub fn is_white(&self) -> bool {
        matches!(self, CovarianceSpec::White { .. })
    }

    /// `R(0)`, the pointwise variance rate of the smooth forcing.
    pub fn r_zero(&self) -> f64 {
        match self {
            CovarianceSpec::Smooth { mode_weights } => mode_weights.iter().sum(),
            CovarianceSpec::White { amplitude } => *amplitude,
        }
    }
}

/// `R(x)` for a smooth spec; the white covariance is distributional.
pub fn covariance_eval(spec: &CovarianceSpec, x: f64) -> Result<f64> {
    match spec {
        CovarianceSpec::White { .. } => Err(Error::WhiteCovariance),
        CovarianceSpec::Smooth { mode_weights } => {
            // Reduce to the nearest period first so R(x+1) == R(x) bitwise
            // for grid-representable x.
            let xr = x - x.round();
            let mut acc = mode_weights[0];
            for (k, &w) in mode_weights.iter().enumerate().skip(1) {
                acc += w * (TAU * k as f64 * xr).cos();
            }
            Ok(acc)
        }
    }
}

/// One realization of the forcing, determined by `(grid, spec, seed)`.
///
/// `increment(j)` returns the spatial profile of `int xi dt` over step `j`.
/// Shear and integer shifts are deferred transformations applied at
/// synthesis time, so two views of the same seed stay coupled.
#[derive(Debug, Clone)]
pub struct NoiseRealization {
    grid: Arc<TorusGrid>,
    spec: CovarianceSpec,
    seed: u64,
    shear: f64,
    time_shift_steps: i64,
    space_shift_cells: i64,
    trig: OnceLock<Arc<Vec<(f64, f64)>>>,
}

pub fn sample_noise(
    spec: &CovarianceSpec,
    grid: &Arc<TorusGrid>,
    seed: u64,
) -> Result<NoiseRealization> {
    if let CovarianceSpec::Smooth { mode_weights } = spec {
        let k_max = mode_weights.len() - 1;
        if k_max > grid.n_space() / 4 {
            return Err(Error::Domain(format!(
                "noise modes {k_max} exceed n_space/4 = {}",
                grid.n_space() / 4
            )));
        }
    }
    Ok(NoiseRealization {
        grid: grid.clone(),
        spec: spec.clone(),
        seed,
        shear: 0.0,
        time_shift_steps: 0,
        space_shift_cells: 0,
        trig: OnceLock::new(),
    })
}

/// Sheared view `xi^theta(t, x) = xi(t, x - theta t)`, exact via phase
/// rotation of the per-step Fourier modes at the step's time label.
pub fn shear_noise(noise: &NoiseRealization, theta: f64) -> Result<NoiseRealization> {
    noise.shear(theta)
}

impl NoiseRealization {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_white(&self) -> bool {
        self.spec.is_white()
    }

    pub fn shear_angle(&self) -> f64 {
        self.shear
    }

    pub fn shear(&self, theta: f64) -> Result<NoiseRealization> {
        if self.is_white() {
            return Err(Error::WhiteShear);
        }
        let mut out = self.clone();
        out.shear += theta;
        Ok(out)
    }

    /// Shift view: step-`j` increment at cell `i` is the base realization's
    /// step `j + time_steps` increment at cell `i + space_cells`. Pure
    /// re-indexing; used by the environment shift bookkeeping checks.
    pub fn shifted(&self, time_steps: i64, space_cells: i64) -> NoiseRealization {
        let mut out = self.clone();
        out.time_shift_steps += time_steps;
        out.space_shift_cells += space_cells;
        out
    }

    fn step_rng(&self, j: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let raw = j as i64 + self.time_shift_steps;
        rng.set_stream(raw as u64 ^ 0x9e37_79b9_7f4a_7c15);
        rng
    }

    fn trig_table(&self) -> Arc<Vec<(f64, f64)>> {
        self.trig
            .get_or_init(|| {
                let n = self.grid.n_space();
                Arc::new(
                    (0..n)
                        .map(|m| {
                            let a = TAU * m as f64 / n as f64;
                            (a.cos(), a.sin())
                        })
                        .collect(),
                )
            })
            .clone()
    }

    /// Spatial profile of the integrated forcing over step `j`.
    pub fn increment(&self, j: usize) -> Vec<f64> {
        let n = self.grid.n_space();
        let dt = self.grid.dt();
        let mut rng = self.step_rng(j);
        let mut out = match &self.spec {
            CovarianceSpec::White { amplitude } => {
                let sd = (amplitude * dt / self.grid.dx()).sqrt();
                (0..n)
                    .map(|_| {
                        let g: f64 = StandardNormal.sample(&mut rng);
                        sd * g
                    })
                    .collect::<Vec<f64>>()
            }
            CovarianceSpec::Smooth { mode_weights } => {
                let sqrt_dt = dt.sqrt();
                let g0: f64 = StandardNormal.sample(&mut rng);
                let mut profile = vec![sqrt_dt * mode_weights[0].sqrt() * g0; n];
                let t_j = self.grid.time_of_step(j);
                let trig = self.trig_table();
                for (k, &w) in mode_weights.iter().enumerate().skip(1) {
                    let mut a: f64 = StandardNormal.sample(&mut rng);
                    let mut b: f64 = StandardNormal.sample(&mut rng);
                    if self.shear != 0.0 {
                        let phi = TAU * k as f64 * self.shear * t_j;
                        let (c, s) = (phi.cos(), phi.sin());
                        let (ar, br) = (a * c - b * s, a * s + b * c);
                        a = ar;
                        b = br;
                    }
                    let amp = sqrt_dt * w.sqrt();
                    for (i, p) in profile.iter_mut().enumerate() {
                        let (c, s) = trig[(k * i) % n];
                        *p += amp * (a * c + b * s);
                    }
                }
                profile
            }
        };
        if self.space_shift_cells != 0 {
            let shift = self.space_shift_cells.rem_euclid(n as i64) as usize;
            out.rotate_left(shift);
        }
        out
    }
}
