//! Uniform space-time discretization of `[t_start, t_end] x T`.

use crate::error::{Error, Result};

/// Relative tolerance for `dt * n_steps == t_end - t_start` and for
/// snapping query times onto grid times.
const TIME_TOL: f64 = 1e-9;

/// Uniform grid on the unit torus with a uniform time step.
///
/// Spatial points are `x_i = i / n_space`; time steps are
/// `t_j = t_start + j * dt` for `j = 0..=n_steps`. All solver APIs speak
/// absolute times and convert to step indices internally.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    n_space: usize,
    t_start: f64,
    t_end: f64,
    dt: f64,
    n_steps: usize,
}

impl TorusGrid {
    pub fn new(n_space: usize, t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if n_space < 8 || n_space % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n_space must be even and >= 8, got {n_space}"
            )));
        }
        if !(t_start < t_end) {
            return Err(Error::InvalidGrid(format!(
                "need t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        let span = t_end - t_start;
        let n_steps = (span / dt).round() as usize;
        if n_steps == 0 || ((n_steps as f64) * dt - span).abs() > TIME_TOL * span.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "dt {dt} does not divide the span {span}"
            )));
        }
        Ok(TorusGrid {
            n_space,
            t_start,
            t_end,
            dt,
            n_steps,
        })
    }

    pub fn n_space(&self) -> usize {
        self.n_space
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.n_space as f64
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Time of step index `j` (0..=n_steps).
    pub fn time_of_step(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.dt
    }

    /// Step index of an on-grid time, or `OffGrid`.
    pub fn step_of_time(&self, t: f64) -> Result<usize> {
        let raw = (t - self.t_start) / self.dt;
        let j = raw.round();
        if (raw - j).abs() > 1e-6 || j < 0.0 || j > self.n_steps as f64 {
            return Err(Error::OffGrid(t));
        }
        Ok(j as usize)
    }

    /// Spatial grid point `x_i = i dx`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    /// Nearest grid index to a torus position, together with the rounding
    /// distance (used by the theta-shear rounding policy).
    pub fn nearest_index(&self, x: f64) -> (usize, f64) {
        let n = self.n_space as f64;
        let xw = x.rem_euclid(1.0);
        let raw = xw * n;
        let i = raw.round();
        let err = (raw - i).abs() / n;
        ((i as usize) % self.n_space, err)
    }

    /// All spatial grid points.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_space).map(|i| self.x(i)).collect()
    }
}
