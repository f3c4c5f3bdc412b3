//! Multiplicative stochastic heat equation on the torus: Ito time stepping,
//! propagator matrices, and the first-moment companion field used by the
//! white-noise winding mean.
//!
//! One step is "noise first, then semigroup": multiply pointwise by
//! `1 + W_j`, then apply the exact spectral heat semigroup (smooth noise) or
//! Crank-Nicolson on the second-difference Laplacian (white noise).

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::field::{FieldHistory, ScalarField};
use crate::grid::TorusGrid;
use crate::noise::NoiseRealization;
use crate::spectral::{
    cn_multiplier, heat_multiplier, tilted_cn_multiplier, tilted_cn_multiplier_dtheta,
    tilted_heat_multiplier, tilted_heat_multiplier_dtheta, SpectralOps, Workspace,
};

/// Discretized kernel `G_{t,s}(x, y)`; column `y` holds the evolution of a
/// Dirac mass `(1/dx) 1_{x = y}` placed at time `s`.
#[derive(Debug, Clone)]
pub struct PropagatorMatrix {
    grid: Arc<TorusGrid>,
    s: f64,
    t: f64,
    columns: Vec<Vec<f64>>,
}

impl PropagatorMatrix {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    /// `G_{t,s}(x_i, y_j)`.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.columns[y][x]
    }

    pub fn column(&self, y: usize) -> &[f64] {
        &self.columns[y]
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[x]).collect()
    }

    /// `int G(x, y) dy` for each `x` (row mass).
    pub fn row_integrals(&self) -> Vec<f64> {
        let n = self.n();
        let dx = self.grid.dx();
        (0..n)
            .map(|x| self.columns.iter().map(|c| c[x]).sum::<f64>() * dx)
            .collect()
    }

    /// `int G(x, y) dx` for each `y` (column mass).
    pub fn column_integrals(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.columns
            .iter()
            .map(|c| c.iter().sum::<f64>() * dx)
            .collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.iter().cloned().fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min)
    }

    /// Chapman-Kolmogorov composition `(self . other)(x, y)
    /// = int self(x, r) other(r, y) dr`; requires `other.t == self.s`.
    pub fn compose(&self, other: &PropagatorMatrix) -> Result<PropagatorMatrix> {
        if (self.s - other.t).abs() > 1e-12 {
            return Err(Error::GridMismatch(
                "composition requires matching intermediate time".into(),
            ));
        }
        let n = self.n();
        let dx = self.grid.dx();
        let columns: Vec<Vec<f64>> = (0..n)
            .map(|y| {
                let mut col = vec![0.0; n];
                for r in 0..n {
                    let weight = other.columns[y][r] * dx;
                    let self_col = &self.columns[r];
                    for x in 0..n {
                        col[x] += self_col[x] * weight;
                    }
                }
                col
            })
            .collect();
        Ok(PropagatorMatrix {
            grid: self.grid.clone(),
            s: other.s,
            t: self.t,
            columns,
        })
    }

    pub fn max_abs_diff(&self, other: &PropagatorMatrix) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, b) in self.columns.iter().zip(&other.columns) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
        worst
    }
}

/// Time stepper bound to one noise realization.
pub struct SheEvolver {
    noise: NoiseRealization,
    ops: SpectralOps,
    semigroup: Vec<Complex<f64>>,
}

impl SheEvolver {
    pub fn new(noise: &NoiseRealization) -> Result<Self> {
        let grid = noise.grid();
        let n = grid.n_space();
        let dt = grid.dt();
        let dx = grid.dx();
        let semigroup = if noise.is_white() {
            if dt > dx * dx / 2.0 * (1.0 + 1e-9) {
                return Err(Error::StepTooLarge {
                    dt,
                    max_dt: dx * dx / 2.0,
                });
            }
            cn_multiplier(n, dt, dx)
        } else {
            heat_multiplier(n, dt)
        };
        Ok(SheEvolver {
            noise: noise.clone(),
            ops: SpectralOps::new(n),
            semigroup,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.noise.grid()
    }

    pub fn noise(&self) -> &NoiseRealization {
        &self.noise
    }

    pub fn ops(&self) -> &SpectralOps {
        &self.ops
    }

    /// One Ito step with a caller-supplied increment profile.
    pub fn step_with_increment(
        &self,
        values: &mut [f64],
        increment: &[f64],
        ws: &mut Workspace,
    ) -> Result<()> {
        self.raw_step(values, increment, ws);
        if values.iter().cloned().fold(f64::INFINITY, f64::min) <= 0.0 {
            return Err(Error::PositivityLost);
        }
        Ok(())
    }

    fn raw_step(&self, values: &mut [f64], increment: &[f64], ws: &mut Workspace) {
        for (v, w) in values.iter_mut().zip(increment) {
            *v *= 1.0 + w;
        }
        self.ops.apply_multiplier(values, &self.semigroup, ws);
    }

    /// Steps before strict positivity is enforced on Dirac columns.
    ///
    /// Two floors limit when the sign of the far field is meaningful. The
    /// spectral semigroup truncates the Gaussian at the Nyquist mode, so a
    /// fresh Dirac column rings at the level `exp(-2 pi^2 (n/2)^2 tau)`.
    /// Independently, the FFT evaluates the tail by cancellation of O(1)
    /// terms, so values below ~1e-12 of the column scale have random sign
    /// however they are computed. Positivity is asserted once the true far
    /// field `exp(-1/(8 tau))` clears both floors.
    fn dirac_burn_in_steps(&self) -> usize {
        let tau_round = 1.0 / (8.0 * 12.0 * std::f64::consts::LN_10);
        let tau = if self.noise.is_white() {
            // Crank-Nicolson is a product of positivity-preserving lattice
            // operators; only the cancellation floor applies.
            tau_round
        } else {
            let half_n = self.ops.n() as f64 / 2.0;
            let a = 2.0 * std::f64::consts::PI.powi(2) * half_n * half_n;
            // Ringing floor: solve a tau^2 - 50 tau - 1/8 = 0.
            let tau0 = (50.0 + (2500.0 + 0.5 * a).sqrt()) / (2.0 * a);
            tau0.max(tau_round)
        };
        (tau / self.grid().dt()).ceil().max(1.0) as usize
    }

    fn step(&self, values: &mut [f64], j: usize, ws: &mut Workspace) -> Result<()> {
        let w = self.noise.increment(j);
        self.step_with_increment(values, &w, ws)
    }

    /// Evolve a profile from one grid time to another, returning the final
    /// profile only.
    pub fn evolve(&self, initial: Vec<f64>, from_t: f64, to_t: f64) -> Result<Vec<f64>> {
        let grid = self.grid();
        let j0 = grid.step_of_time(from_t)?;
        let j1 = grid.step_of_time(to_t)?;
        if j1 < j0 {
            return Err(Error::Domain("evolve needs from_t <= to_t".into()));
        }
        let mut values = initial;
        let mut ws = self.ops.workspace();
        for j in j0..j1 {
            self.step(&mut values, j, &mut ws)?;
        }
        Ok(values)
    }

    /// Evolve and record the profile at every grid step.
    pub fn evolve_history(
        &self,
        initial: Vec<f64>,
        from_t: f64,
        to_t: f64,
    ) -> Result<FieldHistory> {
        let grid = self.grid();
        let j0 = grid.step_of_time(from_t)?;
        let j1 = grid.step_of_time(to_t)?;
        if j1 < j0 {
            return Err(Error::Domain("evolve needs from_t <= to_t".into()));
        }
        let mut values = initial;
        let mut ws = self.ops.workspace();
        let mut profiles = Vec::with_capacity(j1 - j0 + 1);
        profiles.push(values.clone());
        for j in j0..j1 {
            self.step(&mut values, j, &mut ws)?;
            profiles.push(values.clone());
        }
        Ok(FieldHistory::new(grid.clone(), j0, profiles))
    }

    /// Propagator matrix `G_{t,s}`; every column is a Dirac evolution, run
    /// in parallel with a shared per-step increment.
    pub fn propagator(&self, s: f64, t: f64) -> Result<PropagatorMatrix> {
        let grid = self.grid();
        let n = grid.n_space();
        let j0 = grid.step_of_time(s)?;
        let j1 = grid.step_of_time(t)?;
        if j1 < j0 {
            return Err(Error::Domain("propagator needs s <= t".into()));
        }
        let inv_dx = 1.0 / grid.dx();
        let mut columns: Vec<Vec<f64>> = (0..n)
            .map(|y| {
                let mut col = vec![0.0; n];
                col[y] = inv_dx;
                col
            })
            .collect();
        let burn_in = self.dirac_burn_in_steps();
        for j in j0..j1 {
            let w = self.noise.increment(j);
            let check = j + 1 - j0 >= burn_in;
            let failed = columns
                .par_iter_mut()
                .map_init(
                    || self.ops.workspace(),
                    |ws, col| {
                        if check {
                            self.step_with_increment(col, &w, ws).is_err()
                        } else {
                            self.raw_step(col, &w, ws);
                            false
                        }
                    },
                )
                .reduce(|| false, |a, b| a || b);
            if failed {
                return Err(Error::PositivityLost);
            }
        }
        Ok(PropagatorMatrix {
            grid: grid.clone(),
            s,
            t,
            columns,
        })
    }

    /// Single propagator column: the evolution of a Dirac mass placed at
    /// grid point `y_index` at time `s`.
    pub fn dirac_column(&self, s: f64, t: f64, y_index: usize) -> Result<Vec<f64>> {
        let grid = self.grid();
        let n = grid.n_space();
        let j0 = grid.step_of_time(s)?;
        let j1 = grid.step_of_time(t)?;
        if j1 < j0 {
            return Err(Error::Domain("column evolution needs s <= t".into()));
        }
        let mut col = vec![0.0; n];
        col[y_index % n] = 1.0 / grid.dx();
        let burn_in = self.dirac_burn_in_steps();
        let mut ws = self.ops.workspace();
        for j in j0..j1 {
            let w = self.noise.increment(j);
            if j + 1 - j0 >= burn_in {
                self.step_with_increment(&mut col, &w, &mut ws)?;
            } else {
                self.raw_step(&mut col, &w, &mut ws);
            }
        }
        Ok(col)
    }

    /// Joint evolution of the companion pair
    /// `Z(t,x) = int Z_{t,s}(x,y) e^{theta (y-x)} dy` and
    /// `M(t,x) = int Z_{t,s}(x,y) (y-x) e^{theta (y-x)} dy`
    /// from the Dirac start (`Z = 1`, `M = 0` at `t = s`).
    ///
    /// `M` picks up the exact theta-derivative of the discrete `Z` update,
    /// i.e. the per-step source is `S'_theta [(1+W) Z]` with `S'` the
    /// multiplier derivative; for the exact semigroup this equals the
    /// spectral-derivative source `dt (d/dx + theta) Z_new`.
    pub fn moment_fields(
        &self,
        theta: f64,
        from_t: f64,
        to_t: f64,
    ) -> Result<(ScalarField, ScalarField)> {
        let grid = self.grid();
        let n = grid.n_space();
        let dt = grid.dt();
        let dx = grid.dx();
        let j0 = grid.step_of_time(from_t)?;
        let j1 = grid.step_of_time(to_t)?;
        if j1 < j0 {
            return Err(Error::Domain("evolve needs from_t <= to_t".into()));
        }
        let (s_mult, sp_mult) = if self.noise.is_white() {
            (
                tilted_cn_multiplier(n, dt, dx, theta),
                tilted_cn_multiplier_dtheta(n, dt, dx, theta),
            )
        } else {
            (
                tilted_heat_multiplier(n, dt, theta),
                tilted_heat_multiplier_dtheta(n, dt, theta),
            )
        };
        let mut z = vec![1.0; n];
        let mut m = vec![0.0; n];
        let mut ws_z = self.ops.workspace();
        let mut ws_m = self.ops.workspace();
        for j in j0..j1 {
            let w = self.noise.increment(j);
            for i in 0..n {
                let f = 1.0 + w[i];
                z[i] *= f;
                m[i] *= f;
            }
            self.ops
                .apply_pair_multiplier(&mut z, &mut m, &s_mult, &sp_mult, &mut ws_z, &mut ws_m);
            if z.iter().cloned().fold(f64::INFINITY, f64::min) <= 0.0 {
                return Err(Error::PositivityLost);
            }
        }
        Ok((
            ScalarField::new(grid.clone(), to_t, z)?,
            ScalarField::new(grid.clone(), to_t, m)?,
        ))
    }
}

/// One Ito-Walsh step of the stochastic heat equation.
pub fn she_step(
    evolver: &SheEvolver,
    state: &ScalarField,
    increment: &[f64],
) -> Result<ScalarField> {
    if increment.len() != state.values().len() {
        return Err(Error::GridMismatch("increment length".into()));
    }
    let mut values = state.values().to_vec();
    let mut ws = evolver.ops().workspace();
    evolver.step_with_increment(&mut values, increment, &mut ws)?;
    ScalarField::new(
        state.grid().clone(),
        state.time() + state.grid().dt(),
        values,
    )
}

/// Propagator of the stochastic heat equation on the torus.
pub fn propagator(noise: &NoiseRealization, s: f64, t: f64) -> Result<PropagatorMatrix> {
    SheEvolver::new(noise)?.propagator(s, t)
}

/// Companion fields `Z(t,x) = int Z_{t,s}(x,y) dy` and
/// `M(t,x) = int Z_{t,s}(x,y) (y-x) dy`, evolved jointly on the torus.
pub fn first_moment_field(
    noise: &NoiseRealization,
    s: f64,
    t: f64,
) -> Result<(ScalarField, ScalarField)> {
    SheEvolver::new(noise)?.moment_fields(0.0, s, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::torus_heat_kernel;
    use crate::noise::{sample_noise, CovarianceSpec};
    use crate::spectral::heat_multiplier_period;

    fn grid(n: usize, t0: f64, t1: f64, dt: f64) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::new(n, t0, t1, dt).unwrap())
    }

    fn zero_noise(g: &Arc<TorusGrid>) -> NoiseRealization {
        sample_noise(&CovarianceSpec::zero(), g, 0).unwrap()
    }

    #[test]
    fn constant_preserved_under_zero_noise() {
        let g = grid(32, 0.0, 0.1, 1e-3);
        let ev = SheEvolver::new(&zero_noise(&g)).unwrap();
        let out = ev.evolve(vec![1.0; 32], 0.0, 0.1).unwrap();
        for v in out {
            assert!((v - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_noise_step_is_heat_flow() {
        let n = 64;
        let g = grid(n, 0.0, 0.1, 1e-3);
        let ev = SheEvolver::new(&zero_noise(&g)).unwrap();
        let t0 = 0.02;
        let y = 0.5;
        let init: Vec<f64> = (0..n)
            .map(|i| torus_heat_kernel(t0, i as f64 / n as f64 - y).unwrap())
            .collect();
        let state = ScalarField::new(g.clone(), 0.0, init).unwrap();
        let next = she_step(&ev, &state, &vec![0.0; n]).unwrap();
        for (i, &v) in next.values().iter().enumerate() {
            let expect = torus_heat_kernel(t0 + 1e-3, i as f64 / n as f64 - y).unwrap();
            assert!((v - expect).abs() < 1e-10, "{v} vs {expect}");
        }
    }

    #[test]
    fn ito_step_preserves_expected_mean() {
        // E[mean after m steps] equals the initial mean; MC over seeds.
        let g = grid(32, 0.0, 0.02, 1e-3);
        let spec = CovarianceSpec::smooth(vec![0.0, 1.0, 0.5]).unwrap();
        let n_seeds = 10_000;
        let mut means = Vec::with_capacity(n_seeds);
        for seed in 0..n_seeds {
            let noise = sample_noise(&spec, &g, seed as u64).unwrap();
            let ev = SheEvolver::new(&noise).unwrap();
            let out = ev.evolve(vec![1.0; 32], 0.0, 0.02).unwrap();
            means.push(out.iter().sum::<f64>() / 32.0);
        }
        let m = means.iter().sum::<f64>() / n_seeds as f64;
        let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n_seeds - 1) as f64;
        let se = (var / n_seeds as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn propagator_zero_noise_matches_kernel() {
        let n = 64;
        let g = grid(n, 0.0, 0.05, 1e-3);
        let p = propagator(&zero_noise(&g), 0.0, 0.05).unwrap();
        for y in [0usize, 17, 40] {
            for x in 0..n {
                let expect =
                    torus_heat_kernel(0.05, (x as f64 - y as f64) / n as f64).unwrap();
                assert!((p.entry(x, y) - expect).abs() < 1e-8);
            }
        }
        assert!(p.min_entry() > 0.0);
    }

    #[test]
    fn propagator_at_equal_times_is_scaled_identity() {
        let n = 16;
        let g = grid(n, 0.0, 0.05, 1e-3);
        let p = propagator(&zero_noise(&g), 0.01, 0.01).unwrap();
        for x in 0..n {
            for y in 0..n {
                let expect = if x == y { n as f64 } else { 0.0 };
                assert_eq!(p.entry(x, y), expect);
            }
        }
    }

    #[test]
    fn chapman_kolmogorov_composition() {
        let n = 32;
        let g = grid(n, 0.0, 0.06, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        let noise = sample_noise(&spec, &g, 4242).unwrap();
        let direct = propagator(&noise, 0.0, 0.06).unwrap();
        let late = propagator(&noise, 0.03, 0.06).unwrap();
        let early = propagator(&noise, 0.0, 0.03).unwrap();
        let composed = late.compose(&early).unwrap();
        assert!(direct.max_abs_diff(&composed) < 1e-6);
    }

    #[test]
    fn propagator_mass_conserved_under_zero_noise() {
        let n = 32;
        let g = grid(n, 0.0, 0.05, 1e-3);
        let p = propagator(&zero_noise(&g), 0.0, 0.05).unwrap();
        for mass in p.column_integrals() {
            assert!((mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn moment_fields_vanish_under_zero_noise() {
        let g = grid(32, 0.0, 0.1, 1e-3);
        let (z, m) = first_moment_field(&zero_noise(&g), 0.0, 0.1).unwrap();
        for (&zv, &mv) in z.values().iter().zip(m.values()) {
            assert!((zv - 1.0).abs() < 1e-12);
            assert!(mv.abs() < 1e-12);
        }
    }

    /// Brute-force oracle: evolve the full propagator on a width-4 periodic
    /// extension of the torus (noise tiled periodically), then integrate
    /// rows against 1 and (y - x) directly. Independent of the companion
    /// source-term code path.
    fn extended_domain_moments(
        spec: &CovarianceSpec,
        seed: u64,
        n_unit: usize,
        t_end: f64,
        dt: f64,
    ) -> (Vec<f64>, Vec<f64>) {
        let width = 4usize;
        let n_big = width * n_unit;
        let g_unit = grid(n_unit, 0.0, t_end, dt);
        let noise = sample_noise(spec, &g_unit, seed).unwrap();
        let ops = SpectralOps::new(n_big);
        let mult = heat_multiplier_period(n_big, dt, width as f64);
        let dx = 1.0 / n_unit as f64;
        // columns[y][x]: line propagator wrapped with period `width`.
        let mut columns: Vec<Vec<f64>> = (0..n_big)
            .map(|y| {
                let mut col = vec![0.0; n_big];
                col[y] = 1.0 / dx;
                col
            })
            .collect();
        let steps = (t_end / dt).round() as usize;
        let mut ws = ops.workspace();
        for j in 0..steps {
            let w_unit = noise.increment(j);
            let w_big: Vec<f64> = (0..n_big).map(|i| w_unit[i % n_unit]).collect();
            for col in columns.iter_mut() {
                for (v, w) in col.iter_mut().zip(&w_big) {
                    *v *= 1.0 + w;
                }
                ops.apply_multiplier(col, &mult, &mut ws);
            }
        }
        let mut z = vec![0.0; n_unit];
        let mut m = vec![0.0; n_unit];
        for x in 0..n_unit {
            let xs = x as f64 * dx;
            for y in 0..n_big {
                // displacement on the covering line, centered around x
                let mut disp = y as f64 * dx - xs;
                let half = width as f64 / 2.0;
                if disp > half {
                    disp -= width as f64;
                } else if disp < -half {
                    disp += width as f64;
                }
                let v = columns[y][x] * dx;
                z[x] += v;
                m[x] += v * disp;
            }
        }
        (z, m)
    }

    #[test]
    fn moment_field_matches_extended_domain_oracle() {
        let n = 64;
        let t_end = 0.05;
        let dt = 1e-3;
        let g = grid(n, 0.0, t_end, dt);
        let spec = CovarianceSpec::smooth(vec![0.0, 0.6, 0.3]).unwrap();
        let noise = sample_noise(&spec, &g, 314).unwrap();
        let (z, m) = first_moment_field(&noise, 0.0, t_end).unwrap();
        let (z_oracle, m_oracle) = extended_domain_moments(&spec, 314, n, t_end, dt);
        let mut worst = 0.0f64;
        for i in 0..n {
            let ours = m.values()[i] / z.values()[i];
            let oracle = m_oracle[i] / z_oracle[i];
            worst = worst.max((ours - oracle).abs());
        }
        assert!(worst < 1e-4, "M/Z mismatch {worst}");
    }

    #[test]
    fn moment_field_mean_zero_over_seeds() {
        // E[M(t, x)] = 0 by the reflection symmetry of the noise law.
        let g = grid(32, 0.0, 0.05, 1e-3);
        let spec = CovarianceSpec::smooth(vec![0.0, 1.0]).unwrap();
        let n_seeds = 10_000;
        let mut vals = Vec::with_capacity(n_seeds);
        for seed in 0..n_seeds {
            let noise = sample_noise(&spec, &g, seed as u64).unwrap();
            let (_, m) = first_moment_field(&noise, 0.0, 0.05).unwrap();
            vals.push(m.values()[7]);
        }
        let mean = vals.iter().sum::<f64>() / n_seeds as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_seeds - 1) as f64;
        let se = (var / n_seeds as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn white_mode_requires_fine_dt() {
        let g = grid(16, 0.0, 0.1, 1e-3); // dx^2/2 = 1/512 < 1e-3? no: 1/512 ~ 2e-3 > 1e-3, ok
        let w = sample_noise(&CovarianceSpec::white(), &g, 1).unwrap();
        assert!(SheEvolver::new(&w).is_ok());
        let g2 = grid(64, 0.0, 0.1, 1e-3); // dx^2/2 = 1.2e-4 < 1e-3 -> reject
        let w2 = sample_noise(&CovarianceSpec::white(), &g2, 1).unwrap();
        assert!(matches!(
            SheEvolver::new(&w2),
            Err(Error::StepTooLarge { .. })
        ));
    }
}
