//! Burgers solutions through the Hopf-Cole transformation: flat and Dirac
//! initial data, Busemann functions, and the one-force-one-solution gap.
//!
//! `u` is always computed as `theta + d/dx log Z` with `Z` a stochastic heat
//! field driven by the sheared noise; it is never stepped directly, so shocks
//! and positivity are handled by the linear equation.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{FieldHistory, ScalarField};
use crate::grid::TorusGrid;
use crate::noise::NoiseRealization;
use crate::she::SheEvolver;
use crate::spectral::{eval_interpolant, SpectralOps};

/// Tolerance on per-step conservation of the spatial mean.
pub const MEAN_TOL: f64 = 1e-10;

/// Solution `u_theta(t, .; t_start)` from flat data `theta`.
#[derive(Debug, Clone)]
pub struct BurgersSolution {
    pub theta: f64,
    pub t_start: f64,
    pub field: ScalarField,
}

/// Solution `U_theta(0, .; -s, y)` from Dirac-type data of mean `theta`.
#[derive(Debug, Clone)]
pub struct DiracBurgersSolution {
    pub theta: f64,
    pub s: f64,
    pub y: f64,
    /// Distance between `y - theta s` and the grid point it was rounded to.
    pub rounding_error: f64,
    pub field: ScalarField,
}

/// Full evolution of a flat-start Burgers solution, one profile per step.
#[derive(Debug, Clone)]
pub struct BurgersRun {
    pub theta: f64,
    pub t_start: f64,
    pub u: FieldHistory,
    /// Largest per-step deviation of `mean(u)` from `theta` seen in the run.
    pub max_mean_dev: f64,
}

impl BurgersRun {
    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.u.grid()
    }

    pub fn solution_at(&self, t: f64) -> Result<BurgersSolution> {
        Ok(BurgersSolution {
            theta: self.theta,
            t_start: self.t_start,
            field: self.u.field_at_time(t)?,
        })
    }
}

/// Turn a positive SHE profile into a Burgers profile
/// `theta + d/dx log z`, with the dealiased spectral derivative.
fn log_derivative(
    ops: &SpectralOps,
    ws: &mut crate::spectral::Workspace,
    z: &[f64],
    theta: f64,
    logbuf: &mut Vec<f64>,
    out: &mut Vec<f64>,
) {
    logbuf.clear();
    logbuf.extend(z.iter().map(|v| v.ln()));
    out.resize(z.len(), 0.0);
    ops.derivative_dealiased(logbuf, out, ws);
    for v in out.iter_mut() {
        *v += theta;
    }
}

/// Evolve `u_theta(., .; t_start)` and record every step.
pub fn burgers_run(
    noise: &NoiseRealization,
    theta: f64,
    t_start: f64,
    t_end: f64,
) -> Result<BurgersRun> {
    let sheared = noise.shear(theta)?;
    let evolver = SheEvolver::new(&sheared)?;
    let grid = evolver.grid().clone();
    let j0 = grid.step_of_time(t_start)?;
    let j1 = grid.step_of_time(t_end)?;
    if j1 < j0 {
        return Err(Error::Domain("burgers run needs t_start <= t_end".into()));
    }
    let n = grid.n_space();
    let ops = evolver.ops();
    let mut ws = ops.workspace();
    let mut z = vec![1.0; n];
    let mut logbuf = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut profiles = Vec::with_capacity(j1 - j0 + 1);
    let mut max_mean_dev: f64 = 0.0;
    for j in j0..=j1 {
        if j > j0 {
            let w = sheared.increment(j - 1);
            evolver.step_with_increment(&mut z, &w, &mut ws)?;
        }
        log_derivative(ops, &mut ws, &z, theta, &mut logbuf, &mut u);
        let mean = u.iter().sum::<f64>() / n as f64;
        max_mean_dev = max_mean_dev.max((mean - theta).abs());
        profiles.push(u.clone());
    }
    if max_mean_dev > MEAN_TOL {
        return Err(Error::Domain(format!(
            "mean conservation violated: |mean(u) - theta| = {max_mean_dev:.3e}"
        )));
    }
    Ok(BurgersRun {
        theta,
        t_start,
        u: FieldHistory::new(grid, j0, profiles),
        max_mean_dev,
    })
}

/// `u_theta(t, .; t_start)` from flat initial data.
pub fn burgers_from_flat(
    noise: &NoiseRealization,
    theta: f64,
    t_start: f64,
    t: f64,
) -> Result<BurgersSolution> {
    let sheared = noise.shear(theta)?;
    let evolver = SheEvolver::new(&sheared)?;
    let grid = evolver.grid().clone();
    let n = grid.n_space();
    let z = evolver.evolve(vec![1.0; n], t_start, t)?;
    let ops = evolver.ops();
    let mut ws = ops.workspace();
    let mut logbuf = Vec::new();
    let mut u = Vec::new();
    log_derivative(ops, &mut ws, &z, theta, &mut logbuf, &mut u);
    let mean = u.iter().sum::<f64>() / n as f64;
    if (mean - theta).abs() > MEAN_TOL {
        return Err(Error::Domain(format!(
            "mean conservation violated by {:.3e}",
            (mean - theta).abs()
        )));
    }
    Ok(BurgersSolution {
        theta,
        t_start,
        field: ScalarField::new(grid, t, u)?,
    })
}

/// `U_theta(0, .; -s, y)`: Burgers solution of mean `theta` started from
/// Dirac-type data at `(-s, y)`, via a single sheared propagator column at
/// the source point `y - theta s` (rounded to the grid).
pub fn burgers_from_dirac(
    noise: &NoiseRealization,
    theta: f64,
    s: f64,
    y: f64,
) -> Result<DiracBurgersSolution> {
    if !(s > 0.0) {
        return Err(Error::Domain(
            "Dirac data needs s > 0 (not representable at s = 0)".into(),
        ));
    }
    let sheared = noise.shear(theta)?;
    let evolver = SheEvolver::new(&sheared)?;
    let grid = evolver.grid().clone();
    let (src, rounding_error) = grid.nearest_index(y - theta * s);
    let col = evolver.dirac_column(-s, 0.0, src)?;
    let ops = evolver.ops();
    let mut ws = ops.workspace();
    let mut logbuf = Vec::new();
    let mut u = Vec::new();
    log_derivative(ops, &mut ws, &col, theta, &mut logbuf, &mut u);
    Ok(DiracBurgersSolution {
        theta,
        s,
        y,
        rounding_error,
        field: ScalarField::new(grid, 0.0, u)?,
    })
}

/// Busemann function `int_0^x u(t, y) dy` by spectral antiderivative.
pub fn busemann(sol: &BurgersSolution, x: f64) -> f64 {
    let grid = sol.field.grid();
    let n = grid.n_space();
    let ops = SpectralOps::new(n);
    let mut ws = ops.workspace();
    let centered: Vec<f64> = sol.field.values().iter().map(|v| v - sol.theta).collect();
    let mut anti = vec![0.0; n];
    ops.antiderivative(&centered, &mut anti, &mut ws);
    let coeffs = ops.coefficients(&anti, &mut ws);
    sol.theta * x + eval_interpolant(&coeffs, x) - eval_interpolant(&coeffs, 0.0)
}

/// Sup-distance at `eval_t` between runs started from flat data at `-T1`
/// and `-T2` under common noise.
pub fn ofos_gap(
    noise: &NoiseRealization,
    theta: f64,
    t1: f64,
    t2: f64,
    eval_t: f64,
) -> Result<f64> {
    if !(t1 <= t2) {
        return Err(Error::Domain("ofos gap needs T1 <= T2".into()));
    }
    let a = burgers_from_flat(noise, theta, -t1, eval_t)?;
    let b = burgers_from_flat(noise, theta, -t2, eval_t)?;
    Ok(a
        .field
        .values()
        .iter()
        .zip(b.field.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{torus_heat_kernel, torus_heat_kernel_dx};
    use crate::noise::{sample_noise, shear_noise, CovarianceSpec};
    use crate::she::SheEvolver;

    fn grid(n: usize, t0: f64, t1: f64, dt: f64) -> Arc<TorusGrid> {
        Arc::new(TorusGrid::new(n, t0, t1, dt).unwrap())
    }

    #[test]
    fn zero_noise_stays_constant() {
        let g = grid(32, -1.0, 0.0, 1e-3);
        let noise = sample_noise(&CovarianceSpec::zero(), &g, 0).unwrap();
        let run = burgers_run(&noise, 0.7, -1.0, 0.0).unwrap();
        for &t in &[-1.0, -0.5, 0.0] {
            for &v in run.u.profile_at_time(t).unwrap() {
                assert!((v - 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_is_conserved_for_random_noise() {
        let g = grid(64, -1.0, 0.0, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        for (i, &theta) in [-1.0, 0.0, 2.0].iter().enumerate() {
            let noise = sample_noise(&spec, &g, 100 + i as u64).unwrap();
            let run = burgers_run(&noise, theta, -1.0, 0.0).unwrap();
            assert!(run.max_mean_dev < MEAN_TOL, "dev {}", run.max_mean_dev);
        }
    }

    #[test]
    fn shear_construction_matches_tilted_data_oracle() {
        // Independent route: Z_theta(t, x) = e^{theta x} V(t, x) with V a
        // periodic SHE field under the exponentially tilted semigroup and
        // the *unsheared* noise; u = theta + d/dx log V. Same seed.
        let n = 256;
        let g = grid(n, -0.5, 0.0, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        let noise = sample_noise(&spec, &g, 2024).unwrap();
        let theta = 0.8;
        let sol = burgers_from_flat(&noise, theta, -0.5, 0.0).unwrap();

        let evolver = SheEvolver::new(&noise).unwrap();
        let (v, _) = evolver.moment_fields(theta, -0.5, 0.0).unwrap();
        let ops = SpectralOps::new(n);
        let mut ws = ops.workspace();
        let logv: Vec<f64> = v.values().iter().map(|z| z.ln()).collect();
        let mut du = vec![0.0; n];
        ops.derivative_dealiased(&logv, &mut du, &mut ws);

        let mut worst = 0.0f64;
        for (a, d) in sol.field.values().iter().zip(&du) {
            worst = worst.max((a - (theta + d)).abs());
        }
        assert!(worst < 5e-4, "oracle mismatch {worst}");
    }

    #[test]
    fn shear_covariance_is_exact_by_construction() {
        let g = grid(64, -0.5, 0.0, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        let noise = sample_noise(&spec, &g, 7).unwrap();
        let theta = 1.25;
        let direct = burgers_from_flat(&noise, theta, -0.5, 0.0).unwrap();
        let pre_sheared = shear_noise(&noise, theta).unwrap();
        let zero_mean = burgers_from_flat(&pre_sheared, 0.0, -0.5, 0.0).unwrap();
        for (a, b) in direct.field.values().iter().zip(zero_mean.field.values()) {
            assert!((a - (theta + b)).abs() < 1e-9);
        }
    }

    #[test]
    fn dirac_zero_noise_closed_form() {
        // U_theta(0, x; -s, y) = theta + (d/dx log G_s)(x - y + theta s).
        let n = 128;
        let s = 0.5;
        let theta = 0.5; // theta * s * n = 32, grid-aligned
        let y = 0.25;
        let g = grid(n, -s, 0.0, 1e-3);
        let noise = sample_noise(&CovarianceSpec::zero(), &g, 0).unwrap();
        let sol = burgers_from_dirac(&noise, theta, s, y).unwrap();
        assert!(sol.rounding_error < 1e-12);
        let mut worst = 0.0f64;
        for (i, &v) in sol.field.values().iter().enumerate() {
            let arg = i as f64 / n as f64 - y + theta * s;
            let expect =
                theta + torus_heat_kernel_dx(s, arg).unwrap() / torus_heat_kernel(s, arg).unwrap();
            worst = worst.max((v - expect).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
        // Winding of the log makes the spatial mean exactly theta.
        let mean = sol.field.mean();
        assert!((mean - theta).abs() < 1e-8);
    }

    #[test]
    fn dirac_data_needs_positive_s() {
        let g = grid(32, -1.0, 0.0, 1e-3);
        let noise = sample_noise(&CovarianceSpec::default_smooth(), &g, 0).unwrap();
        assert!(burgers_from_dirac(&noise, 0.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn dirac_forgets_initial_data() {
        // With s large the Dirac solution approaches the flat-start one.
        let g = grid(64, -10.0, 0.0, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        let noise = sample_noise(&spec, &g, 99).unwrap();
        let dirac = burgers_from_dirac(&noise, 0.0, 10.0, 0.5).unwrap();
        let flat = burgers_from_flat(&noise, 0.0, -10.0, 0.0).unwrap();
        let gap = dirac
            .field
            .values()
            .iter()
            .zip(flat.field.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(gap < 1e-2, "gap {gap}");
    }

    #[test]
    fn busemann_endpoints_and_constant_case() {
        let g = grid(64, -0.5, 0.0, 1e-3);
        let noise = sample_noise(&CovarianceSpec::default_smooth(), &g, 3).unwrap();
        let sol = burgers_from_flat(&noise, 1.0, -0.5, 0.0).unwrap();
        assert_eq!(busemann(&sol, 0.0), 0.0);
        assert!((busemann(&sol, 1.0) - 1.0).abs() < 1e-10);
        let zero = sample_noise(&CovarianceSpec::zero(), &g, 0).unwrap();
        let flat = burgers_from_flat(&zero, 1.0, -0.5, 0.0).unwrap();
        assert!((busemann(&flat, 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ofos_gap_trivial_cases() {
        let g = grid(32, -2.0, 0.0, 1e-3);
        let spec = CovarianceSpec::default_smooth();
        let noise = sample_noise(&spec, &g, 5).unwrap();
        assert_eq!(ofos_gap(&noise, 0.3, 1.0, 1.0, 0.0).unwrap(), 0.0);
        let zero = sample_noise(&CovarianceSpec::zero(), &g, 0).unwrap();
        assert!(ofos_gap(&zero, 0.3, 1.0, 2.0, 0.0).unwrap() < 1e-12);
        assert!(ofos_gap(&noise, 0.0, 2.0, 1.0, 0.0).is_err());
    }
}
