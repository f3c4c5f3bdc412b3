//! The derivative field `g_theta`: a positivity-preserving, exactly
//! mass-conservative finite-volume solver for
//! `dg/dt = Lap(g)/2 + d/dx(u g)`, the theta-derivative identity check, and
//! the explicit large-time limit formula.
//!
//! The flux uses Scharfetter-Gummel exponential fitting (Chang-Cooper type):
//! through each face, `J = (D/h) [B(w) g_R - B(-w) g_L]` with Peclet number
//! `w = u h / D` and Bernoulli function `B(w) = w / (1 - e^{-w})`, which is
//! positivity-preserving for `dt <= dx^2 / (1 + |u| dx)`.

use std::sync::Arc;

use crate::burgers::{burgers_run, BurgersRun};
use crate::error::{Error, Result};
use crate::field::{DensityField, FieldHistory, ScalarField};
use crate::grid::TorusGrid;
use crate::noise::NoiseRealization;
use crate::she::SheEvolver;
use crate::spectral::SpectralOps;

const DIFFUSION: f64 = 0.5;

fn bernoulli(w: f64) -> f64 {
    if w.abs() < 1e-5 {
        1.0 + 0.5 * w + w * w / 12.0
    } else if w > 40.0 {
        w
    } else if w < -40.0 {
        -w * w.exp()
    } else {
        w / (1.0 - (-w).exp())
    }
}

/// Precomputed face factors for one drift profile.
struct FaceFactors {
    /// B(w) at face i+1/2 (multiplies the right cell).
    b_plus: Vec<f64>,
    /// B(-w) at face i+1/2 (multiplies the left cell).
    b_minus: Vec<f64>,
    max_drift: f64,
}

impl FaceFactors {
    fn new(drift: &[f64], dx: f64) -> Self {
        let n = drift.len();
        let mut b_plus = Vec::with_capacity(n);
        let mut b_minus = Vec::with_capacity(n);
        let mut max_drift = 0.0f64;
        for i in 0..n {
            let u_face = 0.5 * (drift[i] + drift[(i + 1) % n]);
            max_drift = max_drift.max(u_face.abs());
            let w = u_face * dx / DIFFUSION;
            b_plus.push(bernoulli(w));
            b_minus.push(bernoulli(-w));
        }
        FaceFactors {
            b_plus,
            b_minus,
            max_drift,
        }
    }

    fn max_stable_dt(&self, dx: f64) -> f64 {
        dx * dx / (1.0 + self.max_drift * dx)
    }

    /// One explicit flux sweep; conserves the cell sum exactly.
    fn sweep(&self, g: &mut [f64], scratch: &mut Vec<f64>, dx: f64, dt: f64) {
        let n = g.len();
        let coef = DIFFUSION / dx;
        scratch.clear();
        // flux[i] lives at face i+1/2
        scratch.extend((0..n).map(|i| {
            coef * (self.b_plus[i] * g[(i + 1) % n] - self.b_minus[i] * g[i])
        }));
        let rate = dt / dx;
        for i in 0..n {
            let j_right = scratch[i];
            let j_left = scratch[(i + n - 1) % n];
            g[i] += rate * (j_right - j_left);
        }
    }
}

/// One flux-form step of `dg/dt = Lap(g)/2 + d/dx(u g)`.
pub fn fp_step(g: &DensityField, drift: &[f64], dt: f64) -> Result<DensityField> {
    let grid = g.grid().clone();
    if drift.len() != grid.n_space() {
        return Err(Error::GridMismatch("drift length".into()));
    }
    let dx = grid.dx();
    let faces = FaceFactors::new(drift, dx);
    let max_dt = faces.max_stable_dt(dx);
    if dt > max_dt * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, max_dt });
    }
    let mut values = g.values().to_vec();
    let mut scratch = Vec::new();
    faces.sweep(&mut values, &mut scratch, dx, dt);
    DensityField::new(grid, g.time() + dt, values)
}

/// Drift supplied to [`solve_g`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// The running solution `u_theta(., .; -T)` started with the density.
    Running,
    /// A warm-started stand-in for the global solution: the Burgers run
    /// begins `t_warm` before the density does.
    GlobalProxy { t_warm: f64 },
}

/// Output of [`solve_g`].
pub struct GSolution {
    /// `g_theta(0, .; -T)`.
    pub final_g: DensityField,
    /// Every intermediate `g(t, .)` at drift-grid times (if recorded).
    pub history: Option<FieldHistory>,
    /// The Burgers run used as the drift (reusable by callers).
    pub drift: BurgersRun,
    /// Largest `|mass - 1|` seen during the evolution.
    pub max_mass_dev: f64,
}

/// Evolve `g` from `g_ic` at `-T` to time 0 under the Burgers drift.
///
/// Within each drift step the flux factors are frozen at the step's
/// time-midpoint drift and the density is advanced by however many
/// positivity-stable substeps are needed.
pub fn solve_g(
    noise: &NoiseRealization,
    theta: f64,
    horizon: f64,
    g_ic: &DensityField,
    mode: DriftMode,
    record_history: bool,
) -> Result<GSolution> {
    let drift_start = match mode {
        DriftMode::Running => -horizon,
        DriftMode::GlobalProxy { t_warm } => -horizon - t_warm,
    };
    let drift = burgers_run(noise, theta, drift_start, 0.0)?;
    let g = solve_g_with_drift(&drift, horizon, g_ic, record_history)?;
    Ok(GSolution {
        final_g: g.0,
        history: g.1,
        drift,
        max_mass_dev: g.2,
    })
}

/// Same as [`solve_g`] but reusing an existing drift run. The drift must
/// cover `[-horizon, 0]`.
pub fn solve_g_with_drift(
    drift: &BurgersRun,
    horizon: f64,
    g_ic: &DensityField,
    record_history: bool,
) -> Result<(DensityField, Option<FieldHistory>, f64)> {
    let grid = drift.grid().clone();
    if g_ic.grid().as_ref() != grid.as_ref() {
        return Err(Error::GridMismatch("g_ic grid differs from drift".into()));
    }
    let j0 = grid.step_of_time(-horizon)?;
    let j1 = grid.step_of_time(0.0)?;
    let dx = grid.dx();
    let dt_grid = grid.dt();
    let n = grid.n_space();
    let mut g = g_ic.values().to_vec();
    let mut scratch = Vec::new();
    let mut history = record_history.then(|| vec![g.clone()]);
    let mut max_mass_dev: f64 = 0.0;
    for j in j0..j1 {
        let u_now = drift.u.profile_at_step(j);
        let u_next = drift.u.profile_at_step(j + 1);
        let mid: Vec<f64> = u_now
            .iter()
            .zip(u_next)
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let faces = FaceFactors::new(&mid, dx);
        let n_sub = (dt_grid / faces.max_stable_dt(dx)).ceil().max(1.0) as usize;
        let dt_sub = dt_grid / n_sub as f64;
        for _ in 0..n_sub {
            faces.sweep(&mut g, &mut scratch, dx, dt_sub);
        }
        let min = g.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(Error::PositivityLost);
        }
        let mass = g.iter().sum::<f64>() / n as f64;
        max_mass_dev = max_mass_dev.max((mass - 1.0).abs());
        if max_mass_dev > crate::field::MASS_TOL {
            return Err(Error::Domain(format!("density mass drifted to {mass}")));
        }
        if let Some(h) = history.as_mut() {
            h.push(g.clone());
        }
    }
    let final_g = DensityField::new(grid.clone(), 0.0, g)?;
    let history = history.map(|profiles| FieldHistory::new(grid, j0, profiles));
    Ok((final_g, history, max_mass_dev))
}

/// Periodic potential with `g = 1 + d(phi)/dx`.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub field: ScalarField,
}

/// Mean-free potential of a density: `phi' = g - 1`.
pub fn potential_from_density(g: &DensityField) -> PotentialField {
    let grid = g.grid().clone();
    let n = grid.n_space();
    let ops = SpectralOps::new(n);
    let mut ws = ops.workspace();
    let centered: Vec<f64> = g.values().iter().map(|v| v - 1.0).collect();
    let mut phi = vec![0.0; n];
    ops.antiderivative(&centered, &mut phi, &mut ws);
    PotentialField {
        field: ScalarField::new(grid, g.time(), phi).expect("grid-sized"),
    }
}

/// Rebuild the density `1 + d(phi)/dx` from a potential.
pub fn density_values_from_potential(phi: &PotentialField) -> Vec<f64> {
    let grid = phi.field.grid();
    let n = grid.n_space();
    let ops = SpectralOps::new(n);
    let mut ws = ops.workspace();
    let mut dphi = vec![0.0; n];
    ops.derivative(phi.field.values(), &mut dphi, &mut ws);
    dphi.iter().map(|v| 1.0 + v).collect()
}

/// Sup-norm residual of the finite-difference theta-derivative identity:
/// `sup_x |(u_{theta+eps} - u_theta)/eps - g_theta|(0, x; -T)`, all three
/// runs under common noise.
pub fn derivative_identity_error(
    noise: &NoiseRealization,
    theta: f64,
    eps: f64,
    horizon: f64,
) -> Result<f64> {
    let base = solve_g(
        noise,
        theta,
        horizon,
        &DensityField::uniform(noise.grid().clone(), -horizon),
        DriftMode::Running,
        false,
    )?;
    let u_base = base.drift.u.profile_at_time(0.0)?;
    let bumped = burgers_run(noise, theta + eps, -horizon, 0.0)?;
    let u_bump = bumped.u.profile_at_time(0.0)?;
    let g = base.final_g.values();
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let quotient = (u_bump[i] - u_base[i]) / eps;
        worst = worst.max((quotient - g[i]).abs());
    }
    Ok(worst)
}

/// Output of [`g_explicit`].
pub struct GExplicit {
    /// The assembled profile; mass is 1 only up to quadrature error.
    pub profile: ScalarField,
    /// Crude bound on the truncated `s < s_min` contribution.
    pub tail_estimate: f64,
    /// Set when the tail estimate exceeds 0.05.
    pub tail_warning: bool,
    /// Largest shear rounding distance across quadrature nodes.
    pub max_rounding: f64,
    /// The s-nodes actually used (snapped to the time grid).
    pub s_nodes: Vec<f64>,
}

/// Assemble the large-time limit profile
/// `1 + int_0^{s_max} int_T U(-s, y) rho(0, x; s, y) [U(0, x; -s, y) - U(0, x)] dy ds`
/// with warm-started stand-ins for the global solution and geometric
/// s-quadrature refined toward `s = 0`.
pub fn g_explicit(
    noise: &NoiseRealization,
    theta: f64,
    s_max: f64,
    t_proxy: f64,
) -> Result<GExplicit> {
    const RATIO: f64 = 0.8;
    const S_MIN: f64 = 1e-3;
    let grid = noise.grid().clone();
    let n = grid.n_space();
    let dx = grid.dx();
    let dt = grid.dt();

    // Geometric nodes snapped to the grid, deduplicated, ascending.
    let mut nodes: Vec<f64> = Vec::new();
    let mut s = s_max;
    while s >= S_MIN.max(dt) * (1.0 - 1e-12) {
        let snapped = (s / dt).round() * dt;
        if snapped >= dt * 0.5
            && nodes.last().map_or(true, |&l| (l - snapped).abs() > dt * 0.5)
        {
            nodes.push(snapped);
        }
        s *= RATIO;
    }
    nodes.reverse();
    if nodes.is_empty() {
        return Err(Error::Domain("no quadrature nodes below s_max".into()));
    }

    let sheared = noise.shear(theta)?;
    let evolver = SheEvolver::new(&sheared)?;
    // G^theta_{-s,-T}(., -) for every node, and G^theta_{0,-T}(., -).
    let flat = evolver.evolve_history(vec![1.0; n], -t_proxy, 0.0)?;
    let flat_now = flat.profile_at_time(0.0)?.to_vec();
    // Warm stand-in for the global solution (outer factor and subtrahend).
    let warm = burgers_run(noise, theta, -t_proxy, 0.0)?;
    let u_now = warm.u.profile_at_time(0.0)?.to_vec();

    let ops = SpectralOps::new(n);
    let mut max_rounding = 0.0f64;
    // Integrand profiles I(s_k, x), assembled node by node. The mid-point
    // density and the Dirac-solution bracket share the same propagator
    // column, so the quotient cancels algebraically:
    //   rho * [U(0,x;-s,y) - U(0,x)]
    //     = (flat_s[y'] / flat_now[x]) * [(theta - u(0,x)) col_{y'}(x)
    //                                     + (d/dx col_{y'})(x)]
    // with y' the grid point of y - theta s. This avoids differentiating
    // the log of a barely-spread column at small s.
    let mut node_integrands: Vec<Vec<f64>> = Vec::with_capacity(nodes.len());
    for &s_k in &nodes {
        let p = evolver.propagator(-s_k, 0.0)?;
        let mut ws = ops.workspace();
        let mut dcols: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut dbuf = vec![0.0; n];
        for y in 0..n {
            ops.derivative(p.column(y), &mut dbuf, &mut ws);
            dcols.push(dbuf.clone());
        }
        let shift = theta * s_k;
        let (shift_cells, rounding) = grid.nearest_index(-shift);
        max_rounding = max_rounding.max(rounding);
        let flat_s = flat.profile_at_time(-s_k)?;
        let u_s = warm.u.profile_at_time(-s_k)?;
        let mut integrand = vec![0.0; n];
        for x in 0..n {
            let drift_gap = theta - u_now[x];
            let mut acc = 0.0;
            for iy in 0..n {
                // grid index of y - theta s
                let src = (iy + shift_cells) % n;
                acc += u_s[iy]
                    * flat_s[src]
                    * (drift_gap * p.entry(x, src) + dcols[src][x]);
            }
            integrand[x] = acc * dx / flat_now[x];
        }
        node_integrands.push(integrand);
    }

    // Trapezoid over the nodes, plus triangle down to s = 0 using the first
    // node (the integrand vanishes like sqrt(s) there).
    let mut profile = vec![1.0; n];
    for x in 0..n {
        let mut acc = 0.5 * node_integrands[0][x] * nodes[0];
        for k in 0..nodes.len() - 1 {
            acc += 0.5 * (node_integrands[k][x] + node_integrands[k + 1][x])
                * (nodes[k + 1] - nodes[k]);
        }
        profile[x] += acc;
    }
    let tail_estimate = nodes[0]
        * node_integrands[0]
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
    Ok(GExplicit {
        profile: ScalarField::new(grid, 0.0, profile)?,
        tail_estimate,
        tail_warning: tail_estimate > 0.05,
        max_rounding,
        s_nodes: nodes,
    })
}
