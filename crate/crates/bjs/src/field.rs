//! Spatial profiles at fixed times, density profiles, evolution histories,
//! and their CSV / binary serialization.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::TorusGrid;

/// One spatial profile at a fixed time.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    time: f64,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<TorusGrid>, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_space() {
            return Err(Error::GridMismatch(format!(
                "field length {} vs n_space {}",
                values.len(),
                grid.n_space()
            )));
        }
        Ok(ScalarField { grid, time, values })
    }

    pub fn constant(grid: Arc<TorusGrid>, time: f64, value: f64) -> Self {
        let n = grid.n_space();
        ScalarField {
            grid,
            time,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid mean, which equals the integral over the torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Linear interpolation at a torus point.
    pub fn interp(&self, x: f64) -> f64 {
        interp_periodic(&self.values, x)
    }
}

/// Linear interpolation of a periodic profile sampled at `x_i = i/n`.
pub fn interp_periodic(values: &[f64], x: f64) -> f64 {
    let n = values.len();
    let pos = x.rem_euclid(1.0) * n as f64;
    let i = pos.floor() as usize % n;
    let frac = pos - pos.floor();
    values[i] * (1.0 - frac) + values[(i + 1) % n] * frac
}

/// Nonnegative profile with unit mass (`dx * sum = 1`).
#[derive(Debug, Clone)]
pub struct DensityField {
    field: ScalarField,
}

/// Tolerance on the mass of a density profile.
pub const MASS_TOL: f64 = 1e-10;

impl DensityField {
    pub fn new(grid: Arc<TorusGrid>, time: f64, values: Vec<f64>) -> Result<Self> {
        let field = ScalarField::new(grid, time, values)?;
        let d = DensityField { field };
        d.check()?;
        Ok(d)
    }

    pub fn uniform(grid: Arc<TorusGrid>, time: f64) -> Self {
        DensityField {
            field: ScalarField::constant(grid, time, 1.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.field.min() < 0.0 {
            return Err(Error::PositivityLost);
        }
        let mass = self.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("density mass {mass} is not 1")));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.field.mean()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.field.grid()
    }

    pub fn time(&self) -> f64 {
        self.field.time()
    }

    /// L1 distance to another density on the same grid.
    pub fn l1_distance(&self, other: &DensityField) -> f64 {
        let dx = self.grid().dx();
        self.values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * dx
    }
}

/// Profiles recorded at consecutive grid steps of one evolution.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    grid: Arc<TorusGrid>,
    first_step: usize,
    profiles: Vec<Vec<f64>>,
}

impl FieldHistory {
    pub fn new(grid: Arc<TorusGrid>, first_step: usize, profiles: Vec<Vec<f64>>) -> Self {
        FieldHistory {
            grid,
            first_step,
            profiles,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.grid.time_of_step(self.first_step)
    }

    pub fn last_time(&self) -> f64 {
        self.grid.time_of_step(self.first_step + self.profiles.len() - 1)
    }

    pub fn profile_at_step(&self, step: usize) -> &[f64] {
        &self.profiles[step - self.first_step]
    }

    pub fn profile_at_time(&self, t: f64) -> Result<&[f64]> {
        let step = self.grid.step_of_time(t)?;
        if step < self.first_step || step >= self.first_step + self.profiles.len() {
            return Err(Error::OffGrid(t));
        }
        Ok(self.profile_at_step(step))
    }

    pub fn field_at_time(&self, t: f64) -> Result<ScalarField> {
        Ok(ScalarField::new(
            self.grid.clone(),
            t,
            self.profile_at_time(t)?.to_vec(),
        )?)
    }

    /// Profile linearly interpolated between recorded steps.
    pub fn interp_time(&self, t: f64) -> Vec<f64> {
        let dt = self.grid.dt();
        let rel = (t - self.first_time()) / dt;
        let last = (self.profiles.len() - 1) as f64;
        let rel = rel.clamp(0.0, last);
        let j = (rel.floor() as usize).min(self.profiles.len() - 1);
        let frac = rel - j as f64;
        if frac < 1e-12 || j + 1 >= self.profiles.len() {
            return self.profiles[j].clone();
        }
        self.profiles[j]
            .iter()
            .zip(&self.profiles[j + 1])
            .map(|(a, b)| a * (1.0 - frac) + b * frac)
            .collect()
    }

    /// Value at `(t, x)`, linear in both coordinates.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let dt = self.grid.dt();
        let rel = (t - self.first_time()) / dt;
        let last = (self.profiles.len() - 1) as f64;
        let rel = rel.clamp(0.0, last);
        let j = (rel.floor() as usize).min(self.profiles.len() - 1);
        let frac = rel - j as f64;
        let a = interp_periodic(&self.profiles[j], x);
        if frac < 1e-12 || j + 1 >= self.profiles.len() {
            return a;
        }
        let b = interp_periodic(&self.profiles[j + 1], x);
        a * (1.0 - frac) + b * frac
    }
}

// --- serialization -------------------------------------------------------

const MAGIC: &[u8; 5] = b"BJSF1";

/// Write profiles as CSV with header `time,x_0,...,x_{n-1}`.
pub fn write_csv(path: &Path, times: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    out.push_str("time");
    for i in 0..n {
        out.push_str(&format!(",x_{i}"));
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        out.push_str(&format!("{t:.12e}"));
        for v in row {
            out.push_str(&format!(",{v:.12e}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Binary dump: magic `BJSF1`, row and column counts as little-endian u64,
/// then each row as `time` followed by the values, all little-endian f64.
pub fn write_binary(path: &Path, times: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let handle_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(handle_err)?);
    let n = rows.first().map(|r| r.len()).unwrap_or(0);
    f.write_all(MAGIC).map_err(handle_err)?;
    f.write_all(&(rows.len() as u64).to_le_bytes())
        .map_err(handle_err)?;
    f.write_all(&(n as u64).to_le_bytes()).map_err(handle_err)?;
    for (t, row) in times.iter().zip(rows) {
        f.write_all(&t.to_le_bytes()).map_err(handle_err)?;
        for v in row {
            f.write_all(&v.to_le_bytes()).map_err(handle_err)?;
        }
    }
    Ok(())
}

/// Read back a [`write_binary`] dump.
pub fn read_binary(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let handle_err = |e| Error::io(path.display().to_string(), e);
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(handle_err)?);
    let mut magic = [0u8; 5];
    f.read_exact(&mut magic).map_err(handle_err)?;
    if &magic != MAGIC {
        return Err(Error::Domain("bad magic in binary dump".into()));
    }
    let mut b8 = [0u8; 8];
    f.read_exact(&mut b8).map_err(handle_err)?;
    let rows = u64::from_le_bytes(b8) as usize;
    f.read_exact(&mut b8).map_err(handle_err)?;
    let cols = u64::from_le_bytes(b8) as usize;
    let mut times = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows);
    for _ in 0..rows {
        f.read_exact(&mut b8).map_err(handle_err)?;
        times.push(f64::from_le_bytes(b8));
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            f.read_exact(&mut b8).map_err(handle_err)?;
            row.push(f64::from_le_bytes(b8));
        }
        data.push(row);
    }
    Ok((times, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Arc<TorusGrid> {
        Arc::new(TorusGrid::new(8, 0.0, 1.0, 0.25).unwrap())
    }

    #[test]
    fn density_rejects_bad_mass() {
        let g = grid();
        assert!(DensityField::new(g.clone(), 0.0, vec![2.0; 8]).is_err());
        assert!(DensityField::new(g.clone(), 0.0, vec![1.0; 8]).is_ok());
        let mut vals = vec![1.0; 8];
        vals[0] = -0.1;
        vals[1] = 2.1;
        assert!(DensityField::new(g, 0.0, vals).is_err());
    }

    #[test]
    fn interp_wraps_around() {
        let vals = vec![0.0, 1.0, 2.0, 3.0];
        assert_eq!(interp_periodic(&vals, 0.25), 1.0);
        assert!((interp_periodic(&vals, 0.875) - 1.5).abs() < 1e-12);
        assert!((interp_periodic(&vals, -0.125) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn history_lookup() {
        let g = grid();
        let h = FieldHistory::new(g, 1, vec![vec![1.0; 8], vec![2.0; 8], vec![3.0; 8]]);
        assert_eq!(h.first_time(), 0.25);
        assert_eq!(h.last_time(), 0.75);
        assert_eq!(h.profile_at_time(0.5).unwrap()[0], 2.0);
        assert!(h.profile_at_time(0.0).is_err());
        assert!((h.value_at(0.375, 0.5) - 1.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn binary_round_trip(rows in proptest::collection::vec(
            proptest::collection::vec(-1e6f64..1e6, 4), 1..6))
        {
            let dir = std::env::temp_dir().join(format!("bjs-io-{}", std::process::id()));
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join(format!("dump-{:x}.bin", rand::random::<u64>()));
            let times: Vec<f64> = (0..rows.len()).map(|i| i as f64 * 0.5).collect();
            write_binary(&path, &times, &rows).unwrap();
            let (t2, r2) = read_binary(&path).unwrap();
            std::fs::remove_file(&path).ok();
            prop_assert_eq!(times, t2);
            prop_assert_eq!(rows, r2);
        }
    }
}
