//! Truncated uniform age grids and cell-average densities.
//!
//! Values are cell averages, so `mass = sum(values) * dx` is the exact
//! discrete invariant of the transport scheme.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateModel;

/// `[0, x_max]` split into `n` equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_max: f64,
    n: usize,
}

impl Grid {
    pub const MIN_CELLS: usize = 16;

    pub fn new(x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > 0.0) || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!("x_max must be positive, got {x_max}")));
        }
        if n < Self::MIN_CELLS {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {} cells, got {n}",
                Self::MIN_CELLS
            )));
        }
        Ok(Grid { x_max, n })
    }

    /// Grid long enough that the steady tail `e^{-a0 x / 2}` beyond `x_max`
    /// falls below `tol`: `x_max = 4 (2/a0) ln(1/tol)`, with cells of width
    /// at most `dx`.
    pub fn sized_for(model: &RateModel, tol: f64, dx: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) || !(dx > 0.0) {
            return Err(Error::InvalidArgument("need 0 < tol < 1 and dx > 0".into()));
        }
        let x_max = 4.0 * (2.0 / model.a0()) * (1.0 / tol).ln();
        Grid::new(x_max, ((x_max / dx).ceil() as usize).max(Self::MIN_CELLS))
    }

    /// Whether the a priori steady tail bound beyond `x_max` is below `tol`.
    pub fn tail_below(&self, model: &RateModel, tol: f64) -> bool {
        truncation_bound(model, self) <= tol
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.x_max / self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Same domain with twice as many cells.
    pub fn refined(&self) -> Self {
        Grid {
            x_max: self.x_max,
            n: 2 * self.n,
        }
    }
}

/// Cell averages on a grid. Physical states are nonnegative; perturbations
/// may be signed.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub values: Vec<f64>,
    grid: Grid,
}

impl Density {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidArgument(format!(
                "density has {} values for a grid of {} cells",
                values.len(),
                grid.n()
            )));
        }
        Ok(Density { values, grid })
    }

    pub fn zeros(grid: Grid) -> Self {
        Density {
            values: vec![0.0; grid.n()],
            grid,
        }
    }

    /// Samples `f` at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Density {
            values: grid.centers().into_iter().map(f).collect(),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// `sum |f_i| w(x_i) dx` with `w = e^{-delta x}` when a weight is given.
    pub fn l1_norm(&self, delta: Option<f64>) -> f64 {
        l1_norm(&self.values, self.grid.dx(), delta)
    }

    pub fn l1_distance(&self, other: &Density) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.dx()
    }

    /// Rescales to unit mass.
    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot normalize a density of mass {m}")));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(self)
    }

    /// Classical 1-D Wasserstein distance `int |CDF_f - CDF_g| dx`, with the
    /// CDFs taken at cell edges and integrated by the trapezoid rule.
    ///
    /// It dominates the distance built on `|x - y| ^ 1`, so it is only used
    /// on the majorant side of inequalities. The discrete bound
    /// `|sum phi (f - g) dx| <= Lip(phi) * w1_flat(f, g)` for grid functions
    /// holds exactly by summation by parts.
    pub fn w1_flat(&self, other: &Density) -> Result<f64> {
        let (mf, mg) = (self.mass(), other.mass());
        if (mf - mg).abs() > 1e-8 {
            return Err(Error::MassMismatch { left: mf, right: mg });
        }
        let dx = self.grid.dx();
        let mut diff = 0.0;
        let mut prev = 0.0f64;
        let mut total = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            diff += (a - b) * dx;
            total += 0.5 * dx * (prev.abs() + diff.abs());
            prev = diff;
        }
        Ok(total)
    }

    /// Writes `x,<value_name>` rows.
    pub fn write_csv(&self, path: &Path, value_name: &str) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,{value_name}")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.grid.center(i), v)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn l1_norm(values: &[f64], dx: f64, delta: Option<f64>) -> f64 {
    match delta {
        None => values.iter().map(|v| v.abs()).sum::<f64>() * dx,
        Some(d) => values
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs() * (-d * (i as f64 + 0.5) * dx).exp())
            .sum::<f64>()
            * dx,
    }
}

/// A priori bound on the steady mass beyond `x_max`:
/// `C (2/a0) e^{-a0 x_max / 2}` with `C = a1 e^{a0 x0 / 2}`, where `x0` is
/// the point after which `a(x, 0) >= a0 / 2`.
pub fn truncation_bound(model: &RateModel, grid: &Grid) -> f64 {
    let a0 = model.a0();
    let x0 = model.level_crossing(0.5);
    let c = model.a1() * (0.5 * a0 * x0).exp();
    c * (2.0 / a0) * (-0.5 * a0 * grid.x_max()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(x_max: f64, n: usize) -> Grid {
        Grid::new(x_max, n).unwrap()
    }

    #[test]
    fn rejects_small_or_empty_grids() {
        assert!(Grid::new(1.0, 15).is_err());
        assert!(Grid::new(0.0, 64).is_err());
        assert!(Grid::new(f64::NAN, 64).is_err());
    }

    #[test]
    fn exponential_mass() {
        let g = grid(40.0, 800);
        let f = Density::from_fn(g, |x| (-x).exp());
        // midpoint rule on [0, 40]: (1 - e^{-40}) (1 - dx^2/24 + ...)
        let dx = g.dx();
        let oracle = (1.0 - (-40.0f64).exp()) * (dx / 2.0) / (dx / 2.0).sinh();
        assert!((f.mass() - oracle).abs() < 1e-14);
        assert!((f.mass() - 1.0).abs() < dx * dx / 20.0);
        assert_eq!(Density::zeros(g).mass(), 0.0);
    }

    #[test]
    fn weighted_indicator_norm() {
        let g = grid(4.0, 400);
        let f = Density::from_fn(g, |x| if x < 1.0 { 1.0 } else { 0.0 });
        assert!((f.l1_norm(None) - 1.0).abs() < 1e-12);
        let dx = g.dx();
        assert!((f.l1_norm(Some(1.0)) - (1.0 - (-1.0f64).exp())).abs() < dx * dx);
    }

    #[test]
    fn w1_of_translated_atoms() {
        let g = grid(4.0, 40);
        let mut f = Density::zeros(g);
        let mut h = Density::zeros(g);
        f.values[4] = 1.0 / g.dx();
        h.values[14] = 1.0 / g.dx();
        assert!((f.w1_flat(&h).unwrap() - 1.0).abs() <= g.dx());
        assert_eq!(f.w1_flat(&f).unwrap(), 0.0);
        let mut heavy = h.clone();
        heavy.values[0] = 1.0;
        assert!(matches!(f.w1_flat(&heavy), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn truncation_bound_constant_rate() {
        let m = RateModel::constant(1.0).unwrap();
        let b = truncation_bound(&m, &grid(40.0, 800));
        assert!((b - 2.0 * (-20.0f64).exp()).abs() < 1e-22);
        // the steady tail int_40^inf e^{-x} dx sits under it
        assert!((-40.0f64).exp() <= b);
        let b80 = truncation_bound(&m, &grid(80.0, 800));
        assert!((b80 / 2.0 - (b / 2.0).powi(2)).abs() < 1e-30);
    }

    #[test]
    fn sized_grid_meets_tail() {
        let m = RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0).unwrap();
        let g = Grid::sized_for(&m, 1e-6, 0.1).unwrap();
        assert!(g.tail_below(&m, 1e-6));
        assert!(g.dx() <= 0.1);
    }
}
