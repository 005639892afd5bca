//! Normalized steady states `(F, M)` with `F = T e^{-A(x, eps M)}`.
//!
//! On a grid the shape is sampled at cell centres and the analytic tail
//! beyond the last centre is lumped into the last cell, which is what the
//! exact-shift scheme in [`crate::dynamics`] keeps stationary. The root
//! condition uses the discrete identity `int a F = M`:
//!
//! `Phi_h(eps, m) = m * sum(w) / sum(a w)`, `w_i = e^{-A(x_i, eps m)}`,
//!
//! which agrees with the continuum `m * int e^{-A}` to `O(dx^2)` and whose
//! roots are exact fixed points of the discrete activity map.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Density, Grid};
use crate::model::RateModel;

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub profile: Density,
    pub activity: f64,
    pub eps: f64,
    /// `|Phi(eps, M) - 1|`.
    pub residual: f64,
    /// `T = 1 / int e^{-A}`.
    pub normalization: f64,
}

/// Unnormalized shape `w_i` with the lumped tail in the last cell.
pub fn steady_shape(model: &RateModel, eps: f64, m: f64, grid: &Grid) -> Result<Vec<f64>> {
    let mu = eps * m;
    let n = grid.n();
    let dx = grid.dx();
    let mut w: Vec<f64> = (0..n).map(|i| (-model.primitive(grid.center(i), mu)).exp()).collect();
    let last = grid.center(n - 1);
    let retained = (model.primitive(last, mu) - model.primitive(last + dx, mu)).exp();
    if retained < 1.0 {
        w[n - 1] /= 1.0 - retained;
    } else {
        // no decay past the last centre: nothing ever leaves it
        w[n - 1] = f64::INFINITY;
    }
    let total: f64 = w.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::QuadratureUnderflow);
    }
    Ok(w)
}

/// `F_{eps, m} = T_m e^{-A(x, eps m)}` normalized to unit mass.
pub fn steady_profile(model: &RateModel, eps: f64, m: f64, grid: &Grid) -> Result<Density> {
    check_args(eps, m)?;
    let w = steady_shape(model, eps, m, grid)?;
    let t = 1.0 / (w.iter().sum::<f64>() * grid.dx());
    Density::new(*grid, w.into_iter().map(|v| v * t).collect())
}

fn check_args(eps: f64, m: f64) -> Result<()> {
    if !(eps >= 0.0) || !(m >= 0.0) {
        return Err(Error::Domain(format!("need eps >= 0 and m >= 0, got eps = {eps}, m = {m}")));
    }
    Ok(())
}

/// Discrete `Phi(eps, m)`; `Phi(eps, 0) = 0` exactly.
pub fn phi(model: &RateModel, eps: f64, m: f64, grid: &Grid) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let mu = eps * m;
    let Ok(w) = steady_shape(model, eps, m, grid) else {
        return f64::INFINITY;
    };
    let (mut sw, mut saw) = (0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        sw += wi;
        saw += model.rate(grid.center(i), mu) * wi;
    }
    if saw == 0.0 {
        return f64::INFINITY;
    }
    m * sw / saw
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Upper end of the root scan; defaults to `2 a1`.
    pub m_max: Option<f64>,
    pub n_scan: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            m_max: None,
            n_scan: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadySolution {
    /// One state per root, sorted by activity.
    pub states: Vec<SteadyState>,
    pub warnings: Vec<String>,
}

/// Finds every root of `Phi(eps, .) = 1` on `[0, m_max]` by a sign scan
/// followed by bisection.
pub fn solve_steady(model: &RateModel, eps: f64, grid: &Grid, scan: ScanOptions) -> Result<SteadySolution> {
    check_args(eps, 0.0)?;
    let m_max = scan.m_max.unwrap_or(2.0 * model.a1());
    if m_max < model.a1() {
        return Err(Error::InvalidArgument(format!(
            "m_max = {m_max} is below a1 = {}, roots could be missed",
            model.a1()
        )));
    }
    if scan.n_scan < 64 {
        return Err(Error::InvalidArgument(format!("n_scan must be >= 64, got {}", scan.n_scan)));
    }
    let g = |m: f64| phi(model, eps, m, grid) - 1.0;
    let h = m_max / scan.n_scan as f64;
    let mut brackets = Vec::new();
    let mut prev = (0.0, g(0.0));
    for k in 1..=scan.n_scan {
        let m = k as f64 * h;
        let v = g(m);
        if v == 0.0 {
            brackets.push((k, m, m));
        } else if prev.1 != 0.0 && (prev.1 < 0.0) != (v < 0.0) {
            brackets.push((k, prev.0, m));
        }
        prev = (m, v);
    }

    let mut warnings = Vec::new();
    for pair in brackets.windows(2) {
        if pair[1].0 - pair[0].0 <= 1 {
            warnings.push(format!(
                "ScanTooCoarse: roots near m = {} and m = {} are within one scan cell",
                pair[0].2, pair[1].2
            ));
        }
    }

    let mut states = Vec::with_capacity(brackets.len());
    for (_, lo, hi) in brackets {
        let m = bisect(&g, lo, hi);
        let residual = g(m).abs();
        let profile = steady_profile(model, eps, m, grid)?;
        let w = steady_shape(model, eps, m, grid)?;
        states.push(SteadyState {
            profile,
            activity: m,
            eps,
            residual,
            normalization: 1.0 / (w.iter().sum::<f64>() * grid.dx()),
        });
    }
    if states.is_empty() {
        return Err(Error::NoRootFound { eps });
    }
    Ok(SteadySolution { states, warnings })
}

/// Convenience wrapper returning the single root of the weak regime.
pub fn solve_unique(model: &RateModel, eps: f64, grid: &Grid) -> Result<SteadyState> {
    let sol = solve_steady(model, eps, grid, ScanOptions::default())?;
    if sol.states.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "expected a unique steady state at eps = {eps}, found {}",
            sol.states.len()
        )));
    }
    Ok(sol.states.into_iter().next().unwrap())
}

fn bisect(g: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm.abs() <= 1e-14 {
            return mid;
        }
        if (gm < 0.0) == (glo < 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    if g(hi).abs() < g(lo).abs() {
        hi
    } else {
        lo
    }
}

/// Slope of a root condition at a root.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Margin {
    pub value: f64,
    /// The slope is too small to certify a simple root.
    pub degenerate: bool,
}

/// Central-difference slope of `phi` at `m`; a slope below `1e-6` in
/// magnitude marks a tangency.
pub fn margin_of(phi: impl Fn(f64) -> f64, m: f64) -> Margin {
    let h = 1e-5 * m.abs().max(1.0);
    let lo = (m - h).max(0.0);
    let value = (phi(m + h) - phi(lo)) / (m + h - lo);
    Margin {
        value,
        degenerate: value.abs() < 1e-6,
    }
}

/// `dPhi/dm` at `(eps, M)`; positive values certify a simple root.
pub fn uniqueness_margin(model: &RateModel, eps: f64, m: f64, grid: &Grid) -> Margin {
    margin_of(|x| phi(model, eps, x, grid), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn soft() -> RateModel {
        RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_rate_steady_state() {
        let m = RateModel::constant(1.5).unwrap();
        let grid = Grid::new(40.0, 800).unwrap();
        for eps in [0.0, 0.1, 0.3] {
            let sol = solve_steady(&m, eps, &grid, ScanOptions::default()).unwrap();
            assert_eq!(sol.states.len(), 1);
            let s = &sol.states[0];
            assert!((s.activity - 1.5).abs() < 1e-12);
            assert!((s.profile.mass() - 1.0).abs() < 1e-12);
        }
        assert!((phi(&m, 0.2, 0.75, &grid) - 0.5).abs() < 1e-14);
        assert!((uniqueness_margin(&m, 0.0, 1.5, &grid).value - 1.0 / 1.5).abs() < 1e-9);
    }

    #[test]
    fn phi_at_zero_is_zero() {
        let grid = Grid::new(20.0, 64).unwrap();
        assert_eq!(phi(&soft(), 0.3, 0.0, &grid), 0.0);
    }

    #[test]
    fn phi_matches_quadrature_to_second_order() {
        // m * int_0^inf e^{-(x - 1 + e^{-x})} dx at m = 1
        let oracle = quad::integrate(|x| (-(x - 1.0 + (-x).exp())).exp(), 0.0, 60.0, 1e-13, 0.0);
        let err = |n| (phi(&soft(), 0.0, 1.0, &Grid::new(60.0, n).unwrap()) - oracle).abs();
        let (e1, e2) = (err(600), err(1200));
        let dx = 0.1;
        assert!(e1 < dx * dx, "error {e1}");
        assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
    }

    #[test]
    fn eps_zero_profile_ignores_m() {
        let grid = Grid::new(30.0, 300).unwrap();
        let a = steady_profile(&soft(), 0.0, 0.3, &grid).unwrap();
        let b = steady_profile(&soft(), 0.0, 1.7, &grid).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn profile_converges_under_refinement() {
        let model = soft();
        let coarse = Grid::new(40.0, 2000).unwrap();
        let fine = Grid::new(40.0, 20000).unwrap();
        let f = steady_profile(&model, 0.1, 1.0, &coarse).unwrap();
        // normalization from the fine-grid quadrature, shape from the closed form
        let t_fine = 1.0 / (steady_shape(&model, 0.1, 1.0, &fine).unwrap().iter().sum::<f64>() * fine.dx());
        let l1: f64 = (0..coarse.n() - 1)
            .map(|i| (f.values[i] - t_fine * (-model.primitive(coarse.center(i), 0.1)).exp()).abs())
            .sum::<f64>()
            * coarse.dx();
        assert!(l1 < 1e-4, "l1 {l1}");
    }

    #[test]
    fn eps_zero_root_and_margin() {
        let grid = Grid::new(60.0, 1200).unwrap();
        let integral = quad::integrate(|x| (-(x - 1.0 + (-x).exp())).exp(), 0.0, 60.0, 1e-13, 0.0);
        let s = solve_unique(&soft(), 0.0, &grid).unwrap();
        let dx = grid.dx();
        assert!((s.activity - 1.0 / integral).abs() < dx * dx);
        let margin = uniqueness_margin(&soft(), 0.0, s.activity, &grid);
        assert!(!margin.degenerate);
        assert!((margin.value - integral).abs() < dx * dx);
    }

    #[test]
    fn steady_state_invariants() {
        let model = soft();
        let grid = Grid::new(40.0, 800).unwrap();
        let dx = grid.dx();
        let bound_c = model.a1() * (0.5 * model.a0() * model.level_crossing(0.5)).exp();
        for eps in [0.0, 0.05, 0.2] {
            let s = solve_unique(&model, eps, &grid).unwrap();
            assert!((s.profile.mass() - 1.0).abs() <= 1e-10);
            assert!(s.residual <= 1e-12);
            assert!((s.profile.values[0] - s.activity).abs() <= model.a1() * s.activity * dx);
            for (i, v) in s.profile.values.iter().enumerate().take(grid.n() - 1) {
                assert!(*v >= 0.0 && *v <= bound_c * (-0.5 * model.a0() * grid.center(i)).exp());
            }
        }
    }

    #[test]
    fn tangency_is_flagged() {
        let m = margin_of(|x| 1.0 + (x - 0.7).powi(2), 0.7);
        assert!(m.degenerate);
        assert!(!margin_of(|x| 2.0 * x, 0.5).degenerate);
    }

    #[test]
    fn scan_argument_checks() {
        let grid = Grid::new(20.0, 64).unwrap();
        let opts = ScanOptions { m_max: Some(1.0), n_scan: 128 };
        assert!(matches!(solve_steady(&soft(), 0.1, &grid, opts), Err(Error::InvalidArgument(_))));
        let opts = ScanOptions { m_max: None, n_scan: 32 };
        assert!(matches!(solve_steady(&soft(), 0.1, &grid, opts), Err(Error::InvalidArgument(_))));
    }
}
