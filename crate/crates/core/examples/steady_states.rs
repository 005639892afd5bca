//! Steady states of the nonlinear problem and how far they are from
//! losing uniqueness.
//!
//! Run with `cargo run --example steady_states`.

use time_elapsed::steady::{solve_steady, uniqueness_margin, ScanOptions};
use time_elapsed::{Density, Grid, RateModel};

fn main() -> time_elapsed::Result<()> {
    let grid = Grid::new(40.0, 800)?;

    // constant rate: M = a and F = a e^{-a x} whatever the coupling
    let constant = RateModel::constant(1.5)?;
    let sol = solve_steady(&constant, 0.3, &grid, ScanOptions::default())?;
    let s = &sol.states[0];
    let exact = Density::from_fn(grid, |x| 1.5 * (-1.5 * x).exp());
    println!(
        "constant rate 1.5: M = {:.12}, L1 distance to 1.5 e^(-1.5x) = {:.2e}",
        s.activity,
        s.profile.l1_distance(&exact)
    );

    let model = RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0)?;
    println!("\n{:>6} {:>12} {:>8} {:>10}", "eps", "M", "roots", "margin");
    for k in 0..=10 {
        let eps = 0.05 * k as f64;
        let sol = solve_steady(&model, eps, &grid, ScanOptions::default())?;
        let m = sol.states[0].activity;
        let margin = uniqueness_margin(&model, eps, m, &grid);
        println!("{eps:>6.2} {m:>12.8} {:>8} {:>10.4}", sol.states.len(), margin.value);
        for w in &sol.warnings {
            println!("       warning: {w}");
        }
    }
    Ok(())
}
