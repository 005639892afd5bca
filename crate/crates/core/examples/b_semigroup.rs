//! The transport part of the generator: stepped semigroup against the
//! characteristic formula, and decay of the delay block.
//!
//! Run with `cargo run --release --example b_semigroup`.

use time_elapsed::spectrum::{assemble_delay, semigroup_decay, v_block_decay, validate_b_semigroup};
use time_elapsed::steady::solve_unique;
use time_elapsed::{DelayKernel, Grid, RateModel};

fn main() -> time_elapsed::Result<()> {
    let model = RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0)?;
    let eps = 0.1;
    for n in [200, 400, 800] {
        let grid = Grid::new(40.0, n)?;
        let steady = solve_unique(&model, eps, &grid)?;
        let rep = validate_b_semigroup(&model, eps, &steady, &grid, &[1.0, 2.0, 5.0])?;
        let errs: Vec<String> = rep.errors.iter().map(|(t, e)| format!("t={t}: {e:.3e}")).collect();
        println!("n = {n:<4} {}  decay ratio {:.3}", errs.join("  "), rep.worst_decay_ratio);
    }

    let grid = Grid::new(40.0, 400)?;
    let steady = solve_unique(&model, eps, &grid)?;
    let kernel = DelayKernel::exp(0.5)?.with_delta(1.0)?;
    let mat = assemble_delay(&model, &kernel, eps, &steady, &grid)?;
    for d in v_block_decay(&mat, &[0.5, 1.0, 2.0, 4.0])? {
        println!("v block t = {:<4} measured {:.6} bound e^(-delta t) {:.6}", d.t, d.measured, d.bound);
    }

    // a mass-zero start decays at the rate set by the rest of the spectrum
    let mut z0 = vec![0.0; mat.dim()];
    z0[10] = 1.0;
    z0[40] = -1.0;
    let curve = semigroup_decay(&mat, &z0, 20.0, 0.05)?;
    if let Some(fit) = curve.fit {
        println!("linear semigroup decay rate {:.4} (r2 {:.4})", fit.alpha, fit.r2);
    }
    Ok(())
}
