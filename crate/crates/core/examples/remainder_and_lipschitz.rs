//! Quadratic size of the nonlinear remainder and the W1-Lipschitz bound on
//! the activity map.
//!
//! Run with `cargo run --release --example remainder_and_lipschitz`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use time_elapsed::dynamics::{lipschitz_check, nonlinear_residual};
use time_elapsed::experiments::random_perturbation;
use time_elapsed::spectrum::assemble_nodelay;
use time_elapsed::steady::solve_unique;
use time_elapsed::{Density, Grid, RateModel};

fn main() -> time_elapsed::Result<()> {
    let model = RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0)?;
    let grid = Grid::new(40.0, 400)?;
    let eps = 0.1;
    let steady = solve_unique(&model, eps, &grid)?;
    let mat = assemble_nodelay(&model, eps, &steady, &grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);

    let g = random_perturbation(&steady.profile, 0.4, &mut rng)?;
    for k in 0..5 {
        let s = 0.5f64.powi(k);
        let scaled = Density::new(grid, g.values.iter().map(|v| s * v).collect())?;
        let z = nonlinear_residual(&model, &steady, &mat, &scaled)?;
        println!("scale {s:<7} |Z| = {:.3e}  <Z> = {:+.1e}", z.l1, z.mean);
    }

    println!();
    let shifted = |c: f64| Density::from_fn(grid, |x| (-(x - c).powi(2)).exp()).normalized();
    for c in [1.0, 2.0, 4.0] {
        let (f, h) = (shifted(0.5)?, shifted(c)?);
        let check = lipschitz_check(&model, 0.3, &f, &h)?;
        println!("bumps at 0.5 and {c}: lhs {:.4} <= rhs {:.4}: {}", check.lhs, check.rhs, check.holds());
    }
    Ok(())
}
