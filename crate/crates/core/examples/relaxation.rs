//! Nonlinear relaxation towards the steady state and the linearized
//! spectral gap that predicts its rate.
//!
//! Run with `cargo run --release --example relaxation`.

use time_elapsed::config::{InitialCondition, PerturbShape};
use time_elapsed::dynamics::{fit_decay_rate, simulate, Simulation};
use time_elapsed::spectrum::{assemble_nodelay, spectrum_report};
use time_elapsed::steady::solve_unique;
use time_elapsed::{DelayKernel, Grid, RateModel};

fn main() -> time_elapsed::Result<()> {
    let model = RateModel::soft_sigmoid(1.0, 2.0, 0.1, 1.0)?;
    let grid = Grid::new(40.0, 800)?;
    let eps = 0.05;
    let steady = solve_unique(&model, eps, &grid)?;

    let initial = InitialCondition::Perturbed {
        amplitude: 0.1,
        shape: PerturbShape::Sine,
    }
    .build(&steady.profile)?;
    let traj = simulate(&Simulation {
        model,
        kernel: DelayKernel::Dirac,
        eps,
        initial,
        reference: Some(steady.profile.clone()),
        t_final: 40.0,
        record_every: 20,
        snapshot_every: None,
    })?;
    for s in traj.samples.iter().step_by(5) {
        println!("t = {:>5.1}  mass = {:.15}  p = {:.6}  |f - F| = {:.3e}", s.t, s.mass, s.p, s.l1_dist);
    }

    let fit = fit_decay_rate(&traj, 5.0, 30.0)?;
    let mat = assemble_nodelay(&model, eps, &steady, &grid)?;
    // cut just above the continuous spectrum so the isolated pair is seen
    let rep = spectrum_report(&mat, -0.9)?;
    println!("\nfitted rate {:.4} (r2 {:.4}), spectral gap {:.4}", fit.alpha, fit.r2, rep.gap);
    Ok(())
}
