//! Synaptic delay: relaxation with a distributed delay and convergence to
//! the instantaneous model as the delay shrinks.
//!
//! Run with `cargo run --release --example delay_relaxation`.

use time_elapsed::config::InitialCondition;
use time_elapsed::dynamics::{fit_decay_rate, simulate, Simulation, Trajectory};
use time_elapsed::spectrum::{assemble_delay, spectrum_report};
use time_elapsed::steady::solve_unique;
use time_elapsed::{DelayKernel, Density, Grid, RateModel};

fn run(model: RateModel, kernel: DelayKernel, eps: f64, initial: &Density, reference: &Density) -> time_elapsed::Result<Trajectory> {
    simulate(&Simulation {
        model,
        kernel,
        eps,
        initial: initial.clone(),
        reference: Some(reference.clone()),
        t_final: 40.0,
        record_every: 1,
        snapshot_every: Some(20),
    })
}

fn main() -> time_elapsed::Result<()> {
    let model = RateModel::soft_sigmoid(1.0, 2.0, 0.1, 1.0)?;
    let grid = Grid::new(40.0, 800)?;
    let eps = 0.05;
    let steady = solve_unique(&model, eps, &grid)?;
    let initial = InitialCondition::Perturbed {
        amplitude: 0.1,
        shape: Default::default(),
    }
    .build(&steady.profile)?;

    let kernel = DelayKernel::exp(0.5)?.with_delta(1.0)?;
    let mat = assemble_delay(&model, &kernel, eps, &steady, &grid)?;
    let rep = spectrum_report(&mat, -0.9)?;
    let traj = run(model, kernel, eps, &initial, &steady.profile)?;
    let fit = fit_decay_rate(&traj, 5.0, 35.0)?;
    println!(
        "{}: block dimension {}, gap {:.4}, fitted rate {:.4}",
        kernel.label(),
        mat.dim(),
        rep.gap,
        fit.alpha
    );

    let base = run(model, DelayKernel::Dirac, eps, &initial, &steady.profile)?;
    for tau in [0.4, 0.2, 0.1, 0.05] {
        let traj = run(model, DelayKernel::exp(tau)?, eps, &initial, &steady.profile)?;
        let dist = traj
            .snapshots
            .iter()
            .zip(&base.snapshots)
            .map(|((_, f), (_, g))| f.l1_distance(g))
            .fold(0.0, f64::max);
        println!("tau = {tau:<5} max distance to the instantaneous run {dist:.3e}");
    }
    Ok(())
}
