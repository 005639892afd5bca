//! Lattice checks of the structural assumptions on rates and delay kernels.
//!
//! Run with `cargo run --example rate_hypotheses`.

use time_elapsed::model::{check_delay_hypothesis, check_rate_hypotheses, Lattice};
use time_elapsed::{DelayKernel, RateModel};

fn main() -> time_elapsed::Result<()> {
    let lattice = Lattice::new(20.0, 4.0, 200, 200)?;
    let models = [
        RateModel::constant(1.5)?,
        RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0)?,
        RateModel::soft_sigmoid(1.0, 2.0, 0.1, 1.0)?,
        RateModel::step_threshold(2.0, 1.0, 1.0)?,
    ];
    for model in &models {
        let rep = check_rate_hypotheses(model, &lattice);
        println!(
            "{:<44} monotone {:<5} levels {:<5} smooth {:<5}",
            model.label(),
            rep.passes_a1,
            rep.passes_a2,
            rep.passes_a3
        );
        for w in rep.witnesses.iter().take(2) {
            println!("    {} at x = {:.3}, mu = {:.3}: {}", w.hypothesis, w.x, w.mu, w.detail);
        }
    }

    println!();
    for kernel in [
        DelayKernel::Dirac,
        DelayKernel::exp(0.2)?,
        DelayKernel::exp(0.5)?.with_delta(1.0)?,
        DelayKernel::erlang(3, 0.2)?,
    ] {
        let rep = check_delay_hypothesis(&kernel);
        println!(
            "{:<32} passes {:<5} delta {:?} weighted integral {:?}",
            kernel.label(),
            rep.passes,
            rep.delta,
            rep.integral
        );
    }
    Ok(())
}
