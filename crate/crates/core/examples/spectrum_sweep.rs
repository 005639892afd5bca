//! Eigenvalues of the linearized generator along a connectivity sweep,
//! with the positivity structure at zero coupling.
//!
//! Run with `cargo run --release --example spectrum_sweep`.

use time_elapsed::spectrum::{assemble_nodelay, kato_positivity_check, spectrum_report};
use time_elapsed::steady::solve_unique;
use time_elapsed::{Grid, RateModel};

fn main() -> time_elapsed::Result<()> {
    let model = RateModel::soft_sigmoid(1.0, 2.0, 0.1, 1.0)?;
    let grid = Grid::new(40.0, 400)?;

    let steady = solve_unique(&model, 0.0, &grid)?;
    let mat = assemble_nodelay(&model, 0.0, &steady, &grid)?;
    let kato = kato_positivity_check(&mat, &[0.5, 2.0, 8.0])?;
    println!("eps = 0: metzler {}, cone invariant {}", kato.metzler, kato.passes());

    println!("\n{:>6} {:>10} {:>22} {:>12}", "eps", "zero", "leading pair", "conservation");
    for k in 0..=5 {
        let eps = 0.02 * k as f64;
        let steady = solve_unique(&model, eps, &grid)?;
        let mat = assemble_nodelay(&model, eps, &steady, &grid)?;
        let rep = spectrum_report(&mat, -0.9)?;
        let lead = rep
            .eigenvalues
            .iter()
            .filter(|z| z.0 < -1e-6 && z.1 >= 0.0)
            .copied()
            .next()
            .unwrap_or((f64::NAN, f64::NAN));
        println!(
            "{eps:>6.2} {:>10.1e} {:>10.4} {:>+10.4}i {:>12.1e}",
            rep.zero_eigenvalue.0,
            lead.0,
            lead.1,
            mat.conservation_defect()
        );
    }
    Ok(())
}
