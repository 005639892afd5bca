//! Acceptance run. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any of them fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use time_elapsed::config::{InitialCondition, PerturbShape};
use time_elapsed::dynamics::{
    activity_fixed_point, fit_decay_rate, lipschitz_check, nonlinear_residual, simulate, GronwallConstants, Simulation,
    Trajectory,
};
use time_elapsed::experiments::{integrate_riccati, random_perturbation};
use time_elapsed::spectrum::{
    assemble_delay, assemble_nodelay, spectrum_report, v_block_decay, validate_b_semigroup, SpectrumReport,
};
use time_elapsed::steady::{solve_steady, solve_unique, uniqueness_margin, ScanOptions};
use time_elapsed::{DelayKernel, Density, Grid, RateModel, Result, SteadyState};

type Criterion = (&'static str, fn() -> Result<Outcome>);

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn canonical() -> RateModel {
    RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0).unwrap()
}

/// Slow age ramp; its linearization has an isolated eigenvalue pair above
/// the essential spectrum.
fn slow_ramp() -> RateModel {
    RateModel::soft_sigmoid(1.0, 2.0, 0.1, 1.0).unwrap()
}

/// Sits just above the continuous spectrum of the transport part, which
/// lies in `Re <= -a0`, so isolated eigenvalues below `-a0/2` are kept.
fn isolated_cut(model: &RateModel) -> f64 {
    -0.9 * model.a0()
}

fn desk_grid() -> Grid {
    Grid::new(40.0, 800).unwrap()
}

fn relax_run(model: &RateModel, kernel: DelayKernel, eps: f64, steady: &SteadyState, t_final: f64) -> Result<Trajectory> {
    let initial = InitialCondition::Perturbed {
        amplitude: 0.1,
        shape: PerturbShape::Sine,
    }
    .build(&steady.profile)?;
    simulate(&Simulation {
        model: *model,
        kernel,
        eps,
        initial,
        reference: Some(steady.profile.clone()),
        t_final,
        record_every: 1,
        snapshot_every: Some(20),
    })
}

fn mass_conservation() -> Result<Outcome> {
    let model = canonical();
    let grid = desk_grid();
    let steady = solve_unique(&model, 0.1, &grid)?;
    let t_final = 10_000.0 * grid.dx();
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for kernel in [DelayKernel::Dirac, DelayKernel::exp(0.5)?] {
        let initial = InitialCondition::Perturbed {
            amplitude: 0.5,
            shape: PerturbShape::Sine,
        }
        .build(&steady.profile)?;
        let start = Instant::now();
        let traj = simulate(&Simulation {
            model,
            kernel,
            eps: 0.1,
            initial,
            reference: None,
            t_final,
            record_every: 1,
            snapshot_every: None,
        })?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        if traj.samples.len() != 10_001 {
            return Ok(Outcome::new(false, format!("{} samples recorded", traj.samples.len())));
        }
        worst = worst.max(traj.max_mass_drift(1.0));
    }
    Ok(Outcome::new(
        worst <= 1e-10 && slowest <= 5.0,
        format!("max |mass - 1| = {worst:.2e} over 1e4 steps, slowest run {slowest:.2} s"),
    ))
}

fn constant_rate_steady() -> Result<Outcome> {
    let model = RateModel::constant(1.5)?;
    let grid = desk_grid();
    let dx = grid.dx();
    let start = Instant::now();
    let mut worst_m = 0.0f64;
    let mut worst_l1 = 0.0f64;
    let mut roots_ok = true;
    for eps in [0.0, 0.1, 0.5, 2.0] {
        let sol = solve_steady(&model, eps, &grid, ScanOptions::default())?;
        roots_ok &= sol.states.len() == 1;
        let s = &sol.states[0];
        worst_m = worst_m.max((s.activity - 1.5).abs());
        let exact = Density::from_fn(grid, |x| 1.5 * (-1.5 * x).exp());
        worst_l1 = worst_l1.max(s.profile.l1_distance(&exact));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome::new(
        roots_ok && worst_m <= 1e-8 && worst_l1 <= 5.0 * dx * dx && secs <= 1.0,
        format!("|M - 1.5| = {worst_m:.1e}, L1 = {worst_l1:.2e} (bound {:.2e}), {secs:.2} s", 5.0 * dx * dx),
    ))
}

fn weak_connectivity_uniqueness() -> Result<Outcome> {
    let model = canonical();
    let grid = desk_grid();
    let fine = grid.refined();
    let scan = ScanOptions {
        m_max: None,
        n_scan: 4096,
    };
    let mut min_margin = f64::INFINITY;
    let mut worst_shift = 0.0f64;
    let mut bad = Vec::new();
    for k in 0..=20 {
        let eps = 0.2 * k as f64 / 20.0;
        let coarse = solve_steady(&model, eps, &grid, scan)?;
        let refined = solve_steady(&model, eps, &fine, scan)?;
        if coarse.states.len() != 1 || refined.states.len() != 1 {
            bad.push(eps);
            continue;
        }
        let m = coarse.states[0].activity;
        let margin = uniqueness_margin(&model, eps, m, &grid);
        if margin.degenerate {
            bad.push(eps);
        }
        min_margin = min_margin.min(margin.value);
        worst_shift = worst_shift.max((refined.states[0].activity - m).abs());
    }
    // second order in dx: the refined root moves by about 3/4 of the coarse error
    let tol = grid.dx() * grid.dx();
    Ok(Outcome::new(
        bad.is_empty() && min_margin > 0.0 && worst_shift <= tol,
        format!("21 eps, one root each, min margin {min_margin:.3}, |M_n - M_2n| <= {worst_shift:.1e} (tol {tol:.1e})"),
    ))
}

fn krein_rutman() -> Result<Outcome> {
    let model = canonical();
    let grid = Grid::new(40.0, 1200)?;
    let start = Instant::now();
    let steady = solve_unique(&model, 0.0, &grid)?;
    let mat = assemble_nodelay(&model, 0.0, &steady, &grid)?;
    let rep = spectrum_report(&mat, -model.a0() / 4.0)?;
    let secs = start.elapsed().as_secs_f64();
    let vector = Density::new(grid, rep.zero_vector.clone())?;
    let l1 = vector.l1_distance(&steady.profile);
    let zero = rep.zero_eigenvalue.0.hypot(rep.zero_eigenvalue.1);
    Ok(Outcome::new(
        rep.metzler && rep.count_above_cut == 1 && zero <= 1e-6 && rep.zero_vector_positive && l1 <= 1e-2 && secs <= 60.0,
        format!(
            "metzler {}, {} eigenvalue above -a0/4, |lambda0| = {zero:.1e}, positive {}, L1 to F0 {l1:.1e}, {secs:.1} s",
            rep.metzler, rep.count_above_cut, rep.zero_vector_positive
        ),
    ))
}

fn nodelay_report(model: &RateModel, eps: f64, grid: &Grid) -> Result<(SteadyState, SpectrumReport)> {
    let steady = solve_unique(model, eps, grid)?;
    let mat = assemble_nodelay(model, eps, &steady, grid)?;
    let rep = spectrum_report(&mat, isolated_cut(model))?;
    Ok((steady, rep))
}

fn perturbed_gap() -> Result<Outcome> {
    let model = slow_ramp();
    let grid = desk_grid();
    let eps_list: Vec<f64> = (0..=10).map(|k| 0.01 * k as f64).collect();
    let reports: Vec<SpectrumReport> = eps_list
        .iter()
        .map(|&eps| nodelay_report(&model, eps, &grid).map(|r| r.1))
        .collect::<Result<_>>()?;
    let alpha = reports[0].gap / 2.0;
    let mut ok = alpha < 0.0;
    let mut worst_zero = 0.0f64;
    let mut worst_jump = 0.0f64;
    for (k, rep) in reports.iter().enumerate() {
        let above = rep.eigenvalues.iter().filter(|z| z.0 > alpha).count();
        ok &= above == 1;
        worst_zero = worst_zero.max(rep.zero_eigenvalue.0.hypot(rep.zero_eigenvalue.1));
        if k > 0 {
            let prev = reports[k - 1].gap;
            worst_jump = worst_jump.max((rep.gap - prev).abs() / rep.gap.abs());
        }
    }
    let gaps: Vec<String> = reports.iter().map(|r| format!("{:.4}", r.gap)).collect();
    Ok(Outcome::new(
        ok && worst_zero <= 1e-8 && worst_jump <= 0.05,
        format!(
            "alpha = {alpha:.4}, one eigenvalue above it for all eps, |lambda0| <= {worst_zero:.1e}, max jump {:.2}%, gaps [{}]",
            100.0 * worst_jump,
            gaps.join(", ")
        ),
    ))
}

fn nonlinear_relaxation() -> Result<Outcome> {
    let model = slow_ramp();
    let grid = desk_grid();
    let start = Instant::now();
    let (steady, rep) = nodelay_report(&model, 0.05, &grid)?;
    let traj = relax_run(&model, DelayKernel::Dirac, 0.05, &steady, 40.0)?;
    let fit = fit_decay_rate(&traj, 5.0, 30.0)?;
    let secs = start.elapsed().as_secs_f64();
    let rel = (fit.alpha - rep.gap).abs() / rep.gap.abs();
    Ok(Outcome::new(
        rel <= 0.1 && fit.r2 >= 0.99 && secs <= 30.0,
        format!(
            "fitted {:.4} vs gap {:.4} ({:.1}% off), r2 {:.4}, {secs:.1} s",
            fit.alpha,
            rep.gap,
            100.0 * rel,
            fit.r2
        ),
    ))
}

fn max_snapshot_distance(a: &Trajectory, b: &Trajectory) -> f64 {
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|((_, f), (_, g))| f.l1_distance(g))
        .fold(0.0, f64::max)
}

fn delay_case() -> Result<Outcome> {
    let model = slow_ramp();
    let grid = desk_grid();
    let eps = 0.05;
    let steady = solve_unique(&model, eps, &grid)?;
    let kernel = DelayKernel::exp(0.5)?.with_delta(1.0)?;
    let mat = assemble_delay(&model, &kernel, eps, &steady, &grid)?;
    let rep = spectrum_report(&mat, isolated_cut(&model))?;
    let traj = relax_run(&model, kernel, eps, &steady, 40.0)?;
    let fit = fit_decay_rate(&traj, 5.0, 35.0)?;
    let rel = (fit.alpha - rep.gap).abs() / rep.gap.abs();

    let base = relax_run(&model, DelayKernel::Dirac, eps, &steady, 20.0)?;
    let mut distances = Vec::new();
    for tau in [0.2, 0.1, 0.05] {
        let run = relax_run(&model, DelayKernel::exp(tau)?, eps, &steady, 20.0)?;
        distances.push(max_snapshot_distance(&run, &base));
    }
    let monotone = distances.windows(2).all(|w| w[1] < w[0]);
    Ok(Outcome::new(
        rel <= 0.1 && monotone,
        format!(
            "fitted {:.4} vs block gap {:.4} ({:.1}% off, r2 {:.4}); distance to no delay {:.2e} > {:.2e} > {:.2e}",
            fit.alpha,
            rep.gap,
            100.0 * rel,
            fit.r2,
            distances[0],
            distances[1],
            distances[2]
        ),
    ))
}

fn b_semigroup() -> Result<Outcome> {
    let model = canonical();
    let eps = 0.1;
    let times = [1.0, 2.0, 5.0];
    let coarse = Grid::new(40.0, 400)?;
    let fine = coarse.refined();
    let mut errs = Vec::new();
    let mut ok = true;
    for grid in [coarse, fine] {
        let steady = solve_unique(&model, eps, &grid)?;
        let rep = validate_b_semigroup(&model, eps, &steady, &grid, &times)?;
        ok &= rep.decay_ok;
        for &(t, e) in &rep.errors {
            // right-endpoint survival: each cell costs at most sup|a_x| dx^2 / 2
            let bound = 0.5 * model.sup_dx().unwrap() * t * grid.dx();
            ok &= e <= bound;
        }
        errs.push(rep.errors);
    }
    let ratios: Vec<f64> = errs[0].iter().zip(&errs[1]).map(|(c, f)| c.1 / f.1).collect();
    ok &= ratios.iter().all(|r| (1.8..=2.2).contains(r));

    let steady = solve_unique(&model, eps, &coarse)?;
    let kernel = DelayKernel::exp(0.5)?.with_delta(1.0)?;
    let mat = assemble_delay(&model, &kernel, eps, &steady, &coarse)?;
    let decay = v_block_decay(&mat, &times)?;
    let worst = decay.iter().map(|d| d.measured / d.bound).fold(0.0, f64::max);
    ok &= worst <= 1.0 + 1e-6;
    Ok(Outcome::new(
        ok,
        format!(
            "errors at n=400 {:.2e}/{:.2e}/{:.2e}, refinement ratios {:.3}/{:.3}/{:.3}, v-block ratio to e^(-delta t) {worst:.6}",
            errs[0][0].1, errs[0][1].1, errs[0][2].1, ratios[0], ratios[1], ratios[2]
        ),
    ))
}

fn quadratic_remainder() -> Result<Outcome> {
    let model = canonical();
    let grid = Grid::new(40.0, 400)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let steady = solve_unique(&model, 0.1, &grid)?;
    let mat = assemble_nodelay(&model, 0.1, &steady, &grid)?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut worst_mean = 0.0f64;
    for _ in 0..20 {
        let g = random_perturbation(&steady.profile, 0.2, &mut rng)?;
        let half = Density::new(grid, g.values.iter().map(|v| 0.5 * v).collect())?;
        let full = nonlinear_residual(&model, &steady, &mat, &g)?;
        let halved = nonlinear_residual(&model, &steady, &mat, &half)?;
        let ratio = full.l1 / halved.l1;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
        worst_mean = worst_mean.max(full.mean.abs()).max(halved.mean.abs());
    }

    let steady0 = solve_unique(&model, 0.0, &grid)?;
    let mat0 = assemble_nodelay(&model, 0.0, &steady0, &grid)?;
    let mut worst_linear = 0.0f64;
    for _ in 0..20 {
        let g = random_perturbation(&steady0.profile, 0.2, &mut rng)?;
        let z = nonlinear_residual(&model, &steady0, &mat0, &g)?;
        worst_linear = worst_linear.max(z.l1);
        worst_mean = worst_mean.max(z.mean.abs());
    }
    Ok(Outcome::new(
        lo >= 3.5 && hi <= 4.5 && worst_linear <= 1e-12 && worst_mean <= 1e-12,
        format!("ratios in [{lo:.4}, {hi:.4}], eps=0 residual {worst_linear:.1e}, |<Z>| {worst_mean:.1e}"),
    ))
}

/// Normalized mixture of two gamma-like bumps.
fn random_density(grid: Grid, rng: &mut ChaCha8Rng) -> Result<Density> {
    let (k1, s1) = (rng.gen_range(0.0..4.0), rng.gen_range(0.3..3.0));
    let (k2, s2) = (rng.gen_range(0.0..4.0), rng.gen_range(0.3..3.0));
    let w = rng.gen_range(0.0..1.0);
    let f = Density::from_fn(grid, |x| {
        w * (x / s1).powf(k1) * (-x / s1).exp() + (1.0 - w) * (x / s2).powf(k2) * (-x / s2).exp()
    });
    f.normalized()
}

fn bisect_activity(model: &RateModel, eps: f64, f: &Density) -> f64 {
    let centers = f.grid().centers();
    let dx = f.grid().dx();
    let h = |m: f64| m - centers.iter().zip(&f.values).map(|(&x, v)| model.rate(x, eps * m) * v).sum::<f64>() * dx;
    let (mut lo, mut hi) = (0.0, 2.0 * model.a1());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn lipschitz() -> Result<Outcome> {
    let model = canonical();
    let grid = Grid::new(40.0, 800)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    let mut worst_fp = 0.0f64;
    for k in 0..100 {
        let eps = [0.1, 0.3, 0.6][k % 3];
        let f = random_density(grid, &mut rng)?;
        let g = random_density(grid, &mut rng)?;
        let check = lipschitz_check(&model, eps, &f, &g)?;
        if !check.holds() {
            violations += 1;
        }
        if check.rhs > 0.0 {
            worst_ratio = worst_ratio.max(check.lhs / check.rhs);
        }
        for d in [&f, &g] {
            let fp = activity_fixed_point(&model, eps, d)?;
            worst_fp = worst_fp.max((fp - bisect_activity(&model, eps, d)).abs());
        }
    }
    Ok(Outcome::new(
        violations == 0 && worst_fp <= 1e-10,
        format!("{violations} violations in 100 pairs (max lhs/rhs {worst_ratio:.3}), fixed point vs bisection {worst_fp:.1e}"),
    ))
}

fn gronwall() -> Result<Outcome> {
    let gron = GronwallConstants {
        a: -1.0,
        c1: 1.0,
        c2: 1.0,
    };
    let u0 = 0.25;
    let (ts, us) = integrate_riccati(gron.a, gron.c2, u0, 20.0, 20_000);
    // logistic closed form of u' = -u + u^2
    let exact_err = ts
        .iter()
        .zip(&us)
        .map(|(t, u)| (u - 1.0 / (1.0 + (1.0 / u0 - 1.0) * t.exp())).abs())
        .fold(0.0, f64::max);
    let below = gron.majorizes(&ts, &us) == Some(true);
    let slack = ts
        .iter()
        .zip(&us)
        .map(|(&t, u)| u / gron.bound(u0, t).unwrap())
        .fold(0.0, f64::max);
    Ok(Outcome::new(
        below && exact_err <= 1e-10,
        format!("{} samples below the bound (max u/bound {slack:.3}), RK4 vs closed form {exact_err:.1e}", ts.len()),
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("mass conservation", mass_conservation),
        ("constant-rate steady state", constant_rate_steady),
        ("weak-connectivity uniqueness", weak_connectivity_uniqueness),
        ("Krein-Rutman structure at eps = 0", krein_rutman),
        ("perturbed spectral gap", perturbed_gap),
        ("nonlinear relaxation rate", nonlinear_relaxation),
        ("delay case", delay_case),
        ("B-semigroup validation", b_semigroup),
        ("quadratic remainder", quadratic_remainder),
        ("activity map Lipschitz bound", lipschitz),
        ("Gronwall majorant", gronwall),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        if !out.passed {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1} s]",
            if out.passed { "PASS" } else { "FAIL" },
            k + 1,
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
