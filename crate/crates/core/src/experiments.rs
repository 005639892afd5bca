//! Config-driven experiment runners.
//!
//! Every runner writes into its own output directory, re-checks the
//! structural invariants on what it produced, and writes `manifest.json`
//! last. A missing manifest therefore means the run did not finish.
//! Sweep points run on a bounded rayon pool and are merged in `eps` order,
//! so CSV outputs are byte-identical across runs and worker counts.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{perturb, ExperimentConfig, InitialCondition};
use crate::dynamics::{
    fit_decay_rate, lipschitz_check, nonlinear_residual, simulate, DecayFit, GronwallConstants, Simulation,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::grid::{Density, Grid};
use crate::model::{check_delay_hypothesis, check_rate_hypotheses, Lattice};
use crate::spectrum::{assemble_delay, assemble_nodelay, spectrum_report, GeneratorMatrix, SpectrumReport};
use crate::steady::{solve_steady, uniqueness_margin, ScanOptions, SteadyState};

/// Which runner to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Steady,
    Relax,
    Spectrum,
    Basin,
    Check,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Relax => "relax",
            Command::Spectrum => "spectrum",
            Command::Basin => "basin",
            Command::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Worker threads; all cores by default.
    pub workers: Option<usize>,
    /// Overrides the config seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: Command,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
    pub checks: Vec<CheckResult>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// `0` when every built-in check passed, `3` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            3
        }
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
    checks: Vec<CheckResult>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Outputs {
            dir,
            files: Vec::new(),
            checks: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(p.clone());
        Ok(p)
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name)?;
        fs::write(p, contents)?;
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
        self.text(name, &(text + "\n"))
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn finish(self, command: Command, config: &ExperimentConfig, seed: u64, workers: usize, start: Instant) -> Result<RunManifest> {
        let mut files = Vec::with_capacity(self.files.len());
        for p in &self.files {
            let bytes = fs::read(p)?;
            files.push(FileEntry {
                path: p.strip_prefix(&self.dir).unwrap_or(p).display().to_string(),
                bytes: bytes.len() as u64,
                sha256: Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect(),
            });
        }
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: config.hash(),
            seed,
            workers,
            files,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            checks: self.checks,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(manifest)
    }
}

/// Runs one command end to end.
pub fn run(command: Command, config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let dir = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(command.name()));
    let seed = opts.seed.unwrap_or(config.seed);
    let workers = opts.workers.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut out = Outputs::new(dir)?;
    pool.install(|| match command {
        Command::Steady => run_steady_sweep(config, &mut out),
        Command::Relax => run_relaxation(config, &mut out),
        Command::Spectrum => run_spectrum_sweep(config, &mut out),
        Command::Basin => run_basin(config, &mut out),
        Command::Check => run_check(config, seed, &mut out),
    })?;
    out.finish(command, config, seed, workers, start)
}

/// `eps0.06` rather than `eps0.06000000000000001` for linspace points.
fn eps_tag(eps: f64) -> String {
    let fixed = format!("{eps:.12}");
    let trimmed = fixed.trim_end_matches('0').trim_end_matches('.');
    format!("eps{trimmed}")
}

/// The smallest-activity steady state at `eps`.
fn first_steady(config: &ExperimentConfig, eps: f64, grid: &Grid) -> Result<SteadyState> {
    let scan = ScanOptions {
        m_max: config.steady.m_max,
        n_scan: config.steady.n_scan,
    };
    Ok(solve_steady(&config.rate, eps, grid, scan)?.states.remove(0))
}

struct SteadyRow {
    eps: f64,
    states: Vec<SteadyState>,
    margins: Vec<f64>,
    degenerate: bool,
    warnings: Vec<String>,
}

fn run_steady_sweep(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let scan = ScanOptions {
        m_max: config.steady.m_max,
        n_scan: config.steady.n_scan,
    };
    let rows: Vec<SteadyRow> = config
        .eps
        .values()
        .par_iter()
        .map(|&eps| {
            let sol = solve_steady(&config.rate, eps, &grid, scan)?;
            let margins: Vec<_> = sol
                .states
                .iter()
                .map(|s| uniqueness_margin(&config.rate, eps, s.activity, &grid))
                .collect();
            Ok(SteadyRow {
                eps,
                degenerate: margins.iter().any(|m| m.degenerate),
                margins: margins.iter().map(|m| m.value).collect(),
                states: sol.states,
                warnings: sol.warnings,
            })
        })
        .collect::<Result<_>>()?;

    let mut table = String::from("eps,root_index,M,residual,margin\n");
    let mut summary = Vec::new();
    let mut largest_unique: Option<f64> = None;
    let mut all_unique_so_far = true;
    for row in &rows {
        for (k, (s, margin)) in row.states.iter().zip(&row.margins).enumerate() {
            table.push_str(&format!("{},{},{},{},{}\n", row.eps, k, s.activity, s.residual, margin));
            let path = out.path(&format!("profile_{}_root{k}.csv", eps_tag(row.eps)))?;
            s.profile.write_csv(&path, "F")?;
            let mass = s.profile.mass();
            out.check(
                format!("normalization {} root {k}", eps_tag(row.eps)),
                (mass - 1.0).abs() <= 1e-10 && s.residual <= 1e-12,
                format!("mass {mass}, residual {:e}", s.residual),
            );
        }
        let unique = row.states.len() == 1 && row.margins[0] > 0.0 && !row.degenerate;
        all_unique_so_far &= unique;
        if all_unique_so_far {
            largest_unique = Some(row.eps);
        }
        summary.push(json!({
            "eps": row.eps,
            "root_count": row.states.len(),
            "activities": row.states.iter().map(|s| s.activity).collect::<Vec<_>>(),
            "margins": row.margins,
            "degenerate": row.degenerate,
            "warnings": row.warnings,
        }));
    }
    out.text("steady_roots.csv", &table)?;
    out.json(
        "steady_summary.json",
        &json!({
            "rate": config.rate.label(),
            "grid": config.grid,
            "sweep": summary,
            "largest_eps_with_unique_root": largest_unique,
        }),
    )?;
    Ok(())
}

/// Default fit window: `[0.1, 0.75] * T`, ending before the distance
/// reaches `1e-12`.
fn fit_window(config: &ExperimentConfig, traj: &Trajectory) -> [f64; 2] {
    if let Some(w) = config.relax.window {
        return w;
    }
    let t1 = 0.1 * config.t_final;
    let floor_t = traj
        .samples
        .iter()
        .find(|s| s.l1_dist <= 1e-12)
        .map_or(f64::INFINITY, |s| s.t);
    [t1, (0.75 * config.t_final).min(0.9 * floor_t)]
}

/// Linearized generator matching the config's delay kernel.
pub fn generator_for(config: &ExperimentConfig, eps: f64, steady: &SteadyState, grid: &Grid) -> Result<GeneratorMatrix> {
    if config.delay.is_dirac() {
        assemble_nodelay(&config.rate, eps, steady, grid)
    } else {
        assemble_delay(&config.rate, &config.delay, eps, steady, grid)
    }
}

#[derive(Serialize)]
struct RelaxRow {
    eps: f64,
    amplitude: Option<f64>,
    stationary: bool,
    window: Option<[f64; 2]>,
    fit: Option<DecayFit>,
    gap: Option<f64>,
    max_mass_drift: f64,
    min_density: f64,
}

fn run_relaxation(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let snapshot_every = (config.snapshot_every > 0).then_some(config.snapshot_every);
    let runs: Vec<(RelaxRow, Trajectory)> = config
        .eps
        .values()
        .par_iter()
        .map(|&eps| {
            let steady = first_steady(config, eps, &grid)?;
            let initial = config.initial.build(&steady.profile)?;
            let traj = simulate(&Simulation {
                model: config.rate,
                kernel: config.delay,
                eps,
                initial,
                reference: Some(steady.profile.clone()),
                t_final: config.t_final,
                record_every: config.record_every,
                snapshot_every,
            })?;
            let stationary = traj.samples.iter().all(|s| s.l1_dist < 1e-12);
            let (window, fit) = if stationary {
                (None, None)
            } else {
                let w = fit_window(config, &traj);
                (Some(w), Some(fit_decay_rate(&traj, w[0], w[1])?))
            };
            let gap = if config.relax.compare_gap && !stationary {
                let mat = generator_for(config, eps, &steady, &grid)?;
                Some(spectrum_report(&mat, f64::NEG_INFINITY)?.gap)
            } else {
                None
            };
            let min_density = traj
                .snapshots
                .iter()
                .flat_map(|(_, d)| d.values.iter().copied())
                .fold(f64::INFINITY, f64::min);
            let row = RelaxRow {
                eps,
                amplitude: config.initial.amplitude(),
                stationary,
                window,
                fit,
                gap,
                max_mass_drift: traj.max_mass_drift(1.0),
                min_density,
            };
            Ok((row, traj))
        })
        .collect::<Result<_>>()?;

    for (row, traj) in &runs {
        let tag = eps_tag(row.eps);
        let path = out.path(&format!("trajectory_{tag}.csv"))?;
        traj.write_csv(&path)?;
        for (t, snap) in &traj.snapshots {
            let path = out.path(&format!("snapshots_{tag}/snapshot_t{t}.csv"))?;
            snap.write_csv(&path, "f")?;
        }
        out.check(
            format!("mass conservation {tag}"),
            row.max_mass_drift <= 1e-10,
            format!("max |mass - 1| = {:e}", row.max_mass_drift),
        );
        if !traj.snapshots.is_empty() {
            out.check(format!("positivity {tag}"), row.min_density >= 0.0, format!("min density {}", row.min_density));
        }
        if let (Some(fit), Some(gap)) = (row.fit, row.gap) {
            out.check(
                format!("rate matches gap {tag}"),
                (fit.alpha - gap).abs() <= 0.1 * gap.abs(),
                format!("alpha {} vs gap {gap}", fit.alpha),
            );
        }
    }
    let rows: Vec<&RelaxRow> = runs.iter().map(|r| &r.0).collect();
    out.json("relax_summary.json", &json!({ "rate": config.rate.label(), "delay": config.delay.label(), "runs": rows }))
}

#[derive(Serialize)]
struct SpectrumRow {
    eps: f64,
    dimension: usize,
    n_g: usize,
    n_v: usize,
    dx: f64,
    cut: f64,
    count_above_cut: usize,
    gap: f64,
    zero_eigenvalue: (f64, f64),
    zero_residual: f64,
    zero_vector_positive: bool,
    metzler: bool,
    conservation_defect: f64,
    split_defect: f64,
    kappa: f64,
}

fn run_spectrum_sweep(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    if grid.n() > config.spectrum.max_block {
        return Err(Error::Config(format!(
            "grid has {} cells, above spectrum.max_block = {}",
            grid.n(),
            config.spectrum.max_block
        )));
    }
    let results: Vec<(SpectrumRow, SpectrumReport)> = config
        .eps
        .values()
        .par_iter()
        .map(|&eps| {
            let steady = first_steady(config, eps, &grid)?;
            let mat = generator_for(config, eps, &steady, &grid)?;
            if mat.meta().n_v > config.spectrum.max_block {
                return Err(Error::Config(format!("delay block has {} cells", mat.meta().n_v)));
            }
            let cut = config.spectrum.cut.unwrap_or(0.5 * mat.meta().essential_bound());
            let rep = spectrum_report(&mat, cut)?;
            let row = SpectrumRow {
                eps,
                dimension: rep.dimension,
                n_g: mat.meta().n_g,
                n_v: mat.meta().n_v,
                dx: mat.meta().dx,
                cut,
                count_above_cut: rep.count_above_cut,
                gap: rep.gap,
                zero_eigenvalue: rep.zero_eigenvalue,
                zero_residual: rep.zero_residual,
                zero_vector_positive: rep.zero_vector_positive,
                metzler: rep.metzler,
                conservation_defect: mat.conservation_defect(),
                split_defect: mat.split_defect(),
                kappa: mat.meta().kappa,
            };
            Ok((row, rep))
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("eps,re,im\n");
    let mut curve = String::from("eps,gap,count_above_cut\n");
    for (row, rep) in &results {
        for (re, im) in &rep.eigenvalues {
            csv.push_str(&format!("{},{re},{im}\n", row.eps));
        }
        curve.push_str(&format!("{},{},{}\n", row.eps, row.gap, row.count_above_cut));
        let tag = eps_tag(row.eps);
        let zero = row.zero_eigenvalue.0.hypot(row.zero_eigenvalue.1);
        out.check(format!("cut below zero {tag}"), rep.cut_sane, format!("cut {}", row.cut));
        out.check(format!("conservation {tag}"), row.conservation_defect <= 1e-10, format!("{:e}", row.conservation_defect));
        out.check(format!("split exactness {tag}"), row.split_defect <= 1e-12, format!("{:e}", row.split_defect));
        out.check(format!("zero eigenvalue {tag}"), zero <= 1e-8, format!("|lambda_0| = {zero:e}"));
        out.check(
            format!("single dominant eigenvalue {tag}"),
            row.count_above_cut == 1,
            format!("{} eigenvalues above {}", row.count_above_cut, row.cut),
        );
        if row.eps == 0.0 {
            out.check(
                "positivity at eps = 0",
                row.metzler && row.zero_vector_positive,
                format!("metzler {}, positive eigenvector {}", row.metzler, row.zero_vector_positive),
            );
        }
    }
    let jumps: Vec<f64> = results
        .windows(2)
        .map(|w| (w[1].0.gap - w[0].0.gap).abs() / w[0].0.gap.abs().max(w[1].0.gap.abs()))
        .collect();
    let worst = jumps.iter().copied().fold(0.0, f64::max);
    out.check("gap continuity", worst <= 0.05, format!("largest relative jump {worst}"));
    out.text("spectrum.csv", &csv)?;
    out.text("gap_curve.csv", &curve)?;
    let rows: Vec<&SpectrumRow> = results.iter().map(|r| &r.0).collect();
    out.json(
        "spectrum_report.json",
        &json!({
            "rate": config.rate.label(),
            "delay": config.delay.label(),
            "grid": config.grid,
            "largest_relative_gap_jump": worst,
            "sweep": rows,
        }),
    )
}

/// A run decays when its fitted rate is negative and it ends closer to the
/// steady state than it started.
fn decays(config: &ExperimentConfig, eps: f64, steady: &SteadyState, amplitude: f64) -> Result<bool> {
    if amplitude == 0.0 {
        return Ok(true);
    }
    let initial = perturb(&steady.profile, amplitude, config.basin.shape)?.normalized()?;
    let traj = simulate(&Simulation {
        model: config.rate,
        kernel: config.delay,
        eps,
        initial,
        reference: Some(steady.profile.clone()),
        t_final: config.t_final,
        record_every: config.record_every,
        snapshot_every: None,
    })?;
    let first = traj.samples.first().unwrap().l1_dist;
    let last = traj.samples.last().unwrap().l1_dist;
    if last < 1e-12 {
        return Ok(true);
    }
    let w = fit_window(config, &traj);
    match fit_decay_rate(&traj, w[0], w[1]) {
        Ok(fit) => Ok(fit.alpha < 0.0 && last < first),
        Err(Error::WindowBelowFloor { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

fn run_basin(config: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let ladder = &config.basin.amplitudes;
    let rows: Vec<(f64, f64, bool)> = config
        .eps
        .values()
        .par_iter()
        .map(|&eps| {
            let steady = first_steady(config, eps, &grid)?;
            let mut best = 0.0;
            let mut failed_at = None;
            for &a in ladder {
                if decays(config, eps, &steady, a)? {
                    best = a;
                } else {
                    failed_at = Some(a);
                    break;
                }
            }
            let Some(mut hi) = failed_at else {
                return Ok((eps, best, true));
            };
            let mut lo = best;
            for _ in 0..config.basin.bisection_steps {
                let mid = 0.5 * (lo + hi);
                if decays(config, eps, &steady, mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok((eps, lo, false))
        })
        .collect::<Result<_>>()?;

    let mut csv = String::from("eps,amplitude_star,capped\n");
    for (eps, a, capped) in &rows {
        csv.push_str(&format!("{eps},{a},{capped}\n"));
    }
    let nonincreasing = rows.windows(2).all(|w| w[1].1 <= w[0].1 || w[1].0 < w[0].0);
    out.check(
        "basin nonincreasing in eps",
        nonincreasing,
        format!("amplitudes {:?}", rows.iter().map(|r| r.1).collect::<Vec<_>>()),
    );
    out.text("basin.csv", &csv)?;
    out.json(
        "basin_summary.json",
        &json!({
            "rate": config.rate.label(),
            "delay": config.delay.label(),
            "shape": config.basin.shape,
            "ladder": ladder,
            "basin": rows.iter().map(|r| json!({"eps": r.0, "amplitude_star": r.1, "capped": r.2})).collect::<Vec<_>>(),
        }),
    )
}

/// Random unit-mass density: positive cell values on a random support.
fn random_density(grid: Grid, rng: &mut ChaCha8Rng) -> Result<Density> {
    let width = rng.gen_range(0.2..0.8) * grid.x_max();
    let values = (0..grid.n())
        .map(|i| if grid.center(i) < width { rng.gen_range(0.0..1.0) } else { 0.0 })
        .collect();
    Density::new(grid, values)?.normalized()
}

fn run_check(config: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let grid = config.grid()?;
    let model = &config.rate;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = serde_json::Map::new();

    let lattice = Lattice::new(grid.x_max().min(20.0), 2.0 * model.a1(), 200, 200)?;
    let hyp = check_rate_hypotheses(model, &lattice);
    out.check("rate monotonicity", hyp.passes_a1, "");
    out.check("rate asymptotic levels", hyp.passes_a2, "");
    if model.is_smooth() {
        out.check("rate smoothness", hyp.passes_a3, "");
    }
    report.insert(
        "rate_hypotheses".into(),
        json!({
            "monotone": hyp.passes_a1,
            "levels": hyp.passes_a2,
            "smooth": hyp.passes_a3,
            "witnesses": hyp.witnesses.iter().map(|w| json!({"hypothesis": w.hypothesis, "x": w.x, "mu": w.mu, "detail": w.detail})).collect::<Vec<_>>(),
        }),
    );
    let delay = check_delay_hypothesis(&config.delay);
    out.check("delay kernel tail", delay.passes, format!("integral {:?}", delay.integral));
    report.insert(
        "delay_hypothesis".into(),
        json!({"m_equals_p": delay.m_equals_p, "delta": delay.delta, "integral": delay.integral, "passes": delay.passes}),
    );

    let eps_values = config.eps.values();
    let per_eps: Vec<Vec<CheckResult>> = eps_values
        .par_iter()
        .enumerate()
        .map(|(k, &eps)| {
            let mut checks = Vec::new();
            let mut push = |name: String, passed: bool, detail: String| checks.push(CheckResult { name, passed, detail });
            let tag = eps_tag(eps);
            let steady = first_steady(config, eps, &grid)?;
            let mass = steady.profile.mass();
            push(format!("steady normalization {tag}"), (mass - 1.0).abs() <= 1e-10, format!("mass {mass}"));

            let initial = InitialCondition::Perturbed { amplitude: 0.1, shape: Default::default() }.build(&steady.profile)?;
            let traj = simulate(&Simulation {
                model: *model,
                kernel: config.delay,
                eps,
                initial,
                reference: Some(steady.profile.clone()),
                t_final: config.t_final.min(20.0),
                record_every: 1,
                snapshot_every: Some(1),
            })?;
            let drift = traj.max_mass_drift(1.0);
            push(format!("mass conservation {tag}"), drift <= 1e-10, format!("{drift:e}"));
            let positive = traj.snapshots.iter().all(|(_, d)| d.values.iter().all(|v| *v >= 0.0));
            push(format!("positivity {tag}"), positive, String::new());

            if model.is_smooth() {
                let mat = assemble_nodelay(model, eps, &steady, &grid)?;
                push(format!("generator conservation {tag}"), mat.conservation_defect() <= 1e-10, format!("{:e}", mat.conservation_defect()));
                push(format!("generator split {tag}"), mat.split_defect() <= 1e-12, format!("{:e}", mat.split_defect()));
                if !config.delay.is_dirac() {
                    let block = assemble_delay(model, &config.delay, eps, &steady, &grid)?;
                    push(format!("block conservation {tag}"), block.conservation_defect() <= 1e-10, format!("{:e}", block.conservation_defect()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
                let mut worst_mean = 0.0f64;
                for _ in 0..5 {
                    let g = random_perturbation(&steady.profile, 0.1, &mut rng)?;
                    let z = nonlinear_residual(model, &steady, &mat, &g)?;
                    worst_mean = worst_mean.max(z.mean.abs());
                }
                push(format!("remainder has zero mean {tag}"), worst_mean <= 1e-12, format!("{worst_mean:e}"));
            }
            Ok(checks)
        })
        .collect::<Result<_>>()?;
    for checks in per_eps {
        out.checks.extend(checks);
    }

    if let Some(lip) = model.sup_dmu() {
        let eps = eps_values.iter().copied().filter(|e| e * lip < 1.0).fold(0.0, f64::max);
        let mut holds = true;
        for _ in 0..20 {
            let f = random_density(grid, &mut rng)?;
            let g = random_density(grid, &mut rng)?;
            holds &= lipschitz_check(model, eps, &f, &g)?.holds();
        }
        out.check(format!("activity map Lipschitz at eps = {eps}"), holds, "20 random pairs");
    }

    let gron = GronwallConstants { a: -1.0, c1: 1.0, c2: 1.0 };
    let (ts, us) = integrate_riccati(gron.a, gron.c2, 0.25, 20.0, 20_000);
    out.check("Gronwall majorant", gron.majorizes(&ts, &us) == Some(true), "u' = -u + u^2, u0 = 0.25");

    let passed = out.checks.iter().filter(|c| c.passed).count();
    report.insert("passed".into(), json!(passed));
    report.insert("total".into(), json!(out.checks.len()));
    let checks = out.checks.clone();
    report.insert("checks".into(), serde_json::to_value(checks).map_err(|e| Error::Config(e.to_string()))?);
    out.json("check_report.json", &report)
}

/// Mass-zero perturbation `F * (c sin(kx + phase) + shift)` with amplitude
/// at most `scale` relative to `F`.
pub fn random_perturbation(steady: &Density, scale: f64, rng: &mut ChaCha8Rng) -> Result<Density> {
    let grid = *steady.grid();
    let k = rng.gen_range(0.3..3.0);
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let c = rng.gen_range(0.3..1.0) * scale;
    let raw: Vec<f64> = (0..grid.n())
        .map(|i| steady.values[i] * c * (k * grid.center(i) + phase).sin())
        .collect();
    let mean = raw.iter().sum::<f64>() * grid.dx();
    let values = raw.iter().zip(&steady.values).map(|(r, f)| r - mean * f).collect();
    Density::new(grid, values)
}

/// RK4 for `u' = a u + c2 u^2`.
pub fn integrate_riccati(a: f64, c2: f64, u0: f64, t_final: f64, steps: usize) -> (Vec<f64>, Vec<f64>) {
    let h = t_final / steps as f64;
    let f = |u: f64| a * u + c2 * u * u;
    let mut ts = Vec::with_capacity(steps + 1);
    let mut us = Vec::with_capacity(steps + 1);
    let mut u = u0;
    ts.push(0.0);
    us.push(u);
    for k in 1..=steps {
        let k1 = f(u);
        let k2 = f(u + 0.5 * h * k1);
        let k3 = f(u + 0.5 * h * k2);
        let k4 = f(u + h * k3);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        ts.push(k as f64 * h);
        us.push(u);
    }
    (ts, us)
}
