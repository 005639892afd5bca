//! Exact-shift time stepping of the nonlinear time-elapsed system.
//!
//! With `dt = dx` the transport is a shift by one cell. Each step
//!
//! 1. solves for the activity `m` (instantaneous, or through the delay
//!    history),
//! 2. moves cell `i` to cell `i + 1` with the survival factor
//!    `exp(A(x_i) - A(x_i + dt))`, the last cell keeping its content,
//! 3. puts everything that fired back into cell 0.
//!
//! Mass is conserved up to rounding, and the sampled steady profile is an
//! exact fixed point of the scheme, so relaxation can be followed down to
//! the floating point floor.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Density;
use crate::model::{ActivityKernel, DelayKernel, RateModel};
use crate::spectrum::{upwind_apply, GeneratorMatrix};
use crate::steady::SteadyState;

/// Delay tail left out of the history buffer.
pub const HISTORY_TAIL: f64 = 1e-10;

/// Decay fits refuse norms below this floor.
pub const NORM_FLOOR: f64 = 1e-13;

const MAX_ITERATIONS: usize = 200;

/// Past discharge values on the delay grid, most recent first.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    weights: Vec<f64>,
    past: VecDeque<f64>,
}

/// Cell masses of the kernel on `[j dy, (j + 1) dy)`, with the tail beyond
/// the horizon lumped into the last cell so they sum to one.
pub fn delay_weights(kernel: &DelayKernel, dy: f64) -> Result<Vec<f64>> {
    if kernel.is_dirac() {
        return Err(Error::KernelNotDensity);
    }
    let depth = ((kernel.horizon(HISTORY_TAIL) / dy).ceil() as usize).max(1);
    let mut w = kernel.cell_masses(dy, depth)?;
    *w.last_mut().unwrap() += kernel.survival(depth as f64 * dy);
    Ok(w)
}

impl HistoryBuffer {
    /// Buffer covering the kernel up to a tail of [`HISTORY_TAIL`], filled
    /// with the constant discharge `prefill`.
    pub fn new(kernel: &DelayKernel, dt: f64, prefill: f64) -> Result<Self> {
        let weights = delay_weights(kernel, dt)?;
        let past = std::iter::repeat_n(prefill, weights.len()).collect();
        Ok(HistoryBuffer { weights, past })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `m = w_now * p_now + rest`, where cell `j` of the kernel sees the
    /// mean of the discharges at its two ends.
    fn split(&self) -> (f64, f64) {
        let w = &self.weights;
        let mut rest = 0.5 * w[0] * self.past[0];
        let newer = self.past.iter();
        let older = self.past.iter().skip(1);
        for ((wj, a), b) in w[1..].iter().zip(newer).zip(older) {
            rest += 0.5 * wj * (a + b);
        }
        (0.5 * w[0], rest)
    }

    fn push(&mut self, p: f64) {
        self.past.pop_back();
        self.past.push_front(p);
    }
}

/// How the network activity is obtained from the discharge flux.
#[derive(Debug, Clone)]
pub enum ActivityMemory {
    /// `m = p`.
    Instantaneous,
    Delayed(HistoryBuffer),
}

impl ActivityMemory {
    pub fn for_kernel(kernel: &DelayKernel, dt: f64, prefill: f64) -> Result<Self> {
        if kernel.is_dirac() {
            Ok(ActivityMemory::Instantaneous)
        } else {
            Ok(ActivityMemory::Delayed(HistoryBuffer::new(kernel, dt, prefill)?))
        }
    }

    fn split(&self) -> (f64, f64) {
        match self {
            ActivityMemory::Instantaneous => (1.0, 0.0),
            ActivityMemory::Delayed(h) => h.split(),
        }
    }

    fn push(&mut self, p: f64) {
        if let ActivityMemory::Delayed(h) = self {
            h.push(p);
        }
    }
}

/// Solves `m = w_now * int a(x, eps m) f dx + rest` by damped fixed point
/// iteration.
fn solve_activity(model: &RateModel, kernel: &ActivityKernel, eps: f64, w_now: f64, rest: f64) -> Result<f64> {
    let map = |m: f64| w_now * kernel.integral(eps * m) + rest;
    if eps == 0.0 {
        return Ok(map(0.0));
    }
    let bound = eps * w_now * model.sup_dmu().unwrap_or(f64::INFINITY);
    if !(bound < 1.0) {
        return Err(Error::ContractionViolated { bound });
    }
    let mut m = map(0.0);
    let mut damping = 1.0;
    let mut last_step = f64::INFINITY;
    let mut last_sign = 0.0;
    for _ in 0..MAX_ITERATIONS {
        let step = map(m) - m;
        if step.abs() <= 1e-15 * m.abs().max(1.0) {
            return Ok(m + step);
        }
        if step.signum() == -last_sign && step.abs() > 0.5 * last_step {
            damping = 0.5;
        }
        last_sign = step.signum();
        last_step = step.abs();
        m += damping * step;
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: (map(m) - m).abs(),
    })
}

/// The activity `mu` with `mu = int a(x, eps mu) f dx`.
pub fn activity_fixed_point(model: &RateModel, eps: f64, f: &Density) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be >= 0, got {eps}")));
    }
    let centers = f.grid().centers();
    let kernel = model.activity_kernel(&centers, &f.values, f.grid().dx());
    solve_activity(model, &kernel, eps, 1.0, 0.0)
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub density: Density,
    /// Discharge flux during the step.
    pub p: f64,
    /// Network activity during the step.
    pub m: f64,
}

/// Advances `f` by one step `dt = dx`.
pub fn step(model: &RateModel, eps: f64, f: &Density, memory: &mut ActivityMemory, dt: f64) -> Result<StepOutcome> {
    let grid = *f.grid();
    let dx = grid.dx();
    if (dt - dx).abs() > 1e-12 * dx {
        return Err(Error::CflViolation { dt, dx });
    }
    if let Some((index, &value)) = f.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let centers = grid.centers();
    let kernel = model.activity_kernel(&centers, &f.values, dx);
    let (w_now, rest) = memory.split();
    let m = solve_activity(model, &kernel, eps, w_now, rest)?;
    let mu = eps * m;
    let p = kernel.integral(mu);

    let n = grid.n();
    let mut next = vec![0.0; n];
    let mut fired = 0.0;
    let mut a_here = model.primitive(centers[0], mu);
    for i in 0..n {
        let a_there = model.primitive(centers[i] + dx, mu);
        let log_s = a_here - a_there;
        fired += f.values[i] * -log_s.exp_m1();
        next[(i + 1).min(n - 1)] += f.values[i] * log_s.exp();
        a_here = a_there;
    }
    next[0] += fired;
    memory.push(p);
    Ok(StepOutcome {
        density: Density::new(grid, next)?,
        p,
        m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub mass: f64,
    pub p: f64,
    pub m: f64,
    /// `||f(t) - F||_1`, NaN without a reference state.
    pub l1_dist: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub snapshots: Vec<(f64, Density)>,
}

impl Trajectory {
    pub fn max_mass_drift(&self, reference: f64) -> f64 {
        self.samples.iter().map(|s| (s.mass - reference).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,mass,p,m,l1_dist")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{},{}", s.t, s.mass, s.p, s.m, s.l1_dist)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// One nonlinear run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: RateModel,
    pub kernel: DelayKernel,
    pub eps: f64,
    pub initial: Density,
    /// State the `l1_dist` column is measured against.
    pub reference: Option<Density>,
    pub t_final: f64,
    /// Record a sample every this many steps.
    pub record_every: usize,
    /// Keep the density every this many steps.
    pub snapshot_every: Option<usize>,
}

/// Runs `step` up to `t_final`. The delay history starts filled with the
/// instantaneous discharge of the initial state.
pub fn simulate(sim: &Simulation) -> Result<Trajectory> {
    let f0 = &sim.initial;
    let dt = f0.grid().dx();
    if let Some((index, &value)) = f0.values.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeDensity { index, value });
    }
    let every = sim.record_every.max(1);
    let p0 = activity_fixed_point(&sim.model, sim.eps, f0)?;
    let mut memory = ActivityMemory::for_kernel(&sim.kernel, dt, p0)?;
    let dist = |f: &Density| sim.reference.as_ref().map_or(f64::NAN, |r| f.l1_distance(r));

    let steps = (sim.t_final / dt).round() as usize;
    let mut traj = Trajectory::default();
    traj.samples.push(Sample {
        t: 0.0,
        mass: f0.mass(),
        p: p0,
        m: p0,
        l1_dist: dist(f0),
    });
    if sim.snapshot_every.is_some() {
        traj.snapshots.push((0.0, f0.clone()));
    }
    let mut f = f0.clone();
    for k in 1..=steps {
        let out = step(&sim.model, sim.eps, &f, &mut memory, dt)?;
        f = out.density;
        let t = k as f64 * dt;
        if k % every == 0 || k == steps {
            traj.samples.push(Sample {
                t,
                mass: f.mass(),
                p: out.p,
                m: out.m,
                l1_dist: dist(&f),
            });
        }
        if let Some(s) = sim.snapshot_every {
            if s > 0 && (k % s == 0 || k == steps) {
                traj.snapshots.push((t, f.clone()));
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Slope of `log ||f - F||`.
    pub alpha: f64,
    /// `e^{intercept}`.
    pub amplitude: f64,
    pub r2: f64,
}

/// Least squares line through `(t, log y)`.
pub fn fit_exponential(ts: &[f64], ys: &[f64]) -> Result<DecayFit> {
    if ts.len() != ys.len() || ts.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples to fit a rate".into()));
    }
    if let Some((t, &value)) = ts.iter().zip(ys).find(|(_, y)| !(**y > NORM_FLOOR)) {
        return Err(Error::WindowBelowFloor { t: *t, value });
    }
    let n = ts.len() as f64;
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let tm = ts.iter().sum::<f64>() / n;
    let lm = logs.iter().sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for (t, l) in ts.iter().zip(&logs) {
        stt += (t - tm) * (t - tm);
        stl += (t - tm) * (l - lm);
        sll += (l - lm) * (l - lm);
    }
    if stt == 0.0 {
        return Err(Error::InvalidArgument("fit window has a single time".into()));
    }
    let alpha = stl / stt;
    let intercept = lm - alpha * tm;
    let ss_res: f64 = ts
        .iter()
        .zip(&logs)
        .map(|(t, l)| (l - intercept - alpha * t).powi(2))
        .sum();
    let r2 = if sll == 0.0 { 1.0 } else { 1.0 - ss_res / sll };
    Ok(DecayFit {
        alpha,
        amplitude: intercept.exp(),
        r2,
    })
}

/// Fits `||f(t) - F|| ~ C e^{alpha t}` on the samples with `t1 <= t <= t2`.
pub fn fit_decay_rate(traj: &Trajectory, t1: f64, t2: f64) -> Result<DecayFit> {
    if !(t2 > t1) {
        return Err(Error::InvalidArgument(format!("empty fit window [{t1}, {t2}]")));
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .samples
        .iter()
        .filter(|s| s.t >= t1 && s.t <= t2)
        .map(|s| (s.t, s.l1_dist))
        .unzip();
    fit_exponential(&ts, &ys)
}

/// Discrete right-hand side of the no-delay system at `f`:
/// transport, depletion at `a(x, eps phi[f])` and reinjection of `phi[f]`.
pub fn nonlinear_rhs(model: &RateModel, eps: f64, f: &Density) -> Result<Vec<f64>> {
    let grid = f.grid();
    let dx = grid.dx();
    let p = activity_fixed_point(model, eps, f)?;
    let mut out = upwind_apply(&f.values, dx);
    for (i, o) in out.iter_mut().enumerate() {
        *o -= model.rate(grid.center(i), eps * p) * f.values[i];
    }
    out[0] += p / dx;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Remainder {
    /// `||Z[g]||_1`, the boundary source counted as mass in cell 0.
    pub l1: f64,
    /// `<Z[g]>`, zero by conservation.
    pub mean: f64,
}

/// `Z[g] = N(F + g) - N(F) - Lambda g` for the no-delay generator `lambda`
/// assembled at `steady`.
pub fn nonlinear_residual(model: &RateModel, steady: &SteadyState, lambda: &GeneratorMatrix, g: &Density) -> Result<Remainder> {
    let mass = g.mass();
    if mass.abs() > 1e-10 {
        return Err(Error::MassNotZero { mass });
    }
    if lambda.dim() != g.values.len() {
        return Err(Error::InvalidArgument("generator and perturbation sizes differ".into()));
    }
    let grid = *g.grid();
    let values: Vec<f64> = steady.profile.values.iter().zip(&g.values).map(|(a, b)| a + b).collect();
    let perturbed = Density::new(grid, values)?;
    if let Some((index, &value)) = perturbed.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let n_pert = nonlinear_rhs(model, steady.eps, &perturbed)?;
    let n_base = nonlinear_rhs(model, steady.eps, &steady.profile)?;
    let lin = lambda.apply(&g.values);
    let z: Vec<f64> = (0..grid.n()).map(|i| (n_pert[i] - n_base[i]) - lin[i]).collect();
    let dx = grid.dx();
    Ok(Remainder {
        l1: z.iter().map(|v| v.abs()).sum::<f64>() * dx,
        mean: z.iter().sum::<f64>() * dx,
    })
}

/// Constants of the nonlinear Gronwall lemma for
/// `u' <= a u + C2 u^2`-type growth with linear constant `C1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallConstants {
    pub a: f64,
    pub c1: f64,
    pub c2: f64,
}

impl GronwallConstants {
    /// `(1 + C1 u0 C2 / |a + 2 C2 u0|) C1 e^{a t} u0`, defined only under the
    /// smallness condition `a + 2 C2 u0 < 0`.
    pub fn bound(&self, u0: f64, t: f64) -> Option<f64> {
        let s = self.a + 2.0 * self.c2 * u0;
        if !(s < 0.0) {
            return None;
        }
        Some((1.0 + self.c1 * u0 * self.c2 / s.abs()) * self.c1 * (self.a * t).exp() * u0)
    }

    /// Whether the bound majorizes the measured curve `u(t)` at every
    /// sample; `None` when the smallness condition fails.
    pub fn majorizes(&self, ts: &[f64], us: &[f64]) -> Option<bool> {
        let u0 = *us.first()?;
        self.bound(u0, 0.0)?;
        Some(ts.iter().zip(us).all(|(&t, &u)| u <= self.bound(u0, t).unwrap() * (1.0 + 1e-12)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzCheck {
    /// `|phi[f] - phi[g]| (1 - eps sup|d_mu a|)`.
    pub lhs: f64,
    /// `||a||_{W^{1,inf}} W1(f, g)`.
    pub rhs: f64,
}

impl LipschitzCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-14
    }
}

/// Compares both sides of the W1-Lipschitz estimate of the activity map for
/// two unit-mass densities.
pub fn lipschitz_check(model: &RateModel, eps: f64, f: &Density, g: &Density) -> Result<LipschitzCheck> {
    let w1 = f.w1_flat(g)?;
    let lip = model.sup_dmu().ok_or(Error::NonSmoothModel("activity derivative"))?;
    let norm = model.w1inf_norm().ok_or(Error::NonSmoothModel("age derivative"))?;
    let diff = (activity_fixed_point(model, eps, f)? - activity_fixed_point(model, eps, g)?).abs();
    Ok(LipschitzCheck {
        lhs: diff * (1.0 - eps * lip),
        rhs: norm * w1,
    })
}
