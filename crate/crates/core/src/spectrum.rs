//! Dense discretizations of the linearized generators and their spectra.
//!
//! No delay, on perturbations `g` of the steady state `(F, M)`:
//!
//! `Lambda g = -d_x g - a_eps g - a'_eps F M[g] + delta_0 M[g]`,
//! `M[g] = (1 - kappa)^{-1} int a_eps g`, `kappa = int a'_eps F`,
//!
//! with `a_eps = a(x, eps M)` and `a'_eps = eps d_mu a(x, eps M)`. The
//! derivative is first-order upwind, `delta_0` is a unit of mass in cell 0,
//! and the last cell keeps what flows into it, so `1^T Lambda dx = 0`
//! exactly. The split `Lambda = A + B` keeps transport and depletion in `B`
//! and the rank-one coupling `(delta_0 - a'_eps F) x M[g]` in `A`.
//!
//! With a delay kernel the state is `(g, v)`, `v(y)` the recent discharge
//! variations on a delay grid of the same step, transported towards larger
//! `y` and leaving at the horizon:
//!
//! `d_t g = -d_x g - a_eps g - a'_eps F D[v] + delta_0 O[g, v]`,
//! `d_t v = -d_y v + delta_0 O[g, v]`,
//! `D[v] = int v b`, `O[g, v] = int a_eps g + kappa D[v]`.

use faer::linalg::solvers::DenseSolveCore;
use faer::prelude::*;
use faer::{c64, Mat};
use serde::Serialize;

use crate::dynamics::{delay_weights, fit_exponential, DecayFit, NORM_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{l1_norm, Grid};
use crate::model::{DelayKernel, RateModel};
use crate::steady::SteadyState;

/// `-d_x` by upwinding with no inflow; the last cell accumulates.
pub(crate) fn upwind_apply(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let inflow = if i == 0 { 0.0 } else { values[i - 1] };
        let outflow = if i + 1 == n { 0.0 } else { values[i] };
        out[i] = (inflow - outflow) / dx;
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorMeta {
    pub eps: f64,
    pub model: String,
    pub kernel: String,
    /// Age cells.
    pub n_g: usize,
    /// Delay cells, zero without delay.
    pub n_v: usize,
    pub dx: f64,
    pub x_max: f64,
    /// Tail exponent of the delay kernel, used for the weight on `v`.
    pub delta: Option<f64>,
    pub kappa: f64,
    pub activity: f64,
    /// `a0` of the rate; the non-dominant spectrum sits left of `-a0/2`.
    pub a0: f64,
}

impl GeneratorMeta {
    /// `a* = -a0/2` without delay, `max(a*, -delta)` with delay.
    pub fn essential_bound(&self) -> f64 {
        let a_star = -0.5 * self.a0;
        match self.delta {
            Some(d) => a_star.max(-d),
            None => a_star,
        }
    }
}

/// Dense generator with its transport/coupling split.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    full: Mat<f64>,
    a_part: Mat<f64>,
    b_part: Mat<f64>,
    meta: GeneratorMeta,
}

impl GeneratorMatrix {
    pub fn dim(&self) -> usize {
        self.full.nrows()
    }

    pub fn full(&self) -> &Mat<f64> {
        &self.full
    }

    /// Rank-structured coupling part.
    pub fn a_part(&self) -> &Mat<f64> {
        &self.a_part
    }

    /// Transport and depletion part.
    pub fn b_part(&self) -> &Mat<f64> {
        &self.b_part
    }

    pub fn meta(&self) -> &GeneratorMeta {
        &self.meta
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (j, &xj) in x.iter().enumerate().take(n) {
            if xj == 0.0 {
                continue;
            }
            let col = self.full.col(j);
            for i in 0..n {
                out[i] += col[i] * xj;
            }
        }
        out
    }

    /// `max_j |sum_{i < n_g} Lambda_ij dx|`: the conserved functional
    /// (`1` on ages, `0` on delays) applied to every column.
    pub fn conservation_defect(&self) -> f64 {
        let dx = self.meta.dx;
        (0..self.dim())
            .map(|j| {
                let col = self.full.col(j);
                ((0..self.meta.n_g).map(|i| col[i]).sum::<f64>() * dx).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |A + B - Lambda|`.
    pub fn split_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((self.a_part[(i, j)] + self.b_part[(i, j)] - self.full[(i, j)]).abs());
            }
        }
        worst
    }

    /// Most negative off-diagonal entry, relative to the largest entry.
    pub fn worst_offdiagonal(&self) -> f64 {
        let n = self.dim();
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let v = self.full[(i, j)];
                scale = scale.max(v.abs());
                if i != j {
                    worst = worst.min(v);
                }
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Off-diagonal entries are nonnegative up to `1e-12` relative.
    pub fn is_metzler(&self) -> bool {
        self.worst_offdiagonal() >= -1e-12
    }

    /// Norm used for decay curves: `L1` on ages plus `L1` weighted by
    /// `e^{-delta y}` on delays.
    pub fn state_norm(&self, x: &[f64]) -> f64 {
        let (g, v) = x.split_at(self.meta.n_g);
        l1_norm(g, self.meta.dx, None) + l1_norm(v, self.meta.dx, self.meta.delta)
    }

    /// `<g>`, the conserved pairing.
    pub fn pairing(&self, x: &[f64]) -> f64 {
        x[..self.meta.n_g].iter().sum::<f64>() * self.meta.dx
    }
}

struct Linearization {
    a_eps: Vec<f64>,
    a_prime_f: Vec<f64>,
    kappa: f64,
}

fn linearize(model: &RateModel, eps: f64, steady: &SteadyState, grid: &Grid) -> Result<Linearization> {
    if steady.profile.grid() != grid {
        return Err(Error::InvalidArgument("steady state lives on a different grid".into()));
    }
    if eps > 0.0 && !model.is_smooth() {
        return Err(Error::NonSmoothModel("activity derivative"));
    }
    let mu = eps * steady.activity;
    let a_eps: Vec<f64> = grid.centers().iter().map(|&x| model.rate(x, mu)).collect();
    let a_prime_f: Vec<f64> = if eps == 0.0 {
        vec![0.0; grid.n()]
    } else {
        grid.centers()
            .iter()
            .zip(&steady.profile.values)
            .map(|(&x, f)| Ok(eps * model.rate_dmu(x, mu)? * f))
            .collect::<Result<_>>()?
    };
    let kappa = a_prime_f.iter().sum::<f64>() * grid.dx();
    if kappa >= 1.0 {
        return Err(Error::KappaGeqOne { kappa });
    }
    Ok(Linearization { a_eps, a_prime_f, kappa })
}

fn fill_transport(b: &mut Mat<f64>, offset: usize, n: usize, dx: f64, accumulate: bool) {
    for i in 0..n {
        if i + 1 < n || !accumulate {
            b[(offset + i, offset + i)] -= 1.0 / dx;
        }
        if i + 1 < n {
            b[(offset + i + 1, offset + i)] += 1.0 / dx;
        }
    }
}

fn finish(a_part: Mat<f64>, b_part: Mat<f64>, meta: GeneratorMeta) -> GeneratorMatrix {
    let full = &a_part + &b_part;
    GeneratorMatrix {
        full,
        a_part,
        b_part,
        meta,
    }
}

/// Linearized generator without delay.
pub fn assemble_nodelay(model: &RateModel, eps: f64, steady: &SteadyState, grid: &Grid) -> Result<GeneratorMatrix> {
    let lin = linearize(model, eps, steady, grid)?;
    let n = grid.n();
    let dx = grid.dx();
    let mut b = Mat::<f64>::zeros(n, n);
    fill_transport(&mut b, 0, n, dx, true);
    for i in 0..n {
        b[(i, i)] -= lin.a_eps[i];
    }
    let scale = dx / (1.0 - lin.kappa);
    let m_row: Vec<f64> = lin.a_eps.iter().map(|a| a * scale).collect();
    let mut gamma: Vec<f64> = lin.a_prime_f.iter().map(|v| -v).collect();
    gamma[0] += 1.0 / dx;
    let a = Mat::from_fn(n, n, |i, j| gamma[i] * m_row[j]);
    Ok(finish(
        a,
        b,
        GeneratorMeta {
            eps,
            model: model.label(),
            kernel: "dirac".into(),
            n_g: n,
            n_v: 0,
            dx,
            x_max: grid.x_max(),
            delta: None,
            kappa: lin.kappa,
            activity: steady.activity,
            a0: model.a0(),
        },
    ))
}

/// Block generator on `(g, v)` for a kernel with a density. The delay grid
/// shares the age step and covers the kernel up to a tail of `1e-10`.
pub fn assemble_delay(
    model: &RateModel,
    kernel: &DelayKernel,
    eps: f64,
    steady: &SteadyState,
    grid: &Grid,
) -> Result<GeneratorMatrix> {
    if kernel.is_dirac() {
        return Err(Error::KernelNotDensity);
    }
    let lin = linearize(model, eps, steady, grid)?;
    let n = grid.n();
    let dx = grid.dx();
    let w = delay_weights(kernel, dx)?;
    let nv = w.len();
    let dim = n + nv;

    let mut b = Mat::<f64>::zeros(dim, dim);
    fill_transport(&mut b, 0, n, dx, true);
    fill_transport(&mut b, n, nv, dx, false);
    for i in 0..n {
        b[(i, i)] -= lin.a_eps[i];
    }

    // O[g, v] on all columns
    let o_row: Vec<f64> = (0..dim)
        .map(|j| if j < n { lin.a_eps[j] * dx } else { lin.kappa * w[j - n] })
        .collect();
    let mut a = Mat::<f64>::zeros(dim, dim);
    for j in 0..dim {
        a[(0, j)] += o_row[j] / dx;
        a[(n, j)] += o_row[j] / dx;
    }
    for i in 0..n {
        if lin.a_prime_f[i] != 0.0 {
            for (jv, wj) in w.iter().enumerate() {
                a[(i, n + jv)] -= lin.a_prime_f[i] * wj;
            }
        }
    }
    Ok(finish(
        a,
        b,
        GeneratorMeta {
            eps,
            model: model.label(),
            kernel: kernel.label(),
            n_g: n,
            n_v: nv,
            dx,
            x_max: grid.x_max(),
            delta: kernel.delta(),
            kappa: lin.kappa,
            activity: steady.activity,
            a0: model.a0(),
        },
    ))
}

fn to_pairs(values: &[c64]) -> Vec<(f64, f64)> {
    values.iter().map(|z| (z.re, z.im)).collect()
}

/// Eigenvalues sorted by decreasing real part.
pub fn eigenvalues(mat: &GeneratorMatrix) -> Result<Vec<(f64, f64)>> {
    let ev = mat
        .full
        .eigenvalues()
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let mut pairs = to_pairs(&ev);
    if pairs.iter().any(|(re, im)| !re.is_finite() || !im.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0).then(y.1.total_cmp(&x.1)));
    Ok(pairs)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub dimension: usize,
    /// Sorted by decreasing real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub cut: f64,
    /// A cut at or above zero cannot separate the conserved mode.
    pub cut_sane: bool,
    pub count_above_cut: usize,
    /// Eigenvalue of smallest modulus.
    pub zero_eigenvalue: (f64, f64),
    /// Its right eigenvector, scaled to unit pairing.
    pub zero_vector: Vec<f64>,
    /// `||Lambda v||_inf / ||v||_inf`.
    pub zero_residual: f64,
    /// Largest real part above the cut other than the zero eigenvalue, or
    /// the cut itself.
    pub gap: f64,
    pub zero_vector_positive: bool,
    pub metzler: bool,
}

/// Full eigen-decomposition report with respect to the half plane
/// `Re > cut`.
pub fn spectrum_report(mat: &GeneratorMatrix, cut: f64) -> Result<SpectrumReport> {
    if mat.dim() > 6000 {
        return Err(Error::InvalidArgument(format!("dimension {} exceeds the dense budget", mat.dim())));
    }
    let eigenvalues = eigenvalues(mat)?;
    let zero_idx = eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .0.hypot(x.1 .1).total_cmp(&y.1 .0.hypot(y.1 .1)))
        .map(|(i, _)| i)
        .unwrap();
    let count_above_cut = eigenvalues.iter().filter(|z| z.0 > cut).count();
    let gap = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, z)| *i != zero_idx && z.0 > cut)
        .map(|(_, z)| z.0)
        .fold(cut, f64::max);
    let (zero_vector, zero_residual) = null_vector(mat)?;
    let zero_vector_positive = zero_vector.iter().all(|v| *v > 0.0);
    Ok(SpectrumReport {
        dimension: mat.dim(),
        zero_eigenvalue: eigenvalues[zero_idx],
        eigenvalues,
        cut,
        cut_sane: cut < 0.0,
        count_above_cut,
        zero_vector,
        zero_residual,
        gap,
        zero_vector_positive,
        metzler: mat.is_metzler(),
    })
}

/// Inverse iteration with a small positive shift; the generator is
/// singular, so the shift keeps the factorization regular.
fn null_vector(mat: &GeneratorMatrix) -> Result<(Vec<f64>, f64)> {
    let n = mat.dim();
    let shift = 1e-9;
    let shifted = Mat::from_fn(n, n, |i, j| mat.full[(i, j)] - if i == j { shift } else { 0.0 });
    let lu = shifted.partial_piv_lu();
    let mut x = Mat::<f64>::from_fn(n, 1, |_, _| 1.0);
    for _ in 0..4 {
        x = lu.solve(&x);
        let scale = (0..n).map(|i| x[(i, 0)].abs()).fold(0.0, f64::max);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Eigensolver("inverse iteration broke down".into()));
        }
        for i in 0..n {
            x[(i, 0)] /= scale;
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let pairing = mat.pairing(&v);
    if pairing != 0.0 {
        v.iter_mut().for_each(|e| *e /= pairing);
    }
    let lv = mat.apply(&v);
    let vmax = v.iter().map(|e| e.abs()).fold(0.0, f64::max);
    let residual = lv.iter().map(|e| e.abs()).fold(0.0, f64::max) / vmax;
    Ok((v, residual))
}

#[derive(Debug, Clone, Serialize)]
pub struct BSemigroupReport {
    /// `(t, max L1 error over the test bundle)`.
    pub errors: Vec<(f64, f64)>,
    pub max_error: f64,
    /// `max ||S_B(t) g|| / (C e^{3 beta t} ||g||)` over bundle and times.
    pub worst_decay_ratio: f64,
    pub decay_ok: bool,
}

/// Steps the transport-depletion part (exact shift, then the factor
/// `e^{-a_eps dt}`) and compares with the characteristic formula
/// `(S_B(t) g)(x) = e^{A(x - t) - A(x)} g(x - t) 1{x >= t}` on a bundle of
/// unit-mass test densities. Also checks the decay estimate
/// `||S_B(t)|| <= C e^{3 beta t}` with `beta = -a0/4`,
/// `C = e^{3 a0 x1 / 4}` and `x1` where `a(., 0)` reaches `3 a0 / 4`.
pub fn validate_b_semigroup(
    model: &RateModel,
    eps: f64,
    steady: &SteadyState,
    grid: &Grid,
    t_list: &[f64],
) -> Result<BSemigroupReport> {
    let dx = grid.dx();
    let n = grid.n();
    let mu = eps * steady.activity;
    let centers = grid.centers();
    let survival: Vec<f64> = centers.iter().map(|&x| (-model.rate(x, mu) * dx).exp()).collect();

    let bundle: Vec<Box<dyn Fn(f64) -> f64>> = vec![
        Box::new(|x: f64| (-x).exp()),
        Box::new(|x: f64| (x * (3.0 - x)).max(0.0)),
        Box::new(|x: f64| (1.0 + (2.0 * x).sin()) * (-0.5 * x).exp()),
    ];
    let a0 = model.a0();
    let x1 = model.level_crossing(0.75);
    let beta = -0.25 * a0;
    let c = (0.75 * a0 * x1).exp() * (0.75 * a0 * dx).exp();

    let mut errors = Vec::with_capacity(t_list.len());
    let mut worst_ratio = 0.0f64;
    for &t in t_list {
        let k = (t / dx).round() as usize;
        if (k as f64 * dx - t).abs() > 1e-9 * dx.max(t) {
            return Err(Error::InvalidArgument(format!("t = {t} is not a multiple of dx = {dx}")));
        }
        let mut worst = 0.0f64;
        for g in &bundle {
            let norm = centers.iter().map(|&x| g(x).abs()).sum::<f64>() * dx;
            let mut u: Vec<f64> = centers.iter().map(|&x| g(x) / norm).collect();
            let start = u.clone();
            for _ in 0..k {
                let carried = u[n - 1] + u[n - 2];
                for i in (1..n - 1).rev() {
                    u[i] = u[i - 1];
                }
                u[n - 1] = carried;
                u[0] = 0.0;
                for (ui, s) in u.iter_mut().zip(&survival) {
                    *ui *= s;
                }
            }
            let err: f64 = centers
                .iter()
                .zip(&u)
                .map(|(&x, ui)| {
                    let exact = if x >= t {
                        (model.primitive(x - t, mu) - model.primitive(x, mu)).exp() * g(x - t) / norm
                    } else {
                        0.0
                    };
                    (ui - exact).abs()
                })
                .sum::<f64>()
                * dx;
            worst = worst.max(err);
            let ratio = l1_norm(&u, dx, None) / (c * (3.0 * beta * t).exp() * l1_norm(&start, dx, None));
            worst_ratio = worst_ratio.max(ratio);
        }
        errors.push((t, worst));
    }
    let max_error = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    Ok(BSemigroupReport {
        errors,
        max_error,
        worst_decay_ratio: worst_ratio,
        decay_ok: worst_ratio <= 1.0,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeightedDecay {
    pub t: f64,
    /// Operator norm of the stepped delay-block semigroup on `L1(e^{-delta y})`.
    pub measured: f64,
    /// `e^{-delta t}`.
    pub bound: f64,
}

/// Steps the delay block of `B` with `I + dy B_vv` and measures its
/// weighted operator norm column by column.
pub fn v_block_decay(mat: &GeneratorMatrix, t_list: &[f64]) -> Result<Vec<WeightedDecay>> {
    let meta = mat.meta();
    let delta = meta.delta.ok_or(Error::KernelNotDensity)?;
    let (n, nv, dy) = (meta.n_g, meta.n_v, meta.dx);
    let diag: Vec<f64> = (0..nv).map(|j| 1.0 + dy * mat.b_part[(n + j, n + j)]).collect();
    let sub: Vec<f64> = (0..nv - 1).map(|j| dy * mat.b_part[(n + j + 1, n + j)]).collect();
    let weight = |j: usize| (-delta * (j as f64 + 0.5) * dy).exp();
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let k = (t / dy).round() as usize;
        let mut measured = 0.0f64;
        for j in 0..nv {
            let mut u = vec![0.0; nv];
            u[j] = 1.0;
            for _ in 0..k {
                for i in (0..nv).rev() {
                    u[i] = diag[i] * u[i] + if i > 0 { sub[i - 1] * u[i - 1] } else { 0.0 };
                }
            }
            let norm: f64 = u.iter().enumerate().map(|(i, x)| x.abs() * weight(i)).sum();
            measured = measured.max(norm / weight(j));
        }
        out.push(WeightedDecay {
            t,
            measured,
            bound: (-delta * k as f64 * dy).exp(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Fit on the second half of the run, `None` for a vanishing curve.
    pub fit: Option<DecayFit>,
}

/// Integrates `d/dt z = Lambda z` with implicit Euler from a perturbation
/// of zero pairing and fits the decay of its norm.
pub fn semigroup_decay(mat: &GeneratorMatrix, z0: &[f64], t_final: f64, dt: f64) -> Result<DecayCurve> {
    let n = mat.dim();
    if z0.len() != n {
        return Err(Error::InvalidArgument("initial vector has the wrong size".into()));
    }
    let scale = mat.state_norm(z0).max(1.0);
    let mass = mat.pairing(z0);
    if mass.abs() > 1e-12 * scale {
        return Err(Error::MassNotZero { mass });
    }
    if !(dt > 0.0) || !(t_final > dt) {
        return Err(Error::InvalidArgument("need 0 < dt < t_final".into()));
    }
    let system = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - dt * mat.full[(i, j)]);
    let lu = system.partial_piv_lu();
    let steps = (t_final / dt).round() as usize;
    let mut z = Mat::<f64>::from_fn(n, 1, |i, _| z0[i]);
    let mut times = vec![0.0];
    let mut norms = vec![mat.state_norm(z0)];
    for k in 1..=steps {
        z = lu.solve(&z);
        let v: Vec<f64> = (0..n).map(|i| z[(i, 0)]).collect();
        times.push(k as f64 * dt);
        norms.push(mat.state_norm(&v));
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&norms)
        .filter(|(t, y)| **t >= 0.5 * t_final && **y > NORM_FLOOR)
        .map(|(t, y)| (*t, *y))
        .unzip();
    let fit = if ts.len() >= 2 { Some(fit_exponential(&ts, &ys)?) } else { None };
    Ok(DecayCurve { times, norms, fit })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConeCheck {
    pub t: f64,
    /// Smallest entry of the approximate `e^{t Lambda}`, relative to its
    /// largest.
    pub min_relative_entry: f64,
    pub invariant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct KatoReport {
    pub metzler: bool,
    pub worst_offdiagonal: f64,
    pub cones: Vec<ConeCheck>,
}

impl KatoReport {
    pub fn passes(&self) -> bool {
        self.metzler && self.cones.iter().all(|c| c.invariant)
    }
}

/// Sign pattern of `Lambda` and invariance of the nonnegative cone under
/// `((I - h Lambda)^{-1})^{2^J}` with `h = t / 2^J`, checked on every
/// indicator vector at once.
pub fn kato_positivity_check(mat: &GeneratorMatrix, times: &[f64]) -> Result<KatoReport> {
    let n = mat.dim();
    let mut cones = Vec::with_capacity(times.len());
    for &t in times {
        let squarings = (t / 0.01).log2().ceil().max(0.0) as u32;
        let h = t / 2f64.powi(squarings as i32);
        let system = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - h * mat.full[(i, j)]);
        let mut r = system.partial_piv_lu().inverse();
        for _ in 0..squarings {
            r = &r * &r;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            for i in 0..n {
                lo = lo.min(r[(i, j)]);
                hi = hi.max(r[(i, j)].abs());
            }
        }
        let rel = if hi > 0.0 { lo / hi } else { 0.0 };
        cones.push(ConeCheck {
            t,
            min_relative_entry: rel,
            invariant: rel >= -1e-12,
        });
    }
    Ok(KatoReport {
        metzler: mat.is_metzler(),
        worst_offdiagonal: mat.worst_offdiagonal(),
        cones,
    })
}

/// Hausdorff distance between two eigenvalue sets restricted to
/// `Re > cut`.
pub fn hausdorff_above(a: &[(f64, f64)], b: &[(f64, f64)], cut: f64) -> f64 {
    let pa: Vec<_> = a.iter().filter(|z| z.0 > cut).collect();
    let pb: Vec<_> = b.iter().filter(|z| z.0 > cut).collect();
    let one_way = |p: &[&(f64, f64)], q: &[&(f64, f64)]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x.0 - y.0).hypot(x.1 - y.1)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(&pa, &pb).max(one_way(&pb, &pa))
}
