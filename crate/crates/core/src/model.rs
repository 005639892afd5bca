//! Firing-rate models `a(x, mu)` and synaptic delay kernels `b(y)`.
//!
//! A rate model gives the discharge probability per unit time of a neuron
//! whose last spike happened `x` time units ago while the network activity
//! is `mu`. Three families are provided:
//!
//! - [`RateModel::Constant`]: `a(x, mu) = a`.
//! - [`RateModel::SoftSigmoid`]:
//!   `a(x, mu) = (a0 + (a1 - a0)(1 - e^{-lmu mu})) (1 - e^{-lx x})`,
//!   nondecreasing in both arguments, smooth, with levels `a0` at
//!   `mu = 0` and `a1` as `mu -> inf`. Its primitive in `x` is closed form.
//! - [`RateModel::StepThreshold`]: `a(x, mu) = 1{x > sigma(mu)}` with a
//!   decreasing threshold `sigma(mu) = lo + (hi - lo) e^{-rate mu}`. It is
//!   not smooth, so derivative queries fail and the spectral machinery
//!   refuses it for `eps > 0`.
//!
//! Delay kernels are probability distributions on elapsed activity time:
//! a Dirac mass at zero (the network activity equals the discharge flux)
//! or an exponential/Erlang density with an exponential tail exponent
//! `delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Which quantity [`RateModel::eval_rate`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateDerivative {
    Value,
    Dx,
    Dmu,
    Dmumu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateModel {
    Constant {
        a: f64,
    },
    SoftSigmoid {
        a0: f64,
        a1: f64,
        lx: f64,
        lmu: f64,
    },
    StepThreshold {
        sigma_hi: f64,
        sigma_lo: f64,
        sigma_rate: f64,
    },
}

/// `x - (1 - e^{-l x}) / l`, accurate for small `l x`.
fn ramp_primitive(x: f64, l: f64) -> f64 {
    let z = l * x;
    if z < 1e-3 {
        // z/2 - z^2/6 + z^3/24 - z^4/120, times x
        x * z * (0.5 - z * (1.0 / 6.0 - z * (1.0 / 24.0 - z / 120.0)))
    } else {
        x + (-z).exp_m1() / l
    }
}

impl RateModel {
    pub fn constant(a: f64) -> Result<Self> {
        let m = RateModel::Constant { a };
        m.validate()?;
        Ok(m)
    }

    pub fn soft_sigmoid(a0: f64, a1: f64, lx: f64, lmu: f64) -> Result<Self> {
        let m = RateModel::SoftSigmoid { a0, a1, lx, lmu };
        m.validate()?;
        Ok(m)
    }

    pub fn step_threshold(sigma_hi: f64, sigma_lo: f64, sigma_rate: f64) -> Result<Self> {
        let m = RateModel::StepThreshold {
            sigma_hi,
            sigma_lo,
            sigma_rate,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks the parameter ranges; deserialized models must pass this
    /// before use.
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateModel::Constant { a } => a.is_finite() && a > 0.0,
            RateModel::SoftSigmoid { a0, a1, lx, lmu } => {
                a0.is_finite() && a1.is_finite() && a0 > 0.0 && a1 >= a0 && lx > 0.0 && lmu >= 0.0
            }
            RateModel::StepThreshold {
                sigma_hi,
                sigma_lo,
                sigma_rate,
            } => sigma_lo > 0.0 && sigma_hi >= sigma_lo && sigma_hi.is_finite() && sigma_rate >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("rate parameters out of range: {self:?}")))
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, RateModel::StepThreshold { .. })
    }

    /// `a0 = lim_{x -> inf} a(x, 0)`.
    pub fn a0(&self) -> f64 {
        match *self {
            RateModel::Constant { a } => a,
            RateModel::SoftSigmoid { a0, .. } => a0,
            RateModel::StepThreshold { .. } => 1.0,
        }
    }

    /// `a1 = lim_{x, mu -> inf} a(x, mu)`, also the supremum of the rate.
    pub fn a1(&self) -> f64 {
        match *self {
            RateModel::Constant { a } => a,
            RateModel::SoftSigmoid { a1, .. } => a1,
            RateModel::StepThreshold { .. } => 1.0,
        }
    }

    /// `sup |d_mu a|`, or `None` when the rate is not Lipschitz in `mu`.
    pub fn sup_dmu(&self) -> Option<f64> {
        match *self {
            RateModel::Constant { .. } => Some(0.0),
            RateModel::SoftSigmoid { a0, a1, lmu, .. } => Some((a1 - a0) * lmu),
            RateModel::StepThreshold { .. } => None,
        }
    }

    /// `sup |d_x a|`, or `None` for the step rate.
    pub fn sup_dx(&self) -> Option<f64> {
        match *self {
            RateModel::Constant { .. } => Some(0.0),
            RateModel::SoftSigmoid { a1, lx, .. } => Some(a1 * lx),
            RateModel::StepThreshold { .. } => None,
        }
    }

    /// `max(sup |a|, sup |d_x a|)`, the `W^{1,inf}` size in the age variable.
    pub fn w1inf_norm(&self) -> Option<f64> {
        self.sup_dx().map(|d| d.max(self.a1()))
    }

    fn sigma(&self, mu: f64) -> f64 {
        match *self {
            RateModel::StepThreshold {
                sigma_hi,
                sigma_lo,
                sigma_rate,
            } => sigma_lo + (sigma_hi - sigma_lo) * (-sigma_rate * mu).exp(),
            _ => unreachable!("sigma only exists for the step rate"),
        }
    }

    /// Activity level factor of the soft sigmoid, and its first two
    /// derivatives in `mu`.
    fn level(a0: f64, a1: f64, lmu: f64, mu: f64) -> (f64, f64, f64) {
        let e = (-lmu * mu).exp();
        (a0 + (a1 - a0) * (1.0 - e), (a1 - a0) * lmu * e, -(a1 - a0) * lmu * lmu * e)
    }

    /// `a(x, mu)` without argument checks.
    #[inline]
    pub fn rate(&self, x: f64, mu: f64) -> f64 {
        match *self {
            RateModel::Constant { a } => a,
            RateModel::SoftSigmoid { a0, a1, lx, lmu } => {
                Self::level(a0, a1, lmu, mu).0 * -(-lx * x).exp_m1()
            }
            RateModel::StepThreshold { .. } => {
                if x > self.sigma(mu) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `d_mu a(x, mu)` for smooth models.
    #[inline]
    pub fn rate_dmu(&self, x: f64, mu: f64) -> Result<f64> {
        self.eval_unchecked(x, mu, RateDerivative::Dmu)
    }

    fn eval_unchecked(&self, x: f64, mu: f64, order: RateDerivative) -> Result<f64> {
        use RateDerivative::*;
        match *self {
            RateModel::Constant { a } => Ok(if order == Value { a } else { 0.0 }),
            RateModel::SoftSigmoid { a0, a1, lx, lmu } => {
                let (l, dl, ddl) = Self::level(a0, a1, lmu, mu);
                let s = -(-lx * x).exp_m1();
                Ok(match order {
                    Value => l * s,
                    Dx => l * lx * (-lx * x).exp(),
                    Dmu => dl * s,
                    Dmumu => ddl * s,
                })
            }
            RateModel::StepThreshold { .. } => match order {
                Value => Ok(self.rate(x, mu)),
                Dx => Err(Error::NonSmoothModel("age derivative")),
                Dmu => Err(Error::NonSmoothModel("activity derivative")),
                Dmumu => Err(Error::NonSmoothModel("second activity derivative")),
            },
        }
    }

    /// Evaluates the rate or one of its partial derivatives at `(x, mu)`.
    pub fn eval_rate(&self, x: f64, mu: f64, order: RateDerivative) -> Result<f64> {
        check_domain(x, mu)?;
        self.eval_unchecked(x, mu, order)
    }

    /// `A(x, mu) = int_0^x a(y, mu) dy` without argument checks.
    #[inline]
    pub fn primitive(&self, x: f64, mu: f64) -> f64 {
        match *self {
            RateModel::Constant { a } => a * x,
            RateModel::SoftSigmoid { a0, a1, lx, lmu } => {
                Self::level(a0, a1, lmu, mu).0 * ramp_primitive(x, lx)
            }
            RateModel::StepThreshold { .. } => (x - self.sigma(mu)).max(0.0),
        }
    }

    pub fn primitive_a(&self, x: f64, mu: f64) -> Result<f64> {
        check_domain(x, mu)?;
        Ok(self.primitive(x, mu))
    }

    /// `int a(x_i, eps_mu) f_i dx` over grid samples `f` at cell centres.
    ///
    /// The soft sigmoid factorises as level(mu) times a function of `x`, so
    /// callers that evaluate this repeatedly for the same density can use
    /// [`RateModel::activity_kernel`] instead.
    pub fn rate_integral(&self, mu: f64, centers: &[f64], f: &[f64], dx: f64) -> f64 {
        centers
            .iter()
            .zip(f)
            .map(|(&x, &v)| self.rate(x, mu) * v)
            .sum::<f64>()
            * dx
    }

    /// Precomputes what [`ActivityKernel::integral`] needs to evaluate
    /// `mu -> int a(x, mu) f dx` cheaply for a fixed density.
    pub fn activity_kernel<'a>(&'a self, centers: &'a [f64], f: &'a [f64], dx: f64) -> ActivityKernel<'a> {
        let separable = match *self {
            RateModel::Constant { a } => Some((f.iter().sum::<f64>() * dx, a)),
            RateModel::SoftSigmoid { lx, .. } => Some((
                centers
                    .iter()
                    .zip(f)
                    .map(|(&x, &v)| -(-lx * x).exp_m1() * v)
                    .sum::<f64>()
                    * dx,
                f64::NAN,
            )),
            RateModel::StepThreshold { .. } => None,
        };
        ActivityKernel {
            model: self,
            centers,
            f,
            dx,
            separable,
        }
    }

    /// Smallest `x` with `a(x, 0) >= frac * a0` (bisection on the closed
    /// form). `frac = 1/2` gives the `x0` of the exponential tail bound,
    /// `frac = 3/4` the `x1` of the transport decay bound.
    pub fn level_crossing(&self, frac: f64) -> f64 {
        let target = frac * self.a0();
        if self.rate(0.0, 0.0) >= target {
            return 0.0;
        }
        let mut hi = 1.0;
        while self.rate(hi, 0.0) < target {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.rate(mid, 0.0) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }

    /// Short identifier used in reports and file names.
    pub fn label(&self) -> String {
        match *self {
            RateModel::Constant { a } => format!("constant(a={a})"),
            RateModel::SoftSigmoid { a0, a1, lx, lmu } => {
                format!("soft_sigmoid(a0={a0},a1={a1},lx={lx},lmu={lmu})")
            }
            RateModel::StepThreshold {
                sigma_hi,
                sigma_lo,
                sigma_rate,
            } => format!("step_threshold(hi={sigma_hi},lo={sigma_lo},rate={sigma_rate})"),
        }
    }
}

/// `mu -> int a(x, mu) f(x) dx` for one fixed density.
pub struct ActivityKernel<'a> {
    model: &'a RateModel,
    centers: &'a [f64],
    f: &'a [f64],
    dx: f64,
    separable: Option<(f64, f64)>,
}

impl ActivityKernel<'_> {
    #[inline]
    pub fn integral(&self, mu: f64) -> f64 {
        match (self.separable, *self.model) {
            (Some((mass, a)), RateModel::Constant { .. }) => a * mass,
            (Some((shape, _)), RateModel::SoftSigmoid { a0, a1, lmu, .. }) => {
                RateModel::level(a0, a1, lmu, mu).0 * shape
            }
            _ => self.model.rate_integral(mu, self.centers, self.f, self.dx),
        }
    }
}

fn check_domain(x: f64, mu: f64) -> Result<()> {
    if !(x >= 0.0) || !(mu >= 0.0) {
        return Err(Error::Domain(format!("need x >= 0 and mu >= 0, got x = {x}, mu = {mu}")));
    }
    Ok(())
}

/// Sampling lattice `[0, x_max] x [0, mu_max]` for hypothesis checks.
#[derive(Debug, Clone, Copy)]
pub struct Lattice {
    pub x_max: f64,
    pub mu_max: f64,
    pub nx: usize,
    pub nmu: usize,
}

impl Lattice {
    pub fn new(x_max: f64, mu_max: f64, nx: usize, nmu: usize) -> Result<Self> {
        if nx < 3 || nmu < 3 || !(x_max > 0.0) || !(mu_max > 0.0) {
            return Err(Error::InvalidArgument("lattice needs at least 3x3 points on a nonempty box".into()));
        }
        Ok(Lattice { x_max, mu_max, nx, nmu })
    }

    fn hx(&self) -> f64 {
        self.x_max / (self.nx - 1) as f64
    }

    fn hmu(&self) -> f64 {
        self.mu_max / (self.nmu - 1) as f64
    }
}

/// Point where a standing hypothesis failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub hypothesis: &'static str,
    pub x: f64,
    pub mu: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    /// Monotonicity in age and activity.
    pub passes_a1: bool,
    /// Asymptotic levels `0 < a0 <= a1 < inf`.
    pub passes_a2: bool,
    /// Bounded first and second differences (`W^{2,inf}` smoothness).
    pub passes_a3: bool,
    pub witnesses: Vec<Witness>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.passes_a1 && self.passes_a2 && self.passes_a3
    }
}

/// Largest scaled difference of one family over the lattice interior, at
/// stencil width `h_scale` times the lattice spacing.
fn max_scaled_difference(
    model: &RateModel,
    lat: &Lattice,
    h_scale: f64,
    stencil: &dyn Fn(&RateModel, f64, f64, f64, f64) -> f64,
) -> (f64, f64, f64) {
    let hx = lat.hx() * h_scale;
    let hmu = lat.hmu() * h_scale;
    let mut best = (0.0, 0.0, 0.0);
    for i in 1..lat.nx - 1 {
        let x = i as f64 * lat.hx();
        for j in 1..lat.nmu - 1 {
            let mu = j as f64 * lat.hmu();
            let v = stencil(model, x, mu, hx, hmu).abs();
            if v > best.0 {
                best = (v, x, mu);
            }
        }
    }
    best
}

/// Numerically checks monotonicity, asymptotic levels and smoothness of the
/// rate on a lattice. Each failed check carries a witness point.
pub fn check_rate_hypotheses(model: &RateModel, lattice: &Lattice) -> HypothesisReport {
    let mut witnesses = Vec::new();
    let hx = lattice.hx();
    let hmu = lattice.hmu();

    let mut passes_a1 = true;
    'mono: for i in 0..lattice.nx {
        let x = i as f64 * hx;
        for j in 0..lattice.nmu {
            let mu = j as f64 * hmu;
            let here = model.rate(x, mu);
            if i + 1 < lattice.nx && model.rate(x + hx, mu) < here - 1e-12 {
                passes_a1 = false;
                witnesses.push(Witness {
                    hypothesis: "monotonicity",
                    x,
                    mu,
                    detail: "rate decreases in age".into(),
                });
                break 'mono;
            }
            if j + 1 < lattice.nmu && model.rate(x, mu + hmu) < here - 1e-12 {
                passes_a1 = false;
                witnesses.push(Witness {
                    hypothesis: "monotonicity",
                    x,
                    mu,
                    detail: "rate decreases in activity".into(),
                });
                break 'mono;
            }
        }
    }

    let mut passes_a2 = true;
    let (a0, a1) = (model.a0(), model.a1());
    let far = 1e8;
    let lim0 = model.rate(far, 0.0);
    let lim1 = model.rate(far, far);
    if !(a0 > 0.0 && a0 <= a1 && a1.is_finite()) || (lim0 - a0).abs() > 1e-6 * a0 || (lim1 - a1).abs() > 1e-6 * a1 {
        passes_a2 = false;
        witnesses.push(Witness {
            hypothesis: "asymptotic levels",
            x: far,
            mu: 0.0,
            detail: format!("a(inf,0) = {lim0}, a(inf,inf) = {lim1}, a0 = {a0}, a1 = {a1}"),
        });
    }
    if passes_a2 {
        'bounds: for i in 0..lattice.nx {
            for j in 0..lattice.nmu {
                let (x, mu) = (i as f64 * hx, j as f64 * hmu);
                let v = model.rate(x, mu);
                if !(0.0..=a1 * (1.0 + 1e-12)).contains(&v) {
                    passes_a2 = false;
                    witnesses.push(Witness {
                        hypothesis: "asymptotic levels",
                        x,
                        mu,
                        detail: format!("rate {v} outside [0, a1]"),
                    });
                    break 'bounds;
                }
            }
        }
    }

    // Difference quotients that stay bounded when the stencil is halved
    // certify W^{2,inf}; a jump makes them grow like 1/h or 1/h^2.
    type Stencil = dyn Fn(&RateModel, f64, f64, f64, f64) -> f64;
    let families: [(&str, &Stencil); 5] = [
        ("d_x", &|m, x, mu, hx, _| (m.rate(x + hx, mu) - m.rate(x - hx, mu)) / (2.0 * hx)),
        ("d_mu", &|m, x, mu, _, hmu| (m.rate(x, mu + hmu) - m.rate(x, mu - hmu)) / (2.0 * hmu)),
        ("d_xx", &|m, x, mu, hx, _| {
            (m.rate(x + hx, mu) - 2.0 * m.rate(x, mu) + m.rate(x - hx, mu)) / (hx * hx)
        }),
        ("d_mumu", &|m, x, mu, _, hmu| {
            (m.rate(x, mu + hmu) - 2.0 * m.rate(x, mu) + m.rate(x, mu - hmu)) / (hmu * hmu)
        }),
        ("d_xmu", &|m, x, mu, hx, hmu| {
            (m.rate(x + hx, mu + hmu) - m.rate(x + hx, mu - hmu) - m.rate(x - hx, mu + hmu)
                + m.rate(x - hx, mu - hmu))
                / (4.0 * hx * hmu)
        }),
    ];
    let mut passes_a3 = true;
    for (name, stencil) in families {
        let coarse = max_scaled_difference(model, lattice, 1.0, stencil);
        let fine = max_scaled_difference(model, lattice, 0.5, stencil);
        if fine.0 > 1e-8 && fine.0 > 1.5 * coarse.0 {
            passes_a3 = false;
            witnesses.push(Witness {
                hypothesis: "smoothness",
                x: fine.1,
                mu: fine.2,
                detail: format!("{name} quotient grows from {:.3e} to {:.3e} when h is halved", coarse.0, fine.0),
            });
        }
    }

    HypothesisReport {
        passes_a1,
        passes_a2,
        passes_a3,
        witnesses,
    }
}

/// Distribution of the delay between a discharge and its effect on the
/// network activity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayKernel {
    Dirac,
    Exp {
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
    Erlang {
        k: u32,
        tau: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
    },
}

impl DelayKernel {
    pub fn exp(tau: f64) -> Result<Self> {
        let k = DelayKernel::Exp { tau, delta: None };
        k.validate()?;
        Ok(k)
    }

    pub fn erlang(k: u32, tau: f64) -> Result<Self> {
        let kern = DelayKernel::Erlang { k, tau, delta: None };
        kern.validate()?;
        Ok(kern)
    }

    /// Same kernel with an explicit tail exponent.
    pub fn with_delta(self, delta: f64) -> Result<Self> {
        let k = match self {
            DelayKernel::Dirac => return Err(Error::KernelNotDensity),
            DelayKernel::Exp { tau, .. } => DelayKernel::Exp { tau, delta: Some(delta) },
            DelayKernel::Erlang { k, tau, .. } => DelayKernel::Erlang { k, tau, delta: Some(delta) },
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DelayKernel::Dirac => true,
            DelayKernel::Exp { tau, delta } => tau > 0.0 && tau.is_finite() && delta.is_none_or(|d| d > 0.0),
            DelayKernel::Erlang { k, tau, delta } => {
                k >= 2 && tau > 0.0 && tau.is_finite() && delta.is_none_or(|d| d > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("delay parameters out of range: {self:?}")))
        }
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, DelayKernel::Dirac)
    }

    fn tau(&self) -> f64 {
        match *self {
            DelayKernel::Dirac => 0.0,
            DelayKernel::Exp { tau, .. } | DelayKernel::Erlang { tau, .. } => tau,
        }
    }

    /// Tail exponent `delta`; defaults to `1/(2 tau)`.
    pub fn delta(&self) -> Option<f64> {
        match *self {
            DelayKernel::Dirac => None,
            DelayKernel::Exp { tau, delta } | DelayKernel::Erlang { tau, delta, .. } => {
                Some(delta.unwrap_or(0.5 / tau))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DelayKernel::Dirac => 0.0,
            DelayKernel::Exp { tau, .. } => tau,
            DelayKernel::Erlang { k, tau, .. } => k as f64 * tau,
        }
    }

    /// `P(Y > y)`.
    pub fn survival(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        match *self {
            DelayKernel::Dirac => 0.0,
            DelayKernel::Exp { tau, .. } => (-y / tau).exp(),
            DelayKernel::Erlang { k, tau, .. } => {
                let z = y / tau;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..k {
                    term *= z / j as f64;
                    sum += term;
                }
                (-z).exp() * sum
            }
        }
    }

    /// Density value `b(y)`.
    pub fn delay_weight(&self, y: f64) -> Result<f64> {
        if !(y >= 0.0) {
            return Err(Error::Domain(format!("delay argument must be >= 0, got {y}")));
        }
        match *self {
            DelayKernel::Dirac => Err(Error::DiracNotDensity),
            DelayKernel::Exp { tau, .. } => Ok((-y / tau).exp() / tau),
            DelayKernel::Erlang { k, tau, .. } => Ok(erlang_density(k, tau, y)),
        }
    }

    /// Derivative `b'(y)`.
    pub fn delay_weight_derivative(&self, y: f64) -> Result<f64> {
        let b = self.delay_weight(y)?;
        Ok(match *self {
            DelayKernel::Dirac => unreachable!(),
            DelayKernel::Exp { tau, .. } => -b / tau,
            // b_k' = (b_{k-1} - b_k) / tau
            DelayKernel::Erlang { k, tau, .. } => (erlang_density(k - 1, tau, y) - b) / tau,
        })
    }

    /// Probability mass of each delay cell `[j dy, (j+1) dy)`, `j < count`.
    pub fn cell_masses(&self, dy: f64, count: usize) -> Result<Vec<f64>> {
        if self.is_dirac() {
            return Err(Error::KernelNotDensity);
        }
        Ok((0..count)
            .map(|j| self.survival(j as f64 * dy) - self.survival((j + 1) as f64 * dy))
            .collect())
    }

    /// Smallest delay `Y` with `P(Y > y) <= tol`.
    pub fn horizon(&self, tol: f64) -> f64 {
        match *self {
            DelayKernel::Dirac => 0.0,
            DelayKernel::Exp { tau, .. } => tau * (1.0 / tol).ln(),
            DelayKernel::Erlang { .. } => {
                let mut hi = self.mean().max(1e-12);
                while self.survival(hi) > tol {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) > tol {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi
            }
        }
    }

    /// `int_0^inf b(y) dy` by adaptive quadrature plus the closed-form
    /// survival beyond the integration range.
    pub fn numerical_mass(&self) -> Result<f64> {
        if self.is_dirac() {
            return Ok(1.0);
        }
        let y_end = self.horizon(1e-14);
        let split = self.mode();
        let f = |y: f64| self.delay_weight(y).unwrap_or(0.0);
        Ok(quad::integrate(f, 0.0, split, 1e-13, 1e-16)
            + quad::integrate(f, split, y_end, 1e-13, 1e-16)
            + self.survival(y_end))
    }

    fn mode(&self) -> f64 {
        match *self {
            DelayKernel::Erlang { k, tau, .. } => (k - 1) as f64 * tau,
            _ => 0.5 * self.tau(),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DelayKernel::Dirac => "dirac".into(),
            DelayKernel::Exp { tau, .. } => format!("exp(tau={tau},delta={})", self.delta().unwrap()),
            DelayKernel::Erlang { k, tau, .. } => {
                format!("erlang(k={k},tau={tau},delta={})", self.delta().unwrap())
            }
        }
    }
}

fn erlang_density(k: u32, tau: f64, y: f64) -> f64 {
    if k == 1 {
        return (-y / tau).exp() / tau;
    }
    let z = y / tau;
    // z^{k-1} e^{-z} / ((k-1)! tau), via logs to avoid overflow
    let mut log_fact = 0.0;
    for j in 2..k {
        log_fact += (j as f64).ln();
    }
    if z == 0.0 {
        return 0.0;
    }
    ((k - 1) as f64 * z.ln() - z - log_fact).exp() / tau
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayHypothesisReport {
    /// Dirac kernel: the network activity is the instantaneous flux.
    pub m_equals_p: bool,
    pub delta: Option<f64>,
    /// `int_0^Y e^{delta y} (b + |b'|) dy` on the truncated range.
    pub integral: Option<f64>,
    /// Exponential-tail estimate of the remainder beyond `Y`.
    pub tail_remainder: Option<f64>,
    pub passes: bool,
}

/// Checks that `e^{delta y}(b + |b'|)` is integrable for the stored tail
/// exponent.
pub fn check_delay_hypothesis(kernel: &DelayKernel) -> DelayHypothesisReport {
    let Some(delta) = kernel.delta() else {
        return DelayHypothesisReport {
            m_equals_p: true,
            delta: None,
            integral: None,
            tail_remainder: None,
            passes: true,
        };
    };
    let decay = 1.0 / kernel.tau() - delta;
    if decay <= 0.0 {
        return DelayHypothesisReport {
            m_equals_p: false,
            delta: Some(delta),
            integral: Some(f64::INFINITY),
            tail_remainder: Some(f64::INFINITY),
            passes: false,
        };
    }
    let integrand = |y: f64| {
        let b = kernel.delay_weight(y).unwrap_or(0.0);
        let db = kernel.delay_weight_derivative(y).unwrap_or(0.0);
        (delta * y).exp() * (b + db.abs())
    };
    let split = kernel.mode();
    let mut y_end = (split * 2.0).max(kernel.tau());
    let mut value = quad::integrate(integrand, 0.0, split, 1e-12, 0.0) + quad::integrate(integrand, split, y_end, 1e-12, 0.0);
    loop {
        let tail = integrand(y_end) / decay;
        if tail <= 1e-14 * value || y_end > 1e6 {
            let finite = value.is_finite() && tail.is_finite();
            return DelayHypothesisReport {
                m_equals_p: false,
                delta: Some(delta),
                integral: Some(value),
                tail_remainder: Some(tail),
                passes: finite,
            };
        }
        let next = 2.0 * y_end;
        value += quad::integrate(integrand, y_end, next, 1e-12, 0.0);
        y_end = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soft() -> RateModel {
        RateModel::soft_sigmoid(1.0, 2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_rate_values() {
        let m = RateModel::constant(1.0).unwrap();
        assert_eq!(m.eval_rate(3.0, 7.0, RateDerivative::Value).unwrap(), 1.0);
        for (x, mu) in [(0.0, 0.0), (2.5, 9.0), (40.0, 0.1)] {
            assert_eq!(m.eval_rate(x, mu, RateDerivative::Dmu).unwrap(), 0.0);
        }
    }

    #[test]
    fn soft_sigmoid_limits_and_closed_form() {
        let m = soft();
        assert!((m.eval_rate(1e9, 0.0, RateDerivative::Value).unwrap() - 1.0).abs() < 1e-15);
        let v = m.eval_rate(1.0, 0.0, RateDerivative::Value).unwrap();
        assert!((v - 0.632_120_558_828_557_7).abs() < 1e-15);
    }

    #[test]
    fn step_rejects_derivatives_and_domain_errors() {
        let m = RateModel::step_threshold(2.0, 1.0, 1.0).unwrap();
        assert!(matches!(m.eval_rate(1.0, 0.0, RateDerivative::Dx), Err(Error::NonSmoothModel(_))));
        assert!(matches!(m.eval_rate(1.0, 0.0, RateDerivative::Dmumu), Err(Error::NonSmoothModel(_))));
        assert!(matches!(soft().eval_rate(-1.0, 0.0, RateDerivative::Value), Err(Error::Domain(_))));
        assert!(matches!(soft().primitive_a(1.0, -0.5), Err(Error::Domain(_))));
        // right-open jump: a(sigma(mu), mu) = 0
        assert_eq!(m.rate(2.0, 0.0), 0.0);
        assert_eq!(m.rate(2.0 + 1e-12, 0.0), 1.0);
    }

    #[test]
    fn primitive_closed_forms() {
        let c = RateModel::constant(2.0).unwrap();
        assert_eq!(c.primitive_a(3.0, 1.0).unwrap(), 6.0);
        for m in [c, soft(), RateModel::step_threshold(2.0, 1.0, 1.0).unwrap()] {
            assert_eq!(m.primitive_a(0.0, 0.7).unwrap(), 0.0);
        }
        let tiny = soft().primitive(1e-5, 0.0);
        // x^2/2 - x^3/6 + x^4/24 for unit slopes
        assert!((tiny - (0.5e-10 - 1e-15 / 6.0 + 1e-20 / 24.0)).abs() < 1e-25);
    }

    #[test]
    fn primitive_respects_linear_bounds() {
        let m = soft();
        let x0 = m.level_crossing(0.5);
        assert!((x0 - std::f64::consts::LN_2).abs() < 1e-12);
        for i in 0..200 {
            let x = i as f64 * 0.2;
            for mu in [0.0, 0.5, 3.0] {
                let a = m.primitive(x, mu);
                assert!(a <= m.a1() * x + 1e-12);
                assert!(a >= 0.5 * m.a0() * (x - x0).max(0.0) - 1e-12);
            }
        }
    }

    #[test]
    fn hypothesis_reports() {
        let lat = Lattice::new(10.0, 5.0, 200, 200).unwrap();
        assert!(check_rate_hypotheses(&RateModel::constant(1.0).unwrap(), &lat).all_pass());
        let r = check_rate_hypotheses(&soft(), &lat);
        assert!(r.all_pass(), "{:?}", r.witnesses);
        let step = RateModel::step_threshold(2.0, 1.0, 1.0).unwrap();
        let r = check_rate_hypotheses(&step, &lat);
        assert!(r.passes_a1 && r.passes_a2);
        assert!(!r.passes_a3);
        let w = r.witnesses.iter().find(|w| w.hypothesis == "smoothness").unwrap();
        let sigma = 1.0 + (-w.mu).exp();
        assert!((w.x - sigma).abs() <= 10.0 / 199.0, "witness {w:?} far from jump at {sigma}");
    }

    #[test]
    fn exponential_kernel() {
        let k = DelayKernel::exp(1.0).unwrap();
        assert_eq!(k.delay_weight(0.0).unwrap(), 1.0);
        assert_eq!(k.delta(), Some(0.5));
        let r = check_delay_hypothesis(&k);
        assert!(r.passes && !r.m_equals_p);
        // (1 + 1/tau)/(1 - delta tau) at tau = 1, delta = 1/2
        assert!((r.integral.unwrap() + r.tail_remainder.unwrap() - 4.0).abs() < 1e-9);
        let too_heavy = DelayKernel::exp(1.0).unwrap().with_delta(1.5).unwrap();
        assert!(!check_delay_hypothesis(&too_heavy).passes);
    }

    #[test]
    fn dirac_kernel() {
        let d = DelayKernel::Dirac;
        assert!(matches!(d.delay_weight(0.0), Err(Error::DiracNotDensity)));
        assert!(check_delay_hypothesis(&d).m_equals_p);
        assert!(matches!(d.cell_masses(0.1, 3), Err(Error::KernelNotDensity)));
    }

    #[test]
    fn erlang_kernel_mass_and_derivative() {
        let k = DelayKernel::erlang(3, 0.4).unwrap();
        assert!((k.numerical_mass().unwrap() - 1.0).abs() < 1e-10);
        let h = 1e-6;
        for y in [0.1, 0.8, 2.0] {
            let fd = (k.delay_weight(y + h).unwrap() - k.delay_weight(y - h).unwrap()) / (2.0 * h);
            assert!((fd - k.delay_weight_derivative(y).unwrap()).abs() < 1e-7);
        }
        let masses = k.cell_masses(0.05, 400).unwrap();
        assert!((masses.iter().sum::<f64>() - (1.0 - k.survival(20.0))).abs() < 1e-14);
        assert!(k.survival(k.horizon(1e-10)) <= 1e-10);
        assert!(check_delay_hypothesis(&k).passes);
    }

    #[test]
    fn serde_shape_matches_config_block() {
        let m: RateModel = serde_json::from_str(r#"{"kind":"soft_sigmoid","a0":1.0,"a1":2.0,"lx":1.0,"lmu":1.0}"#).unwrap();
        assert_eq!(m, soft());
        let k: DelayKernel = serde_json::from_str(r#"{"kind":"exp","tau":0.5}"#).unwrap();
        assert_eq!(k.delta(), Some(1.0));
    }
}
