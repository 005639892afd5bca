//! Experiment configuration, read from TOML (or JSON by extension).
//!
//! ```toml
//! eps = [0.0, 0.05, 0.1]          # or { start = 0.0, stop = 0.2, count = 21 }
//! t_final = 40.0
//! seed = 7
//!
//! [rate]
//! kind = "soft_sigmoid"
//! a0 = 1.0
//! a1 = 2.0
//! lx = 0.1
//! lmu = 1.0
//!
//! [delay]
//! kind = "exp"                    # "dirac" (default), "exp" or "erlang"
//! tau = 0.5
//!
//! [grid]
//! x_max = 40.0
//! n = 800
//!
//! [initial]
//! kind = "perturbed"              # "steady" (default), "perturbed" or "uniform"
//! amplitude = 0.1
//! shape = "sine"                  # "sine", "bump" or "shift"
//! ```
//!
//! Optional tables `[steady]`, `[relax]`, `[spectrum]` and `[basin]` tune
//! the individual runners; see the field docs below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Density, Grid};
use crate::model::{DelayKernel, RateModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsList {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl EpsList {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            EpsList::Values(ref v) => v.clone(),
            EpsList::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PerturbShape {
    /// `F (1 + A sin x)`, needs `A <= 1`.
    #[default]
    Sine,
    /// `F + A B` with a unit-mass Gaussian bump `B` centred at age 2.
    Bump,
    /// `F(x + A)`: the population aged by `A`.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    #[default]
    Steady,
    Perturbed {
        amplitude: f64,
        #[serde(default)]
        shape: PerturbShape,
    },
    /// Uniform density on `[0, width]`.
    Uniform { width: f64 },
}

impl InitialCondition {
    /// Builds the normalized initial density around the steady profile `f`.
    pub fn build(&self, steady: &Density) -> Result<Density> {
        let grid = *steady.grid();
        let density = match *self {
            InitialCondition::Steady => return Ok(steady.clone()),
            InitialCondition::Perturbed { amplitude, shape } => perturb(steady, amplitude, shape)?,
            InitialCondition::Uniform { width } => {
                if !(width > 0.0) || width > grid.x_max() {
                    return Err(Error::Config(format!("uniform width {width} must lie in (0, x_max]")));
                }
                Density::from_fn(grid, |x| if x < width { 1.0 } else { 0.0 })
            }
        };
        density.normalized()
    }

    pub fn amplitude(&self) -> Option<f64> {
        match *self {
            InitialCondition::Perturbed { amplitude, .. } => Some(amplitude),
            _ => None,
        }
    }
}

/// Perturbation of the steady profile, before normalization.
pub fn perturb(steady: &Density, amplitude: f64, shape: PerturbShape) -> Result<Density> {
    let grid = *steady.grid();
    if !(amplitude >= 0.0) {
        return Err(Error::Config(format!("amplitude must be >= 0, got {amplitude}")));
    }
    let values = match shape {
        PerturbShape::Sine => {
            if amplitude > 1.0 {
                return Err(Error::Config(format!("sine amplitude {amplitude} would make the density negative")));
            }
            (0..grid.n())
                .map(|i| steady.values[i] * (1.0 + amplitude * grid.center(i).sin()))
                .collect()
        }
        PerturbShape::Bump => {
            let norm = (4.0 / std::f64::consts::PI).sqrt();
            (0..grid.n())
                .map(|i| {
                    let x = grid.center(i);
                    steady.values[i] + amplitude * norm * (-4.0 * (x - 2.0).powi(2)).exp()
                })
                .collect()
        }
        PerturbShape::Shift => {
            let k = (amplitude / grid.dx()).round() as usize;
            (0..grid.n())
                .map(|i| steady.values.get(i + k).copied().unwrap_or(0.0))
                .collect()
        }
    };
    Density::new(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadySpec {
    /// Upper end of the root scan, `2 a1` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_max: Option<f64>,
    #[serde(default = "default_n_scan")]
    pub n_scan: usize,
}

impl Default for SteadySpec {
    fn default() -> Self {
        SteadySpec {
            m_max: None,
            n_scan: default_n_scan(),
        }
    }
}

fn default_n_scan() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RelaxSpec {
    /// Fit window `[t1, t2]`; by default `[0.1, 0.75] * t_final`, cut where
    /// the distance reaches the noise floor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Also compute the linearized spectrum and compare rates.
    #[serde(default)]
    pub compare_gap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    /// Half-plane cut; `a_sharp / 2` by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<f64>,
    #[serde(default = "default_max_block")]
    pub max_block: usize,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec {
            cut: None,
            max_block: default_max_block(),
        }
    }
}

fn default_max_block() -> usize {
    3000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinSpec {
    /// Increasing ladder of perturbation amplitudes.
    #[serde(default = "default_ladder")]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_bisection")]
    pub bisection_steps: usize,
    #[serde(default)]
    pub shape: PerturbShape,
}

impl Default for BasinSpec {
    fn default() -> Self {
        BasinSpec {
            amplitudes: default_ladder(),
            bisection_steps: default_bisection(),
            shape: PerturbShape::default(),
        }
    }
}

fn default_ladder() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 0.95]
}

fn default_bisection() -> usize {
    5
}

fn default_delay() -> DelayKernel {
    DelayKernel::Dirac
}

fn default_t_final() -> f64 {
    40.0
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub eps: EpsList,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    /// Trajectory sampling, in steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Density snapshots, in steps; 0 disables them.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub rate: RateModel,
    #[serde(default = "default_delay")]
    pub delay: DelayKernel,
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub steady: SteadySpec,
    #[serde(default)]
    pub relax: RelaxSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub basin: BasinSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` files as JSON and everything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.rate.validate().map_err(cfg)?;
        self.delay.validate().map_err(cfg)?;
        self.grid().map_err(cfg)?;
        let eps = self.eps.values();
        if eps.is_empty() {
            return Err(Error::Config("eps list is empty".into()));
        }
        if let Some(e) = eps.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
            return Err(Error::Config(format!("eps values must be finite and >= 0, got {e}")));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if self.steady.n_scan < 64 {
            return Err(Error::Config(format!("steady.n_scan must be >= 64, got {}", self.steady.n_scan)));
        }
        match self.initial {
            InitialCondition::Perturbed { amplitude, shape } => {
                if !(amplitude >= 0.0) || (shape == PerturbShape::Sine && amplitude > 1.0) {
                    return Err(Error::Config(format!("perturbation amplitude {amplitude} out of range")));
                }
            }
            InitialCondition::Uniform { width } => {
                if !(width > 0.0) || width > self.grid.x_max {
                    return Err(Error::Config(format!("uniform width {width} must lie in (0, x_max]")));
                }
            }
            InitialCondition::Steady => {}
        }
        if let Some([t1, t2]) = self.relax.window {
            if !(t2 > t1 && t1 >= 0.0) {
                return Err(Error::Config(format!("relax.window [{t1}, {t2}] is empty")));
            }
        }
        let ladder = &self.basin.amplitudes;
        if ladder.is_empty() || ladder.windows(2).any(|w| !(w[1] > w[0])) || !(ladder[0] >= 0.0) {
            return Err(Error::Config("basin.amplitudes must be a nonempty increasing ladder".into()));
        }
        if self.basin.shape == PerturbShape::Sine && ladder.iter().any(|a| *a > 1.0) {
            return Err(Error::Config("sine basin amplitudes must be <= 1".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.x_max, self.grid.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
eps = { start = 0.0, stop = 0.2, count = 5 }
t_final = 10.0

[rate]
kind = "soft_sigmoid"
a0 = 1.0
a1 = 2.0
lx = 1.0
lmu = 1.0

[delay]
kind = "exp"
tau = 0.5

[grid]
x_max = 20.0
n = 200

[initial]
kind = "perturbed"
amplitude = 0.1
"#;

    #[test]
    fn toml_round_trip() {
        let c = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.eps.values().len(), 5);
        assert_eq!(c.initial, InitialCondition::Perturbed { amplitude: 0.1, shape: PerturbShape::Sine });
        let again = ExperimentConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
        assert_eq!(c, again);
        let json = ExperimentConfig::from_json_str(&c.to_json_string().unwrap()).unwrap();
        assert_eq!(c, json);
        assert_eq!(c.hash(), json.hash());
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = SAMPLE.replace("eps = { start = 0.0, stop = 0.2, count = 5 }", "eps = []");
        assert!(matches!(ExperimentConfig::from_toml_str(&empty), Err(Error::Config(_))));
        let negative = SAMPLE.replace("a0 = 1.0", "a0 = -1.0");
        assert!(matches!(ExperimentConfig::from_toml_str(&negative), Err(Error::Config(_))));
        let unknown = SAMPLE.replace("t_final = 10.0", "t_final = 10.0\nbogus = 1");
        assert!(matches!(ExperimentConfig::from_toml_str(&unknown), Err(Error::Config(_))));
    }

    #[test]
    fn perturbations_are_normalized_and_nonnegative() {
        let grid = Grid::new(20.0, 200).unwrap();
        let f = Density::from_fn(grid, |x| (-x).exp()).normalized().unwrap();
        for shape in [PerturbShape::Sine, PerturbShape::Bump, PerturbShape::Shift] {
            let d = InitialCondition::Perturbed { amplitude: 0.5, shape }.build(&f).unwrap();
            assert!((d.mass() - 1.0).abs() < 1e-12);
            assert!(d.values.iter().all(|v| *v >= 0.0));
        }
    }
}
