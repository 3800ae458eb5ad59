//! Run configuration: one TOML file, every section optional except the seed,
//! which may also come from the command line.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use skipctl::acc::{self, AccScenario};
use skipctl::skip_drl::{DqnConfig, RewardWeights};
use skipctl::system::LtiSystem;
use skipctl::{Error, Polytope, Result};

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub episodes: Option<usize>,
    pub steps: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub sets: SetsSpec,
    #[serde(default)]
    pub rmpc: RmpcSpec,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub dqn: DqnSpec,
}

/// Either `preset = "acc"` or explicit matrices and constraint boxes.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub preset: Option<String>,
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<Vec<f64>>>,
    pub x_min: Option<Vec<f64>>,
    pub x_max: Option<Vec<f64>>,
    pub u_min: Option<Vec<f64>>,
    pub u_max: Option<Vec<f64>>,
    pub w_min: Option<Vec<f64>>,
    pub w_max: Option<Vec<f64>>,
    pub u_skip: Option<Vec<f64>>,
    /// Whether the uniform perturbation source of an explicit system
    /// reveals its future to forecasting policies.
    #[serde(default)]
    pub forecast: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_scenario")]
    pub name: String,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec { name: default_scenario() }
    }
}

fn default_scenario() -> String {
    "headline".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSpec {
    /// `rmpc_feasible` or `linear_feedback`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "one")]
    pub alpha: f64,
    pub terms: Option<usize>,
    /// Feedback gain `K` (`m × n`); LQR with identity weights when absent.
    pub gain: Option<Vec<Vec<f64>>>,
    /// Bundle to load instead of `<out>/bundle.txt`.
    pub bundle: Option<PathBuf>,
}

impl Default for SetsSpec {
    fn default() -> Self {
        SetsSpec { method: default_method(), alpha: 1.0, terms: None, gain: None, bundle: None }
    }
}

fn default_method() -> String {
    "rmpc_feasible".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmpcSpec {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "one")]
    pub p: f64,
    #[serde(default = "one")]
    pub q: f64,
    pub x_ref: Option<Vec<f64>>,
}

impl Default for RmpcSpec {
    fn default() -> Self {
        RmpcSpec { horizon: default_horizon(), p: 1.0, q: 1.0, x_ref: None }
    }
}

fn default_horizon() -> usize {
    acc::HORIZON
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// Policies compared by `evaluate` and `suite`.
    #[serde(default = "default_policies")]
    pub evaluate: Vec<String>,
    /// Forecast horizon `H` of the model-based policy.
    #[serde(default = "default_skip_horizon")]
    pub horizon: usize,
    /// Network to load instead of `<out>/network.txt`.
    pub network: Option<PathBuf>,
}

impl Default for PolicySpec {
    fn default() -> Self {
        PolicySpec { evaluate: default_policies(), horizon: default_skip_horizon(), network: None }
    }
}

fn default_policies() -> Vec<String> {
    ["rmpc_only", "bang_bang", "drl"].map(String::from).to_vec()
}

fn default_skip_horizon() -> usize {
    10
}

/// Overrides of the learner's defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DqnSpec {
    pub episodes: Option<usize>,
    pub hidden: Option<Vec<usize>>,
    pub gamma: Option<f64>,
    pub lr: Option<f64>,
    pub replay_capacity: Option<usize>,
    pub batch: Option<usize>,
    pub target_period: Option<usize>,
    pub eps_start: Option<f64>,
    pub eps_end: Option<f64>,
    pub eps_fraction: Option<f64>,
    pub episode_len: Option<usize>,
    pub memory: Option<usize>,
    pub grad_clip: Option<f64>,
    pub train_every: Option<usize>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub reward_scale: Option<f64>,
}

pub const DEFAULT_TRAIN_EPISODES: usize = 2000;
pub const DEFAULT_EPISODES: usize = 500;
pub const DEFAULT_STEPS: usize = 100;

impl DqnSpec {
    pub fn episodes(&self) -> usize {
        self.episodes.unwrap_or(DEFAULT_TRAIN_EPISODES)
    }

    pub fn to_config(&self) -> Result<DqnConfig> {
        let d = DqnConfig::default();
        let cfg = DqnConfig {
            hidden: self.hidden.clone().unwrap_or(d.hidden),
            gamma: self.gamma.unwrap_or(d.gamma),
            lr: self.lr.unwrap_or(d.lr),
            replay_capacity: self.replay_capacity.unwrap_or(d.replay_capacity),
            batch: self.batch.unwrap_or(d.batch),
            target_period: self.target_period.unwrap_or(d.target_period),
            eps_start: self.eps_start.unwrap_or(d.eps_start),
            eps_end: self.eps_end.unwrap_or(d.eps_end),
            eps_fraction: self.eps_fraction.unwrap_or(d.eps_fraction),
            episode_len: self.episode_len.unwrap_or(d.episode_len),
            memory: self.memory.unwrap_or(d.memory),
            grad_clip: self.grad_clip.unwrap_or(d.grad_clip),
            train_every: self.train_every.unwrap_or(d.train_every),
            reward: RewardWeights { w1: self.w1.unwrap_or(d.reward.w1), w2: self.w2.unwrap_or(d.reward.w2) },
            reward_scale: self.reward_scale.unwrap_or(d.reward_scale),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn is_acc(&self) -> bool {
        self.system.a.is_none()
    }

    /// The scenario of the ACC preset.
    pub fn scenario(&self) -> Result<Option<AccScenario>> {
        if !self.is_acc() {
            return Ok(None);
        }
        if let Some(p) = &self.system.preset {
            if p != "acc" {
                return Err(Error::Config(format!("unknown system preset {p:?}")));
            }
        }
        self.scenario.name.parse().map(Some)
    }

    pub fn system(&self) -> Result<LtiSystem> {
        if let Some(sc) = self.scenario()? {
            return sc.system();
        }
        let s = &self.system;
        if s.preset.is_some() {
            return Err(Error::Config("give either a preset or explicit matrices, not both".into()));
        }
        let need = |v: &Option<Vec<f64>>, name: &str| {
            v.clone().ok_or_else(|| Error::Config(format!("system.{name} is required with explicit matrices")))
        };
        let a = matrix(s.a.as_ref().expect("explicit system"), "a")?;
        let b = matrix(s.b.as_ref().ok_or_else(|| Error::Config("system.b is required".into()))?, "b")?;
        let boxed = |lo: &Option<Vec<f64>>, hi: &Option<Vec<f64>>, name: &str| -> Result<Polytope> {
            Polytope::from_box(&need(lo, &format!("{name}_min"))?, &need(hi, &format!("{name}_max"))?)
        };
        let u_skip = DVector::from_vec(s.u_skip.clone().unwrap_or_else(|| vec![0.0; b.ncols()]));
        LtiSystem::new(a, b, boxed(&s.x_min, &s.x_max, "x")?, boxed(&s.u_min, &s.u_max, "u")?, boxed(&s.w_min, &s.w_max, "w")?, u_skip)
    }

    pub fn x_ref(&self, sys: &LtiSystem) -> Result<DVector<f64>> {
        match (&self.rmpc.x_ref, self.is_acc()) {
            (Some(v), _) if v.len() == sys.n() => Ok(DVector::from_vec(v.clone())),
            (Some(v), _) => Err(Error::Config(format!("rmpc.x_ref has {} entries, the state has {}", v.len(), sys.n()))),
            (None, true) => Ok(acc::x_ref()),
            (None, false) => Err(Error::Config("rmpc.x_ref is required with explicit matrices".into())),
        }
    }

    pub fn gain(&self, sys: &LtiSystem) -> Result<Option<DMatrix<f64>>> {
        let Some(k) = &self.sets.gain else { return Ok(None) };
        let k = matrix(k, "gain")?;
        if k.nrows() != sys.m() || k.ncols() != sys.n() {
            return Err(Error::Config(format!("sets.gain must be {} x {}", sys.m(), sys.n())));
        }
        Ok(Some(k))
    }
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(Error::Config(format!("{name} must be a nonempty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}
