//! Adaptive cruise control case study: the follower tracks a gap `s` and
//! speed `v` behind a front vehicle whose speed `v_f` is the perturbation.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rmpc::{Rmpc, RmpcConfig, RmpcParams};
use crate::runtime::{run_episode, saving_percent, AlwaysActuate, BangBang, DrlPolicy, EpisodeMetrics, SkipPolicy};
use crate::safesets::SafeSetBundle;
use crate::skip_drl::{Mlp, RewardWeights};
use crate::system::{LtiSystem, PerturbationSource};
use crate::Polytope;

pub const DELTA: f64 = 0.1;
pub const DRAG: f64 = 0.2;
pub const HORIZON: usize = 10;
pub const V_F_RANGE: (f64, f64) = (30.0, 50.0);

pub fn x_ref() -> DVector<f64> {
    DVector::from_vec(vec![150.0, 40.0])
}

/// The ACC model for front speeds in `v_range`.
pub fn acc_system(v_range: (f64, f64)) -> Result<LtiSystem> {
    LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, -DELTA, 0.0, 1.0 - DRAG * DELTA]),
        DMatrix::from_row_slice(2, 1, &[0.0, DELTA]),
        Polytope::from_box(&[120.0, 25.0], &[180.0, 55.0])?,
        Polytope::from_box(&[-40.0], &[40.0])?,
        Polytope::from_box(&[DELTA * v_range.0, 0.0], &[DELTA * v_range.1, 0.0])?,
        DVector::zeros(1),
    )
}

pub fn default_rmpc_params() -> RmpcParams {
    RmpcParams { horizon: HORIZON, p_weight: 1.0, q_weight: 1.0, x_ref: x_ref() }
}

/// The ACC system with `v_f ∈ [30, 50]` and its RMPC configuration.
pub fn build_acc_system() -> Result<(LtiSystem, RmpcConfig)> {
    let sys = acc_system(V_F_RANGE)?;
    let cfg = RmpcConfig::build(&sys, &default_rmpc_params())?;
    Ok((sys, cfg))
}

/// How the front vehicle's speed evolves.
#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    /// `v_e + a_f sin(π/2 · δ t) + noise`, noise uniform in `[−noise, noise]`.
    Sinusoid { v_e: f64, a_f: f64, noise: f64 },
    /// Independent uniform draws in the speed range.
    PureRandom,
    /// Previous speed plus a uniform acceleration in `accel` times `δ`.
    RandomWalk { accel: (f64, f64) },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccScenario {
    pub name: String,
    pub pattern: Pattern,
    pub v_range: (f64, f64),
}

impl AccScenario {
    fn new(name: &str, pattern: Pattern, v_range: (f64, f64)) -> Self {
        AccScenario { name: name.into(), pattern, v_range }
    }

    /// The sinusoid with small noise.
    pub fn headline() -> Self {
        Self::new("headline", Pattern::Sinusoid { v_e: 40.0, a_f: 9.0, noise: 1.0 }, V_F_RANGE)
    }

    /// `Ex1` … `Ex10`.
    pub fn numbered(i: usize) -> Result<Self> {
        let walk = Pattern::RandomWalk { accel: (-20.0, 20.0) };
        let sine = |a_f, noise| Pattern::Sinusoid { v_e: 40.0, a_f, noise };
        let name = format!("ex{i}");
        Ok(match i {
            1 => Self::new(&name, walk, (30.0, 50.0)),
            2 => Self::new(&name, walk, (32.5, 47.5)),
            3 => Self::new(&name, walk, (35.0, 45.0)),
            4 => Self::new(&name, walk, (38.0, 42.0)),
            5 => Self::new(&name, walk, (39.0, 41.0)),
            6 => Self::new(&name, Pattern::PureRandom, V_F_RANGE),
            7 => Self::new(&name, walk, V_F_RANGE),
            8 => Self::new(&name, sine(5.0, 5.0), V_F_RANGE),
            9 => Self::new(&name, sine(8.0, 2.0), V_F_RANGE),
            10 => Self::new(&name, sine(9.0, 1.0), V_F_RANGE),
            _ => return Err(Error::Config(format!("no scenario ex{i}"))),
        })
    }

    /// The headline scenario followed by `ex1` … `ex10`.
    pub fn all() -> Vec<Self> {
        let mut v = vec![Self::headline()];
        v.extend((1..=10).map(|i| Self::numbered(i).expect("index in range")));
        v
    }

    /// The system whose `W` covers this scenario's speed range.
    pub fn system(&self) -> Result<LtiSystem> {
        acc_system(self.v_range)
    }

    pub fn source(&self, seed: u64) -> FrontVelocity {
        FrontVelocity::new(self.clone(), seed)
    }
}

impl FromStr for AccScenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "headline" {
            return Ok(Self::headline());
        }
        let idx = lower
            .strip_prefix("ex")
            .and_then(|d| d.trim_start_matches('.').parse().ok())
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))?;
        Self::numbered(idx)
    }
}

impl fmt::Display for AccScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Front-vehicle speed generator; its perturbation is `(δ v_f, 0)`.
#[derive(Clone, Debug)]
pub struct FrontVelocity {
    scenario: AccScenario,
    rng: ChaCha8Rng,
    t: usize,
    last: Option<f64>,
}

impl FrontVelocity {
    pub fn new(scenario: AccScenario, seed: u64) -> Self {
        FrontVelocity { scenario, rng: ChaCha8Rng::seed_from_u64(seed), t: 0, last: None }
    }

    /// `v_f(t)` for the current step; advances the generator.
    pub fn next_speed(&mut self) -> f64 {
        let (lo, hi) = self.scenario.v_range;
        let v = match &self.scenario.pattern {
            Pattern::Sinusoid { v_e, a_f, noise } => {
                let e = if *noise > 0.0 { self.rng.random_range(-noise..=*noise) } else { 0.0 };
                v_e + a_f * (FRAC_PI_2 * DELTA * self.t as f64).sin() + e
            }
            Pattern::PureRandom => self.rng.random_range(lo..=hi),
            Pattern::RandomWalk { accel } => match self.last {
                None => self.rng.random_range(lo..=hi),
                Some(prev) => prev + DELTA * self.rng.random_range(accel.0..=accel.1),
            },
        };
        let v = v.clamp(lo, hi);
        self.last = Some(v);
        self.t += 1;
        v
    }
}

/// `v_f(t)` of a noise-free sinusoid.
pub fn sinusoid_speed(v_e: f64, a_f: f64, t: usize) -> f64 {
    v_e + a_f * (FRAC_PI_2 * DELTA * t as f64).sin()
}

impl PerturbationSource for FrontVelocity {
    fn next_perturbation(&mut self) -> DVector<f64> {
        DVector::from_vec(vec![DELTA * self.next_speed(), 0.0])
    }

    fn time(&self) -> usize {
        self.t
    }

    fn forecast(&self, horizon: usize) -> Option<Vec<DVector<f64>>> {
        let mut copy = self.clone();
        Some((0..horizon).map(|_| copy.next_perturbation()).collect())
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource> {
        Box::new(self.clone())
    }
}

/// Seed of episode `i` under `master`; independent of how episodes are scheduled.
pub fn episode_seed(master: u64, i: u64) -> u64 {
    // splitmix64 finalizer over the xor, so neighbouring episodes decorrelate.
    let mut z = (master ^ i).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial state drawn uniformly from `X′`.
pub fn initial_state(bundle: &SafeSetBundle, seed: u64) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    bundle
        .x_prime
        .sample_uniform(&mut rng, 1)
        .pop()
        .map(DVector::from_vec)
        .ok_or_else(|| Error::EmptySet { what: "X' (no sample found)".into() })
}

/// Everything an experiment needs for one scenario.
pub struct ScenarioSetup {
    pub scenario: AccScenario,
    pub sys: LtiSystem,
    pub bundle: SafeSetBundle,
    pub rmpc: Rmpc,
}

impl ScenarioSetup {
    pub fn new(scenario: AccScenario, params: &RmpcParams) -> Result<Self> {
        let sys = scenario.system()?;
        let cfg = RmpcConfig::build(&sys, params)?;
        let bundle = SafeSetBundle::rmpc_feasible(&sys, &cfg)?;
        let rmpc = Rmpc::new(cfg, &sys)?;
        Ok(ScenarioSetup { scenario, sys, bundle, rmpc })
    }

    /// Paired-seed episode of `policy` from the episode's initial state.
    pub fn episode(&self, policy: &mut dyn SkipPolicy, seed: u64, steps: usize) -> Result<EpisodeMetrics> {
        let x0 = initial_state(&self.bundle, seed)?;
        let mut src = self.scenario.source(seed.wrapping_add(1));
        let log = run_episode(&self.sys, &self.bundle, &self.rmpc, policy, &mut src, steps, &x0, RewardWeights::default())?;
        Ok(log.metrics())
    }
}

/// One paired comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub episode: usize,
    pub seed: u64,
    pub rmpc: EpisodeMetrics,
    pub bang_bang: EpisodeMetrics,
    pub drl: Option<EpisodeMetrics>,
}

impl EpisodeRow {
    pub fn saving_bang_bang(&self) -> f64 {
        saving_percent(self.rmpc.energy, self.bang_bang.energy)
    }

    pub fn saving_drl(&self) -> Option<f64> {
        self.drl.as_ref().map(|d| saving_percent(self.rmpc.energy, d.energy))
    }
}

/// Runs `episodes` paired episodes on `jobs` threads. Rows come back in
/// episode order whatever the thread count.
pub fn run_experiment(
    setup: &ScenarioSetup,
    drl: Option<(&Mlp, usize)>,
    episodes: usize,
    steps: usize,
    master_seed: u64,
    jobs: usize,
) -> Result<Vec<EpisodeRow>> {
    let run_one = |i: usize| -> Result<EpisodeRow> {
        let seed = episode_seed(master_seed, i as u64);
        let rmpc = setup.episode(&mut AlwaysActuate, seed, steps)?;
        let bang_bang = setup.episode(&mut BangBang, seed, steps)?;
        let drl = match drl {
            Some((net, memory)) => {
                let mut p = DrlPolicy { net: net.clone(), memory };
                Some(setup.episode(&mut p, seed, steps)?)
            }
            None => None,
        };
        Ok(EpisodeRow { episode: i, seed, rmpc, bang_bang, drl })
    };
    par_map(episodes, jobs, run_one).into_iter().collect()
}

/// `f(0..count)` on up to `jobs` threads, results in index order.
pub fn par_map<T, F>(count: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let size = count.div_ceil(jobs);
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (c, chunk) in slots.chunks_mut(size).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(c * size + j));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Counts of per-episode savings in `bins` equal-width bins over `[lo, hi)`;
/// values outside are clamped into the end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins.max(1)];
    let width = (hi - lo) / counts.len() as f64;
    for v in values {
        let i = ((v - lo) / width).floor().clamp(0.0, (counts.len() - 1) as f64) as usize;
        counts[i] += 1;
    }
    counts
}
