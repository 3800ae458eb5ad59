//! The online monitor: check `x(t)` against `X′`, ask the skip policy only
//! inside it, force the safe controller elsewhere, and log every step.

use std::fmt;
use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, Polytope, EPS_SET};
use crate::lp::EPS_FEAS;
use crate::rmpc::Controller;
use crate::safesets::SafeSetBundle;
use crate::skip_drl::{greedy_action, reward_from_parts, AgentState, Mlp, RewardWeights};
use crate::skip_model::decide_model_based;
use crate::system::{LtiSystem, PerturbationSource};

/// Membership in `X′`, shrunk by the feasibility tolerance so that states on
/// the boundary count as outside.
pub fn in_strengthened(x_prime: &Polytope, x: &DVector<f64>) -> bool {
    x_prime.contains_tol(x.as_slice(), -EPS_FEAS)
}

/// Membership in `X_I` or `X` at the set tolerance.
pub fn in_set(set: &Polytope, x: &DVector<f64>) -> bool {
    set.contains_tol(x.as_slice(), EPS_SET)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Strengthened,
    Invariant,
    Outside,
}

impl Region {
    pub fn of(bundle: &SafeSetBundle, x: &DVector<f64>) -> Region {
        if in_strengthened(&bundle.x_prime, x) {
            Region::Strengthened
        } else if in_set(&bundle.x_i, x) {
            Region::Invariant
        } else {
            Region::Outside
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::Strengthened => "X'",
            Region::Invariant => "X_I\\X'",
            Region::Outside => "outside",
        })
    }
}

/// One monitored step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    /// `None` when the policy was not consulted.
    pub z_proposed: Option<bool>,
    pub z_applied: bool,
    pub region: Region,
    pub unorm1: f64,
    pub reward: f64,
    pub x_next: DVector<f64>,
    pub next_region: Region,
}

/// Applies one step of the monitor for the proposal `proposal`. Outside
/// `X′` the proposal is overridden and `κ` is applied.
pub fn monitor_step(
    sys: &LtiSystem,
    bundle: &SafeSetBundle,
    kappa: &dyn Controller,
    x: &DVector<f64>,
    proposal: bool,
    w: &DVector<f64>,
    weights: RewardWeights,
) -> Result<StepRecord> {
    monitor_step_at(0, sys, bundle, kappa, x, Some(proposal), w, weights)
}

#[allow(clippy::too_many_arguments)]
fn monitor_step_at(
    t: usize,
    sys: &LtiSystem,
    bundle: &SafeSetBundle,
    kappa: &dyn Controller,
    x: &DVector<f64>,
    proposal: Option<bool>,
    w: &DVector<f64>,
    weights: RewardWeights,
) -> Result<StepRecord> {
    let region = Region::of(bundle, x);
    let z_applied = match region {
        Region::Strengthened => proposal.unwrap_or(true),
        _ => true,
    };
    let u = if z_applied { kappa.control(x)? } else { sys.u_skip.clone() };
    let x_next = sys.step(x, &u, w)?;
    if !in_set(&sys.x_set, &x_next) {
        return Err(Error::SafetyViolation { step: t + 1, state: x_next.as_slice().to_vec(), set: "X".into() });
    }
    let next_region = Region::of(bundle, &x_next);
    let unorm1 = u.lp_norm(1);
    let reward = reward_from_parts(
        weights,
        region == Region::Strengthened,
        proposal.unwrap_or(true),
        next_region == Region::Strengthened,
        if z_applied { unorm1 } else { 0.0 },
    );
    Ok(StepRecord { t, x: x.clone(), u, w: w.clone(), z_proposed: proposal, z_applied, region, unorm1, reward, x_next, next_region })
}

/// What a policy sees when it is asked to decide.
pub struct DecisionContext<'a> {
    pub t: usize,
    pub x: &'a DVector<f64>,
    /// Perturbations revealed so far, oldest first.
    pub w_hist: &'a [DVector<f64>],
    /// `w(t..t+H)`, present when the policy asked for a horizon.
    pub forecast: Option<&'a [DVector<f64>]>,
}

/// Skip decision source, consulted only inside `X′`. `true` means actuate.
pub trait SkipPolicy {
    fn name(&self) -> &str;

    /// Forecast length the policy needs, if any.
    fn forecast_horizon(&self) -> Option<usize> {
        None
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<bool>;
}

/// The RMPC alone.
pub struct AlwaysActuate;

impl SkipPolicy for AlwaysActuate {
    fn name(&self) -> &str {
        "rmpc_only"
    }

    fn decide(&mut self, _: &DecisionContext<'_>) -> Result<bool> {
        Ok(true)
    }
}

/// Zero input whenever the state is in `X′`.
pub struct BangBang;

impl SkipPolicy for BangBang {
    fn name(&self) -> &str {
        "bang_bang"
    }

    fn decide(&mut self, _: &DecisionContext<'_>) -> Result<bool> {
        Ok(false)
    }
}

/// Adversarial policy that always proposes to skip.
pub struct AlwaysSkip;

impl SkipPolicy for AlwaysSkip {
    fn name(&self) -> &str {
        "always_skip"
    }

    fn decide(&mut self, _: &DecisionContext<'_>) -> Result<bool> {
        Ok(false)
    }
}

/// Coin flips from a seeded generator.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl SkipPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, _: &DecisionContext<'_>) -> Result<bool> {
        Ok(self.rng.random())
    }
}

/// Optimal skip sequence over a known perturbation forecast.
pub struct ModelBased<'a> {
    pub sys: &'a LtiSystem,
    pub kappa: &'a dyn Controller,
    pub x_prime: &'a Polytope,
    pub horizon: usize,
    pub fallbacks: usize,
}

impl<'a> ModelBased<'a> {
    pub fn new(sys: &'a LtiSystem, kappa: &'a dyn Controller, x_prime: &'a Polytope, horizon: usize) -> Self {
        ModelBased { sys, kappa, x_prime, horizon, fallbacks: 0 }
    }
}

impl SkipPolicy for ModelBased<'_> {
    fn name(&self) -> &str {
        "model_based"
    }

    fn forecast_horizon(&self) -> Option<usize> {
        Some(self.horizon)
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<bool> {
        let forecast = ctx
            .forecast
            .ok_or_else(|| Error::Config("model-based skipping needs the perturbations of the next H steps".into()))?;
        let d = decide_model_based(ctx.x, forecast, self.kappa, self.x_prime, self.sys)?;
        if d == crate::skip_model::ModelDecision::Fallback {
            self.fallbacks += 1;
        }
        Ok(d.actuate())
    }
}

/// Greedy policy of a trained network.
pub struct DrlPolicy {
    pub net: Mlp,
    pub memory: usize,
}

impl SkipPolicy for DrlPolicy {
    fn name(&self) -> &str {
        "drl"
    }

    fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<bool> {
        let n = ctx.x.len();
        let have = ctx.w_hist.len().min(self.memory);
        let mut w_hist = vec![DVector::zeros(n); self.memory - have];
        w_hist.extend_from_slice(&ctx.w_hist[ctx.w_hist.len() - have..]);
        Ok(greedy_action(&self.net, &AgentState { x: ctx.x.clone(), w_hist }))
    }
}

/// Counts calls to an inner controller.
pub struct CountingController<'a> {
    inner: &'a dyn Controller,
    calls: AtomicUsize,
}

impl<'a> CountingController<'a> {
    pub fn new(inner: &'a dyn Controller) -> Self {
        CountingController { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Controller for CountingController<'_> {
    fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.control(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub policy: String,
    pub steps: Vec<StepRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeMetrics {
    pub steps: usize,
    pub energy: f64,
    pub skip_count: usize,
    pub skip_rate: f64,
    pub forced_actuations: usize,
    pub safety_violations: usize,
    /// Steps on which the monitor evaluated `κ`.
    pub controller_calls: usize,
    pub reward: f64,
}

impl EpisodeLog {
    pub fn metrics(&self) -> EpisodeMetrics {
        let steps = self.steps.len();
        let skip_count = self.steps.iter().filter(|s| !s.z_applied).count();
        EpisodeMetrics {
            steps,
            energy: self.steps.iter().map(|s| s.unorm1).sum(),
            skip_count,
            skip_rate: if steps == 0 { 0.0 } else { skip_count as f64 / steps as f64 },
            forced_actuations: self.steps.iter().filter(|s| s.region == Region::Invariant).count(),
            safety_violations: self
                .steps
                .iter()
                .filter(|s| s.region == Region::Outside || s.next_region == Region::Outside)
                .count(),
            controller_calls: steps - skip_count,
            reward: self.steps.iter().map(|s| s.reward).sum(),
        }
    }

    /// Columns `t, x…, u…, w…, z_prop, z_appl, region, unorm1, reward`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let Some(first) = self.steps.first() else {
            return Ok(w.flush()?);
        };
        let mut head = vec!["t".to_string()];
        head.extend((0..first.x.len()).map(|i| format!("x{i}")));
        head.extend((0..first.u.len()).map(|i| format!("u{i}")));
        head.extend((0..first.w.len()).map(|i| format!("w{i}")));
        head.extend(["z_prop", "z_appl", "region", "unorm1", "reward"].map(String::from));
        w.write_record(&head).map_err(csv_err)?;
        let bit = |b: bool| if b { "1".to_string() } else { "0".to_string() };
        for s in &self.steps {
            let mut row = vec![s.t.to_string()];
            row.extend(s.x.iter().chain(s.u.iter()).chain(s.w.iter()).map(|v| fmt_f64(*v)));
            row.push(s.z_proposed.map(bit).unwrap_or_default());
            row.push(bit(s.z_applied));
            row.push(s.region.to_string());
            row.push(fmt_f64(s.unorm1));
            row.push(fmt_f64(s.reward));
            w.write_record(&row).map_err(csv_err)?;
        }
        Ok(w.flush()?)
    }
}

/// Relative energy saving of `policy` over `baseline`, in percent.
pub fn saving_percent(baseline_energy: f64, policy_energy: f64) -> f64 {
    if baseline_energy == 0.0 {
        0.0
    } else {
        100.0 * (baseline_energy - policy_energy) / baseline_energy
    }
}

/// Runs the monitor for `steps` steps from `x0 ∈ X_I`.
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    sys: &LtiSystem,
    bundle: &SafeSetBundle,
    kappa: &dyn Controller,
    policy: &mut dyn SkipPolicy,
    source: &mut dyn PerturbationSource,
    steps: usize,
    x0: &DVector<f64>,
    weights: RewardWeights,
) -> Result<EpisodeLog> {
    bundle.check_provenance(sys)?;
    if !in_set(&bundle.x_i, x0) {
        return Err(Error::Contract(format!("initial state {:?} is outside X_I", x0.as_slice())));
    }
    let horizon = policy.forecast_horizon();
    let mut x = x0.clone();
    let mut w_hist: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut records = Vec::with_capacity(steps);
    for t in 0..steps {
        let proposal = if in_strengthened(&bundle.x_prime, &x) {
            let forecast = match horizon {
                Some(h) => Some(source.forecast(h).ok_or_else(|| {
                    Error::Config(format!("policy {} needs a perturbation source with forecasts", policy.name()))
                })?),
                None => None,
            };
            let ctx = DecisionContext { t, x: &x, w_hist: &w_hist, forecast: forecast.as_deref() };
            Some(policy.decide(&ctx)?)
        } else {
            None
        };
        let w = source.next_perturbation();
        let rec = monitor_step_at(t, sys, bundle, kappa, &x, proposal, &w, weights)?;
        x = rec.x_next.clone();
        w_hist.push(w);
        records.push(rec);
    }
    Ok(EpisodeLog { policy: policy.name().to_string(), steps: records })
}
