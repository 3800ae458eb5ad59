//! Learned skipping policy: a double-DQN agent over the state
//! `(x(t), w(t−r), …, w(t−1))` with a small ReLU network trained by SGD.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, Polytope};
use crate::rmpc::Controller;
use crate::safesets::SafeSetBundle;
use crate::system::{LtiSystem, PerturbationSource};

/// What the agent observes: the state and the `r` latest perturbations,
/// oldest first, zero before the episode starts.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub x: DVector<f64>,
    pub w_hist: Vec<DVector<f64>>,
}

impl AgentState {
    /// Start of an episode: an all-zero history of length `r`.
    pub fn initial(x: DVector<f64>, r: usize) -> Self {
        let n = x.len();
        AgentState { x, w_hist: vec![DVector::zeros(n); r] }
    }

    /// The state after `w` was observed and the system moved to `x_next`.
    pub fn advance(&self, w: &DVector<f64>, x_next: DVector<f64>) -> Self {
        let mut w_hist = self.w_hist.clone();
        if !w_hist.is_empty() {
            w_hist.remove(0);
            w_hist.push(w.clone());
        }
        AgentState { x: x_next, w_hist }
    }

    pub fn features(&self) -> Vec<f64> {
        let mut f = self.x.as_slice().to_vec();
        for w in &self.w_hist {
            f.extend_from_slice(w.as_slice());
        }
        f
    }
}

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        })
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub act: Activation,
}

/// Gradient with the same shapes as the network's layers.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<(DMatrix<f64>, DVector<f64>)>,
}

impl Gradients {
    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.norm_squared() + b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened in the order of [`Mlp::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            for r in 0..w.nrows() {
                out.extend(w.row(r).iter());
            }
            out.extend(b.iter());
        }
        out
    }
}

const MLP_HEADER: &str = "skipctl-mlp 1";

/// Fully connected network with per-coordinate input normalization to `[−1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub input_lo: Vec<f64>,
    pub input_hi: Vec<f64>,
    pub layers: Vec<Layer>,
}

struct Forward {
    /// Post-activation outputs, `batch × width`, the input first.
    acts: Vec<DMatrix<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, ReLU hidden layers.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], input_lo: Vec<f64>, input_hi: Vec<f64>, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config("network needs an input and an output size".into()));
        }
        if input_lo.len() != sizes[0] || input_hi.len() != sizes[0] {
            return Err(Error::dims(sizes[0], input_lo.len()));
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let act = if i + 2 == sizes.len() { Activation::Linear } else { Activation::Relu };
                Layer {
                    w: DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..limit)),
                    b: DVector::zeros(fan_out),
                    act,
                }
            })
            .collect();
        Ok(Mlp { input_lo, input_hi, layers })
    }

    pub fn input_size(&self) -> usize {
        self.input_lo.len()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map_or(0, |l| l.w.nrows())
    }

    fn normalize_into(&self, raw: &[f64], out: &mut [f64]) {
        for (i, v) in raw.iter().enumerate() {
            let (lo, hi) = (self.input_lo[i], self.input_hi[i]);
            out[i] = if hi - lo > 1e-12 { 2.0 * (v - lo) / (hi - lo) - 1.0 } else { 0.0 };
        }
    }

    fn input_matrix(&self, inputs: &[Vec<f64>]) -> DMatrix<f64> {
        let d = self.input_size();
        let mut m = DMatrix::zeros(inputs.len(), d);
        let mut row = vec![0.0; d];
        for (r, x) in inputs.iter().enumerate() {
            assert_eq!(x.len(), d, "network input size");
            self.normalize_into(x, &mut row);
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        m
    }

    fn forward(&self, input: DMatrix<f64>) -> Forward {
        let mut acts = vec![input];
        for layer in &self.layers {
            let prev = acts.last().expect("input present");
            let mut z = prev * layer.w.transpose();
            for mut row in z.row_iter_mut() {
                row += layer.b.transpose();
            }
            if layer.act == Activation::Relu {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        Forward { acts }
    }

    /// Outputs for a batch of raw inputs, one row per input.
    pub fn predict_batch(&self, inputs: &[Vec<f64>]) -> DMatrix<f64> {
        self.forward(self.input_matrix(inputs)).acts.pop().expect("output present")
    }

    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        let out = self.predict_batch(&[input.to_vec()]);
        out.row(0).iter().copied().collect()
    }

    /// Mean squared error of output `actions[i]` against `targets[i]`, and its gradient.
    pub fn loss_and_grad(&self, inputs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> (f64, Gradients) {
        let batch = inputs.len();
        assert!(batch > 0 && actions.len() == batch && targets.len() == batch);
        let fw = self.forward(self.input_matrix(inputs));
        let out = fw.acts.last().expect("output present");
        let mut delta = DMatrix::zeros(batch, out.ncols());
        let mut loss = 0.0;
        for i in 0..batch {
            let e = out[(i, actions[i])] - targets[i];
            loss += e * e;
            delta[(i, actions[i])] = 2.0 * e / batch as f64;
        }
        loss /= batch as f64;
        let mut grads = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &fw.acts[l];
            let gw = delta.transpose() * input;
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if l > 0 {
                let mut next = &delta * &layer.w;
                if self.layers[l - 1].act == Activation::Relu {
                    next.zip_apply(&fw.acts[l], |d, a| {
                        if a <= 0.0 {
                            *d = 0.0;
                        }
                    });
                }
                delta = next;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        (loss, Gradients { layers: grads })
    }

    /// Gradient step with the gradient rescaled to norm at most `clip`.
    pub fn sgd_step(&mut self, grads: &Gradients, lr: f64, clip: f64) {
        let norm = grads.norm();
        let scale = if norm > clip { clip / norm } else { 1.0 };
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grads.layers) {
            layer.w -= gw * (lr * scale);
            layer.b -= gb * (lr * scale);
        }
    }

    /// All weights and biases, layer by layer, weights row-major.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for r in 0..layer.w.nrows() {
                out.extend(layer.w.row(r).iter());
            }
            out.extend(layer.b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
        if params.len() != total {
            return Err(Error::dims(total, params.len()));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            for r in 0..layer.w.nrows() {
                for c in 0..layer.w.ncols() {
                    layer.w[(r, c)] = it.next().expect("length checked");
                }
            }
            for v in layer.b.iter_mut() {
                *v = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    pub fn to_text(&self) -> String {
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(fmt_f64).collect::<Vec<_>>().join(" ");
        let mut s = format!("{MLP_HEADER}\ninput {}\n", self.input_size());
        s.push_str(&format!("lo {}\n", join(&mut self.input_lo.iter().copied())));
        s.push_str(&format!("hi {}\n", join(&mut self.input_hi.iter().copied())));
        s.push_str(&format!("layers {}\n", self.layers.len()));
        for layer in &self.layers {
            s.push_str(&format!("layer {} {} {}\n", layer.w.nrows(), layer.w.ncols(), layer.act));
            for r in 0..layer.w.nrows() {
                s.push_str(&join(&mut layer.w.row(r).iter().copied()));
                s.push('\n');
            }
            s.push_str(&join(&mut layer.b.iter().copied()));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MLP_HEADER) {
            return Err(Error::Parse("missing network header".into()));
        }
        let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
        let nums = |line: &str, skip: usize| -> Result<Vec<f64>> {
            line.split_whitespace()
                .skip(skip)
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                .collect()
        };
        let keyed = |line: &str, key: &str| -> Result<()> {
            if line.split_whitespace().next() == Some(key) {
                Ok(())
            } else {
                Err(Error::Parse(format!("expected {key}, found {line:?}")))
            }
        };
        let line = next("input")?;
        keyed(line, "input")?;
        let d: usize = line[5..].trim().parse().map_err(|_| Error::Parse("bad input size".into()))?;
        let line = next("lo")?;
        keyed(line, "lo")?;
        let input_lo = nums(line, 1)?;
        let line = next("hi")?;
        keyed(line, "hi")?;
        let input_hi = nums(line, 1)?;
        if input_lo.len() != d || input_hi.len() != d {
            return Err(Error::Parse("normalization length mismatch".into()));
        }
        let line = next("layers")?;
        keyed(line, "layers")?;
        let count: usize = line[6..].trim().parse().map_err(|_| Error::Parse("bad layer count".into()))?;
        let mut layers = Vec::with_capacity(count);
        let mut width = d;
        for _ in 0..count {
            let head = next("layer")?;
            keyed(head, "layer")?;
            let toks: Vec<&str> = head.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(Error::Parse(format!("bad layer line {head:?}")));
            }
            let rows: usize = toks[1].parse().map_err(|_| Error::Parse("bad layer rows".into()))?;
            let cols: usize = toks[2].parse().map_err(|_| Error::Parse("bad layer cols".into()))?;
            let act: Activation = toks[3].parse()?;
            if cols != width {
                return Err(Error::Parse(format!("layer expects {cols} inputs, previous width {width}")));
            }
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = nums(next("weights")?, 0)?;
                if row.len() != cols {
                    return Err(Error::Parse("weight row length".into()));
                }
                data.extend(row);
            }
            let b = nums(next("bias")?, 0)?;
            if b.len() != rows {
                return Err(Error::Parse("bias length".into()));
            }
            layers.push(Layer { w: DMatrix::from_row_slice(rows, cols, &data), b: DVector::from_vec(b), act });
            width = rows;
        }
        let net = Mlp { input_lo, input_hi, layers };
        if !net.is_finite() {
            return Err(Error::Parse("network contains non-finite parameters".into()));
        }
        Ok(net)
    }
}

/// Reward weights `w1` (leaving `X′`) and `w2` (input energy).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardWeights {
    pub w1: f64,
    pub w2: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { w1: 0.01, w2: 0.0001 }
    }
}

/// `−w1 R1 − w2 R2` from its ingredients: `R1 = [x₂ ∉ X′]`, and `R2` is
/// zero only for a skip proposed inside `X′`, else `‖κ(x₁)‖₁`.
pub fn reward_from_parts(weights: RewardWeights, s1_in_prime: bool, actuate: bool, s2_in_prime: bool, kappa_norm1: f64) -> f64 {
    let r1 = if s2_in_prime { 0.0 } else { 1.0 };
    let r2 = if !actuate && s1_in_prime { 0.0 } else { kappa_norm1 };
    -weights.w1 * r1 - weights.w2 * r2
}

/// The reward of a transition; evaluates `κ(s1.x)` only when it is charged.
pub fn reward_fn(
    s1: &AgentState,
    actuate: bool,
    s2: &AgentState,
    bundle: &SafeSetBundle,
    kappa: &dyn Controller,
    weights: RewardWeights,
) -> Result<f64> {
    let in1 = crate::runtime::in_strengthened(&bundle.x_prime, &s1.x);
    let in2 = crate::runtime::in_strengthened(&bundle.x_prime, &s2.x);
    let norm = if !actuate && in1 { 0.0 } else { kappa.control(&s1.x)?.lp_norm(1) };
    Ok(reward_from_parts(weights, in1, actuate, in2, norm))
}

/// Index of the larger of the first two outputs, `0` on ties.
fn greedy(q: &[f64]) -> usize {
    if q[1] > q[0] {
        1
    } else {
        0
    }
}

/// Greedy action; `true` means actuate.
pub fn greedy_action(net: &Mlp, s: &AgentState) -> bool {
    greedy(&net.predict(&s.features())) == 1
}

/// `ε`-greedy action; `true` means actuate.
pub fn act<R: Rng + ?Sized>(net: &Mlp, s: &AgentState, epsilon: f64, rng: &mut R) -> bool {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random::<bool>();
    }
    greedy_action(net, s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: AgentState,
    pub actuate: bool,
    pub reward: f64,
    pub s_next: AgentState,
    pub terminal: bool,
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer { capacity: capacity.max(1), items: Vec::new(), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `count` transitions drawn with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<&Transition> {
        (0..count).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Step settings of [`ddqn_update`]. Rewards are multiplied by
/// `reward_scale` inside the TD target, which rescales every Q-value by the
/// same positive factor and leaves the greedy policy's optimum unchanged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateParams {
    pub gamma: f64,
    pub lr: f64,
    pub clip: f64,
    pub reward_scale: f64,
}

/// One double-DQN step on `online`: the online net picks the bootstrap
/// action, the target net scores it. Returns the batch loss.
pub fn ddqn_update(online: &mut Mlp, target: &Mlp, batch: &[&Transition], p: UpdateParams) -> Result<f64> {
    let UpdateParams { gamma, lr, clip, reward_scale } = p;
    if batch.is_empty() {
        return Err(Error::Contract("empty training batch".into()));
    }
    let next: Vec<Vec<f64>> = batch.iter().map(|t| t.s_next.features()).collect();
    let q_online = online.predict_batch(&next);
    let q_target = target.predict_batch(&next);
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let r = reward_scale * t.reward;
            if t.terminal || gamma == 0.0 {
                r
            } else {
                let a = greedy(&[q_online[(i, 0)], q_online[(i, 1)]]);
                r + gamma * q_target[(i, a)]
            }
        })
        .collect();
    let inputs: Vec<Vec<f64>> = batch.iter().map(|t| t.s.features()).collect();
    let actions: Vec<usize> = batch.iter().map(|t| usize::from(t.actuate)).collect();
    let (loss, grads) = online.loss_and_grad(&inputs, &actions, &targets);
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("TD loss is {loss}")));
    }
    online.sgd_step(&grads, lr, clip);
    if !online.is_finite() {
        return Err(Error::Diverged(format!("non-finite weights after an update with loss {loss:.6e}")));
    }
    Ok(loss)
}

/// Training hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub lr: f64,
    pub replay_capacity: usize,
    pub batch: usize,
    pub target_period: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Share of all training steps over which `ε` is annealed.
    pub eps_fraction: f64,
    pub episode_len: usize,
    pub memory: usize,
    pub grad_clip: f64,
    /// Gradient updates happen every this many environment steps.
    pub train_every: usize,
    pub reward: RewardWeights,
    /// Factor on rewards inside TD targets; see [`UpdateParams`].
    pub reward_scale: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            hidden: vec![64, 64],
            gamma: 0.99,
            lr: 1e-3,
            replay_capacity: 100_000,
            batch: 64,
            target_period: 500,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_fraction: 0.5,
            episode_len: 100,
            memory: 1,
            grad_clip: 10.0,
            train_every: 1,
            reward: RewardWeights::default(),
            reward_scale: 100.0,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.lr <= 0.0 || self.grad_clip <= 0.0 || self.reward_scale <= 0.0 {
            return bad("learning rate, gradient clip and reward scale must be positive");
        }
        if self.batch == 0 || self.replay_capacity < self.batch {
            return bad("batch must be positive and fit in the replay buffer");
        }
        if self.target_period == 0 || self.episode_len == 0 || self.train_every == 0 {
            return bad("target period, episode length and training interval must be positive");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("exploration rates must lie in [0, 1]");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layers must be nonempty");
        }
        Ok(())
    }

    pub fn update_params(&self) -> UpdateParams {
        UpdateParams { gamma: self.gamma, lr: self.lr, clip: self.grad_clip, reward_scale: self.reward_scale }
    }

    /// Linear annealing from `eps_start` to `eps_end` over the first
    /// `eps_fraction` of `total` steps.
    pub fn epsilon(&self, step: usize, total: usize) -> f64 {
        let span = (self.eps_fraction * total as f64).max(1.0);
        let f = (step as f64 / span).min(1.0);
        self.eps_start + f * (self.eps_end - self.eps_start)
    }
}

/// Network sized for `sys` and `memory`, normalized by the boxes of `X_I` and `W`.
pub fn new_network<R: Rng + ?Sized>(sys: &LtiSystem, x_i: &Polytope, memory: usize, hidden: &[usize], rng: &mut R) -> Result<Mlp> {
    let (xl, xh) = x_i.bounding_box().ok_or_else(|| Error::EmptySet { what: "X_I".into() })?;
    let (wl, wh) = sys.w_set.bounding_box().ok_or_else(|| Error::EmptySet { what: "W".into() })?;
    let mut lo = xl;
    let mut hi = xh;
    for _ in 0..memory {
        // Zero padding must normalize inside the box too.
        lo.extend(wl.iter().map(|v| v.min(0.0)));
        hi.extend(wh.iter().map(|v| v.max(0.0)));
    }
    let mut sizes = vec![lo.len()];
    sizes.extend_from_slice(hidden);
    sizes.push(2);
    Mlp::new(&sizes, lo, hi, rng)
}

/// One episode of the learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub energy: f64,
    pub skip_count: usize,
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "cumulative_reward", "energy", "skip_count"])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for p in curve {
        w.write_record([p.episode.to_string(), fmt_f64(p.cumulative_reward), fmt_f64(p.energy), p.skip_count.to_string()])
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    Ok(w.flush()?)
}

pub struct TrainOutcome {
    pub net: Mlp,
    pub curve: Vec<CurvePoint>,
}

/// Start state and perturbation source of a training episode.
pub type EpisodeSetup = (DVector<f64>, Box<dyn PerturbationSource>);

/// Trains an agent against the shielded loop. `setup(episode)` supplies the
/// initial state and the perturbations of each episode. The shield applies
/// `κ` whenever the state is outside `X′`; the transition still records the
/// agent's own proposal.
pub fn train(
    sys: &LtiSystem,
    bundle: &SafeSetBundle,
    kappa: &dyn Controller,
    cfg: &DqnConfig,
    episodes: usize,
    setup: &mut dyn FnMut(usize) -> Result<EpisodeSetup>,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    bundle.check_provenance(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut online = new_network(sys, &bundle.x_i, cfg.memory, &cfg.hidden, &mut rng)?;
    let mut target = online.clone();
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let total = episodes * cfg.episode_len;
    let mut step = 0usize;
    let mut updates = 0usize;
    let mut curve = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let (x0, mut source) = setup(episode)?;
        let mut s = AgentState::initial(x0, cfg.memory);
        let mut point = CurvePoint { episode, cumulative_reward: 0.0, energy: 0.0, skip_count: 0 };
        for _ in 0..cfg.episode_len {
            let eps = cfg.epsilon(step, total);
            let proposal = act(&online, &s, eps, &mut rng);
            let w = source.next_perturbation();
            let rec = crate::runtime::monitor_step(sys, bundle, kappa, &s.x, proposal, &w, cfg.reward)?;
            let s_next = s.advance(&w, rec.x_next.clone());
            point.cumulative_reward += rec.reward;
            point.energy += rec.unorm1;
            if !rec.z_applied {
                point.skip_count += 1;
            }
            replay.push(Transition { s, actuate: proposal, reward: rec.reward, s_next: s_next.clone(), terminal: false });
            s = s_next;
            step += 1;
            if replay.len() >= cfg.batch && step.is_multiple_of(cfg.train_every) {
                let batch = replay.sample(cfg.batch, &mut rng);
                ddqn_update(&mut online, &target, &batch, cfg.update_params())?;
                updates += 1;
                if updates.is_multiple_of(cfg.target_period) {
                    target = online.clone();
                }
            }
        }
        log::debug!("episode {episode}: reward {:.6} energy {:.3}", point.cumulative_reward, point.energy);
        curve.push(point);
    }
    Ok(TrainOutcome { net: online, curve })
}
