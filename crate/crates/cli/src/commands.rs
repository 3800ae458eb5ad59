use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skipctl::acc::{episode_seed, histogram, initial_state, par_map, AccScenario};
use skipctl::rmpc::{lqr, nominal_equilibrium_input, Controller, LinearFeedback, Rmpc, RmpcConfig, RmpcParams};
use skipctl::runtime::{
    in_set, run_episode, saving_percent, AlwaysActuate, AlwaysSkip, BangBang, CountingController, DrlPolicy,
    EpisodeMetrics, ModelBased, RandomPolicy, SkipPolicy,
};
use skipctl::safesets::{SafeSetBundle, SafeSetMethod};
use skipctl::skip_drl::{train, write_curve_csv, DqnConfig, EpisodeSetup, Mlp, TrainOutcome};
use skipctl::system::{Clairvoyant, LtiSystem, PerturbationSource, UniformSource};
use skipctl::{Error, Polytope, Result};

use crate::config::{RunConfig, DEFAULT_EPISODES, DEFAULT_STEPS};

// Independent seed streams derived from the master seed.
const SALT_SETS: u64 = 0x5e75;
const SALT_TRAIN: u64 = 0x7a41_0000;
const SALT_NET: u64 = 0x4e37;
const SALT_POLICY: u64 = 0x9011_c400;

pub const SET_SAMPLES: usize = 1000;

/// Resolved settings of one command invocation.
#[derive(Clone, Debug)]
pub struct Context {
    pub cfg: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Context {
    /// Command-line values win over the file; the seed has no default.
    pub fn new(cfg: RunConfig, out: Option<PathBuf>, seed: Option<u64>, jobs: Option<usize>) -> Result<Self> {
        let seed = seed
            .or(cfg.seed)
            .ok_or_else(|| Error::Config("a seed is required (--seed or `seed` in the config)".into()))?;
        let out = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("skipctl-out"));
        let jobs = jobs.or(cfg.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(Error::Config("jobs must be positive".into()));
        }
        if let Some(p) = cfg.policy.evaluate.iter().find(|p| !POLICIES.contains(&p.as_str())) {
            return Err(Error::Config(format!("unknown policy {p:?}; expected one of {POLICIES:?}")));
        }
        Ok(Context { cfg, seed, out, jobs })
    }

    pub fn episodes(&self) -> usize {
        self.cfg.episodes.unwrap_or(DEFAULT_EPISODES)
    }

    pub fn steps(&self) -> usize {
        self.cfg.steps.unwrap_or(DEFAULT_STEPS)
    }

    fn file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn bundle_path(&self) -> PathBuf {
        self.cfg.sets.bundle.clone().unwrap_or_else(|| self.file("bundle.txt"))
    }

    fn network_path(&self) -> PathBuf {
        self.cfg.policy.network.clone().unwrap_or_else(|| self.file("network.txt"))
    }
}

/// The system, its safe controller `κ` and where perturbations come from.
pub struct Plant {
    pub sys: LtiSystem,
    pub scenario: Option<AccScenario>,
    pub method: SafeSetMethod,
    pub kappa: Box<dyn Controller>,
    rmpc_cfg: Option<RmpcConfig>,
    feedback: Option<LinearFeedback>,
    forecast: bool,
}

impl Plant {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        let sys = cfg.system()?;
        let scenario = cfg.scenario()?;
        let method: SafeSetMethod = cfg.sets.method.parse()?;
        let x_ref = cfg.x_ref(&sys)?;
        let (kappa, rmpc_cfg, feedback): (Box<dyn Controller>, _, _) = match method {
            SafeSetMethod::RmpcFeasible => {
                let params = RmpcParams { horizon: cfg.rmpc.horizon, p_weight: cfg.rmpc.p, q_weight: cfg.rmpc.q, x_ref };
                let rc = RmpcConfig::build(&sys, &params)?;
                (Box::new(Rmpc::new(rc.clone(), &sys)?), Some(rc), None)
            }
            SafeSetMethod::LinearFeedback => {
                let k = match cfg.gain(&sys)? {
                    Some(k) => k,
                    None => lqr(&sys.a, &sys.b, &DMatrix::identity(sys.n(), sys.n()), &DMatrix::identity(sys.m(), sys.m()))?,
                };
                let u_eq = nominal_equilibrium_input(&sys, &x_ref, &sys.nominal_perturbation()?)?;
                let fb = LinearFeedback::new(k, x_ref, u_eq)?;
                (Box::new(fb.clone()), None, Some(fb))
            }
        };
        Ok(Plant { sys, scenario, method, kappa, rmpc_cfg, feedback, forecast: cfg.system.forecast })
    }

    pub fn compute_bundle(&self, cfg: &RunConfig) -> Result<SafeSetBundle> {
        match (&self.rmpc_cfg, &self.feedback) {
            (Some(rc), _) => SafeSetBundle::rmpc_feasible(&self.sys, rc),
            (None, Some(fb)) => SafeSetBundle::linear_feedback(&self.sys, fb, cfg.sets.alpha, cfg.sets.terms),
            (None, None) => unreachable!("plant has a controller"),
        }
    }

    /// Loads a stored bundle and checks it belongs to this plant.
    pub fn load_bundle(&self, path: &Path) -> Result<SafeSetBundle> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read safe-set bundle {} ({e}); run `skipctl sets` first", path.display()))
        })?;
        let bundle = SafeSetBundle::from_text(&text, &self.sys)?;
        if bundle.method != self.method {
            return Err(Error::Config(format!("bundle was built with {}, the config asks for {}", bundle.method, self.method)));
        }
        Ok(bundle)
    }

    pub fn source(&self, seed: u64) -> Box<dyn PerturbationSource> {
        match &self.scenario {
            Some(sc) => Box::new(sc.source(seed)),
            None if self.forecast => Box::new(Clairvoyant::new(UniformSource::new(self.sys.w_set.clone(), seed))),
            None => Box::new(UniformSource::new(self.sys.w_set.clone(), seed)),
        }
    }
}

/// Vertices of `W` for the sampled set checks.
pub fn w_vertices(w: &Polytope) -> Result<Vec<DVector<f64>>> {
    let (lo, hi) = w.bounding_box().ok_or_else(|| Error::EmptySet { what: "W".into() })?;
    let bbox = Polytope::from_box(&lo, &hi)?;
    if bbox.is_subset(w)? {
        let n = lo.len();
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let v: Vec<f64> = (0..n).map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] }).collect();
            if !out.iter().any(|o| o.as_slice() == v.as_slice()) {
                out.push(DVector::from_vec(v));
            }
        }
        return Ok(out);
    }
    if w.dim() == 2 {
        return Ok(w.vertices_2d()?.iter().map(|v| DVector::from_row_slice(v)).collect());
    }
    Err(Error::Config("set checks need W to be a box outside two dimensions".into()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SetsReport {
    pub rows: [usize; 3],
    pub nested: bool,
    pub samples: usize,
    pub w_vertices: usize,
    /// Sampled `x ∈ X′` with `A x + B u_skip + w ∉ X_I` for some vertex `w`.
    pub skip_failures: usize,
    /// Sampled `x ∈ X_I` with `A x + B κ(x) + w ∉ X_I` for some vertex `w`.
    pub invariance_failures: usize,
}

impl SetsReport {
    pub fn passed(&self) -> bool {
        self.nested && self.skip_failures == 0 && self.invariance_failures == 0
    }
}

/// Sampled one-step checks of a bundle against `κ`.
pub fn check_bundle(plant: &Plant, bundle: &SafeSetBundle, samples: usize, seed: u64) -> Result<SetsReport> {
    let sys = &plant.sys;
    let nested = bundle.x_prime.is_subset(&bundle.x_i)? && bundle.x_i.is_subset(&bundle.x)?;
    let verts = w_vertices(&sys.w_set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skip_pts = bundle.x_prime.sample_uniform(&mut rng, samples);
    let inv_pts = bundle.x_i.sample_uniform(&mut rng, samples);
    if skip_pts.len() < samples || inv_pts.len() < samples {
        log::warn!("rejection sampling drew {} and {} of {samples} points", skip_pts.len(), inv_pts.len());
    }
    let lands = |x: &DVector<f64>, u: &DVector<f64>| verts.iter().all(|w| in_set(&bundle.x_i, &sys.step_unchecked(x, u, w)));
    let skip_failures = skip_pts.iter().filter(|x| !lands(&DVector::from_row_slice(x), &sys.u_skip)).count();
    let mut invariance_failures = 0;
    for x in &inv_pts {
        let x = DVector::from_row_slice(x);
        let u = plant.kappa.control(&x)?;
        if !lands(&x, &u) {
            invariance_failures += 1;
        }
    }
    Ok(SetsReport {
        rows: [bundle.x.num_rows(), bundle.x_i.num_rows(), bundle.x_prime.num_rows()],
        nested,
        samples: skip_pts.len().min(inv_pts.len()),
        w_vertices: verts.len(),
        skip_failures,
        invariance_failures,
    })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents)?;
    Ok(())
}

/// Computes, checks and stores the safe-set bundle.
pub fn cmd_sets(ctx: &Context) -> Result<SetsReport> {
    let plant = Plant::build(&ctx.cfg)?;
    let bundle = plant.compute_bundle(&ctx.cfg)?;
    let report = check_bundle(&plant, &bundle, SET_SAMPLES, ctx.seed ^ SALT_SETS)?;
    write_file(&ctx.file("bundle.txt"), bundle.to_text().as_bytes())?;
    println!("bundle ({}) -> {}", bundle.method, ctx.file("bundle.txt").display());
    println!("rows: X {}, X_I {}, X' {}", report.rows[0], report.rows[1], report.rows[2]);
    println!("X' in X_I in X: {}", if report.nested { "ok" } else { "FAILED" });
    println!(
        "one-step skip from X': {} failures; invariance of X_I under the controller: {} failures ({} samples x {} W vertices)",
        report.skip_failures, report.invariance_failures, report.samples, report.w_vertices
    );
    if !report.passed() {
        return Err(Error::VerificationFailed {
            point: vec![],
            detail: format!(
                "nesting {}, {} skip failures, {} invariance failures",
                report.nested, report.skip_failures, report.invariance_failures
            ),
        });
    }
    Ok(report)
}

/// Trains the agent against the stored bundle.
pub fn cmd_train(ctx: &Context) -> Result<TrainOutcome> {
    let plant = Plant::build(&ctx.cfg)?;
    let bundle = plant.load_bundle(&ctx.bundle_path())?;
    let dqn = ctx.cfg.dqn.to_config()?;
    let out = train_agent(ctx, &plant, &bundle, &dqn)?;
    write_file(&ctx.file("network.txt"), out.net.to_text().as_bytes())?;
    let mut csv = Vec::new();
    write_curve_csv(&out.curve, &mut csv)?;
    write_file(&ctx.file("curve.csv"), &csv)?;
    let k = (out.curve.len() / 10).max(1);
    let mean = |pts: &[skipctl::skip_drl::CurvePoint]| pts.iter().map(|p| p.cumulative_reward).sum::<f64>() / pts.len().max(1) as f64;
    if !out.curve.is_empty() {
        println!(
            "trained {} episodes; mean reward first 10% {:.6}, last 10% {:.6}",
            out.curve.len(),
            mean(&out.curve[..k]),
            mean(&out.curve[out.curve.len() - k..])
        );
    }
    println!("network -> {}, curve -> {}", ctx.file("network.txt").display(), ctx.file("curve.csv").display());
    Ok(out)
}

fn train_agent(ctx: &Context, plant: &Plant, bundle: &SafeSetBundle, dqn: &DqnConfig) -> Result<TrainOutcome> {
    let master = ctx.seed ^ SALT_TRAIN;
    let mut setup = |e: usize| -> Result<EpisodeSetup> {
        let s = episode_seed(master, e as u64);
        Ok((initial_state(bundle, s)?, plant.source(s.wrapping_add(1))))
    };
    train(&plant.sys, bundle, plant.kappa.as_ref(), dqn, ctx.cfg.dqn.episodes(), &mut setup, ctx.seed ^ SALT_NET)
}

/// One policy on one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyRow {
    pub episode: usize,
    pub seed: u64,
    pub policy: String,
    pub metrics: EpisodeMetrics,
    /// Invocations of `κ`, including those made while planning.
    pub kappa_calls: usize,
    /// Energy saving over `rmpc_only` on the same seed, when it was run.
    pub saving_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub episodes: usize,
    pub mean_energy: f64,
    pub mean_saving_pct: Option<f64>,
    pub mean_skip_rate: f64,
    pub mean_skip_count: f64,
    pub mean_forced: f64,
    pub mean_reward: f64,
    pub safety_violations: usize,
    pub kappa_calls: usize,
    /// `1 − calls / calls(rmpc_only)` in percent.
    pub computed_steps_saving_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<PolicyRow>,
    pub summary: Vec<PolicySummary>,
}

impl EvalReport {
    pub fn policy(&self, name: &str) -> Option<&PolicySummary> {
        self.summary.iter().find(|s| s.policy == name)
    }

    pub fn savings(&self, name: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.policy == name).filter_map(|r| r.saving_pct).collect()
    }
}

pub const POLICIES: [&str; 6] = ["rmpc_only", "bang_bang", "drl", "model_based", "always_skip", "random"];

#[allow(clippy::too_many_arguments)]
fn make_policy<'a>(name: &str, plant: &'a Plant, kappa: &'a dyn Controller, bundle: &'a SafeSetBundle, net: Option<&Mlp>, memory: usize, horizon: usize, seed: u64) -> Result<Box<dyn SkipPolicy + 'a>> {
    Ok(match name {
        "rmpc_only" => Box::new(AlwaysActuate),
        "bang_bang" => Box::new(BangBang),
        "always_skip" => Box::new(AlwaysSkip),
        "random" => Box::new(RandomPolicy::new(seed ^ SALT_POLICY)),
        "model_based" => Box::new(ModelBased::new(&plant.sys, kappa, &bundle.x_prime, horizon)),
        "drl" => {
            let net = net.ok_or_else(|| Error::Config("the drl policy needs a trained network".into()))?;
            Box::new(DrlPolicy { net: net.clone(), memory })
        }
        other => return Err(Error::Config(format!("unknown policy {other:?}; expected one of {POLICIES:?}"))),
    })
}

/// Paired-seed comparison of the configured policies.
pub fn evaluate(ctx: &Context, plant: &Plant, bundle: &SafeSetBundle, net: Option<&Mlp>) -> Result<EvalReport> {
    let names = &ctx.cfg.policy.evaluate;
    if names.is_empty() {
        return Err(Error::Config("policy.evaluate lists no policies".into()));
    }
    if names.iter().any(|n| n == "model_based") && plant.source(0).forecast(1).is_none() {
        return Err(Error::Config(
            "model_based needs the perturbations of the next H steps, and this perturbation source cannot forecast them".into(),
        ));
    }
    let memory = ctx.cfg.dqn.memory.unwrap_or(DqnConfig::default().memory);
    let steps = ctx.steps();
    let weights = ctx.cfg.dqn.to_config()?.reward;
    let per_episode = par_map(ctx.episodes(), ctx.jobs, |i| -> Result<Vec<PolicyRow>> {
        let seed = episode_seed(ctx.seed, i as u64);
        let x0 = initial_state(bundle, seed)?;
        let mut rows: Vec<PolicyRow> = Vec::with_capacity(names.len());
        for name in names {
            let counter = CountingController::new(plant.kappa.as_ref());
            let mut policy = make_policy(name, plant, &counter, bundle, net, memory, ctx.cfg.policy.horizon, seed)?;
            let mut src = plant.source(seed.wrapping_add(1));
            let log = run_episode(&plant.sys, bundle, &counter, policy.as_mut(), src.as_mut(), steps, &x0, weights)?;
            drop(policy);
            rows.push(PolicyRow { episode: i, seed, policy: name.clone(), metrics: log.metrics(), kappa_calls: counter.calls(), saving_pct: None });
        }
        if let Some(base) = rows.iter().find(|r| r.policy == "rmpc_only").map(|r| r.metrics.energy) {
            for r in rows.iter_mut() {
                r.saving_pct = Some(saving_percent(base, r.metrics.energy));
            }
        }
        Ok(rows)
    });
    let mut rows = Vec::with_capacity(ctx.episodes() * names.len());
    for r in per_episode {
        rows.extend(r?);
    }
    let base_calls: usize = rows.iter().filter(|r| r.policy == "rmpc_only").map(|r| r.kappa_calls).sum();
    let summary = names
        .iter()
        .map(|name| {
            let mine: Vec<&PolicyRow> = rows.iter().filter(|r| &r.policy == name).collect();
            let n = mine.len().max(1) as f64;
            let mean = |f: &dyn Fn(&PolicyRow) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / n;
            let calls: usize = mine.iter().map(|r| r.kappa_calls).sum();
            PolicySummary {
                policy: name.clone(),
                episodes: mine.len(),
                mean_energy: mean(&|r| r.metrics.energy),
                mean_saving_pct: mine.iter().all(|r| r.saving_pct.is_some()).then(|| mean(&|r| r.saving_pct.unwrap_or(0.0))),
                mean_skip_rate: mean(&|r| r.metrics.skip_rate),
                mean_skip_count: mean(&|r| r.metrics.skip_count as f64),
                mean_forced: mean(&|r| r.metrics.forced_actuations as f64),
                mean_reward: mean(&|r| r.metrics.reward),
                safety_violations: mine.iter().map(|r| r.metrics.safety_violations).sum(),
                kappa_calls: calls,
                computed_steps_saving_pct: (base_calls > 0).then(|| saving_percent(base_calls as f64, calls as f64)),
            }
        })
        .collect();
    Ok(EvalReport { rows, summary })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn episodes_csv(report: &EvalReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "episode", "seed", "policy", "energy", "saving_pct", "skip_count", "skip_rate", "forced_actuations",
        "safety_violations", "kappa_calls", "reward",
    ])
    .map_err(csv_error)?;
    for r in &report.rows {
        let m = &r.metrics;
        w.write_record([
            r.episode.to_string(),
            r.seed.to_string(),
            r.policy.clone(),
            m.energy.to_string(),
            opt(r.saving_pct),
            m.skip_count.to_string(),
            m.skip_rate.to_string(),
            m.forced_actuations.to_string(),
            m.safety_violations.to_string(),
            r.kappa_calls.to_string(),
            m.reward.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

const SUMMARY_COLUMNS: [&str; 11] = [
    "policy", "episodes", "mean_energy", "mean_saving_pct", "mean_skip_rate", "mean_skip_count", "mean_forced_actuations",
    "mean_reward", "safety_violations", "kappa_calls", "computed_steps_saving_pct",
];

fn summary_fields(s: &PolicySummary) -> Vec<String> {
    vec![
        s.policy.clone(),
        s.episodes.to_string(),
        s.mean_energy.to_string(),
        opt(s.mean_saving_pct),
        s.mean_skip_rate.to_string(),
        s.mean_skip_count.to_string(),
        s.mean_forced.to_string(),
        s.mean_reward.to_string(),
        s.safety_violations.to_string(),
        s.kappa_calls.to_string(),
        opt(s.computed_steps_saving_pct),
    ]
}

pub fn summary_csv(report: &EvalReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS).map_err(csv_error)?;
    for s in &report.summary {
        w.write_record(summary_fields(s)).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Settings echoed at the top of every human-readable summary.
fn run_header(ctx: &Context, what: &str) -> String {
    let dqn = ctx.cfg.dqn.to_config().map(|c| format!("{c:?}")).unwrap_or_else(|e| e.to_string());
    let mut s = String::new();
    let _ = writeln!(s, "# skipctl {what}");
    let _ = writeln!(s, "# master seed {}, episodes {}, steps {}", ctx.seed, ctx.episodes(), ctx.steps());
    let _ = writeln!(s, "# scenario {}, sets {}, rmpc horizon {}", ctx.cfg.scenario.name, ctx.cfg.sets.method, ctx.cfg.rmpc.horizon);
    let _ = writeln!(s, "# policies {:?}, model-based horizon {}", ctx.cfg.policy.evaluate, ctx.cfg.policy.horizon);
    let _ = writeln!(s, "# training episodes {}, dqn {dqn}", ctx.cfg.dqn.episodes());
    s
}

pub fn summary_table(report: &EvalReport) -> String {
    let mut s = format!(
        "{:<12} {:>8} {:>12} {:>10} {:>10} {:>10} {:>11} {:>10}\n",
        "policy", "episodes", "energy", "saving%", "skip rate", "forced", "violations", "calls -%"
    );
    for p in &report.summary {
        let pct = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<12} {:>8} {:>12.3} {:>10} {:>10.3} {:>10.2} {:>11} {:>10}",
            p.policy,
            p.episodes,
            p.mean_energy,
            pct(p.mean_saving_pct),
            p.mean_skip_rate,
            p.mean_forced,
            p.safety_violations,
            pct(p.computed_steps_saving_pct)
        );
    }
    s
}

fn violations(report: &EvalReport) -> Result<()> {
    if let Some(r) = report.rows.iter().find(|r| r.metrics.safety_violations > 0) {
        return Err(Error::SafetyViolation { step: 0, state: vec![], set: format!("X_I ({} episode {})", r.policy, r.episode) });
    }
    Ok(())
}

fn write_report(ctx: &Context, report: &EvalReport, what: &str) -> Result<()> {
    write_file(&ctx.file("episodes.csv"), &episodes_csv(report)?)?;
    write_file(&ctx.file("summary.csv"), &summary_csv(report)?)?;
    let text = format!("{}{}", run_header(ctx, what), summary_table(report));
    write_file(&ctx.file("summary.txt"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn load_network(ctx: &Context) -> Result<Option<Mlp>> {
    if !ctx.cfg.policy.evaluate.iter().any(|p| p == "drl") {
        return Ok(None);
    }
    let path = ctx.network_path();
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read network {} ({e}); run `skipctl train` first", path.display())))?;
    Mlp::from_text(&text).map(Some)
}

/// Evaluates the configured policies with the stored bundle and network.
pub fn cmd_evaluate(ctx: &Context) -> Result<EvalReport> {
    let plant = Plant::build(&ctx.cfg)?;
    let bundle = plant.load_bundle(&ctx.bundle_path())?;
    let net = load_network(ctx)?;
    let report = evaluate(ctx, &plant, &bundle, net.as_ref())?;
    write_report(ctx, &report, "evaluate")?;
    violations(&report)?;
    Ok(report)
}

/// Result of one scenario of the suite.
#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub scenario: AccScenario,
    pub sets: Option<SetsReport>,
    pub report: std::result::Result<EvalReport, (i32, String)>,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub outcomes: Vec<ScenarioOutcome>,
}

impl SuiteReport {
    pub fn outcome(&self, name: &str) -> Option<&ScenarioOutcome> {
        self.outcomes.iter().find(|o| o.scenario.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ScenarioOutcome> {
        self.outcomes.iter().filter(|o| o.report.is_err())
    }
}

pub const SAVING_BINS: (f64, f64, usize) = (-20.0, 40.0, 30);

fn run_scenario(ctx: &Context) -> Result<(SetsReport, EvalReport)> {
    let sets = cmd_sets(ctx)?;
    let needs_net = ctx.cfg.policy.evaluate.iter().any(|p| p == "drl");
    if needs_net {
        cmd_train(ctx)?;
    }
    let report = cmd_evaluate(ctx)?;
    Ok((sets, report))
}

/// Sets, training and evaluation for the headline scenario and Ex.1–Ex.10,
/// plus the consolidated report. A failing scenario is recorded and the
/// suite moves on.
pub fn cmd_suite(ctx: &Context) -> Result<SuiteReport> {
    if !ctx.cfg.is_acc() {
        return Err(Error::Config("the suite runs the ACC preset only".into()));
    }
    let mut outcomes = Vec::new();
    for scenario in AccScenario::all() {
        let mut cfg = ctx.cfg.clone();
        cfg.scenario.name = scenario.name.clone();
        cfg.sets.bundle = None;
        cfg.policy.network = None;
        let sub = Context { cfg, seed: ctx.seed, out: ctx.out.join(&scenario.name), jobs: ctx.jobs };
        println!("== {scenario}");
        let outcome = match run_scenario(&sub) {
            Ok((sets, report)) => ScenarioOutcome { scenario, sets: Some(sets), report: Ok(report) },
            Err(e) => {
                eprintln!("scenario {scenario} failed: {e}");
                ScenarioOutcome { scenario, sets: None, report: Err((crate::exit_code(&e), e.to_string())) }
            }
        };
        outcomes.push(outcome);
    }
    let suite = SuiteReport { outcomes };
    write_file(&ctx.out.join("report.csv"), &suite_report_csv(&suite)?)?;
    write_file(&ctx.out.join("histograms.csv"), &histograms_csv(&suite)?)?;
    write_file(&ctx.out.join("trend.csv"), &trend_csv(&suite)?)?;
    let failed = suite.failures().count();
    println!("suite: {} scenarios, {failed} failed; report -> {}", suite.outcomes.len(), ctx.out.join("report.csv").display());
    Ok(suite)
}

pub fn suite_report_csv(suite: &SuiteReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["scenario", "v_f_min", "v_f_max", "status"];
    head.extend(SUMMARY_COLUMNS);
    w.write_record(&head).map_err(csv_error)?;
    for o in &suite.outcomes {
        let lead = |status: &str| vec![o.scenario.name.clone(), o.scenario.v_range.0.to_string(), o.scenario.v_range.1.to_string(), status.to_string()];
        match &o.report {
            Ok(r) => {
                for s in &r.summary {
                    let mut row = lead("ok");
                    row.extend(summary_fields(s));
                    w.write_record(&row).map_err(csv_error)?;
                }
            }
            Err((code, msg)) => {
                let mut row = lead(&format!("failed (exit {code}): {msg}"));
                row.extend(std::iter::repeat_n(String::new(), SUMMARY_COLUMNS.len()));
                w.write_record(&row).map_err(csv_error)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Per-episode saving distributions, one row per bin.
pub fn histograms_csv(suite: &SuiteReport) -> Result<Vec<u8>> {
    let (lo, hi, bins) = SAVING_BINS;
    let width = (hi - lo) / bins as f64;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "policy", "bin_lo", "bin_hi", "count"]).map_err(csv_error)?;
    for o in &suite.outcomes {
        let Ok(r) = &o.report else { continue };
        for s in r.summary.iter().filter(|s| s.policy != "rmpc_only") {
            let counts = histogram(&r.savings(&s.policy), lo, hi, bins);
            for (i, c) in counts.iter().enumerate() {
                let a = lo + i as f64 * width;
                w.write_record([o.scenario.name.clone(), s.policy.clone(), a.to_string(), (a + width).to_string(), c.to_string()])
                    .map_err(csv_error)?;
            }
        }
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Mean savings of the bounded-acceleration scenarios against their speed range.
pub fn trend_csv(suite: &SuiteReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "v_f_min", "v_f_max", "bang_bang_saving_pct", "drl_saving_pct"]).map_err(csv_error)?;
    for name in ["ex1", "ex2", "ex3", "ex4", "ex5"] {
        let Some(o) = suite.outcome(name) else { continue };
        let Ok(r) = &o.report else { continue };
        let get = |p: &str| opt(r.policy(p).and_then(|s| s.mean_saving_pct));
        w.write_record([name.to_string(), o.scenario.v_range.0.to_string(), o.scenario.v_range.1.to_string(), get("bang_bang"), get("drl")])
            .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}
