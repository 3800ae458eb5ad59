//! Robust MPC with tightened constraints: LQR local gain, tightened state
//! sets, terminal set, and the condensed LP solved at every actuated step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{dot, Polytope};
use crate::lp::{self, WarmStart};
use crate::system::LtiSystem;

/// Relative tolerance for support-function verification of invariance.
pub const EPS_VERIFY: f64 = 1e-6;

/// A state-feedback law `x ↦ u`.
pub trait Controller: Send + Sync {
    fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
}

/// Affine feedback `u = u_eq + K (x − x_eq)`; the analytic controller used
/// by the model-based skip engine.
#[derive(Clone, Debug)]
pub struct LinearFeedback {
    pub k: DMatrix<f64>,
    pub x_eq: DVector<f64>,
    pub u_eq: DVector<f64>,
}

impl LinearFeedback {
    pub fn new(k: DMatrix<f64>, x_eq: DVector<f64>, u_eq: DVector<f64>) -> Result<Self> {
        if k.nrows() != u_eq.len() {
            return Err(Error::dims(u_eq.len(), k.nrows()));
        }
        if k.ncols() != x_eq.len() {
            return Err(Error::dims(x_eq.len(), k.ncols()));
        }
        Ok(LinearFeedback { k, x_eq, u_eq })
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.u_eq + &self.k * (x - &self.x_eq)
    }
}

impl Controller for LinearFeedback {
    fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.x_eq.len() {
            return Err(Error::dims(self.x_eq.len(), x.len()));
        }
        Ok(self.eval(x))
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Infinite-horizon discrete LQR gain `K` (with `u = K x`) by iterating the
/// Riccati recursion to a fixed point.
pub fn lqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if b.nrows() != n || q.nrows() != n || q.ncols() != n || r.nrows() != b.ncols() || r.ncols() != b.ncols() {
        return Err(Error::Contract("inconsistent LQR dimensions".into()));
    }
    let mut p = q.clone();
    for _ in 0..1_000_000 {
        let k = riccati_gain(a, b, r, &p)?;
        let next = q + a.transpose() * &p * a + a.transpose() * &p * b * &k;
        let diff = (&next - &p).amax();
        p = next;
        if diff <= 1e-9 * p.amax().max(1.0) {
            let k = riccati_gain(a, b, r, &p)?;
            let radius = spectral_radius(&(a + b * &k));
            if radius >= 1.0 {
                return Err(Error::UnstableClosedLoop { radius });
            }
            return Ok(k);
        }
    }
    Err(Error::Contract("Riccati iteration did not converge (is (A, B) stabilisable?)".into()))
}

fn riccati_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let btp = b.transpose() * p;
    let s = r + &btp * b;
    let s_inv = s.try_inverse().ok_or_else(|| Error::Contract("R + BᵀPB is singular".into()))?;
    Ok(-(s_inv * btp * a))
}

/// `X(0) = X`, `X(k) = X(k−1) ∩ (X(k−1) ⊖ A^{k−1} W)` for `k = 1..=N`.
pub fn tightened_constraints(x: &Polytope, a: &DMatrix<f64>, w: &Polytope, horizon: usize) -> Result<Vec<Polytope>> {
    if horizon == 0 {
        return Err(Error::Contract("horizon must be at least 1".into()));
    }
    let mut sets = vec![x.clone()];
    let mut a_pow = DMatrix::identity(a.nrows(), a.ncols());
    for k in 1..=horizon {
        let prev = &sets[k - 1];
        let reach = w.linear_image(&a_pow)?;
        let next = prev.intersect(&prev.pontryagin_diff(&reach)?)?.remove_redundancy();
        if next.is_empty() {
            return Err(Error::EmptySet { what: format!("tightened constraint set X({k})") });
        }
        sets.push(next);
        a_pow = a * a_pow;
    }
    Ok(sets)
}

/// Robust invariant terminal set for the closed loop `A + B K_L` under the
/// perturbations `W`: the Minkowski-series invariant set cut by `X_N` and
/// `{x | K_L x ∈ U}`, then re-verified.
pub fn terminal_set(sys: &LtiSystem, k_l: &DMatrix<f64>, x_n: &Polytope) -> Result<Polytope> {
    let n = sys.n();
    let fb = LinearFeedback::new(k_l.clone(), DVector::zeros(n), DVector::zeros(sys.m()))?;
    let inv = crate::safesets::robust_invariant_linear(sys, &fb, 1.0, None)?;
    let set = inv.intersect(x_n)?.intersect(&sys.u_set.linear_preimage(k_l)?)?.remove_redundancy();
    if set.is_empty() {
        return Err(Error::EmptySet { what: "terminal set".into() });
    }
    let a_k = &sys.a + &sys.b * k_l;
    crate::safesets::verify_robust_invariance(&set, &a_k, &DVector::zeros(n), &sys.w_set)?;
    Ok(set)
}

/// Terminal set for the loop `x⁺ = x_eq + A_K (x − x_eq + d) + e`, `d ∈ D`,
/// `e ∈ E`, with input `κ_L(x + d) ∈ U` and the set inside `X_N`.
///
/// The result is the maximal invariant subset of the constraints. When
/// those are unbounded they are first cut by a Rakovic-type invariant
/// outer set.
pub fn terminal_set_general(
    sys: &LtiSystem,
    fb: &LinearFeedback,
    x_n: &Polytope,
    d: &Polytope,
    e: &Polytope,
) -> Result<Polytope> {
    let n = sys.n();
    let a_k = &sys.a + &sys.b * &fb.k;
    let radius = spectral_radius(&a_k);
    if radius >= 1.0 {
        return Err(Error::UnstableClosedLoop { radius });
    }
    if d.is_empty() || e.is_empty() {
        return Err(Error::EmptySet { what: "terminal disturbance".into() });
    }
    // Support of the combined additive disturbance F = A_K D ⊕ E.
    let a_kt = a_k.transpose();
    let support_f = |v: &[f64]| -> f64 {
        let vv = DVector::from_column_slice(v);
        d.support((&a_kt * vv).as_slice()) + e.support(v)
    };
    let (f_c, _) = center_of(n, &support_f)?;
    let i_minus = DMatrix::identity(n, n) - &a_k;
    let shift = i_minus
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Contract("I − A_K is singular".into()))?
        * &f_c;
    let c = &fb.x_eq + shift;
    let q = &i_minus * &fb.x_eq;

    // Ω = X_N ∩ {x | κ_L(x + d) ∈ U ∀ d ∈ D}
    let mut rows: Vec<(Vec<f64>, f64)> = (0..x_n.num_rows()).map(|i| (x_n.row(i).to_vec(), x_n.offset(i))).collect();
    let u_off = &fb.u_eq - &fb.k * &fb.x_eq;
    for i in 0..sys.u_set.num_rows() {
        let g = DVector::from_column_slice(sys.u_set.row(i));
        let ktg = fb.k.transpose() * &g;
        rows.push((ktg.as_slice().to_vec(), sys.u_set.offset(i) - g.dot(&u_off) - d.support(ktg.as_slice())));
    }
    let mut omega = Polytope::from_rows(n, &rows)?;
    if !omega.is_bounded() {
        omega = omega.intersect(&rakovic_terminal(&a_k, &support_f, &c)?)?;
    }
    let set = maximal_invariant(&omega, &a_k, &q, &support_f)?;
    if set.is_empty() {
        return Err(Error::EmptySet { what: "terminal set".into() });
    }
    verify_terminal(sys, fb, &set, x_n, d, &a_k, &q, &support_f)?;
    Ok(set)
}

/// Bounding-box centre of a set known through its support function.
fn center_of(n: usize, support: &dyn Fn(&[f64]) -> f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let mut c = DVector::zeros(n);
    let mut half = DVector::zeros(n);
    for i in 0..n {
        let mut dir = vec![0.0; n];
        dir[i] = 1.0;
        let hi = support(&dir);
        dir[i] = -1.0;
        let lo = -support(&dir);
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::Contract("terminal disturbance must be bounded".into()));
        }
        c[i] = 0.5 * (hi + lo);
        half[i] = 0.5 * (hi - lo);
    }
    Ok((c, half))
}

/// Largest subset of `Ω = {x | H x ≤ h}` that is invariant under
/// `x⁺ = A_K x + q + f`, `f ∈ F`: rows of `Ω` are propagated `k` steps ahead
/// and tightened by the accumulated disturbance until a whole generation is
/// redundant.
fn maximal_invariant(
    omega: &Polytope,
    a_k: &DMatrix<f64>,
    q: &DVector<f64>,
    support_f: &dyn Fn(&[f64]) -> f64,
) -> Result<Polytope> {
    let n = a_k.nrows();
    let base: Vec<(DVector<f64>, f64)> =
        (0..omega.num_rows()).map(|i| (DVector::from_column_slice(omega.row(i)), omega.offset(i))).collect();
    let mut set = omega.remove_redundancy();
    // Per base row: current normal (A_Kᵀ)^k h and accumulated tightening.
    let mut normals: Vec<DVector<f64>> = base.iter().map(|(h, _)| h.clone()).collect();
    let mut tight: Vec<f64> = vec![0.0; base.len()];
    let a_kt = a_k.transpose();
    for _ in 0..2000 {
        let mut new_rows = Vec::new();
        for (i, (_, b)) in base.iter().enumerate() {
            // h A_K^{k+1} x + Σ_{j≤k} h A_K^j (q + f) ≤ b
            tight[i] += normals[i].dot(q) + support_f(normals[i].as_slice());
            normals[i] = &a_kt * &normals[i];
            let off = b - tight[i];
            let (s, _) = set.support_point(normals[i].as_slice());
            if s > off + 1e-9 * (1.0 + off.abs()) {
                new_rows.push((normals[i].as_slice().to_vec(), off));
            }
        }
        if new_rows.is_empty() {
            return Ok(set);
        }
        let mut rows: Vec<(Vec<f64>, f64)> = (0..set.num_rows()).map(|i| (set.row(i).to_vec(), set.offset(i))).collect();
        rows.extend(new_rows);
        set = Polytope::from_rows(n, &rows)?;
        if set.is_empty() {
            return Err(Error::EmptySet { what: "terminal set (no invariant subset of the constraints)".into() });
        }
        set = set.remove_redundancy();
    }
    Err(Error::Contract("maximal invariant set iteration did not terminate".into()))
}

fn rakovic_terminal(
    a_k: &DMatrix<f64>,
    support_f: &dyn Fn(&[f64]) -> f64,
    c: &DVector<f64>,
) -> Result<Polytope> {
    let n = a_k.nrows();
    let (_, half) = center_of(n, support_f)?;
    let eps = 1e-3 * (1.0 + half.amax());
    // Outer box of F − f_c inflated by eps: full dimensional and centred.
    let lo: Vec<f64> = half.iter().map(|h| -h - eps).collect();
    let hi: Vec<f64> = half.iter().map(|h| h + eps).collect();
    let base = Polytope::from_box(&lo, &hi)?;
    let mut sum = base.clone();
    let mut pow = a_k.clone();
    for _ in 1..400 {
        let img = base.linear_image(&pow)?;
        let theta = (0..base.num_rows())
            .map(|i| img.support(base.row(i)) / base.offset(i))
            .fold(0.0f64, f64::max);
        if theta <= 0.5 {
            let scaled = sum.scale(1.0 / (1.0 - theta));
            return Ok(scaled.translate(c.as_slice()));
        }
        sum = sum.minkowski_sum(&img)?;
        pow = a_k * pow;
    }
    Err(Error::Contract("no contraction found for the terminal disturbance".into()))
}

#[allow(clippy::too_many_arguments)]
fn verify_terminal(
    sys: &LtiSystem,
    fb: &LinearFeedback,
    set: &Polytope,
    x_n: &Polytope,
    d: &Polytope,
    a_k: &DMatrix<f64>,
    q: &DVector<f64>,
    support_f: &dyn Fn(&[f64]) -> f64,
) -> Result<()> {
    let a_kt = a_k.transpose();
    for i in 0..set.num_rows() {
        let h = DVector::from_column_slice(set.row(i));
        let dir = &a_kt * &h;
        let (s, pt) = set.support_point(dir.as_slice());
        let lhs = s + h.dot(q) + support_f(h.as_slice());
        let b = set.offset(i);
        if lhs > b + EPS_VERIFY * (1.0 + b.abs()) {
            return Err(Error::VerificationFailed {
                point: pt.unwrap_or_default(),
                detail: format!("terminal set not invariant: row {i} reaches {lhs:.9} > {b:.9}"),
            });
        }
    }
    if !set.is_subset_tol(x_n, EPS_VERIFY)? {
        return Err(Error::VerificationFailed { point: vec![], detail: "terminal set leaves X(N)".into() });
    }
    let u_off = &fb.u_eq - &fb.k * &fb.x_eq;
    let kt = fb.k.transpose();
    for i in 0..sys.u_set.num_rows() {
        let g = DVector::from_column_slice(sys.u_set.row(i));
        let ktg = &kt * &g;
        let (s, pt) = set.support_point(ktg.as_slice());
        let lhs = s + g.dot(&u_off) + d.support(ktg.as_slice());
        let b = sys.u_set.offset(i);
        if lhs > b + EPS_VERIFY * (1.0 + b.abs()) {
            return Err(Error::VerificationFailed {
                point: pt.unwrap_or_default(),
                detail: format!("local controller leaves U on the terminal set (row {i})"),
            });
        }
    }
    Ok(())
}

/// User-facing RMPC parameters.
#[derive(Clone, Debug)]
pub struct RmpcParams {
    pub horizon: usize,
    pub p_weight: f64,
    pub q_weight: f64,
    pub x_ref: DVector<f64>,
}

/// Everything the RMPC LP needs, derived once from the system.
#[derive(Clone, Debug)]
pub struct RmpcConfig {
    pub horizon: usize,
    pub p_weight: f64,
    pub q_weight: f64,
    pub x_ref: DVector<f64>,
    /// `X(0..=N)`, tightened by the centred perturbation set.
    pub tightened: Vec<Polytope>,
    pub terminal: Polytope,
    pub k_local: DMatrix<f64>,
    /// Midpoint of `W`, used in the nominal prediction.
    pub w_nominal: DVector<f64>,
    /// Nominal equilibrium at the reference and its input.
    pub x_eq: DVector<f64>,
    pub u_eq: DVector<f64>,
}

impl RmpcConfig {
    /// Splits `W = w_c ⊕ W̃`, tightens `X` by `A^k W̃`, builds the LQR local
    /// controller around the nominal equilibrium at `x_ref`, and the terminal set.
    pub fn build(sys: &LtiSystem, params: &RmpcParams) -> Result<Self> {
        let n = sys.n();
        let m = sys.m();
        if params.x_ref.len() != n {
            return Err(Error::dims(n, params.x_ref.len()));
        }
        if params.p_weight < 0.0 || params.q_weight < 0.0 {
            return Err(Error::Config("RMPC weights must be nonnegative".into()));
        }
        let horizon = params.horizon;
        let w_c = sys.nominal_perturbation()?;
        let w_tilde = sys.w_set.translate((-&w_c).as_slice());
        let tightened = tightened_constraints(&sys.x_set, &sys.a, &w_tilde, horizon)?;
        let u_eq = nominal_equilibrium_input(sys, &params.x_ref, &w_c)?;
        let k_local = lqr(&sys.a, &sys.b, &DMatrix::identity(n, n), &DMatrix::identity(m, m))?;
        let fb = LinearFeedback::new(k_local.clone(), params.x_ref.clone(), u_eq.clone())?;
        let d = w_tilde.linear_image(&sys.a.pow((horizon - 1) as u32))?;
        let terminal = terminal_set_general(sys, &fb, &tightened[horizon], &d, &Polytope::point(&vec![0.0; n]))?;
        Ok(RmpcConfig {
            horizon,
            p_weight: params.p_weight,
            q_weight: params.q_weight,
            x_ref: params.x_ref.clone(),
            tightened,
            terminal,
            k_local,
            w_nominal: w_c,
            x_eq: params.x_ref.clone(),
            u_eq,
        })
    }

    /// The local controller `κ_L` around the equilibrium.
    pub fn local_controller(&self) -> LinearFeedback {
        LinearFeedback { k: self.k_local.clone(), x_eq: self.x_eq.clone(), u_eq: self.u_eq.clone() }
    }
}

/// Input `u` with `A x_ref + B u + w_c = x_ref`.
pub fn nominal_equilibrium_input(sys: &LtiSystem, x_ref: &DVector<f64>, w_c: &DVector<f64>) -> Result<DVector<f64>> {
    let n = sys.n();
    let rhs = (DMatrix::identity(n, n) - &sys.a) * x_ref - w_c;
    let svd = sys.b.clone().svd(true, true);
    let u = svd.solve(&rhs, 1e-12).map_err(|e| Error::Contract(e.to_string()))?;
    let resid = (&sys.b * &u - &rhs).amax();
    if resid > 1e-8 * (1.0 + rhs.amax()) {
        return Err(Error::Config(format!("x_ref is not a nominal equilibrium (residual {resid:.3e})")));
    }
    if !sys.u_set.contains(u.as_slice()) {
        return Err(Error::Config("equilibrium input lies outside U".into()));
    }
    Ok(u)
}

/// Optimal open-loop plan.
#[derive(Clone, Debug)]
pub struct RmpcSolution {
    pub inputs: Vec<DVector<f64>>,
    pub cost: f64,
}

/// The RMPC controller `κ_R`. The LP is condensed (states substituted out)
/// with 1-norm terms as epigraph variables; only its right-hand side depends
/// on the measured state. The state penalty covers the predicted states
/// `x(1..=N)`; the constant `x(0)` term is added to the reported cost. Each solve restarts dual simplex from the optimal
/// basis at the equilibrium, so the result is a function of `x` alone.
pub struct Rmpc {
    cfg: RmpcConfig,
    n: usize,
    m: usize,
    cost: Vec<f64>,
    rows: Vec<f64>,
    b0: Vec<f64>,
    /// `rhs = b0 + G x`, row-major `rows × n`.
    g: Vec<f64>,
    warm: Option<WarmStart>,
    u_set: Polytope,
}

impl Rmpc {
    pub fn new(cfg: RmpcConfig, sys: &LtiSystem) -> Result<Self> {
        let n = sys.n();
        let m = sys.m();
        let horizon = cfg.horizon;
        if cfg.tightened.len() != horizon + 1 {
            return Err(Error::Contract("need X(0..=N)".into()));
        }
        let with_tx = cfg.p_weight > 0.0;
        let with_tu = cfg.q_weight > 0.0;
        let nu = horizon * m;
        let ntx = if with_tx { horizon * n } else { 0 };
        let ntu = if with_tu { horizon * m } else { 0 };
        let nv = nu + ntx + ntu;
        let mut cost = vec![0.0; nv];
        for v in &mut cost[nu..nu + ntx] {
            *v = cfg.p_weight;
        }
        for v in &mut cost[nu + ntx..] {
            *v = cfg.q_weight;
        }

        // x_k = Φ_k x0 + Γ_k u + c_k
        let mut phi = vec![DMatrix::identity(n, n)];
        let mut gamma = vec![DMatrix::zeros(n, nu)];
        let mut offs = vec![DVector::zeros(n)];
        for k in 1..=horizon {
            let mut gk = &sys.a * &gamma[k - 1];
            let bcols = k - 1;
            for r in 0..n {
                for c in 0..m {
                    gk[(r, bcols * m + c)] += sys.b[(r, c)];
                }
            }
            phi.push(&sys.a * &phi[k - 1]);
            offs.push(&sys.a * &offs[k - 1] + &cfg.w_nominal);
            gamma.push(gk);
        }

        let mut rows = Vec::new();
        let mut b0 = Vec::new();
        let mut g = Vec::new();
        let mut push = |coef: Vec<f64>, rhs: f64, gx: Vec<f64>| {
            rows.extend(coef);
            b0.push(rhs);
            g.extend(gx);
        };
        for k in 1..=horizon {
            let set = if k == horizon { &cfg.terminal } else { &cfg.tightened[k] };
            for i in 0..set.num_rows() {
                let h = DVector::from_column_slice(set.row(i));
                let ht = h.transpose();
                let mut coef = vec![0.0; nv];
                let hg = &ht * &gamma[k];
                coef[..nu].copy_from_slice(hg.as_slice());
                let gx = -(&ht * &phi[k]);
                push(coef, set.offset(i) - h.dot(&offs[k]), gx.as_slice().to_vec());
            }
        }
        for k in 0..horizon {
            for i in 0..sys.u_set.num_rows() {
                let mut coef = vec![0.0; nv];
                coef[k * m..(k + 1) * m].copy_from_slice(sys.u_set.row(i));
                push(coef, sys.u_set.offset(i), vec![0.0; n]);
            }
        }
        if with_tx {
            for k in 1..=horizon {
                for i in 0..n {
                    let t = nu + (k - 1) * n + i;
                    let gr: Vec<f64> = gamma[k].row(i).iter().copied().collect();
                    let pr: Vec<f64> = phi[k].row(i).iter().copied().collect();
                    let base = cfg.x_ref[i] - offs[k][i];
                    for s in [1.0, -1.0] {
                        let mut coef = vec![0.0; nv];
                        for (j, v) in gr.iter().enumerate() {
                            coef[j] = s * v;
                        }
                        coef[t] = -1.0;
                        push(coef, s * base, pr.iter().map(|v| -s * v).collect());
                    }
                }
            }
        }
        if with_tu {
            for j in 0..nu {
                for s in [1.0, -1.0] {
                    let mut coef = vec![0.0; nv];
                    coef[j] = s;
                    coef[nu + ntx + j] = -1.0;
                    push(coef, 0.0, vec![0.0; n]);
                }
            }
        }

        let mut ctrl = Rmpc { cfg, n, m, cost, rows, b0, g, warm: None, u_set: sys.u_set.clone() };
        let reference = ctrl.cfg.x_eq.clone();
        if ctrl.cfg.tightened[0].contains(reference.as_slice()) {
            let rhs = ctrl.rhs(&reference);
            let (_, warm) = lp::solve_warm(&ctrl.cost, &ctrl.rows, &rhs);
            ctrl.warm = warm;
        }
        Ok(ctrl)
    }

    pub fn config(&self) -> &RmpcConfig {
        &self.cfg
    }

    fn rhs(&self, x: &DVector<f64>) -> Vec<f64> {
        let n = self.n;
        self.b0
            .iter()
            .enumerate()
            .map(|(i, b)| b + dot(&self.g[i * n..(i + 1) * n], x.as_slice()))
            .collect()
    }

    /// Solve the RMPC problem at `x`.
    pub fn solve(&self, x: &DVector<f64>) -> Result<RmpcSolution> {
        if x.len() != self.n {
            return Err(Error::dims(self.n, x.len()));
        }
        let infeasible = || Error::Infeasible { state: x.as_slice().to_vec() };
        if !self.cfg.tightened[0].contains(x.as_slice()) {
            return Err(infeasible());
        }
        let rhs = self.rhs(x);
        let res = match &self.warm {
            Some(w) => w.resolve(&rhs),
            None => lp::solve(&self.cost, &self.rows, &rhs),
        };
        let (Some(point), Some(value)) = (res.point, res.value) else {
            return Err(infeasible());
        };
        let m = self.m;
        let inputs: Vec<DVector<f64>> = (0..self.cfg.horizon)
            .map(|k| DVector::from_column_slice(&point[k * m..(k + 1) * m]))
            .collect();
        if !self.u_set.contains(inputs[0].as_slice()) {
            return Err(Error::Contract(format!("RMPC input {:?} outside U", inputs[0].as_slice())));
        }
        let cost = value + self.cfg.p_weight * (x - &self.cfg.x_ref).lp_norm(1);
        Ok(RmpcSolution { inputs, cost })
    }
}

impl Controller for Rmpc {
    fn control(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(x)?.inputs.swap_remove(0))
    }
}

/// One-shot `κ_R(x)`; builds the LP each call. Prefer [`Rmpc`] in loops.
pub fn rmpc_control(cfg: &RmpcConfig, sys: &LtiSystem, x: &DVector<f64>) -> Result<DVector<f64>> {
    Rmpc::new(cfg.clone(), sys)?.control(x)
}
