//! Offline safe sets: robust invariant set `X_I`, one-step skip backward
//! set, strengthened set `X′`, and the bundle the runtime monitor loads.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, Polytope, EPS_SET};
use crate::rmpc::{spectral_radius, LinearFeedback, RmpcConfig, EPS_VERIFY};
use crate::system::LtiSystem;

/// Upper bound on the number of Minkowski terms chosen automatically.
pub const MAX_TERMS: usize = 200;

/// `α (W ⊕ A_K W ⊕ … ⊕ A_K^n W)` for `A_K = A + B K`, without verification.
///
/// A `W` that does not contain the origin is split as `w_c ⊕ W̃`; the sum is
/// then taken over `W̃` and centred on the fixed point `(I − A_K)⁻¹ w_c`,
/// which reduces to the plain formula when `W` is centred.
pub fn rakovic_sum(sys: &LtiSystem, fb: &LinearFeedback, alpha: f64, n: usize) -> Result<Polytope> {
    let (a_k, q) = affine_closed_loop(sys, fb)?;
    let w_c = sys.nominal_perturbation()?;
    let w_tilde = sys.w_set.translate((-&w_c).as_slice());
    let center = fixed_point(&a_k, &(&q + &w_c))?;
    let mut sum = w_tilde.clone();
    let mut pow = a_k.clone();
    for _ in 0..n {
        sum = sum.minkowski_sum(&w_tilde.linear_image(&pow)?)?;
        pow = &a_k * pow;
    }
    Ok(sum.scale(alpha).translate(center.as_slice()))
}

/// Number of terms after which the next one moves no support value of the
/// sum by more than [`EPS_SET`], capped at [`MAX_TERMS`].
pub fn default_terms(sys: &LtiSystem, fb: &LinearFeedback) -> Result<usize> {
    let (a_k, _) = affine_closed_loop(sys, fb)?;
    let w_c = sys.nominal_perturbation()?;
    let w_tilde = sys.w_set.translate((-&w_c).as_slice());
    let mut pow = a_k.clone();
    for n in 0..MAX_TERMS {
        let (lo, hi) = w_tilde
            .linear_image(&pow)?
            .bounding_box()
            .ok_or_else(|| Error::EmptySet { what: "W".into() })?;
        let extent = lo.iter().chain(&hi).fold(0.0f64, |acc, v| acc.max(v.abs()));
        if extent < EPS_SET {
            return Ok(n);
        }
        pow = &a_k * pow;
    }
    Ok(MAX_TERMS)
}

/// Robust invariant set for the linear (or affine) feedback `fb`, post-verified.
pub fn robust_invariant_linear(sys: &LtiSystem, fb: &LinearFeedback, alpha: f64, n: Option<usize>) -> Result<Polytope> {
    if alpha < 1.0 {
        return Err(Error::Contract(format!("alpha must be at least 1, got {alpha}")));
    }
    let (a_k, q) = affine_closed_loop(sys, fb)?;
    let radius = spectral_radius(&a_k);
    if radius >= 1.0 {
        return Err(Error::UnstableClosedLoop { radius });
    }
    if sys.w_set.is_empty() {
        return Err(Error::EmptySet { what: "W".into() });
    }
    let n = match n {
        Some(n) => n,
        None => default_terms(sys, fb)?,
    };
    let set = rakovic_sum(sys, fb, alpha, n)?.remove_redundancy();
    verify_robust_invariance(&set, &a_k, &q, &sys.w_set)?;
    Ok(set)
}

/// `A_K = A + B K` and the constant term `B (u_eq − K x_eq)`.
pub fn affine_closed_loop(sys: &LtiSystem, fb: &LinearFeedback) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if fb.k.nrows() != sys.m() || fb.k.ncols() != sys.n() {
        return Err(Error::Contract("feedback gain has the wrong shape".into()));
    }
    let a_k = &sys.a + &sys.b * &fb.k;
    let q = &sys.b * (&fb.u_eq - &fb.k * &fb.x_eq);
    Ok((a_k, q))
}

fn fixed_point(a_k: &DMatrix<f64>, offset: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a_k.nrows();
    let inv = (DMatrix::identity(n, n) - a_k)
        .try_inverse()
        .ok_or_else(|| Error::Contract("I − A_K is singular".into()))?;
    Ok(inv * offset)
}

/// Checks `A_K S ⊕ (q + W) ⊆ S` row by row with support LPs.
pub fn verify_robust_invariance(set: &Polytope, a_k: &DMatrix<f64>, q: &DVector<f64>, w: &Polytope) -> Result<()> {
    let a_kt = a_k.transpose();
    for i in 0..set.num_rows() {
        let h = DVector::from_column_slice(set.row(i));
        let (s, pt) = set.support_point((&a_kt * &h).as_slice());
        let reach = s + h.dot(q) + w.support(h.as_slice());
        let b = set.offset(i);
        if reach > b + EPS_VERIFY * (1.0 + b.abs()) {
            return Err(Error::VerificationFailed {
                point: pt.unwrap_or_default(),
                detail: format!("successors reach {reach:.9} on row {i}, bound {b:.9}"),
            });
        }
    }
    Ok(())
}

/// `{x | ∃ u ∈ U: A x + B u ∈ Y}`, eliminating `u` from the lifted set.
pub fn pre_with_input(y: &Polytope, sys: &LtiSystem) -> Result<Polytope> {
    let n = sys.n();
    let m = sys.m();
    if y.dim() != n {
        return Err(Error::dims(n, y.dim()));
    }
    let mut rows = Vec::with_capacity(y.num_rows() + sys.u_set.num_rows());
    for i in 0..y.num_rows() {
        let h = DVector::from_column_slice(y.row(i));
        let ha = sys.a.transpose() * &h;
        let hb = sys.b.transpose() * &h;
        let mut r = ha.as_slice().to_vec();
        r.extend_from_slice(hb.as_slice());
        rows.push((r, y.offset(i)));
    }
    for i in 0..sys.u_set.num_rows() {
        let mut r = vec![0.0; n];
        r.extend_from_slice(sys.u_set.row(i));
        rows.push((r, sys.u_set.offset(i)));
    }
    let lifted = Polytope::from_rows(n + m, &rows)?;
    let us: Vec<usize> = (n..n + m).collect();
    lifted.eliminate(&us)
}

/// Feasible set of the RMPC: `C_N = X_t`, `C_k = Pre(C_{k+1}) ∩ X(k)` with
/// the nominal prediction `A x + B u + w_c`.
pub fn rmpc_feasible_set(sys: &LtiSystem, cfg: &RmpcConfig) -> Result<Polytope> {
    let horizon = cfg.horizon;
    if cfg.tightened.len() != horizon + 1 {
        return Err(Error::Contract("need X(0..=N)".into()));
    }
    let shift = (-&cfg.w_nominal).as_slice().to_vec();
    let mut c = cfg.terminal.clone();
    if horizon == 0 {
        c = c.intersect(&cfg.tightened[0])?.remove_redundancy();
    }
    for k in (0..horizon).rev() {
        let pre = pre_with_input(&c.translate(&shift), sys)?;
        c = pre.intersect(&cfg.tightened[k])?.remove_redundancy();
        if c.is_empty() {
            return Err(Error::EmptySet { what: format!("RMPC feasible set (stage {k})") });
        }
    }
    Ok(c)
}

/// `B(Y, 0) = {x | A x + B u_skip + w ∈ Y ∀ w ∈ W}`.
pub fn backward_reachable_skip(y: &Polytope, sys: &LtiSystem) -> Result<Polytope> {
    if sys.w_set.is_empty() || y.is_empty() {
        return Err(Error::EmptySet { what: "Y or W".into() });
    }
    let bu = &sys.b * &sys.u_skip;
    y.pontryagin_diff(&sys.w_set)?
        .translate((-bu).as_slice())
        .linear_preimage(&sys.a)
}

/// `X′ = B(X_I, 0) ∩ X_I`.
pub fn strengthened_safe_set(x_i: &Polytope, sys: &LtiSystem) -> Result<Polytope> {
    if x_i.is_empty() {
        return Err(Error::EmptySet { what: "X_I".into() });
    }
    let set = backward_reachable_skip(x_i, sys)?.intersect(x_i)?.remove_redundancy();
    if set.is_empty() {
        return Err(Error::EmptySet { what: "strengthened safe set X'".into() });
    }
    Ok(set)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SafeSetMethod {
    LinearFeedback,
    RmpcFeasible,
}

impl fmt::Display for SafeSetMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SafeSetMethod::LinearFeedback => "linear_feedback",
            SafeSetMethod::RmpcFeasible => "rmpc_feasible",
        })
    }
}

impl FromStr for SafeSetMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_feedback" => Ok(SafeSetMethod::LinearFeedback),
            "rmpc_feasible" => Ok(SafeSetMethod::RmpcFeasible),
            other => Err(Error::Parse(format!("unknown safe-set method {other:?}"))),
        }
    }
}

/// Hyper-parameters recorded with a bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleParams {
    pub alpha: f64,
    pub terms: usize,
    pub horizon: usize,
}

/// `(X, X_I, X′)` with provenance.
#[derive(Clone, Debug)]
pub struct SafeSetBundle {
    pub x: Polytope,
    pub x_i: Polytope,
    pub x_prime: Polytope,
    pub method: SafeSetMethod,
    pub params: BundleParams,
    pub system_hash: String,
}

const BUNDLE_HEADER: &str = "skipctl-bundle 1";

fn checksum(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

impl SafeSetBundle {
    /// Checks non-emptiness and `X′ ⊆ X_I ⊆ X`.
    pub fn new(
        sys: &LtiSystem,
        x_i: Polytope,
        x_prime: Polytope,
        method: SafeSetMethod,
        params: BundleParams,
    ) -> Result<Self> {
        let bundle = SafeSetBundle {
            x: sys.x_set.clone(),
            x_i,
            x_prime,
            method,
            params,
            system_hash: sys.provenance_hash(),
        };
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        for (set, name) in [(&self.x, "X"), (&self.x_i, "X_I"), (&self.x_prime, "X'")] {
            if set.is_empty() {
                return Err(Error::EmptySet { what: name.into() });
            }
        }
        if !self.x_i.is_subset(&self.x)? {
            return Err(Error::VerificationFailed { point: vec![], detail: "X_I is not contained in X".into() });
        }
        if !self.x_prime.is_subset(&self.x_i)? {
            return Err(Error::VerificationFailed { point: vec![], detail: "X' is not contained in X_I".into() });
        }
        Ok(())
    }

    /// `X_I` from the RMPC feasible set.
    pub fn rmpc_feasible(sys: &LtiSystem, cfg: &RmpcConfig) -> Result<Self> {
        let x_i = rmpc_feasible_set(sys, cfg)?;
        let x_prime = strengthened_safe_set(&x_i, sys)?;
        let params = BundleParams { alpha: 1.0, terms: 0, horizon: cfg.horizon };
        SafeSetBundle::new(sys, x_i, x_prime, SafeSetMethod::RmpcFeasible, params)
    }

    /// `X_I` from the Minkowski series of an affine feedback. Also checks
    /// that the feedback respects `U` on `X_I`.
    pub fn linear_feedback(sys: &LtiSystem, fb: &LinearFeedback, alpha: f64, n: Option<usize>) -> Result<Self> {
        let terms = match n {
            Some(n) => n,
            None => default_terms(sys, fb)?,
        };
        let x_i = robust_invariant_linear(sys, fb, alpha, Some(terms))?;
        let u_off = &fb.u_eq - &fb.k * &fb.x_eq;
        for i in 0..sys.u_set.num_rows() {
            let g = DVector::from_column_slice(sys.u_set.row(i));
            let ktg = fb.k.transpose() * &g;
            let (s, pt) = x_i.support_point(ktg.as_slice());
            if s + g.dot(&u_off) > sys.u_set.offset(i) + EPS_VERIFY {
                return Err(Error::VerificationFailed {
                    point: pt.unwrap_or_default(),
                    detail: "feedback input leaves U on X_I".into(),
                });
            }
        }
        let x_prime = strengthened_safe_set(&x_i, sys)?;
        let params = BundleParams { alpha, terms, horizon: 0 };
        SafeSetBundle::new(sys, x_i, x_prime, SafeSetMethod::LinearFeedback, params)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(BUNDLE_HEADER);
        s.push('\n');
        s.push_str(&format!("method {}\n", self.method));
        s.push_str(&format!("alpha {}\n", fmt_f64(self.params.alpha)));
        s.push_str(&format!("terms {}\n", self.params.terms));
        s.push_str(&format!("horizon {}\n", self.params.horizon));
        s.push_str(&format!("system_hash {}\n", self.system_hash));
        for (name, set) in [("X", &self.x), ("X_I", &self.x_i), ("X_prime", &self.x_prime)] {
            s.push_str(name);
            s.push('\n');
            s.push_str(&set.to_text());
        }
        let sum = checksum(&s);
        s.push_str(&format!("checksum {sum}\n"));
        s
    }

    /// Parses a bundle and refuses it unless it was computed for `sys`.
    pub fn from_text(text: &str, sys: &LtiSystem) -> Result<Self> {
        let body_end = text
            .trim_end_matches('\n')
            .rfind('\n')
            .map(|i| i + 1)
            .ok_or_else(|| Error::Parse("truncated bundle".into()))?;
        let (body, tail) = text.split_at(body_end);
        let found = tail
            .trim_end()
            .strip_prefix("checksum ")
            .ok_or_else(|| Error::Parse("missing bundle checksum".into()))?;
        let expected = checksum(body);
        if found != expected {
            return Err(Error::ProvenanceMismatch { expected, found: found.to_string() });
        }
        let mut lines = body.lines();
        if lines.next() != Some(BUNDLE_HEADER) {
            return Err(Error::Parse("missing bundle header".into()));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected {key}, found {line:?}")))
        };
        let method: SafeSetMethod = field("method")?.parse()?;
        let alpha: f64 = field("alpha")?.parse().map_err(|e| Error::Parse(format!("alpha: {e}")))?;
        let terms: usize = field("terms")?.parse().map_err(|e| Error::Parse(format!("terms: {e}")))?;
        let horizon: usize = field("horizon")?.parse().map_err(|e| Error::Parse(format!("horizon: {e}")))?;
        let system_hash = field("system_hash")?;
        let expected = sys.provenance_hash();
        if system_hash != expected {
            return Err(Error::ProvenanceMismatch { expected, found: system_hash });
        }
        let mut sets = Vec::new();
        for name in ["X", "X_I", "X_prime"] {
            match lines.next() {
                Some(l) if l == name => {}
                other => return Err(Error::Parse(format!("expected {name}, found {other:?}"))),
            }
            sets.push(Polytope::read_text(&mut lines)?);
        }
        let x_prime = sets.pop().expect("three sets");
        let x_i = sets.pop().expect("three sets");
        let x = sets.pop().expect("three sets");
        let bundle = SafeSetBundle {
            x,
            x_i,
            x_prime,
            method,
            params: BundleParams { alpha, terms, horizon },
            system_hash,
        };
        bundle.check()?;
        Ok(bundle)
    }

    /// Refuses use with a system other than the one the bundle was built for.
    pub fn check_provenance(&self, sys: &LtiSystem) -> Result<()> {
        let expected = sys.provenance_hash();
        if self.system_hash != expected {
            return Err(Error::ProvenanceMismatch { expected, found: self.system_hash.clone() });
        }
        Ok(())
    }
}
