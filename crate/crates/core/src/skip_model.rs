//! Model-based skipping: with the perturbations of the next `H` steps known,
//! pick the skip sequence of least input energy that keeps every predicted
//! state in `X′`, and apply its first decision.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::rmpc::Controller;
use crate::system::LtiSystem;

/// A fully expanded skip sequence. `z[k] == true` means actuate at step `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkipPlan {
    pub z: Vec<bool>,
    pub u: Vec<DVector<f64>>,
    pub x: Vec<DVector<f64>>,
    pub cost: f64,
}

impl SkipPlan {
    /// Replays the plan and checks every invariant against `sys`, `κ` and `X′`.
    pub fn check(
        &self,
        sys: &LtiSystem,
        kappa: &dyn Controller,
        x_prime: &Polytope,
        w_forecast: &[DVector<f64>],
    ) -> Result<()> {
        let h = self.z.len();
        if self.u.len() != h || self.x.len() != h + 1 || w_forecast.len() != h {
            return Err(Error::Contract("plan lengths disagree".into()));
        }
        let mut cost = 0.0;
        for k in 0..h {
            let expect = if self.z[k] { kappa.control(&self.x[k])? } else { sys.u_skip.clone() };
            if (&expect - &self.u[k]).amax() > 1e-9 {
                return Err(Error::Contract(format!("input at step {k} does not follow z")));
            }
            let next = sys.step_unchecked(&self.x[k], &self.u[k], &w_forecast[k]);
            if (&next - &self.x[k + 1]).amax() > 1e-9 {
                return Err(Error::Contract(format!("state at step {} is inconsistent", k + 1)));
            }
            if !x_prime.contains(next.as_slice()) {
                return Err(Error::Contract(format!("state at step {} leaves X'", k + 1)));
            }
            cost += self.u[k].lp_norm(1);
        }
        if (cost - self.cost).abs() > 1e-9 * (1.0 + cost) {
            return Err(Error::Contract("plan cost does not match its inputs".into()));
        }
        Ok(())
    }
}

/// Outcome of one model-based decision.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelDecision {
    /// First element of the optimal plan.
    Planned { actuate: bool, plan: SkipPlan },
    /// No plan keeps the states in `X′`; the caller actuates.
    Fallback,
}

impl ModelDecision {
    /// `z(t)`: `true` to actuate.
    pub fn actuate(&self) -> bool {
        match self {
            ModelDecision::Planned { actuate, .. } => *actuate,
            ModelDecision::Fallback => true,
        }
    }
}

struct Search<'a> {
    sys: &'a LtiSystem,
    kappa: &'a dyn Controller,
    x_prime: &'a Polytope,
    w: &'a [DVector<f64>],
    z: Vec<bool>,
    u: Vec<DVector<f64>>,
    x: Vec<DVector<f64>>,
    best: Option<SkipPlan>,
    skip_cost: f64,
}

impl Search<'_> {
    fn bound(&self) -> f64 {
        self.best.as_ref().map_or(f64::INFINITY, |p| p.cost)
    }

    fn descend(&mut self, cost: f64) {
        let k = self.z.len();
        if k == self.w.len() {
            if cost < self.bound() {
                self.best = Some(SkipPlan { z: self.z.clone(), u: self.u.clone(), x: self.x.clone(), cost });
            }
            return;
        }
        for actuate in [false, true] {
            let u = if actuate {
                match self.kappa.control(&self.x[k]) {
                    Ok(u) => u,
                    Err(e) => {
                        log::debug!("controller failed inside the skip search: {e}");
                        continue;
                    }
                }
            } else {
                self.sys.u_skip.clone()
            };
            let step_cost = if actuate { u.lp_norm(1) } else { self.skip_cost };
            let total = cost + step_cost;
            // Costs are nonnegative, so a branch that already ties the incumbent cannot win.
            if total >= self.bound() {
                continue;
            }
            let next = self.sys.step_unchecked(&self.x[k], &u, &self.w[k]);
            if !self.x_prime.contains(next.as_slice()) {
                continue;
            }
            self.z.push(actuate);
            self.u.push(u);
            self.x.push(next);
            self.descend(total);
            self.z.pop();
            self.u.pop();
            self.x.pop();
        }
    }
}

/// Cost-minimal feasible plan by depth-first branch and bound, skipping
/// first. Among equal-cost plans the first one in that order is kept.
pub fn plan_model_based(
    x: &DVector<f64>,
    w_forecast: &[DVector<f64>],
    kappa: &dyn Controller,
    x_prime: &Polytope,
    sys: &LtiSystem,
) -> Result<Option<SkipPlan>> {
    if x.len() != sys.n() {
        return Err(Error::dims(sys.n(), x.len()));
    }
    if let Some(w) = w_forecast.iter().find(|w| w.len() != sys.n()) {
        return Err(Error::dims(sys.n(), w.len()));
    }
    let mut search = Search {
        sys,
        kappa,
        x_prime,
        w: w_forecast,
        z: Vec::with_capacity(w_forecast.len()),
        u: Vec::with_capacity(w_forecast.len()),
        x: vec![x.clone()],
        best: None,
        skip_cost: sys.u_skip.lp_norm(1),
    };
    search.descend(0.0);
    Ok(search.best)
}

/// `z(t)` from the optimal plan over the forecast horizon `H = w_forecast.len()`.
pub fn decide_model_based(
    x: &DVector<f64>,
    w_forecast: &[DVector<f64>],
    kappa: &dyn Controller,
    x_prime: &Polytope,
    sys: &LtiSystem,
) -> Result<ModelDecision> {
    if w_forecast.is_empty() {
        return Err(Error::Contract("skip horizon must be positive".into()));
    }
    match plan_model_based(x, w_forecast, kappa, x_prime, sys)? {
        Some(plan) => Ok(ModelDecision::Planned { actuate: plan.z[0], plan }),
        None => {
            log::warn!("no skip plan keeps the state in X' from {:?}; actuating", x.as_slice());
            Ok(ModelDecision::Fallback)
        }
    }
}
