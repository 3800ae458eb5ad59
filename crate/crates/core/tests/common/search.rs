//! Exhaustive searches used as oracles for the optimizers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use skipctl::rmpc::{Controller, LinearFeedback, RmpcConfig};
use skipctl::system::LtiSystem;
use skipctl::Polytope;

use super::{bounds_1d, gain, interval, scalar_system, scalars};

/// Best plan over all `2^H` sequences, visited in lexicographic order of `z`.
pub fn enumerate(
    x0: &DVector<f64>,
    w: &[DVector<f64>],
    kappa: &dyn Controller,
    x_prime: &Polytope,
    sys: &LtiSystem,
) -> Option<(f64, Vec<bool>)> {
    let h = w.len();
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1 << h) {
        let z: Vec<bool> = (0..h).map(|k| (mask >> (h - 1 - k)) & 1 == 1).collect();
        let mut x = x0.clone();
        let mut cost = 0.0;
        let mut ok = true;
        for k in 0..h {
            let u = if z[k] {
                match kappa.control(&x) {
                    Ok(u) => u,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            } else {
                sys.u_skip.clone()
            };
            cost += u.lp_norm(1);
            x = &sys.a * &x + &sys.b * &u + &w[k];
            if !x_prime.contains(x.as_slice()) {
                ok = false;
                break;
            }
        }
        if ok && best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, z));
        }
    }
    best
}

/// Config with every set equal to `X` and no perturbation, built by hand.
pub fn plain_config(sys: &LtiSystem, horizon: usize, p: f64, q: f64, x_ref: DVector<f64>) -> RmpcConfig {
    let n = sys.n();
    let m = sys.m();
    RmpcConfig {
        horizon,
        p_weight: p,
        q_weight: q,
        x_ref: x_ref.clone(),
        tightened: vec![sys.x_set.clone(); horizon + 1],
        terminal: sys.x_set.clone(),
        k_local: DMatrix::zeros(m, n),
        w_nominal: DVector::zeros(n),
        x_eq: x_ref,
        u_eq: DVector::zeros(m),
    }
}

/// Exhaustive search over a grid of scalar input sequences.
pub fn grid_cost(sys: &LtiSystem, cfg: &RmpcConfig, x0: &DVector<f64>, step: f64) -> Option<(f64, f64)> {
    let (lo, hi) = bounds_1d(&sys.u_set);
    let count = ((hi - lo) / step).round() as usize + 1;
    let grid: Vec<f64> = (0..count).map(|i| (lo + i as f64 * step).min(hi)).collect();
    let mut best: Option<(f64, f64)> = None;
    let mut idx = vec![0usize; cfg.horizon];
    loop {
        let mut x = x0.clone();
        let mut cost = cfg.p_weight * (&x - &cfg.x_ref).lp_norm(1);
        let mut ok = true;
        for (k, &i) in idx.iter().enumerate() {
            let u = grid[i];
            x = &sys.a * &x + &sys.b * u + &cfg.w_nominal;
            let set = if k + 1 == cfg.horizon { &cfg.terminal } else { &cfg.tightened[k + 1] };
            if !set.contains(x.as_slice()) {
                ok = false;
                break;
            }
            cost += cfg.p_weight * (&x - &cfg.x_ref).lp_norm(1) + cfg.q_weight * u.abs();
        }
        if ok && best.is_none_or(|(c, _)| cost < c) {
            best = Some((cost, grid[idx[0]]));
        }
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < count {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            return best;
        }
    }
}

pub struct SkipInstance {
    pub sys: LtiSystem,
    pub kappa: LinearFeedback,
    pub x_prime: Polytope,
    pub x0: DVector<f64>,
    pub w: Vec<DVector<f64>>,
}

/// Random skip-planning problem with `1 ≤ H ≤ 12`, scalar or planar.
pub fn random_skip_instance<R: Rng>(rng: &mut R, two_d: bool) -> SkipInstance {
    let h = rng.random_range(1..=12);
    let (sys, kappa, x_prime, x0, w) = if two_d {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, rng.random_range(-0.2..0.2), 0.0, rng.random_range(0.8..1.05)]);
        let b = DMatrix::from_row_slice(2, 1, &[rng.random_range(-0.1..0.1), rng.random_range(0.5..1.0)]);
        let sys = LtiSystem::new(
            a,
            b,
            Polytope::from_box(&[-10.0, -10.0], &[10.0, 10.0]).unwrap(),
            interval(-5.0, 5.0),
            Polytope::from_box(&[-1.0, -1.0], &[1.0, 1.0]).unwrap(),
            DVector::zeros(1),
        )
        .unwrap();
        let k = DMatrix::from_row_slice(1, 2, &[rng.random_range(-0.3..0.0), rng.random_range(-1.0..-0.4)]);
        let kappa = LinearFeedback::new(k, DVector::zeros(2), DVector::zeros(1)).unwrap();
        let x_prime = Polytope::from_box(&[-2.0, -1.5], &[2.0, 1.5]).unwrap();
        let x0 = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-0.8..0.8)]);
        let w: Vec<_> = (0..h)
            .map(|_| DVector::from_vec(vec![rng.random_range(-0.3..0.3), rng.random_range(-0.4..0.4)]))
            .collect();
        (sys, kappa, x_prime, x0, w)
    } else {
        let sys = scalar_system(rng.random_range(0.9..1.1), 1.0, (-10.0, 10.0), (-5.0, 5.0), (-1.0, 1.0));
        let kappa = gain(rng.random_range(-1.2..-0.3));
        let x0 = DVector::from_vec(vec![rng.random_range(-0.8..0.8)]);
        let w = scalars(&(0..h).map(|_| rng.random_range(-0.5..0.5)).collect::<Vec<_>>());
        (sys, kappa, interval(-1.0, 1.0), x0, w)
    };
    SkipInstance { sys, kappa, x_prime, x0, w }
}
