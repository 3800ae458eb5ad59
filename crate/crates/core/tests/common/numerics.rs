//! Finite-difference and regression checks of the Q-network.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skipctl::skip_drl::{ddqn_update, AgentState, Mlp, Transition, UpdateParams};

pub fn net(sizes: &[usize], seed: u64) -> Mlp {
    let n = sizes[0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mlp::new(sizes, vec![-2.0; n], vec![2.0; n], &mut rng).unwrap()
}

pub fn random_inputs(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

pub fn state(x: &[f64], w: &[f64]) -> AgentState {
    AgentState { x: DVector::from_row_slice(x), w_hist: vec![DVector::from_row_slice(w)] }
}

/// Largest relative gap between backprop and central differences over all parameters.
pub fn worst_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = net(&[3, 6, 5, 2], seed + 8);
    // Nonzero biases so that no unit sits exactly at the ReLU kink.
    let mut p = m.parameters();
    for v in p.iter_mut() {
        *v += rng.random_range(-0.1..0.1);
    }
    m.set_parameters(&p).unwrap();
    let inputs = random_inputs(3, 5, &mut rng);
    let actions: Vec<usize> = (0..5).map(|i| i % 2).collect();
    let targets: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grads) = m.loss_and_grad(&inputs, &actions, &targets);
    let analytic = grads.flatten();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..p.len() {
        let mut plus = p.clone();
        plus[i] += h;
        let mut minus = p.clone();
        minus[i] -= h;
        let mut mp = m.clone();
        mp.set_parameters(&plus).unwrap();
        let mut mm = m.clone();
        mm.set_parameters(&minus).unwrap();
        let numeric = (mp.loss_and_grad(&inputs, &actions, &targets).0 - mm.loss_and_grad(&inputs, &actions, &targets).0) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// `|Q(s, a) − r|` after repeated γ = 0 updates on one transition.
pub fn discount_free_regression_error() -> f64 {
    let mut online = net(&[4, 16, 2], 5);
    let target = online.clone();
    let t = Transition { s: state(&[0.3, -0.4], &[0.1, 0.0]), actuate: true, reward: -0.0108, s_next: state(&[0.2, 0.1], &[0.5, 0.0]), terminal: false };
    let p = UpdateParams { gamma: 0.0, lr: 1e-2, clip: 10.0, reward_scale: 1.0 };
    let first = ddqn_update(&mut online, &target, &[&t], p).unwrap();
    assert!(first >= 0.0);
    for _ in 0..2000 {
        ddqn_update(&mut online, &target, &[&t], p).unwrap();
    }
    (online.predict(&t.s.features())[1] - t.reward).abs()
}
