#![allow(dead_code)]

pub mod numerics;
pub mod oracle;
pub mod search;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skipctl::rmpc::LinearFeedback;
use skipctl::system::LtiSystem;
use skipctl::Polytope;

pub fn acc_system() -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, -0.1, 0.0, 0.98]),
        DMatrix::from_row_slice(2, 1, &[0.0, 0.1]),
        Polytope::from_box(&[120.0, 25.0], &[180.0, 55.0]).unwrap(),
        Polytope::from_box(&[-40.0], &[40.0]).unwrap(),
        Polytope::from_box(&[3.0, 0.0], &[5.0, 0.0]).unwrap(),
        DVector::zeros(1),
    )
    .unwrap()
}

pub fn acc_ref() -> DVector<f64> {
    DVector::from_vec(vec![150.0, 40.0])
}

pub fn interval(lo: f64, hi: f64) -> Polytope {
    Polytope::from_box(&[lo], &[hi]).unwrap()
}

pub fn scalar_system(a: f64, b: f64, x: (f64, f64), u: (f64, f64), w: (f64, f64)) -> LtiSystem {
    LtiSystem::new(
        DMatrix::from_element(1, 1, a),
        DMatrix::from_element(1, 1, b),
        interval(x.0, x.1),
        interval(u.0, u.1),
        interval(w.0, w.1),
        DVector::zeros(1),
    )
    .unwrap()
}

/// Interval of a 1-D polytope from its two supports.
pub fn bounds_1d(p: &Polytope) -> (f64, f64) {
    (-p.support(&[-1.0]), p.support(&[1.0]))
}

/// Rejection sampling inside `p` from a box around it.
pub fn sample_in(p: &Polytope, lo: &[f64], hi: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 1_000_000 {
        tries += 1;
        let x: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..=*h)).collect();
        if p.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Rejection sampling in `outer` but outside `inner` by at least `margin`.
pub fn sample_between(outer: &Polytope, inner: &Polytope, margin: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let (lo, hi) = outer.bounding_box().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 1_000_000 {
        tries += 1;
        let x: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| rng.random_range(*l..=*h)).collect();
        if outer.contains(&x) && distance_out(inner, &x) > margin {
            out.push(x);
        }
    }
    out
}

/// Vertices of a bounded polygon by brute-force pairwise row intersection.
pub fn polygon_vertices(p: &Polytope) -> Vec<[f64; 2]> {
    assert_eq!(p.dim(), 2);
    let rows = p.rows();
    let mut out: Vec<[f64; 2]> = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i].0, &rows[j].0);
            let det = a[0] * b[1] - a[1] * b[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let x = (rows[i].1 * b[1] - a[1] * rows[j].1) / det;
            let y = (a[0] * rows[j].1 - rows[i].1 * b[0]) / det;
            if p.contains_tol(&[x, y], 1e-7) && !out.iter().any(|v| (v[0] - x).abs() + (v[1] - y).abs() < 1e-9) {
                out.push([x, y]);
            }
        }
    }
    out
}

/// The two endpoints of the ACC perturbation set.
pub fn acc_w_vertices() -> Vec<DVector<f64>> {
    vec![DVector::from_vec(vec![3.0, 0.0]), DVector::from_vec(vec![5.0, 0.0])]
}

/// Largest normalized row violation; positive outside the set.
pub fn distance_out(p: &Polytope, x: &[f64]) -> f64 {
    p.rows()
        .iter()
        .map(|(a, b)| {
            let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            (a.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - b) / norm
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Scalar feedback `u = k x`.
pub fn gain(k: f64) -> LinearFeedback {
    LinearFeedback::new(DMatrix::from_element(1, 1, k), DVector::zeros(1), DVector::zeros(1)).unwrap()
}

pub fn scalars(v: &[f64]) -> Vec<DVector<f64>> {
    v.iter().map(|w| DVector::from_vec(vec![*w])).collect()
}
