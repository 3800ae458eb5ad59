//! Brute-force convex-hull oracles for polytopes of dimension at most three.
//! Nothing here goes through the LP solver or the library's set operations.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use skipctl::Polytope;

pub type Facets = Vec<(Vec<f64>, f64)>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Unit-normal supporting half-spaces of the hull of `points` (full-dimensional, `d ≤ 3`).
pub fn hull_facets(points: &[Vec<f64>]) -> Facets {
    let d = points[0].len();
    let mut out = Vec::new();
    let mut push = |n: Vec<f64>, anchor: &[f64]| {
        let len = dot(&n, &n).sqrt();
        if len < 1e-12 {
            return;
        }
        for sign in [1.0, -1.0] {
            let u: Vec<f64> = n.iter().map(|v| sign * v / len).collect();
            let h = dot(&u, anchor);
            if points.iter().all(|p| dot(&u, p) <= h + 1e-9) {
                out.push((u, h));
            }
        }
    };
    match d {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            return vec![(vec![1.0], hi), (vec![-1.0], -lo)];
        }
        2 => {
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    let e = sub(&points[j], &points[i]);
                    push(vec![-e[1], e[0]], &points[i]);
                }
            }
        }
        3 => {
            for i in 0..points.len() {
                for j in i + 1..points.len() {
                    for k in j + 1..points.len() {
                        let n = cross(&sub(&points[j], &points[i]), &sub(&points[k], &points[i]));
                        push(n, &points[i]);
                    }
                }
            }
        }
        _ => panic!("oracle supports dimensions 1 to 3"),
    }
    out
}

/// Signed distance-like membership value: `≤ 0` inside.
pub fn facet_value(facets: &Facets, z: &[f64]) -> f64 {
    facets.iter().map(|(n, h)| dot(n, z) - h).fold(f64::NEG_INFINITY, f64::max)
}

/// Largest normalized row violation of `p` at `z`.
pub fn poly_value(p: &Polytope, z: &[f64]) -> f64 {
    p.rows()
        .iter()
        .map(|(a, b)| (dot(a, z) - b) / dot(a, a).sqrt().max(1e-300))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Vertices by solving every `d`-subset of rows.
pub fn brute_vertices(p: &Polytope) -> Vec<Vec<f64>> {
    let d = p.dim();
    let rows = p.rows();
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..d).collect();
    if rows.len() < d {
        return out;
    }
    loop {
        let m = DMatrix::from_fn(d, d, |r, c| rows[idx[r]].0[c]);
        let rhs = DVector::from_iterator(d, idx.iter().map(|&i| rows[i].1));
        if m.determinant().abs() > 1e-10 {
            if let Some(x) = m.lu().solve(&rhs) {
                let x: Vec<f64> = x.iter().copied().collect();
                let ok = rows.iter().all(|(a, b)| dot(a, &x) <= b + 1e-9);
                if ok && !out.iter().any(|v| sub(v, &x).iter().all(|e| e.abs() < 1e-9)) {
                    out.push(x);
                }
            }
        }
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < rows.len() - d + i {
                idx[i] += 1;
                for j in i + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Hull of a few random points around `center`, with its H-representation.
pub fn random_polytope<R: Rng>(rng: &mut R, d: usize, scale: f64, center: &[f64]) -> (Polytope, Vec<Vec<f64>>) {
    loop {
        let count = d + 1 + rng.random_range(0..4);
        let pts: Vec<Vec<f64>> =
            (0..count).map(|_| (0..d).map(|j| center[j] + scale * rng.random_range(-1.0..1.0)).collect()).collect();
        let facets = hull_facets(&pts);
        if facets.len() <= d {
            continue;
        }
        let p = Polytope::from_rows(d, &facets).unwrap();
        let verts = brute_vertices(&p);
        if verts.len() > d {
            return (p, verts);
        }
    }
}

pub fn bbox(points: &[Vec<f64>], grow: f64) -> (Vec<f64>, Vec<f64>) {
    let d = points[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    for j in 0..d {
        let pad = grow * (hi[j] - lo[j]).max(1e-3);
        lo[j] -= pad;
        hi[j] += pad;
    }
    (lo, hi)
}

/// Probes uniformly in `[lo, hi]`; counts points the oracle places more than
/// `tol` inside (outside) that `result` excludes (includes).
pub fn misclassified<R: Rng>(
    rng: &mut R,
    oracle: &dyn Fn(&[f64]) -> f64,
    result: &Polytope,
    lo: &[f64],
    hi: &[f64],
    probes: usize,
    tol: f64,
) -> usize {
    let mut bad = 0;
    for _ in 0..probes {
        let z: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| rng.random_range(*l..=*h)).collect();
        let o = oracle(&z);
        let inside = result.contains_tol(&z, 0.0);
        if (o < -tol && !inside) || (o > tol && inside) {
            bad += 1;
        }
    }
    bad
}

/// Misclassification counts per operation over random 1–3-D instances.
pub fn geometry_oracle_report<R: Rng>(rng: &mut R, instances: usize, probes: usize, tol: f64) -> Vec<(&'static str, usize, usize)> {
    let mut sum_bad = 0;
    let mut diff_bad = 0;
    let mut proj_bad = 0;
    let mut img_bad = 0;
    let mut pre_bad = 0;
    let mut count = 0;
    for d in 1..=3 {
        for _ in 0..instances {
            count += 1;
            let zero = vec![0.0; d];
            let (p, pv) = random_polytope(rng, d, 1.0, &zero);
            let c: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
            let (q, qv) = random_polytope(rng, d, 0.6, &c);

            let r = p.minkowski_sum(&q).unwrap();
            let pts: Vec<Vec<f64>> = pv.iter().flat_map(|a| qv.iter().map(move |b| a.iter().zip(b).map(|(x, y)| x + y).collect())).collect();
            let facets = hull_facets(&pts);
            let (lo, hi) = bbox(&pts, 0.25);
            sum_bad += misclassified(rng, &|z| facet_value(&facets, z), &r, &lo, &hi, probes, tol);

            let (big, bv) = random_polytope(rng, d, 2.0, &zero);
            let (small, sv) = random_polytope(rng, d, 0.4, &zero);
            let r = big.pontryagin_diff(&small).unwrap();
            let oracle = |z: &[f64]| {
                sv.iter().map(|v| poly_value(&big, &z.iter().zip(v).map(|(a, b)| a + b).collect::<Vec<_>>())).fold(f64::NEG_INFINITY, f64::max)
            };
            let (lo, hi) = bbox(&bv, 0.1);
            diff_bad += misclassified(rng, &oracle, &r, &lo, &hi, probes, tol);

            let m = loop {
                let m: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.5..1.5));
                if m.determinant().abs() > 0.2 {
                    break m;
                }
            };
            let r = p.linear_preimage(&m).unwrap();
            let (lo, hi) = (vec![-4.0; d], vec![4.0; d]);
            let mm = m.clone();
            pre_bad += misclassified(rng, &|x| poly_value(&p, (&mm * DVector::from_row_slice(x)).as_slice()), &r, &lo, &hi, probes, tol);

            let r = p.linear_image(&m).unwrap();
            let pts: Vec<Vec<f64>> = pv.iter().map(|v| (&m * DVector::from_row_slice(v)).iter().copied().collect()).collect();
            let facets = hull_facets(&pts);
            let (lo, hi) = bbox(&pts, 0.25);
            img_bad += misclassified(rng, &|z| facet_value(&facets, z), &r, &lo, &hi, probes, tol);
            if d >= 2 {
                let m = DMatrix::from_fn(d - 1, d, |_, _| rng.random_range(-1.5..1.5));
                let r = p.linear_image(&m).unwrap();
                let pts: Vec<Vec<f64>> = pv.iter().map(|v| (&m * DVector::from_row_slice(v)).iter().copied().collect()).collect();
                let facets = hull_facets(&pts);
                let (lo, hi) = bbox(&pts, 0.25);
                img_bad += misclassified(rng, &|z| facet_value(&facets, z), &r, &lo, &hi, probes, tol);

                let drop: Vec<usize> = if d == 3 && rng.random::<bool>() { vec![0, 2] } else { vec![rng.random_range(0..d)] };
                let r = p.eliminate(&drop).unwrap();
                let pts: Vec<Vec<f64>> =
                    pv.iter().map(|v| v.iter().enumerate().filter(|(j, _)| !drop.contains(j)).map(|(_, x)| *x).collect()).collect();
                let facets = hull_facets(&pts);
                let (lo, hi) = bbox(&pts, 0.25);
                proj_bad += misclassified(rng, &|z| facet_value(&facets, z), &r, &lo, &hi, probes, tol);
            }
        }
    }
    vec![
        ("minkowski_sum", count, sum_bad),
        ("pontryagin_diff", count, diff_bad),
        ("projection", count - instances, proj_bad),
        ("linear_image", count + 2 * instances, img_bad),
        ("linear_preimage", count, pre_bad),
    ]
}
