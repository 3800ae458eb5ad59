//! Convex polytopes in H-representation, `{x | A x <= b}`.
//!
//! Every set in the framework (state, input and perturbation constraints,
//! invariant sets, tightened constraints) is a [`Polytope`]. Operations are
//! pure and return new values. Emptiness is a value, not an error: empty
//! results are normalised to a fixed contradictory pair of rows.
//!
//! Projection is Fourier–Motzkin with LP-certified redundancy removal after
//! every eliminated coordinate. Minkowski sums and images under singular maps
//! go through a lifted polytope and projection; two exact shortcuts avoid the
//! quadratic row growth where it is safe: bounded sums in at most two
//! dimensions use support functions over the union of both normal sets, and
//! images under invertible square maps use `A M⁻¹`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lp::{self, LpResult, LpStatus, EPS_FEAS};

/// Tolerance for set comparisons (containment and equality).
pub const EPS_SET: f64 = 1e-6;

const EPS_ZERO: f64 = 1e-12;
const EPS_REDUNDANT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    dim: usize,
    /// Row-major constraint normals, `rows × dim`.
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Polytope {
    pub fn new(dim: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Contract("polytope dimension must be positive".into()));
        }
        if a.len() != dim * b.len() {
            return Err(Error::dims(dim * b.len(), a.len()));
        }
        if a.iter().chain(&b).any(|v| v.is_nan()) {
            return Err(Error::Contract("polytope data contains NaN".into()));
        }
        Ok(Polytope { dim, a, b })
    }

    pub fn from_rows(dim: usize, rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut a = Vec::with_capacity(rows.len() * dim);
        let mut b = Vec::with_capacity(rows.len());
        for (r, bi) in rows {
            if r.len() != dim {
                return Err(Error::dims(dim, r.len()));
            }
            a.extend_from_slice(r);
            b.push(*bi);
        }
        Polytope::new(dim, a, b)
    }

    /// The whole space `R^dim`.
    pub fn full(dim: usize) -> Self {
        Polytope { dim, a: Vec::new(), b: Vec::new() }
    }

    /// Canonical empty set.
    pub fn empty(dim: usize) -> Self {
        let mut a = vec![0.0; 2 * dim];
        a[0] = 1.0;
        a[dim] = -1.0;
        Polytope { dim, a, b: vec![-1.0, -1.0] }
    }

    /// Axis-aligned box `lo <= x <= hi`; `lo[i] == hi[i]` pins a coordinate.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dims(lo.len(), hi.len()));
        }
        let dim = lo.len();
        let mut rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            rows.push((e.clone(), hi[i]));
            e[i] = -1.0;
            rows.push((e, -lo[i]));
        }
        Polytope::from_rows(dim, &rows)
    }

    /// The single point `p`.
    pub fn point(p: &[f64]) -> Self {
        Polytope::from_box(p, p).expect("matching lengths")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.b[i]
    }

    pub fn normals(&self) -> &[f64] {
        &self.a
    }

    /// Rows as `(normal, offset)` pairs.
    pub fn rows(&self) -> Vec<(Vec<f64>, f64)> {
        (0..self.num_rows()).map(|i| (self.row(i).to_vec(), self.b[i])).collect()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::dims(self.dim, other));
        }
        Ok(())
    }

    /// Largest constraint violation `max_i (a_i·x − b_i)`; `-inf` for the full space.
    pub fn violation(&self, x: &[f64]) -> f64 {
        (0..self.num_rows())
            .map(|i| dot(self.row(i), x) - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise membership with tolerance [`EPS_FEAS`].
    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_tol(x, EPS_FEAS)
    }

    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.num_rows()).all(|i| dot(self.row(i), x) <= self.b[i] + tol)
    }

    /// Minimise `objective · x` over the polytope.
    pub fn lp_solve(&self, objective: &[f64]) -> Result<LpResult> {
        self.check_dim(objective.len())?;
        Ok(lp::solve(objective, &self.a, &self.b))
    }

    /// Support function `max_{x∈P} dir·x`: `+inf` when unbounded, `-inf` when empty.
    pub fn support(&self, dir: &[f64]) -> f64 {
        self.support_point(dir).0
    }

    /// Support value together with a maximiser, when one exists.
    pub fn support_point(&self, dir: &[f64]) -> (f64, Option<Vec<f64>>) {
        assert_eq!(dir.len(), self.dim, "support direction dimension");
        if dir.iter().all(|v| *v == 0.0) {
            return match self.feasible_point() {
                Some(p) => (0.0, Some(p)),
                None => (f64::NEG_INFINITY, None),
            };
        }
        if self.dim == 2 && self.num_rows() >= 8 {
            let rows: Vec<(Vec<f64>, f64)> = (0..self.num_rows())
                .map(|i| {
                    let r = self.row(i);
                    let norm = dot(r, r).sqrt().max(EPS_ZERO);
                    (r.iter().map(|v| v / norm).collect(), self.b[i] / norm)
                })
                .collect();
            if let Some((_, verts)) = polygon_2d(&rows) {
                let best = verts
                    .iter()
                    .max_by(|p, q| (p[0] * dir[0] + p[1] * dir[1]).total_cmp(&(q[0] * dir[0] + q[1] * dir[1])))
                    .expect("a polygon has vertices");
                return (best[0] * dir[0] + best[1] * dir[1], Some(best.to_vec()));
            }
        }
        let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
        let r = lp::solve(&neg, &self.a, &self.b);
        match r.status {
            LpStatus::Optimal => (-r.value.unwrap(), r.point),
            LpStatus::Unbounded => (f64::INFINITY, None),
            LpStatus::Infeasible => (f64::NEG_INFINITY, None),
        }
    }

    pub fn feasible_point(&self) -> Option<Vec<f64>> {
        if self.b.is_empty() {
            return Some(vec![0.0; self.dim]);
        }
        let zero = vec![0.0; self.dim];
        let r = lp::solve(&zero, &self.a, &self.b);
        r.point
    }

    /// Phase-one emptiness test.
    pub fn is_empty(&self) -> bool {
        self.feasible_point().is_none()
    }

    /// `P ⊆ Q`, via one support LP per row of `Q`.
    pub fn is_subset(&self, q: &Polytope) -> Result<bool> {
        self.check_dim(q.dim)?;
        if self.is_empty() {
            return Ok(true);
        }
        for j in 0..q.num_rows() {
            let s = self.support(q.row(j));
            if s > q.b[j] + EPS_FEAS {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Mutual containment within [`EPS_SET`].
    pub fn set_eq(&self, q: &Polytope) -> Result<bool> {
        self.check_dim(q.dim)?;
        Ok(self.is_subset_tol(q, EPS_SET)? && q.is_subset_tol(self, EPS_SET)?)
    }

    pub fn is_subset_tol(&self, q: &Polytope, tol: f64) -> Result<bool> {
        self.check_dim(q.dim)?;
        if self.is_empty() {
            return Ok(true);
        }
        for j in 0..q.num_rows() {
            if self.support(q.row(j)) > q.b[j] + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn is_bounded(&self) -> bool {
        (0..self.dim).all(|i| {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            let hi = self.support(&e);
            e[i] = -1.0;
            let lo = self.support(&e);
            hi < f64::INFINITY && lo < f64::INFINITY
        })
    }

    /// Per-axis extent from support LPs; `None` when empty or unbounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        for i in 0..self.dim {
            let mut e = vec![0.0; self.dim];
            e[i] = 1.0;
            let h = self.support(&e);
            e[i] = -1.0;
            let l = -self.support(&e);
            if !h.is_finite() || !l.is_finite() {
                return None;
            }
            lo[i] = l;
            hi[i] = h;
        }
        Some((lo, hi))
    }

    pub fn intersect(&self, q: &Polytope) -> Result<Polytope> {
        self.check_dim(q.dim)?;
        let mut a = self.a.clone();
        a.extend_from_slice(&q.a);
        let mut b = self.b.clone();
        b.extend_from_slice(&q.b);
        Ok(Polytope { dim: self.dim, a, b })
    }

    /// `P + v`.
    pub fn translate(&self, v: &[f64]) -> Polytope {
        assert_eq!(v.len(), self.dim, "translation dimension");
        let b = (0..self.num_rows()).map(|i| self.b[i] + dot(self.row(i), v)).collect();
        Polytope { dim: self.dim, a: self.a.clone(), b }
    }

    /// `α·P` about the origin for `α >= 0`.
    pub fn scale(&self, alpha: f64) -> Polytope {
        assert!(alpha >= 0.0, "scale factor must be nonnegative");
        if alpha == 0.0 {
            return if self.is_empty() { Polytope::empty(self.dim) } else { Polytope::point(&vec![0.0; self.dim]) };
        }
        Polytope { dim: self.dim, a: self.a.clone(), b: self.b.iter().map(|v| v * alpha).collect() }
    }

    /// Drop rows that do not change the set. Each removed row is certified by
    /// an LP over the remaining rows with that row relaxed by one unit.
    pub fn remove_redundancy(&self) -> Polytope {
        let dim = self.dim;
        // normalise, drop trivial rows, merge parallel duplicates
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(self.num_rows());
        for i in 0..self.num_rows() {
            let r = self.row(i);
            let norm = dot(r, r).sqrt();
            if norm < EPS_ZERO {
                if self.b[i] < -EPS_FEAS {
                    return Polytope::empty(dim);
                }
                continue;
            }
            let n: Vec<f64> = r.iter().map(|v| v / norm).collect();
            let off = self.b[i] / norm;
            match rows.iter_mut().find(|(m, _)| m.iter().zip(&n).all(|(x, y)| (x - y).abs() < 1e-12)) {
                Some(existing) => existing.1 = existing.1.min(off),
                None => rows.push((n, off)),
            }
        }
        if rows.is_empty() {
            return Polytope::full(dim);
        }
        if dim == 2 {
            if let Some((kept, _)) = polygon_2d(&rows) {
                let kept: Vec<(Vec<f64>, f64)> = kept.into_iter().map(|i| rows[i].clone()).collect();
                return Polytope::from_rows(dim, &kept).expect("consistent rows");
            }
        }
        let base = Polytope::from_rows(dim, &rows).expect("consistent rows");
        let Some(x0) = base.interior_point() else {
            return Polytope::empty(dim);
        };
        // work in coordinates centred at a feasible point so every offset is >= 0
        let mut a: Vec<f64> = Vec::with_capacity(rows.len() * dim);
        let mut b: Vec<f64> = Vec::with_capacity(rows.len());
        for (n, off) in &rows {
            a.extend_from_slice(n);
            b.push((off - dot(n, &x0)).max(0.0));
        }
        let mut keep = vec![true; rows.len()];
        for i in 0..rows.len() {
            let mut sub_a = Vec::with_capacity(a.len());
            let mut sub_b = Vec::with_capacity(b.len());
            for k in 0..rows.len() {
                if k != i && !keep[k] {
                    continue;
                }
                sub_a.extend_from_slice(&a[k * dim..(k + 1) * dim]);
                sub_b.push(if k == i { b[k] + 1.0 } else { b[k] });
            }
            let obj: Vec<f64> = a[i * dim..(i + 1) * dim].iter().map(|v| -v).collect();
            let r = lp::solve(&obj, &sub_a, &sub_b);
            if r.status == LpStatus::Optimal {
                let max = -r.value.unwrap();
                if max <= b[i] + EPS_REDUNDANT * (1.0 + b[i].abs()) {
                    keep[i] = false;
                }
            }
        }
        let kept: Vec<(Vec<f64>, f64)> = rows.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect();
        Polytope::from_rows(dim, &kept).expect("consistent rows")
    }

    /// A point of the set that is as deep as possible (Chebyshev centre with
    /// the radius capped at one); `None` when empty.
    pub fn interior_point(&self) -> Option<Vec<f64>> {
        if self.b.is_empty() {
            return Some(vec![0.0; self.dim]);
        }
        let dim = self.dim;
        let m = self.num_rows();
        let mut a = Vec::with_capacity((m + 1) * (dim + 1));
        let mut b = Vec::with_capacity(m + 1);
        for i in 0..m {
            let r = self.row(i);
            a.extend_from_slice(r);
            a.push(dot(r, r).sqrt());
            b.push(self.b[i]);
        }
        a.extend(std::iter::repeat_n(0.0, dim));
        a.push(1.0);
        b.push(1.0);
        let mut c = vec![0.0; dim + 1];
        c[dim] = -1.0;
        let r = lp::solve(&c, &a, &b);
        match r.status {
            LpStatus::Optimal => {
                let p = r.point.unwrap();
                if p[dim] < -EPS_FEAS {
                    None
                } else {
                    Some(p[..dim].to_vec())
                }
            }
            // unbounded cannot occur with the radius cap; infeasible means empty
            _ => None,
        }
    }

    /// Fourier–Motzkin projection eliminating the coordinates in `vars`.
    /// The result lives in the remaining coordinates, in their original order.
    pub fn eliminate(&self, vars: &[usize]) -> Result<Polytope> {
        for &v in vars {
            if v >= self.dim {
                return Err(Error::Contract(format!("eliminated index {v} out of range for dimension {}", self.dim)));
            }
        }
        let mut remaining: Vec<usize> = (0..self.dim).collect();
        let mut todo: Vec<usize> = vars.to_vec();
        todo.sort_unstable();
        todo.dedup();
        if todo.len() == self.dim {
            return Err(Error::Contract("cannot eliminate every coordinate".into()));
        }
        let mut p = self.remove_redundancy();
        if p.is_empty() {
            let dim = self.dim - todo.len();
            return Ok(Polytope::empty(dim));
        }
        while !todo.is_empty() {
            // cheapest variable first: fewest generated rows
            let (pick, _) = todo
                .iter()
                .enumerate()
                .map(|(ti, &v)| {
                    let col = remaining.iter().position(|&r| r == v).unwrap();
                    let pos = (0..p.num_rows()).filter(|&i| p.row(i)[col] > EPS_ZERO).count();
                    let neg = (0..p.num_rows()).filter(|&i| p.row(i)[col] < -EPS_ZERO).count();
                    (ti, pos * neg)
                })
                .min_by_key(|&(ti, cost)| (cost, ti))
                .unwrap();
            let v = todo.remove(pick);
            let col = remaining.iter().position(|&r| r == v).unwrap();
            p = p.eliminate_column(col).remove_redundancy();
            remaining.remove(col);
        }
        Ok(p)
    }

    fn eliminate_column(&self, col: usize) -> Polytope {
        let dim = self.dim;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        let drop = |r: &[f64]| -> Vec<f64> { r.iter().enumerate().filter(|(j, _)| *j != col).map(|(_, v)| *v).collect() };
        for i in 0..self.num_rows() {
            let c = self.row(i)[col];
            if c > EPS_ZERO {
                pos.push(i);
            } else if c < -EPS_ZERO {
                neg.push(i);
            } else {
                rows.push((drop(self.row(i)), self.b[i]));
            }
        }
        for &p in &pos {
            let rp = self.row(p);
            let cp = rp[col];
            for &n in &neg {
                let rn = self.row(n);
                let cn = -rn[col];
                let combined: Vec<f64> = (0..dim).filter(|&j| j != col).map(|j| rp[j] / cp + rn[j] / cn).collect();
                rows.push((combined, self.b[p] / cp + self.b[n] / cn));
            }
        }
        Polytope::from_rows(dim - 1, &rows).expect("consistent rows")
    }

    /// Minkowski sum `P ⊕ Q`.
    pub fn minkowski_sum(&self, q: &Polytope) -> Result<Polytope> {
        self.check_dim(q.dim)?;
        if self.is_empty() || q.is_empty() {
            return Ok(Polytope::empty(self.dim));
        }
        if self.dim <= 2 && self.is_bounded() && q.is_bounded() {
            return Ok(self.minkowski_sum_support(q));
        }
        Ok(self.minkowski_sum_lifted(q))
    }

    /// Sum via the lifted set `{(z, x) | x ∈ P, z − x ∈ Q}` and projection onto `z`.
    pub fn minkowski_sum_lifted(&self, q: &Polytope) -> Polytope {
        let d = self.dim;
        let mut rows = Vec::with_capacity(self.num_rows() + q.num_rows());
        for i in 0..self.num_rows() {
            let mut r = vec![0.0; 2 * d];
            r[d..].copy_from_slice(self.row(i));
            rows.push((r, self.b[i]));
        }
        for i in 0..q.num_rows() {
            let mut r = vec![0.0; 2 * d];
            for j in 0..d {
                r[j] = q.row(i)[j];
                r[d + j] = -q.row(i)[j];
            }
            rows.push((r, q.b[i]));
        }
        let lifted = Polytope::from_rows(2 * d, &rows).expect("consistent rows");
        let xs: Vec<usize> = (d..2 * d).collect();
        lifted.eliminate(&xs).expect("valid indices")
    }

    /// In at most two dimensions every facet normal of a bounded sum is a
    /// facet normal of one of the summands, so supports over the union of the
    /// normals describe the sum exactly.
    fn minkowski_sum_support(&self, q: &Polytope) -> Polytope {
        let p = self.remove_redundancy();
        let qq = q.remove_redundancy();
        let support = |set: &Polytope, verts: &Option<Vec<[f64; 2]>>, n: &[f64]| match verts {
            Some(vs) => vs.iter().map(|v| v[0] * n[0] + v[1] * n[1]).fold(f64::NEG_INFINITY, f64::max),
            None => set.support(n),
        };
        let pv = if self.dim == 2 { polygon_2d(&p.rows()).map(|(_, v)| v) } else { None };
        let qv = if self.dim == 2 { polygon_2d(&qq.rows()).map(|(_, v)| v) } else { None };
        let mut rows = Vec::with_capacity(p.num_rows() + qq.num_rows());
        for src in [&p, &qq] {
            for i in 0..src.num_rows() {
                let n = src.row(i).to_vec();
                let h = support(&p, &pv, &n) + support(&qq, &qv, &n);
                rows.push((n, h));
            }
        }
        Polytope::from_rows(self.dim, &rows).expect("consistent rows").remove_redundancy()
    }

    /// Erosion `P ⊖ Q = {x | x ⊕ Q ⊆ P}`; each row is tightened by the support of `Q`.
    pub fn pontryagin_diff(&self, q: &Polytope) -> Result<Polytope> {
        self.check_dim(q.dim)?;
        if q.is_empty() {
            return Ok(Polytope::full(self.dim));
        }
        let mut b = Vec::with_capacity(self.num_rows());
        for i in 0..self.num_rows() {
            let s = q.support(self.row(i));
            if s == f64::INFINITY {
                return Ok(Polytope::empty(self.dim));
            }
            b.push(self.b[i] - s);
        }
        Ok(Polytope { dim: self.dim, a: self.a.clone(), b }.remove_redundancy())
    }

    /// Preimage `{x | M x ∈ P}` for `M` with `P.dim` rows.
    pub fn linear_preimage(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        if m.nrows() != self.dim {
            return Err(Error::dims(self.dim, m.nrows()));
        }
        let n = m.ncols();
        let mut a = Vec::with_capacity(self.num_rows() * n);
        for i in 0..self.num_rows() {
            let r = self.row(i);
            for j in 0..n {
                a.push((0..self.dim).map(|k| r[k] * m[(k, j)]).sum());
            }
        }
        Ok(Polytope { dim: n, a, b: self.b.clone() }.remove_redundancy())
    }

    /// Image `{M x | x ∈ P}` for `M` with `P.dim` columns.
    pub fn linear_image(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        if m.ncols() != self.dim {
            return Err(Error::dims(self.dim, m.ncols()));
        }
        let out = m.nrows();
        if self.is_empty() {
            return Ok(Polytope::empty(out));
        }
        if out == self.dim {
            if let Some(inv) = well_conditioned_inverse(m) {
                return self.linear_preimage(&inv);
            }
        }
        Ok(self.linear_image_lifted(m))
    }

    /// Image through `{(y, x) | y = M x, x ∈ P}` with the equality as paired rows.
    pub fn linear_image_lifted(&self, m: &DMatrix<f64>) -> Polytope {
        let n = self.dim;
        let out = m.nrows();
        let width = out + n;
        let mut rows = Vec::with_capacity(2 * out + self.num_rows());
        for i in 0..out {
            let mut r = vec![0.0; width];
            r[i] = 1.0;
            for j in 0..n {
                r[out + j] = -m[(i, j)];
            }
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            rows.push((r, 0.0));
            rows.push((neg, 0.0));
        }
        for i in 0..self.num_rows() {
            let mut r = vec![0.0; width];
            r[out..].copy_from_slice(self.row(i));
            rows.push((r, self.b[i]));
        }
        let lifted = Polytope::from_rows(width, &rows).expect("consistent rows");
        let xs: Vec<usize> = (out..width).collect();
        lifted.eliminate(&xs).expect("valid indices")
    }

    /// Ordered vertices of a bounded two-dimensional polytope
    /// (counter-clockwise). Degenerate sets yield one or two points.
    pub fn vertices_2d(&self) -> Result<Vec<[f64; 2]>> {
        if self.dim != 2 {
            return Err(Error::dims(2, self.dim));
        }
        let p = self.remove_redundancy();
        if p.is_empty() {
            return Ok(Vec::new());
        }
        if !p.is_bounded() {
            return Err(Error::Contract("vertex enumeration needs a bounded polytope".into()));
        }
        let scale = p.b.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..p.num_rows() {
            for j in (i + 1)..p.num_rows() {
                let (r1, r2) = (p.row(i), p.row(j));
                let det = r1[0] * r2[1] - r1[1] * r2[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (p.b[i] * r2[1] - r1[1] * p.b[j]) / det;
                let y = (r1[0] * p.b[j] - p.b[i] * r2[0]) / det;
                if p.contains_tol(&[x, y], 1e-9 * scale) && !pts.iter().any(|q| (q[0] - x).abs() + (q[1] - y).abs() < 1e-9 * scale) {
                    pts.push([x, y]);
                }
            }
        }
        if pts.is_empty() {
            // a single point described only by parallel pairs cannot happen in 2-D
            if let Some(fp) = p.feasible_point() {
                pts.push([fp[0], fp[1]]);
            }
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| {
            let ap = (p[1] - cy).atan2(p[0] - cx);
            let aq = (q[1] - cy).atan2(q[0] - cx);
            ap.partial_cmp(&aq).unwrap()
        });
        Ok(pts)
    }

    /// Uniform samples by rejection from the bounding box. Pinned coordinates
    /// (zero-width extent) are sampled exactly. Returns fewer than `count`
    /// points only when the acceptance rate is vanishing.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<Vec<f64>> {
        let Some((lo, hi)) = self.bounding_box() else {
            return Vec::new();
        };
        let mut out = Vec::with_capacity(count);
        let max_tries = 1000 * count.max(1) + 10_000;
        let mut tries = 0;
        while out.len() < count && tries < max_tries {
            tries += 1;
            let x: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(&l, &h)| if h - l <= EPS_ZERO { 0.5 * (l + h) } else { rng.random_range(l..=h) })
                .collect();
            if self.contains_tol(&x, EPS_ZERO) {
                out.push(x);
            }
        }
        out
    }

    /// Text form: header line, then one row per constraint as
    /// `a_1 … a_dim b`, all with 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "polytope {} {}", self.dim, self.num_rows()).unwrap();
        for i in 0..self.num_rows() {
            let mut line: Vec<String> = self.row(i).iter().map(|v| fmt_f64(*v)).collect();
            line.push(fmt_f64(self.b[i]));
            writeln!(s, "{}", line.join(" ")).unwrap();
        }
        s
    }

    /// Parse the output of [`Polytope::to_text`] from a line iterator.
    pub fn read_text<'a, I: Iterator<Item = &'a str>>(lines: &mut I) -> Result<Polytope> {
        let header = lines.next().ok_or_else(|| Error::Parse("missing polytope header".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("polytope") {
            return Err(Error::Parse(format!("expected polytope header, found {header:?}")));
        }
        let dim: usize = parse_tok(parts.next(), "dimension")?;
        let rows: usize = parse_tok(parts.next(), "row count")?;
        let mut a = Vec::with_capacity(rows * dim);
        let mut b = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| Error::Parse("truncated polytope".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != dim + 1 {
                return Err(Error::Parse(format!("row has {} values, expected {}", vals.len(), dim + 1)));
            }
            a.extend_from_slice(&vals[..dim]);
            b.push(vals[dim]);
        }
        Polytope::new(dim, a, b)
    }

    pub fn from_text(s: &str) -> Result<Polytope> {
        Polytope::read_text(&mut s.lines().filter(|l| !l.trim().is_empty()))
    }
}

/// Half-plane intersection for unit-normal rows in the plane. Succeeds only
/// for bounded polygons with nonempty interior, returning the boundary rows
/// in angular order and the vertices between consecutive ones; every input
/// row is checked against those vertices before the result is trusted.
fn polygon_2d(rows: &[(Vec<f64>, f64)]) -> Option<(Vec<usize>, Vec<[f64; 2]>)> {
    use std::collections::VecDeque;
    use std::f64::consts::PI;
    if rows.len() < 3 {
        return None;
    }
    let scale = rows.iter().fold(1.0f64, |acc, r| acc.max(r.1.abs()));
    let tol = 1e-12 * scale;
    let ang = |i: usize| rows[i].0[1].atan2(rows[i].0[0]);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&i, &j| ang(i).total_cmp(&ang(j)).then(rows[i].1.total_cmp(&rows[j].1)));
    let mut lines: Vec<usize> = Vec::with_capacity(order.len());
    for &i in &order {
        if let Some(&last) = lines.last() {
            if (ang(i) - ang(last)).abs() < 1e-12 {
                continue;
            }
        }
        lines.push(i);
    }
    let k = lines.len();
    if k < 3 {
        return None;
    }
    for t in 0..k {
        let a1 = ang(lines[t]);
        let a2 = if t + 1 < k { ang(lines[t + 1]) } else { ang(lines[0]) + 2.0 * PI };
        if a2 - a1 >= PI - 1e-12 {
            return None;
        }
    }
    let meet = |i: usize, j: usize| -> Option<[f64; 2]> {
        let (r1, b1) = (&rows[i].0, rows[i].1);
        let (r2, b2) = (&rows[j].0, rows[j].1);
        let det = r1[0] * r2[1] - r1[1] * r2[0];
        if det.abs() < 1e-14 {
            return None;
        }
        Some([(b1 * r2[1] - r1[1] * b2) / det, (r1[0] * b2 - b1 * r2[0]) / det])
    };
    let outside = |i: usize, p: [f64; 2]| rows[i].0[0] * p[0] + rows[i].0[1] * p[1] > rows[i].1 - tol;
    let mut dq: VecDeque<usize> = VecDeque::with_capacity(k);
    for &l in &lines {
        while dq.len() >= 2 {
            let p = meet(dq[dq.len() - 2], dq[dq.len() - 1])?;
            if outside(l, p) {
                dq.pop_back();
            } else {
                break;
            }
        }
        while dq.len() >= 2 {
            let p = meet(dq[0], dq[1])?;
            if outside(l, p) {
                dq.pop_front();
            } else {
                break;
            }
        }
        dq.push_back(l);
    }
    while dq.len() >= 3 {
        let p = meet(dq[dq.len() - 2], dq[dq.len() - 1])?;
        if outside(dq[0], p) {
            dq.pop_back();
        } else {
            break;
        }
    }
    while dq.len() >= 3 {
        let p = meet(dq[0], dq[1])?;
        if outside(dq[dq.len() - 1], p) {
            dq.pop_front();
        } else {
            break;
        }
    }
    let kept: Vec<usize> = dq.into_iter().collect();
    let m = kept.len();
    if m < 3 {
        return None;
    }
    let mut verts = Vec::with_capacity(m);
    for t in 0..m {
        verts.push(meet(kept[t], kept[(t + 1) % m])?);
    }
    let mut area = 0.0;
    for t in 0..m {
        let (p, q) = (verts[t], verts[(t + 1) % m]);
        area += p[0] * q[1] - p[1] * q[0];
    }
    if area <= 1e-12 * scale * scale {
        return None;
    }
    let check = 1e-9 * scale;
    for (n, b) in rows {
        if verts.iter().any(|v| n[0] * v[0] + n[1] * v[1] > b + check) {
            return None;
        }
    }
    Some((kept, verts))
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::Parse(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Parse(format!("invalid {what}")))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn well_conditioned_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < 1e-10 {
        return None;
    }
    m.clone().try_inverse()
}
