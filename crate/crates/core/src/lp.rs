//! Dense two-phase simplex for small linear programs.
//!
//! Solves `min c·x  s.t.  A x <= b` with every `x_j` free. Equalities are
//! expected as paired inequalities. The pivot rule is Dantzig's largest
//! reduced cost with lowest-index tie-breaking, switching to Bland's rule
//! after a run of degenerate pivots, so a given input always follows the same
//! pivot sequence.

/// Outcome of a linear program.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Minimizer, present iff `status == Optimal`.
    pub point: Option<Vec<f64>>,
    /// Optimal value, present iff `status == Optimal`.
    pub value: Option<f64>,
}

impl LpResult {
    fn infeasible() -> Self {
        LpResult { status: LpStatus::Infeasible, point: None, value: None }
    }

    fn unbounded() -> Self {
        LpResult { status: LpStatus::Unbounded, point: None, value: None }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Feasibility tolerance used when classifying phase-one optima and
/// constraint satisfaction.
pub const EPS_FEAS: f64 = 1e-7;

const EPS_PIVOT: f64 = 1e-9;
const EPS_COST: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;

/// Inequality-form LP over free variables: `min c·x  s.t.  A x <= b`.
///
/// `a` is row-major with `b.len()` rows and `c.len()` columns.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearProgram {
    pub fn new(c: Vec<f64>, a: Vec<f64>, b: Vec<f64>) -> Self {
        assert_eq!(a.len(), c.len() * b.len(), "constraint matrix shape mismatch");
        LinearProgram { c, a, b }
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn solve(&self) -> LpResult {
        Tableau::build(&self.c, &self.a, &self.b).run()
    }
}

/// Solve `min c·x s.t. A x <= b` with free `x`; `a` row-major.
pub fn solve(c: &[f64], a: &[f64], b: &[f64]) -> LpResult {
    assert_eq!(a.len(), c.len() * b.len(), "constraint matrix shape mismatch");
    let mut tab = Tableau::build(c, a, b);
    tab.run()
}

/// Optimal tableau of a solved LP, reused to re-solve the same LP with a new
/// right-hand side by dual simplex. The result depends only on the snapshot
/// and the new right-hand side, never on earlier re-solves.
#[derive(Clone)]
pub struct WarmStart {
    tab: Tableau,
    c: Vec<f64>,
    a: Vec<f64>,
}

/// Solve and, when the optimum has a clean basis, keep it for [`WarmStart::resolve`].
pub fn solve_warm(c: &[f64], a: &[f64], b: &[f64]) -> (LpResult, Option<WarmStart>) {
    let mut tab = Tableau::build(c, a, b);
    let res = tab.run();
    let clean = res.is_optimal()
        && tab.live.iter().all(|&l| l)
        && tab.basis.iter().all(|&bv| tab.kind[bv] != Kind::Artificial);
    let warm = clean.then(|| WarmStart { tab, c: c.to_vec(), a: a.to_vec() });
    (res, warm)
}

impl WarmStart {
    pub fn num_rows(&self) -> usize {
        self.tab.m
    }

    /// Solve `min cᵀx s.t. Ax ≤ b` for a new `b`, starting from the stored basis.
    pub fn resolve(&self, b: &[f64]) -> LpResult {
        assert_eq!(b.len(), self.tab.m, "right-hand side length");
        let mut tab = self.tab.clone();
        tab.rhs_scale = b.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()));
        // B⁻¹ sits in the slack columns, whatever row flips were made at build.
        let (n, m, w, cols) = (tab.n, tab.m, tab.width, tab.cols);
        for r in 0..=m {
            let row = &tab.t[r * w..(r + 1) * w];
            let v: f64 = (0..m).map(|i| row[n + i] * b[i]).sum();
            tab.t[r * w + cols] = v;
        }
        match tab.dual_iterate() {
            Some(true) => {}
            Some(false) => return LpResult::infeasible(),
            None => return solve(&self.c, &self.a, b),
        }
        match tab.iterate() {
            Step::Optimal => tab.extract(),
            Step::Unbounded => LpResult::unbounded(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Free,
    Slack,
    Artificial,
}

#[derive(Clone)]
struct Tableau {
    n: usize,
    m: usize,
    /// Total columns excluding the right-hand side.
    cols: usize,
    width: usize,
    /// `m` constraint rows followed by the objective row; rhs in the last column.
    t: Vec<f64>,
    basis: Vec<usize>,
    kind: Vec<Kind>,
    /// `-1` when a free column has been negated.
    sign: Vec<f64>,
    live: Vec<bool>,
    enterable: Vec<bool>,
    cost: Vec<f64>,
    rhs_scale: f64,
}

impl Tableau {
    fn build(c: &[f64], a: &[f64], b: &[f64]) -> Self {
        let n = c.len();
        let m = b.len();
        let num_art = b.iter().filter(|&&bi| bi < 0.0).count();
        let cols = n + m + num_art;
        let width = cols + 1;
        let mut t = vec![0.0; (m + 1) * width];
        let mut basis = vec![0; m];
        let mut kind = vec![Kind::Free; cols];
        for k in kind.iter_mut().take(n + m).skip(n) {
            *k = Kind::Slack;
        }
        for k in kind.iter_mut().skip(n + m) {
            *k = Kind::Artificial;
        }
        let mut art = n + m;
        for i in 0..m {
            let row = &mut t[i * width..(i + 1) * width];
            let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                row[j] = flip * a[i * n + j];
            }
            row[n + i] = flip;
            row[cols] = flip * b[i];
            if b[i] < 0.0 {
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = n + i;
            }
        }
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(c);
        Tableau {
            n,
            m,
            cols,
            width,
            t,
            basis,
            kind,
            sign: vec![1.0; n],
            live: vec![true; m],
            enterable: vec![true; cols],
            cost,
            rhs_scale: b.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn obj_row(&self) -> usize {
        self.m
    }

    fn run(&mut self) -> LpResult {
        let has_art = self.kind.contains(&Kind::Artificial);
        if has_art {
            // Phase one: minimise the sum of artificials.
            let width = self.width;
            let o = self.obj_row() * width;
            for v in &mut self.t[o..o + width] {
                *v = 0.0;
            }
            for j in 0..self.cols {
                if self.kind[j] == Kind::Artificial {
                    self.t[o + j] = 1.0;
                }
            }
            for i in 0..self.m {
                if self.kind[self.basis[i]] == Kind::Artificial {
                    for j in 0..width {
                        self.t[o + j] -= self.t[i * width + j];
                    }
                }
            }
            if self.iterate() == Step::Unbounded {
                // cannot happen for a phase-one objective bounded below by zero
                return LpResult::infeasible();
            }
            let phase_one = -self.at(self.obj_row(), self.cols);
            let scale = 1.0 + self.rhs_scale;
            if phase_one > EPS_FEAS * scale {
                return LpResult::infeasible();
            }
            self.expel_artificials();
            for j in 0..self.cols {
                if self.kind[j] == Kind::Artificial {
                    self.enterable[j] = false;
                }
            }
        }
        self.load_cost();
        match self.iterate() {
            Step::Unbounded => LpResult::unbounded(),
            Step::Optimal => self.extract(),
        }
    }

    fn extract(&self) -> LpResult {
        let mut x = vec![0.0; self.n];
        for i in 0..self.m {
            if !self.live[i] {
                continue;
            }
            let bv = self.basis[i];
            if bv < self.n {
                x[bv] = self.at(i, self.cols);
            }
        }
        for j in 0..self.n {
            x[j] *= self.sign[j];
        }
        let value = self.cost.iter().take(self.n).zip(&x).map(|(c, xi)| c * xi).sum::<f64>();
        LpResult { status: LpStatus::Optimal, point: Some(x), value: Some(value) }
    }

    /// Dual simplex from a dual feasible basis. `Some(true)` when primal
    /// feasible, `Some(false)` when infeasible, `None` on the iteration cap.
    fn dual_iterate(&mut self) -> Option<bool> {
        let tol = 1e-9 * (1.0 + self.rhs_scale);
        let mut in_basis = vec![false; self.cols];
        for &bv in &self.basis {
            in_basis[bv] = true;
        }
        let o = self.obj_row() * self.width;
        for _ in 0..10 * (self.m + self.cols) {
            let mut leave: Option<usize> = None;
            let mut worst = -tol;
            for i in 0..self.m {
                if self.kind[self.basis[i]] == Kind::Free {
                    continue;
                }
                let v = self.at(i, self.cols);
                if v < worst {
                    worst = v;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else {
                return Some(true);
            };
            let mut enter: Option<usize> = None;
            let mut best = f64::INFINITY;
            for j in 0..self.cols {
                if !self.enterable[j] || in_basis[j] {
                    continue;
                }
                let arj = self.at(r, j);
                let mag = match self.kind[j] {
                    Kind::Free => arj.abs(),
                    _ => -arj,
                };
                if mag > EPS_PIVOT {
                    let ratio = self.t[o + j].abs() / mag;
                    if ratio < best - 1e-12 {
                        best = ratio;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                // within the phase-one tolerance the cold solver would accept it too
                return Some(worst >= -EPS_FEAS * (1.0 + self.rhs_scale));
            };
            if self.kind[j] == Kind::Free && self.at(r, j) > 0.0 {
                self.negate_column(j);
            }
            in_basis[self.basis[r]] = false;
            in_basis[j] = true;
            self.pivot(r, j);
        }
        None
    }

    fn expel_artificials(&mut self) {
        for i in 0..self.m {
            if !self.live[i] || self.kind[self.basis[i]] != Kind::Artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.cols {
                if self.kind[j] == Kind::Artificial {
                    continue;
                }
                let v = self.at(i, j).abs();
                if v > EPS_PIVOT && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, _)) => self.pivot(i, j),
                None => self.live[i] = false,
            }
        }
    }

    fn load_cost(&mut self) {
        let width = self.width;
        let o = self.obj_row() * width;
        for v in &mut self.t[o..o + width] {
            *v = 0.0;
        }
        for j in 0..self.n {
            self.t[o + j] = self.cost[j] * self.sign[j];
        }
        for i in 0..self.m {
            if !self.live[i] {
                continue;
            }
            let bv = self.basis[i];
            let cb = self.t[o + bv];
            if cb != 0.0 {
                for j in 0..width {
                    self.t[o + j] -= cb * self.t[i * width + j];
                }
            }
        }
    }

    fn negate_column(&mut self, j: usize) {
        for i in 0..=self.m {
            self.t[i * self.width + j] = -self.t[i * self.width + j];
        }
        self.sign[j] = -self.sign[j];
    }

    fn iterate(&mut self) -> Step {
        let mut degenerate = 0usize;
        let mut in_basis = vec![false; self.cols];
        for i in 0..self.m {
            if self.live[i] {
                in_basis[self.basis[i]] = true;
            }
        }
        let max_iter = 50 * (self.m + self.cols + 10);
        for _ in 0..max_iter {
            let bland = degenerate >= DEGENERATE_STREAK;
            let o = self.obj_row() * self.width;
            let mut enter: Option<usize> = None;
            let mut best = 0.0;
            for j in 0..self.cols {
                if !self.enterable[j] || in_basis[j] {
                    continue;
                }
                let r = self.t[o + j];
                let gain = match self.kind[j] {
                    Kind::Free => r.abs(),
                    _ => -r,
                };
                if gain > EPS_COST {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if gain > best {
                        best = gain;
                        enter = Some(j);
                    }
                }
            }
            let Some(j) = enter else {
                return Step::Optimal;
            };
            if self.kind[j] == Kind::Free && self.t[o + j] > 0.0 {
                self.negate_column(j);
            }
            // ratio test over rows whose basic variable is sign-constrained
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                if !self.live[i] || self.kind[self.basis[i]] == Kind::Free {
                    continue;
                }
                let aij = self.at(i, j);
                if aij > EPS_PIVOT {
                    let ratio = self.at(i, self.cols) / aij;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio.min(best_ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(i) = leave else {
                return Step::Unbounded;
            };
            if best_ratio.abs() < 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            in_basis[self.basis[i]] = false;
            in_basis[j] = true;
            self.pivot(i, j);
        }
        log::warn!("simplex iteration limit reached; returning current basis");
        Step::Optimal
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.width;
        let p = self.t[r * width + c];
        {
            let row = &mut self.t[r * width..(r + 1) * width];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[c] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * width);
        let (prow, after) = rest.split_at_mut(width);
        for row in before.chunks_exact_mut(width).chain(after.chunks_exact_mut(width)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }
}

#[derive(PartialEq, Eq)]
enum Step {
    Optimal,
    Unbounded,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_minimum() {
        // 0 <= x <= 1
        let r = solve(&[1.0], &[1.0, -1.0], &[1.0, 0.0]);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!(r.point.unwrap()[0].abs() < 1e-12);
        assert!(r.value.unwrap().abs() < 1e-12);
    }

    #[test]
    fn contradictory_rows() {
        // x <= -1 and x >= 1
        let r = solve(&[1.0], &[1.0, -1.0], &[-1.0, -1.0]);
        assert_eq!(r.status, LpStatus::Infeasible);
        assert!(r.point.is_none());
    }

    #[test]
    fn open_direction() {
        // min -x over x >= 0
        let r = solve(&[-1.0], &[-1.0], &[0.0]);
        assert_eq!(r.status, LpStatus::Unbounded);
    }

    #[test]
    fn two_dimensional_vertex() {
        // max x + y over x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
        let a = [1.0, 2.0, 3.0, 1.0, -1.0, 0.0, 0.0, -1.0];
        let b = [4.0, 6.0, 0.0, 0.0];
        let r = solve(&[-1.0, -1.0], &a, &b);
        let x = r.point.unwrap();
        assert!((x[0] - 1.6).abs() < 1e-9 && (x[1] - 1.2).abs() < 1e-9);
        assert!((r.value.unwrap() + 2.8).abs() < 1e-9);
    }

    #[test]
    fn equality_pairs_and_negative_rhs() {
        // x + y = 3, x >= 2 (as -x <= -2), min y
        let a = [1.0, 1.0, -1.0, -1.0, -1.0, 0.0];
        let b = [3.0, -3.0, -2.0];
        let r = solve(&[0.0, 1.0], &a, &b);
        assert_eq!(r.status, LpStatus::Unbounded);
        let r = solve(&[1.0, 0.0], &a, &b);
        let x = r.point.unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_goes_negative() {
        // min x over x >= -5
        let r = solve(&[1.0], &[-1.0], &[5.0]);
        assert!((r.point.unwrap()[0] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's cycling example, rewritten with explicit nonnegativity rows.
        let c = [-0.75, 150.0, -0.02, 6.0];
        let mut a = vec![
            0.25, -60.0, -0.04, 9.0, //
            0.5, -90.0, -0.02, 3.0, //
            0.0, 0.0, 1.0, 0.0,
        ];
        let mut b = vec![0.0, 0.0, 1.0];
        for j in 0..4 {
            let mut row = vec![0.0; 4];
            row[j] = -1.0;
            a.extend(row);
            b.push(0.0);
        }
        let r = solve(&c, &a, &b);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.value.unwrap() + 0.05).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let a = [1.0, 1.0, -1.0, 0.0, 0.0, -1.0, 1.0, -1.0];
        let b = [2.0, 0.0, 0.0, 1.0];
        let r1 = solve(&[-1.0, -1.0], &a, &b);
        let r2 = solve(&[-1.0, -1.0], &a, &b);
        assert_eq!(r1, r2);
    }

    #[test]
    fn warm_resolve_matches_cold() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // min |x1| + |x2| + |x3| over a shifted box intersected with random cuts
        let n = 6;
        let mut a = Vec::new();
        let mut base = Vec::new();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut row = vec![0.0; n];
                row[k] = s;
                row[3 + k] = -1.0;
                a.extend(row);
                base.push(0.0);
            }
        }
        for _ in 0..8 {
            let mut row = vec![0.0; n];
            for v in row.iter_mut().take(3) {
                *v = rng.random_range(-1.0..1.0);
            }
            a.extend(row);
            base.push(rng.random_range(1.0..2.0));
        }
        let c = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let (r0, warm) = solve_warm(&c, &a, &base);
        assert!(r0.is_optimal());
        let warm = warm.expect("clean basis");
        for _ in 0..200 {
            let b: Vec<f64> = base.iter().enumerate()
                .map(|(i, v)| if i < 6 { v + rng.random_range(-3.0..3.0) } else { v + rng.random_range(-2.5..0.5) })
                .collect();
            let cold = solve(&c, &a, &b);
            let hot = warm.resolve(&b);
            assert_eq!(cold.status, hot.status);
            if let (Some(v1), Some(v2)) = (cold.value, hot.value) {
                assert!((v1 - v2).abs() < 1e-7, "{v1} vs {v2}");
            }
        }
    }
}
