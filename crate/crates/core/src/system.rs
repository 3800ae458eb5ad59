//! Discrete LTI plant `x⁺ = A x + B u + w` with polytopic constraints, and
//! the perturbation sources that drive simulations.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{fmt_f64, Polytope};

#[derive(Clone, Debug)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Safe states.
    pub x_set: Polytope,
    /// Admissible inputs.
    pub u_set: Polytope,
    /// Perturbations, acting additively on the state.
    pub w_set: Polytope,
    /// Input applied on skipped steps.
    pub u_skip: DVector<f64>,
}

impl LtiSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        x_set: Polytope,
        u_set: Polytope,
        w_set: Polytope,
        u_skip: DVector<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Contract(format!("A must be square, got {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::dims(n, b.nrows()));
        }
        let m = b.ncols();
        for (set, expected) in [(&x_set, n), (&u_set, m), (&w_set, n)] {
            if set.dim() != expected {
                return Err(Error::dims(expected, set.dim()));
            }
        }
        if u_skip.len() != m {
            return Err(Error::dims(m, u_skip.len()));
        }
        if !u_set.contains(u_skip.as_slice()) {
            return Err(Error::Contract("skip input must lie in U".into()));
        }
        Ok(LtiSystem { a, b, x_set, u_set, w_set, u_skip })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `A x + B u + w`, rejecting `u ∉ U` and `w ∉ W`.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vectors(x, u, w)?;
        if !self.u_set.contains(u.as_slice()) {
            return Err(Error::Contract(format!("input {:?} outside U", u.as_slice())));
        }
        if !self.w_set.contains(w.as_slice()) {
            return Err(Error::Contract(format!("perturbation {:?} outside W", w.as_slice())));
        }
        Ok(self.step_unchecked(x, u, w))
    }

    /// `A x + B u + w`, logging a warning instead of failing on set violations.
    pub fn step_logged(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_vectors(x, u, w)?;
        if !self.u_set.contains(u.as_slice()) {
            log::warn!("input {:?} outside U", u.as_slice());
        }
        if !self.w_set.contains(w.as_slice()) {
            log::warn!("perturbation {:?} outside W", w.as_slice());
        }
        Ok(self.step_unchecked(x, u, w))
    }

    pub fn step_unchecked(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + w
    }

    fn check_vectors(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::dims(self.n(), x.len()));
        }
        if u.len() != self.m() {
            return Err(Error::dims(self.m(), u.len()));
        }
        if w.len() != self.n() {
            return Err(Error::dims(self.n(), w.len()));
        }
        Ok(())
    }

    /// Midpoint of the bounding box of `W`; the nominal perturbation used by
    /// the predictive controller. Zero when `W` is centred.
    pub fn nominal_perturbation(&self) -> Result<DVector<f64>> {
        let (lo, hi) = self
            .w_set
            .bounding_box()
            .ok_or_else(|| Error::Contract("W must be nonempty and bounded".into()))?;
        Ok(DVector::from_iterator(lo.len(), lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h))))
    }

    /// Canonical text used for provenance hashing.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("A {} {}\n", self.a.nrows(), self.a.ncols()));
        s.push_str(&row_major(&self.a));
        s.push_str(&format!("B {} {}\n", self.b.nrows(), self.b.ncols()));
        s.push_str(&row_major(&self.b));
        s.push_str("X\n");
        s.push_str(&self.x_set.to_text());
        s.push_str("U\n");
        s.push_str(&self.u_set.to_text());
        s.push_str("W\n");
        s.push_str(&self.w_set.to_text());
        s.push_str("u_skip ");
        s.push_str(&self.u_skip.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" "));
        s.push('\n');
        s
    }

    /// SHA-256 of [`LtiSystem::canonical_text`], hex encoded.
    pub fn provenance_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

fn row_major(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Total actuation energy `Σ_t ‖u(t)‖₁`.
pub fn energy<'a, I>(inputs: I) -> f64
where
    I: IntoIterator<Item = &'a DVector<f64>>,
{
    inputs.into_iter().map(|u| u.lp_norm(1)).sum()
}

/// Source of perturbations `w(t)`, one per call, with an internal clock.
pub trait PerturbationSource: Send {
    /// Emit `w(t)` and advance the clock.
    fn next_perturbation(&mut self) -> DVector<f64>;

    /// Current clock value `t` (number of perturbations emitted so far).
    fn time(&self) -> usize;

    /// `(w(t), …, w(t+h−1))` without advancing the clock; `None` unless the
    /// source is clairvoyant.
    fn forecast(&self, _horizon: usize) -> Option<Vec<DVector<f64>>> {
        None
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource>;
}

impl Clone for Box<dyn PerturbationSource> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// Emits the same perturbation forever.
#[derive(Clone, Debug)]
pub struct ConstantSource {
    w: DVector<f64>,
    t: usize,
}

impl ConstantSource {
    pub fn new(w: DVector<f64>) -> Self {
        ConstantSource { w, t: 0 }
    }
}

impl PerturbationSource for ConstantSource {
    fn next_perturbation(&mut self) -> DVector<f64> {
        self.t += 1;
        self.w.clone()
    }

    fn time(&self) -> usize {
        self.t
    }

    fn forecast(&self, horizon: usize) -> Option<Vec<DVector<f64>>> {
        Some(vec![self.w.clone(); horizon])
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource> {
        Box::new(self.clone())
    }
}

/// Uniform draws from `W` (rejection from its bounding box), seeded.
#[derive(Clone, Debug)]
pub struct UniformSource {
    w_set: Polytope,
    rng: ChaCha8Rng,
    t: usize,
}

impl UniformSource {
    pub fn new(w_set: Polytope, seed: u64) -> Self {
        UniformSource { w_set, rng: ChaCha8Rng::seed_from_u64(seed), t: 0 }
    }
}

impl PerturbationSource for UniformSource {
    fn next_perturbation(&mut self) -> DVector<f64> {
        self.t += 1;
        let w = self.w_set.sample_uniform(&mut self.rng, 1);
        let w = w.into_iter().next().expect("W admits uniform samples");
        DVector::from_vec(w)
    }

    fn time(&self) -> usize {
        self.t
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource> {
        Box::new(self.clone())
    }
}

/// Replays a fixed sequence; clairvoyant over its remaining length. Past the
/// end it repeats the last element.
#[derive(Clone, Debug)]
pub struct SequenceSource {
    seq: Vec<DVector<f64>>,
    t: usize,
}

impl SequenceSource {
    pub fn new(seq: Vec<DVector<f64>>) -> Result<Self> {
        if seq.is_empty() {
            return Err(Error::Contract("perturbation sequence must be nonempty".into()));
        }
        Ok(SequenceSource { seq, t: 0 })
    }

    fn at(&self, t: usize) -> DVector<f64> {
        self.seq[t.min(self.seq.len() - 1)].clone()
    }
}

impl PerturbationSource for SequenceSource {
    fn next_perturbation(&mut self) -> DVector<f64> {
        let w = self.at(self.t);
        self.t += 1;
        w
    }

    fn time(&self) -> usize {
        self.t
    }

    fn forecast(&self, horizon: usize) -> Option<Vec<DVector<f64>>> {
        Some((self.t..self.t + horizon).map(|t| self.at(t)).collect())
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource> {
        Box::new(self.clone())
    }
}

/// Makes any cloneable source clairvoyant by running a copy ahead.
#[derive(Clone, Debug)]
pub struct Clairvoyant<S> {
    inner: S,
}

impl<S> Clairvoyant<S> {
    pub fn new(inner: S) -> Self {
        Clairvoyant { inner }
    }
}

impl<S: PerturbationSource + Clone + 'static> PerturbationSource for Clairvoyant<S> {
    fn next_perturbation(&mut self) -> DVector<f64> {
        self.inner.next_perturbation()
    }

    fn time(&self) -> usize {
        self.inner.time()
    }

    fn forecast(&self, horizon: usize) -> Option<Vec<DVector<f64>>> {
        let mut ahead = self.inner.clone();
        Some((0..horizon).map(|_| ahead.next_perturbation()).collect())
    }

    fn boxed_clone(&self) -> Box<dyn PerturbationSource> {
        Box::new(self.clone())
    }
}
