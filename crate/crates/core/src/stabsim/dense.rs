use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;

use super::pauli::{Basis, Pauli, PauliString};
use super::tableau::{Outcome, StabilizerTableau};
use crate::error::{Error, Result};
use crate::graph::ColoredGraph;

/// Largest register the dense oracle accepts (4096 amplitudes).
pub const DENSE_CAP: usize = 12;

const NORM_TOL: f64 = 1e-10;

/// Statevector on `n ≤ DENSE_CAP` qubits.
///
/// Qubit `q` is bit `n - 1 - q` of the basis index, so qubit 0 is the
/// leftmost symbol of a ket such as `|q0 q1 q2⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<Complex64>,
}

fn check_cap(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParams("dense state needs n >= 1".into()))
    } else if n > DENSE_CAP {
        Err(Error::TooLarge { n, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

impl DenseState {
    pub fn basis_state(n: usize, index: usize) -> Result<Self> {
        check_cap(n)?;
        if index >= 1 << n {
            return Err(Error::InvalidParams(format!("basis index {index} out of range")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(DenseState { n, amps })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::basis_state(n, 0)
    }

    pub fn plus(n: usize) -> Result<Self> {
        check_cap(n)?;
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        Ok(DenseState {
            n,
            amps: vec![Complex64::new(a, 0.0); 1 << n],
        })
    }

    /// `∏ CZ_ij |+⟩^n`, built gate by gate.
    pub fn graph_state(g: &ColoredGraph) -> Result<Self> {
        let mut s = Self::plus(g.n())?;
        for &(a, b) in g.edges() {
            s.apply_cz(a - 1, b - 1);
        }
        Ok(s)
    }

    pub fn from_amplitudes(n: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_cap(n)?;
        if amps.len() != 1 << n {
            return Err(Error::InvalidParams(format!(
                "expected {} amplitudes, got {}",
                1 << n,
                amps.len()
            )));
        }
        let s = DenseState { n, amps };
        if (s.norm_sqr() - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParams(format!("state norm² {} is not 1", s.norm_sqr())));
        }
        Ok(s)
    }

    /// Tensor product of single-qubit states `a|0⟩ + b|1⟩`, each normalised
    /// on input.
    pub fn product(qubits: &[[Complex64; 2]]) -> Result<Self> {
        let n = qubits.len();
        check_cap(n)?;
        let mut amps = vec![Complex64::new(1.0, 0.0); 1 << n];
        for (q, pair) in qubits.iter().enumerate() {
            let norm = (pair[0].norm_sqr() + pair[1].norm_sqr()).sqrt();
            if norm == 0.0 {
                return Err(Error::InvalidParams("zero single-qubit vector".into()));
            }
            let shift = n - 1 - q;
            for (i, a) in amps.iter_mut().enumerate() {
                *a *= pair[(i >> shift) & 1] / norm;
            }
        }
        Ok(DenseState { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    #[inline]
    fn mask(&self, q: usize) -> usize {
        assert!(q < self.n, "qubit {q} out of range");
        1 << (self.n - 1 - q)
    }

    pub fn apply_h(&mut self, q: usize) -> &mut Self {
        let m = self.mask(q);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & m == 0 {
                let (a, b) = (self.amps[i], self.amps[i | m]);
                self.amps[i] = (a + b) * r;
                self.amps[i | m] = (a - b) * r;
            }
        }
        self
    }

    pub fn apply_s(&mut self, q: usize) -> &mut Self {
        let m = self.mask(q);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & m != 0 {
                *a *= Complex64::i();
            }
        }
        self
    }

    pub fn apply_cz(&mut self, a: usize, b: usize) -> &mut Self {
        let m = self.mask(a) | self.mask(b);
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if i & m == m {
                *amp = -*amp;
            }
        }
        self
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> &mut Self {
        let (mc, mt) = (self.mask(control), self.mask(target));
        for i in 0..self.amps.len() {
            if i & mc != 0 && i & mt == 0 {
                self.amps.swap(i, i | mt);
            }
        }
        self
    }

    /// `P|ψ⟩` including the sign of `p`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<&mut Self> {
        if p.n() != self.n {
            return Err(Error::QubitMismatch {
                expected: self.n,
                got: p.n(),
            });
        }
        let (xmask, zmask) = self.masks(p);
        // Y = iXZ
        let mut global = Complex64::i().powu(p.y_count() as u32);
        if p.is_negative() {
            global = -global;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, &a) in self.amps.iter().enumerate() {
            let sign = if (b & zmask).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b ^ xmask] = a * global * sign;
        }
        self.amps = out;
        Ok(self)
    }

    pub fn apply_single_pauli(&mut self, q: usize, p: Pauli) -> &mut Self {
        self.apply_pauli(&PauliString::single(self.n, q, p))
            .expect("matching size");
        self
    }

    fn masks(&self, p: &PauliString) -> (usize, usize) {
        let mut xm = 0;
        let mut zm = 0;
        for q in 0..self.n {
            let (xb, zb) = p.get(q).bits();
            if xb {
                xm |= self.mask(q);
            }
            if zb {
                zm |= self.mask(q);
            }
        }
        (xm, zm)
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &DenseState) -> Complex64 {
        assert_eq!(self.n, other.n);
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨ψ|P|ψ⟩`
    pub fn expectation(&self, p: &PauliString) -> f64 {
        let mut moved = self.clone();
        moved.apply_pauli(p).expect("matching size");
        self.inner(&moved).re
    }

    /// Apply `(I + P)/2` without renormalising.
    pub fn apply_projector(&mut self, p: &PauliString) -> &mut Self {
        let mut moved = self.clone();
        moved.apply_pauli(p).expect("matching size");
        for (a, b) in self.amps.iter_mut().zip(moved.amps) {
            *a = (*a + b) * 0.5;
        }
        self
    }

    /// Probability of `outcome` when measuring qubit `q` in `basis`.
    pub fn outcome_probability(&self, q: usize, basis: Basis, outcome: Outcome) -> f64 {
        let mut projected = self.clone();
        let mut obs = PauliString::single(self.n, q, basis.into());
        obs.set_negative(outcome < 0);
        projected.apply_projector(&obs);
        projected.norm_sqr()
    }

    /// Project onto the `outcome` eigenspace and renormalise. Returns the
    /// Born probability of that outcome.
    pub fn collapse(&mut self, q: usize, basis: Basis, outcome: Outcome) -> f64 {
        let mut obs = PauliString::single(self.n, q, basis.into());
        obs.set_negative(outcome < 0);
        self.apply_projector(&obs);
        let p = self.norm_sqr();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            self.amps.iter_mut().for_each(|a| *a *= s);
        }
        p
    }

    pub fn measure<R: Rng + ?Sized>(&mut self, q: usize, basis: Basis, rng: &mut R) -> Outcome {
        let p_plus = self.outcome_probability(q, basis, 1).clamp(0.0, 1.0);
        let outcome = if rng.random::<f64>() < p_plus { 1 } else { -1 };
        self.collapse(q, basis, outcome);
        outcome
    }

    /// Exact joint outcome distribution of a measurement sequence, by
    /// expanding the full outcome tree.
    pub fn outcome_distribution(&self, sequence: &[(usize, Basis)]) -> BTreeMap<Vec<Outcome>, f64> {
        let mut out = BTreeMap::new();
        let mut prefix = Vec::with_capacity(sequence.len());
        self.expand(sequence, 1.0, &mut prefix, &mut out);
        out
    }

    fn expand(
        &self,
        rest: &[(usize, Basis)],
        weight: f64,
        prefix: &mut Vec<Outcome>,
        out: &mut BTreeMap<Vec<Outcome>, f64>,
    ) {
        let Some((&(q, basis), tail)) = rest.split_first() else {
            out.insert(prefix.clone(), weight);
            return;
        };
        for outcome in [1, -1] {
            let mut branch = self.clone();
            let p = branch.collapse(q, basis, outcome);
            if p > 1e-12 {
                prefix.push(outcome);
                branch.expand(tail, weight * p, prefix, out);
                prefix.pop();
            }
        }
    }

    /// Fix the global phase so the first non-negligible amplitude is real
    /// and positive.
    pub fn canonicalize_phase(&mut self) -> &mut Self {
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-9) {
            let phase = a.conj() / a.norm();
            self.amps.iter_mut().for_each(|x| *x *= phase);
        }
        self
    }

    /// Equal up to global phase, amplitude-wise within `tol`.
    pub fn approx_eq_up_to_phase(&self, other: &DenseState, tol: f64) -> bool {
        if self.n != other.n {
            return false;
        }
        let mut a = self.clone();
        let mut b = other.clone();
        a.canonicalize_phase();
        b.canonicalize_phase();
        a.amps.iter().zip(&b.amps).all(|(x, y)| (x - y).norm() <= tol)
    }
}

/// Deterministic generic vector used as a seed for projection.
fn generic_vector(n: usize, salt: u64) -> Vec<Complex64> {
    (0..1usize << n)
        .map(|i| {
            let h = crate::rng::derive_seed(salt, i as u64);
            let re = (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let im = (crate::rng::derive_seed(h, 1) >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            Complex64::new(re, im)
        })
        .collect()
}

/// The unique joint `+1` eigenstate of the tableau's generators, with the
/// global phase fixed by [`DenseState::canonicalize_phase`].
pub fn to_dense(state: &StabilizerTableau) -> Result<DenseState> {
    let n = state.n();
    check_cap(n)?;
    let stabs = state.stabilizers();
    for salt in 0..8u64 {
        let mut s = DenseState {
            n,
            amps: generic_vector(n, salt),
        };
        for g in &stabs {
            s.apply_projector(g);
        }
        let norm = s.norm_sqr();
        if norm > 1e-12 {
            let k = 1.0 / norm.sqrt();
            s.amps.iter_mut().for_each(|a| *a *= k);
            s.canonicalize_phase();
            return Ok(s);
        }
    }
    unreachable!("a generic vector always overlaps a stabilizer state")
}

impl TryFrom<&StabilizerTableau> for DenseState {
    type Error = Error;

    fn try_from(t: &StabilizerTableau) -> Result<Self> {
        to_dense(t)
    }
}
