//! Quantum-state engine.
//!
//! [`StabilizerTableau`] is the scalable backend used by every protocol run.
//! [`DenseState`] is an independent statevector oracle for registers of up to
//! [`DENSE_CAP`] qubits; it is built gate by gate and never reads tableau
//! internals except through [`to_dense`]. Mixed states are explicit
//! [`Ensemble`]s of pure states.

mod dense;
mod pauli;
mod tableau;

pub use dense::{to_dense, DenseState, DENSE_CAP};
pub use pauli::{Basis, Pauli, PauliString};
pub use tableau::{Outcome, StabilizerTableau};

use crate::error::{Error, Result};
use crate::graph::ColoredGraph;

/// States the dense oracle can evaluate.
pub trait OracleState {
    fn to_dense_state(&self) -> Result<DenseState>;
}

impl OracleState for DenseState {
    fn to_dense_state(&self) -> Result<DenseState> {
        Ok(self.clone())
    }
}

impl OracleState for StabilizerTableau {
    fn to_dense_state(&self) -> Result<DenseState> {
        to_dense(self)
    }
}

/// A mixed state `Σ_k p_k |ψ_k⟩⟨ψ_k|` kept as weighted pure states.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<S> {
    members: Vec<(f64, S)>,
}

impl<S> Ensemble<S> {
    pub fn new(members: Vec<(f64, S)>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidParams("empty ensemble".into()));
        }
        if members.iter().any(|(p, _)| !(0.0..=1.0 + 1e-12).contains(p)) {
            return Err(Error::InvalidParams("ensemble weight outside [0, 1]".into()));
        }
        let total: f64 = members.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("ensemble weights sum to {total}")));
        }
        Ok(Ensemble { members })
    }

    /// Equal weights over `states`.
    pub fn uniform(states: Vec<S>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(states.into_iter().map(|s| (w, s)).collect())
    }

    pub fn pure(state: S) -> Self {
        Ensemble {
            members: vec![(1.0, state)],
        }
    }

    pub fn members(&self) -> &[(f64, S)] {
        &self.members
    }
}

impl<S: OracleState> Ensemble<S> {
    pub fn to_dense(&self) -> Result<Ensemble<DenseState>> {
        let members = self
            .members
            .iter()
            .map(|(p, s)| Ok((*p, s.to_dense_state()?)))
            .collect::<Result<_>>()?;
        Ok(Ensemble { members })
    }
}

impl Ensemble<DenseState> {
    /// `I / 2^n` as the uniform mixture of computational basis states.
    pub fn maximally_mixed(n: usize) -> Result<Self> {
        let states = (0..1usize << n)
            .map(|i| DenseState::basis_state(n, i))
            .collect::<Result<Vec<_>>>()?;
        Self::uniform(states)
    }
}

/// Exact `⟨G|ϱ|G⟩`, with `|G⟩` built from controlled-Z gates on `|+⟩^n`.
pub fn fidelity_oracle<S: OracleState>(ensemble: &Ensemble<S>, target: &ColoredGraph) -> Result<f64> {
    let g = DenseState::graph_state(target)?;
    let mut f = 0.0;
    for (p, s) in ensemble.members() {
        let d = s.to_dense_state()?;
        if d.n() != g.n() {
            return Err(Error::QubitMismatch {
                expected: g.n(),
                got: d.n(),
            });
        }
        f += p * g.inner(&d).norm_sqr();
    }
    Ok(f.clamp(0.0, 1.0))
}
