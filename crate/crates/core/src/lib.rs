//! Simulation and certification toolkit for publicly verifiable,
//! measurement-only blind quantum computation on 2-colorable graph states.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: bipartite graphs with a deterministic 2-coloring.
//! - [`stabsim`]: stabilizer tableau engine plus a dense statevector oracle.
//! - [`witness`]: the two-setting entanglement witness and the verification
//!   test that counts failing registers against a threshold.
//! - [`bounds`]: Serfling / Azuma-Hoeffding bounds, fidelity certificates,
//!   parameter planning and resource cost comparison.
//! - [`noisedetect`]: trap qubits for channel-noise detection.
//! - [`protocol`]: the server / storage center / client / arbiter run.
//!
//! All randomness flows through explicit [`rng::SimRng`] handles derived from
//! a master seed, so every run is replayable.

pub mod bounds;
pub mod error;
pub mod graph;
pub mod noisedetect;
pub mod protocol;
pub mod rng;
pub mod stabsim;
pub mod witness;

pub use error::{Error, Result};
pub use graph::ColoredGraph;
pub use stabsim::{DenseState, Ensemble, PauliString, StabilizerTableau};
