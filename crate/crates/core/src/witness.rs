//! Two-setting entanglement witness for 2-colorable graph states and the
//! register-counting verification test built on it.
//!
//! Setting `j` measures `X` on every vertex of `S_j` and `Z` on the rest,
//! which realises `∏_{i∈S_j} g_i` with `n` local measurements. A register
//! passes (`M_j = 1`) when every `x_i ∏_{k∈N(i)} z_k` equals `+1`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ColorIndex, ColoredGraph};
use crate::rng::{substream, tag, SimRng};
use crate::stabsim::{Basis, DenseState, Ensemble, OracleState, Outcome, PauliString, StabilizerTableau};

/// Per-qubit basis assignment for color class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementSetting {
    color: ColorIndex,
    /// Indexed by `vertex - 1`.
    bases: Vec<Basis>,
}

impl MeasurementSetting {
    pub fn color(&self) -> ColorIndex {
        self.color
    }

    pub fn basis(&self, vertex: usize) -> Basis {
        self.bases[vertex - 1]
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    /// Local measurements needed for one register.
    pub fn local_measurements(&self) -> usize {
        self.bases.len()
    }
}

pub fn setting_for_color(g: &ColoredGraph, j: ColorIndex) -> Result<MeasurementSetting> {
    let class = g.class(j)?;
    let mut bases = vec![Basis::Z; g.n()];
    for &v in class {
        bases[v - 1] = Basis::X;
    }
    Ok(MeasurementSetting { color: j, bases })
}

/// Outcomes of one setting: `x` on `S_j`, `z` on the complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingOutcome {
    pub color: ColorIndex,
    pub x: BTreeMap<usize, Outcome>,
    pub z: BTreeMap<usize, Outcome>,
}

/// Measure every qubit of `state` in ascending vertex order. The register is
/// consumed.
pub fn measure_setting(
    mut state: StabilizerTableau,
    setting: &MeasurementSetting,
    rng: &mut SimRng,
) -> Result<SettingOutcome> {
    if state.n() != setting.bases.len() {
        return Err(Error::QubitMismatch {
            expected: setting.bases.len(),
            got: state.n(),
        });
    }
    let mut x = BTreeMap::new();
    let mut z = BTreeMap::new();
    for (q, &basis) in setting.bases.iter().enumerate() {
        let out = state.measure(q, basis, rng);
        match basis {
            Basis::X => x.insert(q + 1, out),
            Basis::Z => z.insert(q + 1, out),
        };
    }
    Ok(SettingOutcome {
        color: setting.color,
        x,
        z,
    })
}

/// `M_j ∈ {0, 1}` for one register's outcomes.
pub fn compute_mj(g: &ColoredGraph, outcome: &SettingOutcome) -> Result<u8> {
    let class = g.class(outcome.color)?;
    if outcome.x.len() != class.len()
        || !class.iter().all(|v| outcome.x.contains_key(v))
        || outcome.z.len() != g.n() - class.len()
        || outcome.x.keys().any(|v| outcome.z.contains_key(v))
    {
        return Err(Error::DomainMismatch);
    }
    for &i in class {
        let mut factor = outcome.x[&i];
        for k in g.neighbors(i)? {
            factor *= *outcome.z.get(k).ok_or(Error::DomainMismatch)?;
        }
        if factor != 1 {
            return Ok(0);
        }
    }
    Ok(1)
}

/// `⟨∏_{i∈S_j} (g_i + I)/2⟩` evaluated exactly on the dense oracle.
pub fn projector_expectation<S: OracleState>(
    ensemble: &Ensemble<S>,
    g: &ColoredGraph,
    j: ColorIndex,
) -> Result<f64> {
    let generators = dense_generators(g, j)?;
    let mut total = 0.0;
    for (p, s) in ensemble.members() {
        let mut d: DenseState = s.to_dense_state()?;
        if d.n() != g.n() {
            return Err(Error::QubitMismatch {
                expected: g.n(),
                got: d.n(),
            });
        }
        for gi in &generators {
            d.apply_projector(gi);
        }
        total += p * d.norm_sqr();
    }
    Ok(total)
}

fn dense_generators(g: &ColoredGraph, j: ColorIndex) -> Result<Vec<PauliString>> {
    g.class(j)?
        .iter()
        .map(|&i| {
            let mut p = PauliString::single(g.n(), i - 1, crate::stabsim::Pauli::X);
            for &k in g.neighbors(i)? {
                p.set(k - 1, crate::stabsim::Pauli::Z);
            }
            Ok(p)
        })
        .collect()
}

/// `Tr(W ϱ)` for `W = 3I − 2[Π_1 + Π_2]`, `Π_j = ∏_{i∈S_j} (g_i + I)/2`.
pub fn witness_expectation<S: OracleState>(ensemble: &Ensemble<S>, g: &ColoredGraph) -> Result<f64> {
    let p1 = projector_expectation(ensemble, g, 1)?;
    let p2 = projector_expectation(ensemble, g, 2)?;
    Ok(3.0 - 2.0 * (p1 + p2))
}

/// Lower bound on the fidelity implied by a witness value.
pub fn fidelity_from_witness(tr_w: f64) -> f64 {
    0.5 - tr_w / 2.0
}

/// Outcome of the verification test on `2K` registers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    /// `K`, the size of each group.
    pub group_size: usize,
    pub k1: usize,
    pub k2: usize,
    pub threshold: f64,
    pub accepted: bool,
    pub seed: u64,
    /// Input indices measured with setting 1, ascending.
    pub group1: Vec<usize>,
    /// Input indices measured with setting 2, ascending.
    pub group2: Vec<usize>,
    /// Input indices whose register gave `M_j = 0`, ascending.
    pub failed: Vec<usize>,
}

impl VerificationVerdict {
    pub fn failures(&self) -> usize {
        self.k1 + self.k2
    }

    /// Re-decide the same outcome record at another threshold.
    pub fn at_threshold(&self, threshold: f64) -> bool {
        accepts(self.failures(), threshold)
    }
}

/// The decision rule `K1 + K2 ≤ C`.
pub fn accepts(failures: usize, threshold: f64) -> bool {
    failures as f64 <= threshold
}

const GROUP_STREAM: u64 = tag("verification/groups");

/// Split `2K` registers into two groups of `K`, measure setting `j` on group
/// `j`, count failures and compare with `threshold`.
///
/// Group 1 is drawn by a partial shuffle on the `(seed, groups)` stream;
/// register `i` is measured on stream `(seed, i)`, so the verdict does not
/// depend on the order in which registers are processed. All registers are
/// consumed.
pub fn run_verification(
    registers: Vec<StabilizerTableau>,
    g: &ColoredGraph,
    threshold: f64,
    seed: u64,
) -> Result<VerificationVerdict> {
    let total = registers.len();
    if total == 0 || total % 2 != 0 {
        return Err(Error::OddBatch(total));
    }
    if !(0.0..=total as f64).contains(&threshold) {
        return Err(Error::ThresholdOutOfRange {
            threshold,
            max: total as f64,
        });
    }
    if let Some(bad) = registers.iter().find(|r| r.n() != g.n()) {
        return Err(Error::QubitMismatch {
            expected: g.n(),
            got: bad.n(),
        });
    }
    let k = total / 2;
    let mut order: Vec<usize> = (0..total).collect();
    order.partial_shuffle(&mut substream(seed, GROUP_STREAM), k);
    let mut group1 = order[..k].to_vec();
    let mut group2 = order[k..].to_vec();
    group1.sort_unstable();
    group2.sort_unstable();

    let mut in_group1 = vec![false; total];
    for &i in &group1 {
        in_group1[i] = true;
    }
    let settings = [setting_for_color(g, 1)?, setting_for_color(g, 2)?];
    let mut failed = Vec::new();
    let (mut k1, mut k2) = (0, 0);
    for (i, register) in registers.into_iter().enumerate() {
        let setting = &settings[if in_group1[i] { 0 } else { 1 }];
        let mut rng = substream(seed, i as u64);
        let outcome = measure_setting(register, setting, &mut rng)?;
        if compute_mj(g, &outcome)? == 0 {
            failed.push(i);
            if in_group1[i] {
                k1 += 1;
            } else {
                k2 += 1;
            }
        }
    }
    Ok(VerificationVerdict {
        group_size: k,
        k1,
        k2,
        threshold,
        accepted: accepts(k1 + k2, threshold),
        seed,
        group1,
        group2,
        failed,
    })
}
