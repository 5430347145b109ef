//! Channel-noise detection with trap qubits.
//!
//! The sender interleaves `k` unentangled qubits in an agreed state with the
//! `n` register qubits. After transmission the receiver measures each trap in
//! its check basis and counts flips `r`; the channel is accepted when
//! `r ≤ r_th`, where `r_th` solves `exp(−2k (p_th − r/k)²) = 1 − confidence`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stabsim::{Basis, Pauli, StabilizerTableau};

/// I.i.d. single-qubit Pauli noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `X` with probability `p`.
    BitFlip,
    /// `Z` with probability `p`.
    PhaseFlip,
    /// One of `X`, `Y`, `Z` uniformly, with total probability `p`.
    Depolarizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    pub kind: NoiseKind,
    pub p: f64,
}

impl PauliChannel {
    pub fn new(kind: NoiseKind, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParams(format!("noise probability {p} outside [0, 1]")));
        }
        Ok(PauliChannel { kind, p })
    }

    pub fn noiseless() -> Self {
        PauliChannel {
            kind: NoiseKind::BitFlip,
            p: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.p == 0.0
    }

    /// Error drawn for one qubit.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Pauli {
        if self.p == 0.0 || !rng.random_bool(self.p) {
            return Pauli::I;
        }
        match self.kind {
            NoiseKind::BitFlip => Pauli::X,
            NoiseKind::PhaseFlip => Pauli::Z,
            NoiseKind::Depolarizing => [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)],
        }
    }

    /// Apply the channel independently to every qubit of a register.
    pub fn apply<R: Rng + ?Sized>(&self, state: &mut StabilizerTableau, rng: &mut R) {
        if self.is_noiseless() {
            return;
        }
        for q in 0..state.n() {
            let e = self.sample(rng);
            state.apply_single_pauli(q, e);
        }
    }
}

/// Agreed initial state of the traps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapState {
    /// `|0⟩`, checked in the Z basis; detects bit flips.
    #[default]
    Zero,
    /// `|+⟩`, checked in the X basis; detects phase flips.
    Plus,
}

impl TrapState {
    pub fn check_basis(self) -> Basis {
        match self {
            TrapState::Zero => Basis::Z,
            TrapState::Plus => Basis::X,
        }
    }
}

fn default_confidence() -> f64 {
    0.99
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Traps per register.
    pub k: usize,
    #[serde(default)]
    pub trap_state: TrapState,
    /// Noise threshold `p_th`.
    pub p_th: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl TrapConfig {
    pub fn new(k: usize, trap_state: TrapState, p_th: f64, confidence: f64) -> Result<Self> {
        let cfg = TrapConfig {
            k,
            trap_state,
            p_th,
            confidence,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("at least one trap qubit is required".into()));
        }
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            return Err(Error::InvalidConfig(format!("p_th {} outside (0, 1)", self.p_th)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence {} outside (0, 1)",
                self.confidence
            )));
        }
        Ok(())
    }

    /// `√(ln(1/(1−confidence)) / (2k))`, the Hoeffding deviation at this
    /// confidence.
    pub fn deviation(&self) -> f64 {
        ((1.0 / (1.0 - self.confidence)).ln() / (2.0 * self.k as f64)).sqrt()
    }

    /// Largest channel noise at which the check still accepts with
    /// probability at least `confidence`: `p_th − 2·deviation`.
    pub fn noise_limit(&self) -> f64 {
        self.p_th - 2.0 * self.deviation()
    }
}

/// `r_th = k·p_th − k·√(ln(1/(1−confidence))/(2k))`.
pub fn trap_threshold(cfg: &TrapConfig) -> Result<f64> {
    cfg.validate()?;
    let r_th = cfg.k as f64 * (cfg.p_th - cfg.deviation());
    if r_th < 0.0 {
        return Err(Error::Infeasible(format!(
            "k = {} traps cannot certify p_th = {} at confidence {}",
            cfg.k, cfg.p_th, cfg.confidence
        )));
    }
    Ok(r_th)
}

/// Smallest `k` whose check accepts a channel of noise `p_operating` with
/// probability at least `confidence` while still certifying `p_th`.
pub fn traps_for_operating_point(p_th: f64, confidence: f64, p_operating: f64) -> Result<usize> {
    if !(p_operating >= 0.0 && p_operating < p_th && p_th < 1.0 && confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParams(format!(
            "need 0 ≤ p = {p_operating} < p_th = {p_th} < 1 and confidence in (0, 1)"
        )));
    }
    let gap = p_th - p_operating;
    let l = (1.0 / (1.0 - confidence)).ln();
    Ok((2.0 * l / (gap * gap)).ceil() as usize)
}

/// One trap qubit: an eigenstate of `±check`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Trap {
    check: Pauli,
    flipped: bool,
}

/// Where each transmitted slot comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Register(usize),
    Trap(usize),
}

/// A register with traps interleaved, as sent over the channel.
///
/// Traps never interact with the register, so the joint state is the product
/// of the register tableau and one single-qubit eigenstate per trap.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedRegister {
    register: StabilizerTableau,
    traps: Vec<Trap>,
    layout: Vec<Slot>,
    positions: Vec<usize>,
}

impl AugmentedRegister {
    /// Total transmitted qubits, `n + k`.
    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    /// Trap slots, ascending.
    pub fn trap_positions(&self) -> &[usize] {
        &self.positions
    }

    /// Send every slot through `channel`, in slot order.
    pub fn transmit<R: Rng + ?Sized>(&mut self, channel: &PauliChannel, rng: &mut R) {
        if channel.is_noiseless() {
            return;
        }
        for slot in &self.layout {
            let e = channel.sample(rng);
            if e == Pauli::I {
                continue;
            }
            match *slot {
                Slot::Register(q) => {
                    self.register.apply_single_pauli(q, e);
                }
                Slot::Trap(t) => {
                    let trap = &mut self.traps[t];
                    let (ex, ez) = e.bits();
                    let (cx, cz) = trap.check.bits();
                    if (ex && cz) ^ (ez && cx) {
                        trap.flipped ^= true;
                    }
                }
            }
        }
    }

    /// The full `(n + k)`-qubit stabilizer state in slot order.
    pub fn to_tableau(&self) -> StabilizerTableau {
        let n = self.register.n();
        let mut register_slots = vec![0; n];
        for (slot, s) in self.layout.iter().enumerate() {
            if let Slot::Register(q) = *s {
                register_slots[q] = slot;
            }
        }
        let mut full = self
            .register
            .embed(self.len(), &register_slots)
            .expect("layout is a permutation");
        for (t, &pos) in self.positions.iter().enumerate() {
            let trap = self.traps[t];
            if trap.check == Pauli::X {
                full.apply_h(pos);
            }
            if trap.flipped {
                let flip = if trap.check == Pauli::X { Pauli::Z } else { Pauli::X };
                full.apply_single_pauli(pos, flip);
            }
        }
        full
    }
}

/// Interleave `cfg.k` traps with `register` at uniformly drawn slots. The
/// returned positions are what the receiver learns through the shared
/// agreement.
pub fn insert_traps<R: Rng + ?Sized>(
    register: StabilizerTableau,
    cfg: &TrapConfig,
    rng: &mut R,
) -> Result<(AugmentedRegister, Vec<usize>)> {
    cfg.validate()?;
    let n = register.n();
    let total = n + cfg.k;
    let mut positions = index::sample(rng, total, cfg.k).into_vec();
    positions.sort_unstable();
    let mut layout = Vec::with_capacity(total);
    let (mut q, mut t) = (0, 0);
    for slot in 0..total {
        if t < positions.len() && positions[t] == slot {
            layout.push(Slot::Trap(t));
            t += 1;
        } else {
            layout.push(Slot::Register(q));
            q += 1;
        }
    }
    let check = Pauli::from(cfg.trap_state.check_basis());
    let traps = vec![Trap { check, flipped: false }; cfg.k];
    Ok((
        AugmentedRegister {
            register,
            traps,
            layout,
            positions: positions.clone(),
        },
        positions,
    ))
}

/// Result of checking the traps of one transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapCheck {
    /// Traps whose outcome differed from the agreed state.
    pub flipped: usize,
    pub accepted: bool,
    /// The register with traps removed.
    pub register: StabilizerTableau,
}

/// Measure every trap in its check basis, count flips and strip the traps.
pub fn check_traps(received: AugmentedRegister, cfg: &TrapConfig, positions: &[usize]) -> Result<TrapCheck> {
    if positions != received.positions.as_slice() || positions.len() != cfg.k {
        return Err(Error::PositionMismatch);
    }
    let r_th = trap_threshold(cfg)?;
    // Each trap is an eigenstate of ±check, so its outcome is deterministic.
    let flipped = received.traps.iter().filter(|t| t.flipped).count();
    Ok(TrapCheck {
        flipped,
        accepted: flipped as f64 <= r_th,
        register: received.register,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{standard_graph, StandardGraph};
    use crate::rng::rng_from_seed;
    use crate::stabsim::{to_dense, DenseState, Outcome};
    use std::collections::BTreeMap;

    fn cfg(k: usize, p_th: f64) -> TrapConfig {
        TrapConfig::new(k, TrapState::Zero, p_th, 0.99).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            TrapConfig::new(0, TrapState::Zero, 0.1, 0.99),
            Err(Error::InvalidConfig(_))
        ));
        assert!(TrapConfig::new(5, TrapState::Zero, 0.0, 0.99).is_err());
        assert!(TrapConfig::new(5, TrapState::Zero, 0.1, 1.0).is_err());
    }

    #[test]
    fn thresholds() {
        let r = trap_threshold(&cfg(2000, 0.05)).unwrap();
        let expected = 100.0 - (2000.0 * 100f64.ln() / 2.0).sqrt();
        assert!((r - expected).abs() < 1e-9);
        assert!((r - 32.14).abs() < 0.01);
        assert!(matches!(trap_threshold(&cfg(100, 0.1)), Err(Error::Infeasible(_))));
        // confidence → 0 gives r_th → k·p_th
        let loose = TrapConfig::new(50, TrapState::Zero, 0.2, 1e-12).unwrap();
        assert!((trap_threshold(&loose).unwrap() - 10.0).abs() < 1e-4);
        // The small worked example from the literature is infeasible here.
        assert!(trap_threshold(&cfg(5, 0.01)).is_err());
    }

    #[test]
    fn sizing() {
        assert_eq!(traps_for_operating_point(0.1, 0.99, 0.05).unwrap(), 3685);
        let c = cfg(3685, 0.1);
        assert!(c.noise_limit() >= 0.05);
        assert!(traps_for_operating_point(0.1, 0.99, 0.2).is_err());
    }

    #[test]
    fn insertion_layout() {
        let mut rng = rng_from_seed(1);
        let g = standard_graph(StandardGraph::Path { n: 3 }).unwrap();
        let (aug, pos) = insert_traps(StabilizerTableau::graph_state(&g), &cfg(5, 0.5), &mut rng).unwrap();
        assert_eq!(aug.len(), 8);
        assert_eq!(pos.len(), 5);
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(pos.iter().all(|&p| p < 8));
    }

    #[test]
    fn noiseless_channel_accepts() {
        let mut rng = rng_from_seed(2);
        let g = standard_graph(StandardGraph::Path { n: 3 }).unwrap();
        let c = cfg(200, 0.3);
        let reg = StabilizerTableau::graph_state(&g);
        let (mut aug, pos) = insert_traps(reg.clone(), &c, &mut rng).unwrap();
        aug.transmit(&PauliChannel::noiseless(), &mut rng);
        let check = check_traps(aug, &c, &pos).unwrap();
        assert_eq!(check.flipped, 0);
        assert!(check.accepted);
        assert_eq!(check.register, reg);
    }

    #[test]
    fn full_bit_flip_rejects() {
        let mut rng = rng_from_seed(3);
        let c = TrapConfig::new(5, TrapState::Zero, 0.5, 0.5).unwrap();
        let (mut aug, pos) = insert_traps(StabilizerTableau::new_plus(3), &c, &mut rng).unwrap();
        aug.transmit(&PauliChannel::new(NoiseKind::BitFlip, 1.0).unwrap(), &mut rng);
        let check = check_traps(aug, &c, &pos).unwrap();
        assert_eq!(check.flipped, 5);
        assert!(!check.accepted);
    }

    #[test]
    fn plus_traps_ignore_bit_flips_and_catch_phase_flips() {
        let mut rng = rng_from_seed(4);
        let c = TrapConfig::new(5, TrapState::Plus, 0.5, 0.5).unwrap();
        let (mut aug, pos) = insert_traps(StabilizerTableau::new_plus(2), &c, &mut rng).unwrap();
        aug.transmit(&PauliChannel::new(NoiseKind::BitFlip, 1.0).unwrap(), &mut rng);
        assert_eq!(check_traps(aug, &c, &pos).unwrap().flipped, 0);
        let (mut aug, pos) = insert_traps(StabilizerTableau::new_plus(2), &c, &mut rng).unwrap();
        aug.transmit(&PauliChannel::new(NoiseKind::PhaseFlip, 1.0).unwrap(), &mut rng);
        assert_eq!(check_traps(aug, &c, &pos).unwrap().flipped, 5);
    }

    #[test]
    fn position_mismatch() {
        let mut rng = rng_from_seed(5);
        let c = cfg(200, 0.3);
        let (aug, mut pos) = insert_traps(StabilizerTableau::new_plus(3), &c, &mut rng).unwrap();
        pos[0] = (pos[0] + 1) % 203;
        pos.sort_unstable();
        assert_eq!(check_traps(aug, &c, &pos), Err(Error::PositionMismatch));
    }

    #[test]
    fn flip_count_is_binomial() {
        let mut rng = rng_from_seed(6);
        let c = TrapConfig::new(5, TrapState::Zero, 0.5, 0.5).unwrap();
        let channel = PauliChannel::new(NoiseKind::BitFlip, 0.01).unwrap();
        let trials = 10_000;
        let mut total = 0usize;
        for _ in 0..trials {
            let (mut aug, pos) = insert_traps(StabilizerTableau::new_plus(3), &c, &mut rng).unwrap();
            aug.transmit(&channel, &mut rng);
            total += check_traps(aug, &c, &pos).unwrap().flipped;
        }
        let mean = total as f64 / trials as f64;
        let sd = (5.0 * 0.01 * 0.99 / trials as f64).sqrt();
        assert!((mean - 0.05).abs() <= 3.0 * sd, "{mean}");
    }

    #[test]
    fn flip_distribution_ignores_positions() {
        // Same channel, two different layouts: histograms of r agree.
        let c = TrapConfig::new(8, TrapState::Zero, 0.5, 0.5).unwrap();
        let channel = PauliChannel::new(NoiseKind::Depolarizing, 0.3).unwrap();
        let hist = |seed: u64| {
            let mut rng = rng_from_seed(seed);
            let mut h = [0f64; 9];
            let trials = 20_000;
            for _ in 0..trials {
                let (mut aug, pos) = insert_traps(StabilizerTableau::new_plus(4), &c, &mut rng).unwrap();
                aug.transmit(&channel, &mut rng);
                h[check_traps(aug, &c, &pos).unwrap().flipped] += 1.0 / trials as f64;
            }
            h
        };
        let (a, b) = (hist(7), hist(8));
        // Each trap flips with probability 0.2 (X or Y of the three errors).
        for r in 0..9usize {
            let expected = binomial(8, r as u64) * 0.2f64.powi(r as i32) * 0.8f64.powi(8 - r as i32);
            let tol = 4.0 * (expected * (1.0 - expected) / 20_000.0).sqrt() + 1e-3;
            assert!((a[r] - expected).abs() <= tol, "r={r}");
            assert!((b[r] - expected).abs() <= tol, "r={r}");
        }
    }

    fn binomial(n: u64, r: u64) -> f64 {
        (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn traps_leave_register_statistics_unchanged() {
        // Full (n+k)-qubit state: measure traps first, then the register in
        // setting 1. The register marginal must equal the trap-free one.
        let g = standard_graph(StandardGraph::Path { n: 3 }).unwrap();
        let c = TrapConfig::new(2, TrapState::Plus, 0.5, 0.5).unwrap();
        let mut rng = rng_from_seed(9);
        let (aug, pos) = insert_traps(StabilizerTableau::graph_state(&g), &c, &mut rng).unwrap();
        let full = to_dense(&aug.to_tableau()).unwrap();
        let register_slots: Vec<usize> = (0..5).filter(|s| !pos.contains(s)).collect();
        let bases = [Basis::X, Basis::Z, Basis::X];
        let mut seq: Vec<(usize, Basis)> = pos.iter().map(|&p| (p, Basis::X)).collect();
        seq.extend(register_slots.iter().zip(bases).map(|(&s, b)| (s, b)));
        let mut marginal: BTreeMap<Vec<Outcome>, f64> = BTreeMap::new();
        for (outcomes, p) in full.outcome_distribution(&seq) {
            assert!(outcomes[..2].iter().all(|&o| o == 1), "traps are |+⟩");
            *marginal.entry(outcomes[2..].to_vec()).or_default() += p;
        }
        let reference = DenseState::graph_state(&g)
            .unwrap()
            .outcome_distribution(&[(0, Basis::X), (1, Basis::Z), (2, Basis::X)]);
        assert_eq!(marginal.len(), reference.len());
        for (k, p) in reference {
            assert!((marginal[&k] - p).abs() < 1e-12);
        }
    }
}
