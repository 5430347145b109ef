//! The three-party protocol: Bob prepares `5K` copies, Charlie keeps `2K` and
//! forwards `3K` to Alice₁, who verifies `2K` of them and computes on one.
//! On a dispute Charlie hands his `2K` copies to a randomly drawn arbiter.
//!
//! Every run is a sequential state machine driven by one master seed; each
//! party draws from its own substream, so a run is reproducible from its
//! config alone.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    arbiter_certificate, client_certificate, lambda_range, plan_parameters, CertificateVariant,
    FidelityCertificate, ProtocolPlan, Role,
};
use crate::error::{Error, Result};
use crate::graph::ColoredGraph;
use crate::noisedetect::{check_traps, insert_traps, trap_threshold, PauliChannel, TrapConfig};
use crate::rng::{derive_path, derive_seed, substream, tag, SimRng};
use crate::stabsim::{Basis, Outcome, Pauli, StabilizerTableau};
use crate::witness::{run_verification, VerificationVerdict};

/// Single-qubit error an i.i.d. adversary applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    X,
    Z,
    /// `X`, `Y` or `Z` uniformly.
    Depolarizing,
}

/// Qubits an i.i.d. adversary attacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTarget {
    #[default]
    AllQubits,
    /// One vertex, 1-indexed.
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Honest,
    /// Each targeted qubit of each copy independently suffers `error` with
    /// probability `q`.
    IidPauli {
        q: f64,
        error: ErrorType,
        #[serde(default)]
        target: ErrorTarget,
    },
    /// Graph state of the target graph with `edge_delta` toggled.
    WrongGraph { edge_delta: Vec<(usize, usize)> },
    ProductPlus,
    ProductZero,
    /// `⌊fraction_bad · count⌋` copies at random positions follow `bad`,
    /// the rest are honest.
    MixedBatch {
        fraction_bad: f64,
        bad: Box<StrategyKind>,
    },
}

impl StrategyKind {
    pub fn validate(&self, g: &ColoredGraph) -> Result<()> {
        let n = g.n();
        match self {
            StrategyKind::Honest | StrategyKind::ProductPlus | StrategyKind::ProductZero => Ok(()),
            StrategyKind::IidPauli { q, target, .. } => {
                if !(0.0..=1.0).contains(q) {
                    return Err(Error::InvalidParams(format!("error probability {q} outside [0, 1]")));
                }
                if let ErrorTarget::Vertex(v) = *target {
                    if v == 0 || v > n {
                        return Err(Error::InvalidVertex { vertex: v, n });
                    }
                }
                Ok(())
            }
            StrategyKind::WrongGraph { edge_delta } => {
                if edge_delta.is_empty() {
                    return Err(Error::InvalidParams("wrong_graph needs at least one edge".into()));
                }
                let mut seen = Vec::new();
                for &(a, b) in edge_delta {
                    if a == b || a == 0 || b == 0 || a > n || b > n {
                        return Err(Error::InvalidEdge(a, b));
                    }
                    let e = (a.min(b), a.max(b));
                    if seen.contains(&e) {
                        return Err(Error::InvalidParams(format!("edge ({a}, {b}) toggled twice")));
                    }
                    seen.push(e);
                }
                Ok(())
            }
            StrategyKind::MixedBatch { fraction_bad, bad } => {
                if !(0.0..=1.0).contains(fraction_bad) {
                    return Err(Error::InvalidParams(format!(
                        "fraction_bad {fraction_bad} outside [0, 1]"
                    )));
                }
                if matches!(**bad, StrategyKind::MixedBatch { .. }) {
                    return Err(Error::InvalidParams("nested mixed_batch".into()));
                }
                bad.validate(g)
            }
        }
    }

    /// Short label for tables.
    pub fn label(&self) -> &'static str {
        match self {
            StrategyKind::Honest => "honest",
            StrategyKind::IidPauli { .. } => "iid_pauli",
            StrategyKind::WrongGraph { .. } => "wrong_graph",
            StrategyKind::ProductPlus => "product_plus",
            StrategyKind::ProductZero => "product_zero",
            StrategyKind::MixedBatch { .. } => "mixed_batch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryStrategy {
    #[serde(flatten)]
    pub kind: StrategyKind,
    /// Shifts Bob's random stream without touching anyone else's.
    #[serde(default)]
    pub seed_offset: u64,
}

impl AdversaryStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        AdversaryStrategy { kind, seed_offset: 0 }
    }

    pub fn honest() -> Self {
        Self::new(StrategyKind::Honest)
    }
}

fn prepare_one<R: Rng + ?Sized>(kind: &StrategyKind, g: &ColoredGraph, rng: &mut R) -> Result<StabilizerTableau> {
    let n = g.n();
    Ok(match kind {
        StrategyKind::Honest => StabilizerTableau::graph_state(g),
        StrategyKind::ProductPlus => StabilizerTableau::new_plus(n),
        StrategyKind::ProductZero => StabilizerTableau::new_zero(n),
        StrategyKind::IidPauli { q, error, target } => {
            let mut t = StabilizerTableau::graph_state(g);
            let qubits: Vec<usize> = match *target {
                ErrorTarget::AllQubits => (0..n).collect(),
                ErrorTarget::Vertex(v) => vec![v - 1],
            };
            for qb in qubits {
                if *q > 0.0 && rng.random_bool(*q) {
                    let p = match error {
                        ErrorType::X => Pauli::X,
                        ErrorType::Z => Pauli::Z,
                        ErrorType::Depolarizing => [Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..3)],
                    };
                    t.apply_single_pauli(qb, p);
                }
            }
            t
        }
        StrategyKind::WrongGraph { edge_delta } => {
            let mut edges: Vec<(usize, usize)> = g.edges().to_vec();
            for &(a, b) in edge_delta {
                let e = (a.min(b), a.max(b));
                match edges.iter().position(|&x| x == e) {
                    Some(i) => {
                        edges.remove(i);
                    }
                    None => edges.push(e),
                }
            }
            StabilizerTableau::graph_state_from_edges(n, &edges)?
        }
        StrategyKind::MixedBatch { .. } => {
            return Err(Error::InvalidParams("mixed_batch has no single-copy state".into()))
        }
    })
}

/// Bob's `count` copies under `strategy`, plus the indices of copies that
/// deviate from the honest state by construction (only for `mixed_batch`).
pub fn bob_prepare_with_positions(
    strategy: &AdversaryStrategy,
    g: &ColoredGraph,
    count: usize,
    rng: &mut SimRng,
) -> Result<(Vec<StabilizerTableau>, Vec<usize>)> {
    strategy.kind.validate(g)?;
    match &strategy.kind {
        StrategyKind::MixedBatch { fraction_bad, bad } => {
            let bad_count = ((fraction_bad * count as f64).floor() as usize).min(count);
            let mut positions = index::sample(rng, count, bad_count).into_vec();
            positions.sort_unstable();
            let mut is_bad = vec![false; count];
            for &p in &positions {
                is_bad[p] = true;
            }
            let copies = is_bad
                .iter()
                .map(|&b| prepare_one(if b { bad } else { &StrategyKind::Honest }, g, rng))
                .collect::<Result<_>>()?;
            Ok((copies, positions))
        }
        kind => {
            let copies = (0..count).map(|_| prepare_one(kind, g, rng)).collect::<Result<_>>()?;
            Ok((copies, Vec::new()))
        }
    }
}

pub fn bob_prepare(
    strategy: &AdversaryStrategy,
    g: &ColoredGraph,
    count: usize,
    rng: &mut SimRng,
) -> Result<Vec<StabilizerTableau>> {
    bob_prepare_with_positions(strategy, g, count, rng).map(|(c, _)| c)
}

/// A copy tagged with its index in Bob's batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Register {
    pub id: usize,
    pub state: StabilizerTableau,
}

/// Keep a uniform `2K`-subset, forward the other `3K` in batch order.
pub fn charlie_split_and_sample(
    batch: Vec<Register>,
    plan: &ProtocolPlan,
    rng: &mut SimRng,
) -> Result<(Vec<Register>, Vec<Register>)> {
    if batch.len() != plan.copies {
        return Err(Error::WrongBatchSize {
            expected: plan.copies,
            got: batch.len(),
        });
    }
    let mut keep = vec![false; batch.len()];
    for i in index::sample(rng, batch.len(), 2 * plan.k) {
        keep[i] = true;
    }
    let (kept, forwarded): (Vec<_>, Vec<_>) = batch.into_iter().zip(keep).partition(|(_, k)| *k);
    Ok((
        kept.into_iter().map(|(r, _)| r).collect(),
        forwarded.into_iter().map(|(r, _)| r).collect(),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Computation {
    pub register: usize,
    /// X-basis outcomes, one per qubit.
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientOutcome {
    /// Ids of the `2K` registers verified, in the order passed to the test.
    pub verified: Vec<usize>,
    pub verdict: VerificationVerdict,
    pub computation: Option<Computation>,
    pub discarded: Vec<usize>,
}

/// Verify `2K` of the `3K` forwarded copies at `C = K/(2n)`; on acceptance
/// measure one of the rest in the X basis as a stand-in for the computation.
pub fn alice_verify_and_compute(
    forwarded: Vec<Register>,
    g: &ColoredGraph,
    plan: &ProtocolPlan,
    rng: &mut SimRng,
) -> Result<ClientOutcome> {
    let k = plan.k;
    if forwarded.len() != 3 * k {
        return Err(Error::WrongBatchSize {
            expected: 3 * k,
            got: forwarded.len(),
        });
    }
    let mut chosen = vec![false; forwarded.len()];
    for i in index::sample(rng, forwarded.len(), 2 * k) {
        chosen[i] = true;
    }
    let (sampled, rest): (Vec<_>, Vec<_>) = forwarded.into_iter().zip(chosen).partition(|(_, c)| *c);
    let verified: Vec<usize> = sampled.iter().map(|(r, _)| r.id).collect();
    let seed: u64 = rng.random();
    let verdict = run_verification(
        sampled.into_iter().map(|(r, _)| r.state).collect(),
        g,
        plan.c_client,
        seed,
    )?;
    let mut rest: Vec<Register> = rest.into_iter().map(|(r, _)| r).collect();
    let computation = if verdict.accepted {
        let pick = rng.random_range(0..rest.len());
        let Register { id, mut state } = rest.remove(pick);
        let outcomes = (0..state.n()).map(|q| state.measure(q, Basis::X, rng)).collect();
        Some(Computation { register: id, outcomes })
    } else {
        None
    };
    Ok(ClientOutcome {
        verified,
        verdict,
        computation,
        discarded: rest.iter().map(|r| r.id).collect(),
    })
}

/// When Bob contests the client's claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisputePolicy {
    #[default]
    AutoIfReject,
    Never,
    Always,
}

impl DisputePolicy {
    pub fn raises(self, client_accepted: bool) -> bool {
        match self {
            DisputePolicy::AutoIfReject => !client_accepted,
            DisputePolicy::Never => false,
            DisputePolicy::Always => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blame {
    #[default]
    None,
    Bob,
    Alice1,
}

/// Arbiter draws allowed before arbitration is abandoned.
pub const MAX_ARBITER_DRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArbiterSettings {
    /// Houses `l`; arbiters are drawn from `2..=l`.
    pub pool_size: usize,
    pub refusal_prob: f64,
    pub lambda: f64,
    pub variant: CertificateVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArbiterOutcome {
    /// Houses asked in turn; the last one accepted unless `t` is `None`.
    pub asked: Vec<usize>,
    pub t: Option<usize>,
    pub verdict: Option<VerificationVerdict>,
    pub blame: Blame,
    pub certificate: Option<FidelityCertificate>,
}

/// Hand Charlie's `2K` copies to a random house `t ∈ {2..l}` which verifies
/// them at `C = 3K/(4n)`: acceptance blames Alice₁, rejection blames Bob.
pub fn arbitrate(
    kept: Vec<Register>,
    g: &ColoredGraph,
    plan: &ProtocolPlan,
    settings: &ArbiterSettings,
    dispute_raised: bool,
    rng: &mut SimRng,
) -> Result<ArbiterOutcome> {
    if !dispute_raised {
        return Err(Error::NoDispute);
    }
    if kept.len() != 2 * plan.k {
        return Err(Error::WrongBatchSize {
            expected: 2 * plan.k,
            got: kept.len(),
        });
    }
    if settings.pool_size < 2 {
        return Err(Error::InvalidConfig("client pool needs l >= 2".into()));
    }
    let mut asked = Vec::new();
    let mut t = None;
    for _ in 0..MAX_ARBITER_DRAWS {
        let house = rng.random_range(2..=settings.pool_size);
        asked.push(house);
        if settings.refusal_prob == 0.0 || !rng.random_bool(settings.refusal_prob) {
            t = Some(house);
            break;
        }
    }
    if t.is_none() {
        return Ok(ArbiterOutcome {
            asked,
            t,
            verdict: None,
            blame: Blame::None,
            certificate: None,
        });
    }
    let seed: u64 = rng.random();
    let verdict = run_verification(kept.into_iter().map(|r| r.state).collect(), g, plan.c_arbiter, seed)?;
    let (blame, certificate) = if verdict.accepted {
        let cert = arbiter_certificate(plan.n, plan.k, verdict.failures(), settings.lambda, settings.variant)?;
        (Blame::Alice1, Some(cert))
    } else {
        (Blame::Bob, None)
    };
    Ok(ArbiterOutcome {
        asked,
        t,
        verdict: Some(verdict),
        blame,
        certificate,
    })
}

fn default_pool_size() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub graph: ColoredGraph,
    pub plan: ProtocolPlan,
    pub strategy: AdversaryStrategy,
    /// Per-qubit channel noise on every hop.
    pub noise: PauliChannel,
    /// Houses `l`.
    #[serde(default = "default_pool_size")]
    pub client_pool_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub dispute_policy: DisputePolicy,
    #[serde(default)]
    pub traps: Option<TrapConfig>,
    #[serde(default)]
    pub arbiter_refusal_prob: f64,
    /// Defaults to the midpoint of the admissible range.
    #[serde(default)]
    pub lambda_client: Option<f64>,
    #[serde(default)]
    pub lambda_arbiter: Option<f64>,
    #[serde(default)]
    pub variant: CertificateVariant,
}

impl ProtocolConfig {
    /// Honest Bob, noiseless channels, `K = ⌈n² ln n⌉`.
    pub fn new(graph: ColoredGraph, seed: u64) -> Result<Self> {
        let plan = plan_parameters(graph.n())?;
        Ok(ProtocolConfig {
            graph,
            plan,
            strategy: AdversaryStrategy::honest(),
            noise: PauliChannel::noiseless(),
            client_pool_size: default_pool_size(),
            seed,
            dispute_policy: DisputePolicy::default(),
            traps: None,
            arbiter_refusal_prob: 0.0,
            lambda_client: None,
            lambda_arbiter: None,
            variant: CertificateVariant::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if self.plan.n != n {
            return Err(Error::InvalidConfig(format!("plan is for n = {}, graph has {n}", self.plan.n)));
        }
        if n < crate::bounds::MIN_QUBITS {
            return Err(Error::TooSmallN(n));
        }
        if self.plan.k == 0 || self.plan.copies != 5 * self.plan.k {
            return Err(Error::InvalidConfig("plan needs K >= 1 and 5K copies".into()));
        }
        if self.client_pool_size < 2 {
            return Err(Error::InvalidConfig("client pool needs l >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.arbiter_refusal_prob) {
            return Err(Error::InvalidConfig(format!(
                "arbiter refusal probability {} outside [0, 1)",
                self.arbiter_refusal_prob
            )));
        }
        PauliChannel::new(self.noise.kind, self.noise.p)?;
        self.strategy.kind.validate(&self.graph)?;
        if let Some(t) = &self.traps {
            trap_threshold(t)?;
        }
        self.lambda(Role::Client)?;
        self.lambda(Role::Arbiter)?;
        Ok(())
    }

    /// `λ` used for `role`'s certificate.
    pub fn lambda(&self, role: Role) -> Result<f64> {
        let (lo, hi) = lambda_range(self.graph.n(), role, self.variant)?;
        let chosen = match role {
            Role::Client => self.lambda_client,
            Role::Arbiter => self.lambda_arbiter,
        };
        match chosen {
            None => Ok((lo + hi) / 2.0),
            Some(l) if l >= lo - 1e-12 && l <= hi + 1e-12 => Ok(l),
            Some(l) => Err(Error::LambdaOutOfRange { lambda: l, lo, hi }),
        }
    }

    /// Same config re-seeded for trial `index`.
    pub fn for_trial(&self, index: u64) -> Self {
        ProtocolConfig {
            seed: trial_seed(self.seed, index),
            ..self.clone()
        }
    }
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    derive_path(master, &[tag("trial"), index])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    BobToCharlie,
    CharlieToClient,
    CharlieToArbiter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HopStats {
    pub hop: Hop,
    pub registers: usize,
    /// Register and trap qubits sent.
    pub qubits: usize,
    pub trap_flips: usize,
    /// Registers whose trap check rejected the channel.
    pub trap_rejections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ProtocolStep {
    Request { n: usize, copies: usize },
    Preparation { copies: usize, deviating: Vec<usize> },
    Transfer(HopStats),
    Storage { kept: Vec<usize>, forwarded: Vec<usize> },
    Verification { role: Role, registers: Vec<usize>, failures: usize, accepted: bool },
    Computation { register: usize },
    Discard { registers: Vec<usize> },
    Dispute,
    ArbiterSelection { asked: Vec<usize>, t: Option<usize> },
    Arbitration { accepted: bool, blame: Blame },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub copies_prepared: usize,
    pub qubits_transmitted: usize,
    /// Verification measurements by Alice₁.
    pub local_measurements_client: usize,
    /// Measurements of the computation register.
    pub local_measurements_computation: usize,
    pub local_measurements_arbiter: usize,
}

/// Where each prepared register ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Accounting {
    pub prepared: usize,
    pub kept: usize,
    pub forwarded: usize,
    pub verified_client: usize,
    pub computed: usize,
    pub discarded: usize,
    pub verified_arbiter: usize,
}

impl Accounting {
    pub fn is_conserved(&self) -> bool {
        self.kept + self.forwarded == self.prepared
            && self.verified_client + self.computed + self.discarded == self.forwarded
            && self.verified_arbiter <= self.kept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub config: ProtocolConfig,
    pub steps: Vec<ProtocolStep>,
    pub counters: Counters,
    pub accounting: Accounting,
    pub client_verdict: VerificationVerdict,
    pub computation: Option<Computation>,
    pub arbiter_verdict: Option<VerificationVerdict>,
    pub blame: Blame,
    pub client_certificate: Option<FidelityCertificate>,
    pub arbiter_certificate: Option<FidelityCertificate>,
}

impl ProtocolTranscript {
    pub fn client_accepted(&self) -> bool {
        self.client_verdict.accepted
    }

    pub fn arbiter_accepted(&self) -> Option<bool> {
        self.arbiter_verdict.as_ref().map(|v| v.accepted)
    }

    pub fn hops(&self) -> impl Iterator<Item = &HopStats> {
        self.steps.iter().filter_map(|s| match s {
            ProtocolStep::Transfer(h) => Some(h),
            _ => None,
        })
    }
}

/// Send `registers` over one hop, interleaving traps when configured.
pub fn transfer(
    registers: &mut [Register],
    hop: Hop,
    noise: &PauliChannel,
    traps: Option<&TrapConfig>,
    rng: &mut SimRng,
) -> Result<HopStats> {
    let mut stats = HopStats {
        hop,
        registers: registers.len(),
        qubits: 0,
        trap_flips: 0,
        trap_rejections: 0,
    };
    for r in registers.iter_mut() {
        stats.qubits += r.state.n();
        match traps {
            None => noise.apply(&mut r.state, rng),
            Some(cfg) => {
                stats.qubits += cfg.k;
                let state = std::mem::replace(&mut r.state, StabilizerTableau::new_zero(1));
                let (mut aug, positions) = insert_traps(state, cfg, rng)?;
                aug.transmit(noise, rng);
                let check = check_traps(aug, cfg, &positions)?;
                stats.trap_flips += check.flipped;
                stats.trap_rejections += usize::from(!check.accepted);
                r.state = check.register;
            }
        }
    }
    Ok(stats)
}

/// Run one protocol instance end to end.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolTranscript> {
    config.validate()?;
    let g = &config.graph;
    let plan = &config.plan;
    let n = g.n();
    let seed = config.seed;
    let traps = config.traps.as_ref();
    let mut steps = vec![ProtocolStep::Request {
        n,
        copies: plan.copies,
    }];
    let mut counters = Counters::default();
    let mut accounting = Accounting::default();

    let mut bob_rng = substream(
        derive_seed(seed, tag("protocol/bob")),
        config.strategy.seed_offset,
    );
    let (copies, deviating) = bob_prepare_with_positions(&config.strategy, g, plan.copies, &mut bob_rng)?;
    counters.copies_prepared = copies.len();
    accounting.prepared = copies.len();
    steps.push(ProtocolStep::Preparation {
        copies: copies.len(),
        deviating,
    });
    let mut batch: Vec<Register> = copies
        .into_iter()
        .enumerate()
        .map(|(id, state)| Register { id, state })
        .collect();

    let hop1 = transfer(
        &mut batch,
        Hop::BobToCharlie,
        &config.noise,
        traps,
        &mut substream(seed, tag("protocol/hop1")),
    )?;
    counters.qubits_transmitted += hop1.qubits;
    steps.push(ProtocolStep::Transfer(hop1));

    let (mut kept, mut forwarded) =
        charlie_split_and_sample(batch, plan, &mut substream(seed, tag("protocol/charlie")))?;
    accounting.kept = kept.len();
    accounting.forwarded = forwarded.len();
    steps.push(ProtocolStep::Storage {
        kept: kept.iter().map(|r| r.id).collect(),
        forwarded: forwarded.iter().map(|r| r.id).collect(),
    });

    let hop2 = transfer(
        &mut forwarded,
        Hop::CharlieToClient,
        &config.noise,
        traps,
        &mut substream(seed, tag("protocol/hop2")),
    )?;
    counters.qubits_transmitted += hop2.qubits;
    steps.push(ProtocolStep::Transfer(hop2));

    let client = alice_verify_and_compute(forwarded, g, plan, &mut substream(seed, tag("protocol/alice1")))?;
    counters.local_measurements_client = client.verified.len() * n;
    accounting.verified_client = client.verified.len();
    accounting.discarded = client.discarded.len();
    steps.push(ProtocolStep::Verification {
        role: Role::Client,
        registers: client.verified.clone(),
        failures: client.verdict.failures(),
        accepted: client.verdict.accepted,
    });
    let client_certificate = if client.verdict.accepted {
        Some(client_certificate(
            n,
            plan.k,
            client.verdict.failures(),
            config.lambda(Role::Client)?,
        )?)
    } else {
        None
    };
    if let Some(c) = &client.computation {
        counters.local_measurements_computation = c.outcomes.len();
        accounting.computed = 1;
        steps.push(ProtocolStep::Computation { register: c.register });
    }
    steps.push(ProtocolStep::Discard {
        registers: client.discarded.clone(),
    });

    let mut blame = if client.verdict.accepted { Blame::None } else { Blame::Bob };
    let mut arbiter_verdict = None;
    let mut arbiter_cert = None;
    if config.dispute_policy.raises(client.verdict.accepted) {
        steps.push(ProtocolStep::Dispute);
        let hop3 = transfer(
            &mut kept,
            Hop::CharlieToArbiter,
            &config.noise,
            traps,
            &mut substream(seed, tag("protocol/hop3")),
        )?;
        counters.qubits_transmitted += hop3.qubits;
        steps.push(ProtocolStep::Transfer(hop3));
        let settings = ArbiterSettings {
            pool_size: config.client_pool_size,
            refusal_prob: config.arbiter_refusal_prob,
            lambda: config.lambda(Role::Arbiter)?,
            variant: config.variant,
        };
        let kept_ids: Vec<usize> = kept.iter().map(|r| r.id).collect();
        let outcome = arbitrate(kept, g, plan, &settings, true, &mut substream(seed, tag("protocol/arbiter")))?;
        steps.push(ProtocolStep::ArbiterSelection {
            asked: outcome.asked.clone(),
            t: outcome.t,
        });
        if let Some(v) = &outcome.verdict {
            counters.local_measurements_arbiter = kept_ids.len() * n;
            accounting.verified_arbiter = kept_ids.len();
            steps.push(ProtocolStep::Verification {
                role: Role::Arbiter,
                registers: kept_ids,
                failures: v.failures(),
                accepted: v.accepted,
            });
            steps.push(ProtocolStep::Arbitration {
                accepted: v.accepted,
                blame: outcome.blame,
            });
            blame = outcome.blame;
        }
        arbiter_verdict = outcome.verdict;
        arbiter_cert = outcome.certificate;
    }

    let transcript = ProtocolTranscript {
        config: config.clone(),
        steps,
        counters,
        accounting,
        client_verdict: client.verdict,
        computation: client.computation,
        arbiter_verdict,
        blame,
        client_certificate,
        arbiter_certificate: arbiter_cert,
    };
    if !transcript.accounting.is_conserved() {
        return Err(Error::InvalidParams("register accounting violated".into()));
    }
    Ok(transcript)
}

/// Run trial `index` of a Monte Carlo experiment.
pub fn run_trial(config: &ProtocolConfig, index: u64) -> Result<ProtocolTranscript> {
    run_protocol(&config.for_trial(index))
}

/// Trials `0..trials`, in order.
pub fn run_trials(config: &ProtocolConfig, trials: u64) -> Result<Vec<ProtocolTranscript>> {
    (0..trials).map(|i| run_trial(config, i)).collect()
}

/// Re-run the embedded config and report whether the result is identical.
pub fn replay_matches(transcript: &ProtocolTranscript) -> Result<bool> {
    Ok(run_protocol(&transcript.config)? == *transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{standard_graph, StandardGraph};
    use crate::rng::rng_from_seed;
    use crate::stabsim::{fidelity_oracle, Ensemble};

    fn cycle6() -> ColoredGraph {
        standard_graph(StandardGraph::EvenCycle { n: 6 }).unwrap()
    }

    fn config(kind: StrategyKind, policy: DisputePolicy, seed: u64) -> ProtocolConfig {
        let mut c = ProtocolConfig::new(cycle6(), seed).unwrap();
        c.strategy = AdversaryStrategy::new(kind);
        c.dispute_policy = policy;
        c
    }

    fn registers(n: usize) -> Vec<Register> {
        (0..n)
            .map(|id| Register {
                id,
                state: StabilizerTableau::new_plus(1),
            })
            .collect()
    }

    #[test]
    fn honest_preparation() {
        let g = cycle6();
        let copies = bob_prepare(&AdversaryStrategy::honest(), &g, 325, &mut rng_from_seed(1)).unwrap();
        assert_eq!(copies.len(), 325);
        for c in copies.iter().step_by(50) {
            let f = fidelity_oracle(&Ensemble::pure(c.clone()), &g).unwrap();
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn product_zero_preparation() {
        let g = cycle6();
        let s = AdversaryStrategy::new(StrategyKind::ProductZero);
        for c in bob_prepare(&s, &g, 5, &mut rng_from_seed(1)).unwrap() {
            assert_eq!(c, StabilizerTableau::new_zero(6));
        }
    }

    #[test]
    fn mixed_batch_count_is_exact() {
        let g = cycle6();
        let s = AdversaryStrategy::new(StrategyKind::MixedBatch {
            fraction_bad: 0.3,
            bad: Box::new(StrategyKind::ProductZero),
        });
        let (copies, bad) = bob_prepare_with_positions(&s, &g, 325, &mut rng_from_seed(2)).unwrap();
        assert_eq!(bad.len(), 97);
        let zero = StabilizerTableau::new_zero(6);
        assert_eq!(copies.iter().filter(|c| **c == zero).count(), 97);
        for &b in &bad {
            assert_eq!(copies[b], zero);
        }
    }

    #[test]
    fn wrong_graph_toggles_edges() {
        let g = cycle6();
        let s = AdversaryStrategy::new(StrategyKind::WrongGraph {
            edge_delta: vec![(1, 2), (1, 4)],
        });
        let c = &bob_prepare(&s, &g, 1, &mut rng_from_seed(3)).unwrap()[0];
        let expected =
            StabilizerTableau::graph_state_from_edges(6, &[(2, 3), (3, 4), (4, 5), (5, 6), (1, 6), (1, 4)]).unwrap();
        let a = to_dense_pair(c, &expected);
        assert!(a);
        let bad = StrategyKind::WrongGraph {
            edge_delta: vec![(2, 2)],
        };
        assert!(bad.validate(&g).is_err());
    }

    fn to_dense_pair(a: &StabilizerTableau, b: &StabilizerTableau) -> bool {
        let (a, b) = (crate::stabsim::to_dense(a).unwrap(), crate::stabsim::to_dense(b).unwrap());
        a.approx_eq_up_to_phase(&b, 1e-10)
    }

    #[test]
    fn strategy_validation() {
        let g = cycle6();
        let q = StrategyKind::IidPauli {
            q: 1.5,
            error: ErrorType::X,
            target: ErrorTarget::AllQubits,
        };
        assert!(q.validate(&g).is_err());
        let v = StrategyKind::IidPauli {
            q: 0.5,
            error: ErrorType::X,
            target: ErrorTarget::Vertex(7),
        };
        assert!(v.validate(&g).is_err());
    }

    #[test]
    fn charlie_split() {
        let plan = crate::bounds::plan_with_k(6, 1);
        let (kept, fwd) = charlie_split_and_sample(registers(5), &plan, &mut rng_from_seed(4)).unwrap();
        assert_eq!((kept.len(), fwd.len()), (2, 3));
        assert!(fwd.windows(2).all(|w| w[0].id < w[1].id));
        assert!(matches!(
            charlie_split_and_sample(registers(4), &plan, &mut rng_from_seed(4)),
            Err(Error::WrongBatchSize { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn charlie_keeps_uniformly() {
        let plan = crate::bounds::plan_with_k(6, 2);
        let mut counts = [0usize; 10];
        let mut rng = rng_from_seed(5);
        let trials = 10_000;
        for _ in 0..trials {
            let (kept, _) = charlie_split_and_sample(registers(10), &plan, &mut rng).unwrap();
            for r in kept {
                counts[r.id] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / trials as f64 - 0.4).abs() <= 0.02);
        }
    }

    #[test]
    fn charlie_replays() {
        let plan = crate::bounds::plan_with_k(6, 3);
        let a = charlie_split_and_sample(registers(15), &plan, &mut rng_from_seed(6)).unwrap();
        let b = charlie_split_and_sample(registers(15), &plan, &mut rng_from_seed(6)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn honest_run_counters() {
        let t = run_protocol(&config(StrategyKind::Honest, DisputePolicy::Never, 7)).unwrap();
        assert!(t.client_accepted());
        assert_eq!(t.blame, Blame::None);
        assert_eq!(t.counters.copies_prepared, 325);
        assert_eq!(t.counters.local_measurements_client, 780);
        assert_eq!(t.counters.local_measurements_computation, 6);
        assert_eq!(t.counters.local_measurements_arbiter, 0);
        assert_eq!(t.counters.qubits_transmitted, 325 * 6 + 195 * 6);
        assert!(t.accounting.is_conserved());
        assert_eq!(t.accounting.discarded, 64);
        assert!(t.client_certificate.is_some());
        assert!(t.computation.is_some());
    }

    #[test]
    fn honest_dispute_blames_client() {
        let t = run_protocol(&config(StrategyKind::Honest, DisputePolicy::Always, 8)).unwrap();
        assert_eq!(t.arbiter_accepted(), Some(true));
        assert_eq!(t.blame, Blame::Alice1);
        assert_eq!(t.counters.local_measurements_arbiter, 780);
        assert_eq!(t.counters.qubits_transmitted, 10 * 65 * 6);
        let cert = t.arbiter_certificate.unwrap();
        assert_eq!(cert.role, Role::Arbiter);
    }

    #[test]
    fn product_zero_is_blamed() {
        for seed in 0..20 {
            let t = run_protocol(&config(StrategyKind::ProductZero, DisputePolicy::AutoIfReject, seed)).unwrap();
            assert!(!t.client_accepted());
            assert!(t.computation.is_none());
            assert_eq!(t.arbiter_accepted(), Some(false));
            assert_eq!(t.blame, Blame::Bob);
        }
    }

    #[test]
    fn rejection_without_dispute_blames_bob() {
        let t = run_protocol(&config(StrategyKind::ProductZero, DisputePolicy::Never, 1)).unwrap();
        assert_eq!(t.blame, Blame::Bob);
        assert!(t.arbiter_verdict.is_none());
        assert_eq!(t.accounting.discarded, 65);
    }

    #[test]
    fn no_dispute_error() {
        let plan = crate::bounds::plan_with_k(6, 1);
        let s = ArbiterSettings {
            pool_size: 3,
            refusal_prob: 0.0,
            lambda: 1.0,
            variant: CertificateVariant::Appendix,
        };
        let r = arbitrate(registers(2), &cycle6(), &plan, &s, false, &mut rng_from_seed(1));
        assert_eq!(r.unwrap_err(), Error::NoDispute);
    }

    #[test]
    fn arbiter_is_drawn_from_pool() {
        let mut c = config(StrategyKind::Honest, DisputePolicy::Always, 0);
        c.client_pool_size = 5;
        c.arbiter_refusal_prob = 0.5;
        for i in 0..20 {
            let t = run_trial(&c, i).unwrap();
            let step = t
                .steps
                .iter()
                .find_map(|s| match s {
                    ProtocolStep::ArbiterSelection { asked, t } => Some((asked.clone(), *t)),
                    _ => None,
                })
                .unwrap();
            assert!(step.0.iter().all(|&h| (2..=5).contains(&h)));
            assert_eq!(step.1, step.0.last().copied());
        }
    }

    #[test]
    fn z_on_s1_vertex_fails_every_group1_register() {
        let g = cycle6();
        let v = g.s1()[0];
        let kind = StrategyKind::IidPauli {
            q: 1.0,
            error: ErrorType::Z,
            target: ErrorTarget::Vertex(v),
        };
        let t = run_protocol(&config(kind, DisputePolicy::AutoIfReject, 3)).unwrap();
        assert_eq!(t.client_verdict.k1, 65);
        assert_eq!(t.client_verdict.k2, 0);
        let a = t.arbiter_verdict.unwrap();
        assert_eq!((a.k1, a.k2), (65, 0));
        assert_eq!(t.blame, Blame::Bob);
    }

    #[test]
    fn transcripts_replay() {
        let mut c = config(
            StrategyKind::IidPauli {
                q: 0.05,
                error: ErrorType::Depolarizing,
                target: ErrorTarget::AllQubits,
            },
            DisputePolicy::Always,
            11,
        );
        c.noise = PauliChannel::new(crate::noisedetect::NoiseKind::BitFlip, 0.01).unwrap();
        let t = run_trial(&c, 4).unwrap();
        assert!(replay_matches(&t).unwrap());
        assert_ne!(run_trial(&c, 5).unwrap(), t);
    }

    #[test]
    fn traps_are_counted() {
        let mut c = config(StrategyKind::Honest, DisputePolicy::Never, 12);
        c.traps = Some(TrapConfig::new(2000, crate::noisedetect::TrapState::Zero, 0.05, 0.99).unwrap());
        c.plan = crate::bounds::plan_with_k(6, 4);
        let t = run_protocol(&c).unwrap();
        assert_eq!(t.counters.qubits_transmitted, 20 * 2006 + 12 * 2006);
        assert!(t.hops().all(|h| h.trap_flips == 0 && h.trap_rejections == 0));
        assert!(t.client_accepted());
    }

    #[test]
    fn infeasible_traps_are_rejected() {
        let mut c = config(StrategyKind::Honest, DisputePolicy::Never, 12);
        c.traps = Some(TrapConfig::new(100, crate::noisedetect::TrapState::Zero, 0.1, 0.99).unwrap());
        assert!(matches!(run_protocol(&c), Err(Error::Infeasible(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = config(StrategyKind::Honest, DisputePolicy::Never, 0);
        c.client_pool_size = 1;
        assert!(c.validate().is_err());
        let mut c = config(StrategyKind::Honest, DisputePolicy::Never, 0);
        c.lambda_arbiter = Some(100.0);
        assert!(matches!(c.validate(), Err(Error::LambdaOutOfRange { .. })));
        let small = standard_graph(StandardGraph::Path { n: 5 }).unwrap();
        assert_eq!(ProtocolConfig::new(small, 0).unwrap_err(), Error::TooSmallN(5));
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = config(
            StrategyKind::MixedBatch {
                fraction_bad: 0.1,
                bad: Box::new(StrategyKind::IidPauli {
                    q: 0.2,
                    error: ErrorType::Z,
                    target: ErrorTarget::Vertex(2),
                }),
            },
            DisputePolicy::Always,
            99,
        );
        c.traps = Some(TrapConfig::new(2000, crate::noisedetect::TrapState::Plus, 0.05, 0.99).unwrap());
        let s = serde_json::to_string(&c).unwrap();
        let back: ProtocolConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
