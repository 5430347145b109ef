use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pvbqc::bounds::{
    arbiter_certificate, azuma_hoeffding_bound, client_certificate, cost_comparison, lambda_range, plan_parameters,
    serfling_bound, AzumaParams, CertificateVariant, CostReport, FidelityCertificate, ProtocolPlan, Role,
    SatoParams, SerflingParams,
};
use pvbqc::noisedetect::{trap_threshold, TrapConfig, TrapState};
use pvbqc::protocol::{
    bob_prepare, replay_matches, run_trial, transfer, trial_seed, AdversaryStrategy, Blame, ErrorTarget, ErrorType,
    Hop, ProtocolTranscript, Register, StrategyKind,
};
use pvbqc::rng::{derive_seed, substream, tag};
use pvbqc::witness::{run_verification, VerificationVerdict};
use pvbqc::ColoredGraph;

use crate::config::{ExperimentArgs, ExperimentConfig, OutputFormat, RoleArg, VariantArg};
use crate::{CliError, Command, EXIT_INTERNAL};

pub fn run(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Verify(args) => cmd_verify(&ExperimentConfig::resolve(&args)?, out, err),
        Command::Protocol(args) => cmd_protocol(&ExperimentConfig::resolve(&args)?, out, err),
        Command::Sweep(args) => cmd_sweep(&args, out, err),
        Command::Bounds(args) => cmd_bounds(&args, out),
        Command::Replay(args) => cmd_replay(&args, out),
    }
}

fn par_trials<T, F>(workers: Option<usize>, first: u64, count: u64, f: F) -> Result<Vec<T>, CliError>
where
    T: Send,
    F: Fn(u64) -> Result<T, CliError> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::internal(format!("worker pool: {e}")))?;
    pool.install(|| (first..first + count).into_par_iter().map(&f).collect())
}

#[derive(Serialize)]
struct Tagged<'a, T> {
    record: &'static str,
    #[serde(flatten)]
    row: &'a T,
}

#[derive(Serialize)]
struct WithTranscript<'a, T> {
    record: &'static str,
    #[serde(flatten)]
    row: &'a T,
    transcript: &'a ProtocolTranscript,
}

fn write_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows to `out`; the summary follows them in JSON-lines mode and goes to
/// `err` in CSV mode so the table stays rectangular.
fn emit<T: Serialize, S: Serialize>(
    format: OutputFormat,
    rows: &[T],
    summary: Option<&S>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<(), CliError> {
    match format {
        OutputFormat::JsonLines => {
            for r in rows {
                write_json(out, &Tagged { record: "trial", row: r })?;
            }
            if let Some(s) = summary {
                write_json(out, &Tagged { record: "summary", row: s })?;
            }
        }
        OutputFormat::Csv => {
            write_csv(out, rows)?;
            if let Some(s) = summary {
                write_json(err, &Tagged { record: "summary", row: s })?;
            }
        }
    }
    Ok(())
}

fn default_lambda(n: usize, role: Role, variant: CertificateVariant) -> Result<f64, CliError> {
    let (lo, hi) = lambda_range(n, role, variant)?;
    Ok((lo + hi) / 2.0)
}

fn certificate(
    plan: &ProtocolPlan,
    role: RoleArg,
    failures: usize,
    lambda: Option<f64>,
    variant: CertificateVariant,
) -> Result<FidelityCertificate, CliError> {
    let n = plan.n;
    Ok(match role {
        RoleArg::Client => {
            let l = lambda.map_or_else(|| default_lambda(n, Role::Client, variant), Ok)?;
            client_certificate(n, plan.k, failures, l)?
        }
        RoleArg::Arbiter => {
            let l = lambda.map_or_else(|| default_lambda(n, Role::Arbiter, variant), Ok)?;
            arbiter_certificate(n, plan.k, failures, l, variant)?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub master_seed: u64,
    pub trial: u64,
    pub trial_seed: u64,
    pub n: usize,
    pub k: usize,
    pub strategy: String,
    pub threshold: f64,
    pub k1: usize,
    pub k2: usize,
    pub accepted: bool,
    pub fidelity_bound: Option<f64>,
    pub confidence_bound: Option<f64>,
    pub vacuous: Option<bool>,
    pub trap_flips: usize,
    pub trap_rejections: usize,
}

#[derive(Debug, Clone, Serialize)]
struct VerifySummary {
    master_seed: u64,
    trials: u64,
    accepted: u64,
    acceptance_rate: f64,
    mean_failures: f64,
}

#[derive(Clone)]
struct VerifySetup {
    graph: ColoredGraph,
    plan: ProtocolPlan,
    threshold: f64,
    uses_default_threshold: bool,
}

fn verify_setup(cfg: &ExperimentConfig, graph: &crate::GraphSpec) -> Result<VerifySetup, CliError> {
    let g = graph.build()?;
    let plan = cfg.plan(g.n())?;
    let default = match cfg.role {
        RoleArg::Client => plan.c_client,
        RoleArg::Arbiter => plan.c_arbiter,
    };
    cfg.strategy.validate(&g)?;
    Ok(VerifySetup {
        graph: g,
        plan,
        threshold: cfg.c_override.unwrap_or(default),
        uses_default_threshold: cfg.c_override.is_none(),
    })
}

/// One verification trial: Bob prepares `2K` copies, they cross one noisy
/// hop, and the verifier runs the test.
fn verify_trial(
    cfg: &ExperimentConfig,
    strategy: &StrategyKind,
    noise_p: f64,
    setup: &VerifySetup,
    index: u64,
) -> Result<(VerificationVerdict, usize, usize, u64), CliError> {
    let seed = trial_seed(cfg.seed, index);
    let count = 2 * setup.plan.k;
    let copies = bob_prepare(
        &AdversaryStrategy::new(strategy.clone()),
        &setup.graph,
        count,
        &mut substream(seed, tag("verify/bob")),
    )?;
    let mut registers: Vec<Register> = copies
        .into_iter()
        .enumerate()
        .map(|(id, state)| Register { id, state })
        .collect();
    let hop = match cfg.role {
        RoleArg::Client => Hop::CharlieToClient,
        RoleArg::Arbiter => Hop::CharlieToArbiter,
    };
    let mut noise = cfg.noise;
    noise.p = noise_p;
    let stats = transfer(
        &mut registers,
        hop,
        &noise,
        cfg.traps.as_ref(),
        &mut substream(seed, tag("verify/channel")),
    )?;
    let verdict = run_verification(
        registers.into_iter().map(|r| r.state).collect(),
        &setup.graph,
        setup.threshold,
        derive_seed(seed, tag("verify/test")),
    )?;
    Ok((verdict, stats.trap_flips, stats.trap_rejections, seed))
}

fn verify_rows(
    cfg: &ExperimentConfig,
    strategy: &StrategyKind,
    noise_p: f64,
    setup: &VerifySetup,
) -> Result<Vec<VerifyRow>, CliError> {
    par_trials(cfg.workers, cfg.first_trial, cfg.trials, |i| {
        let (verdict, trap_flips, trap_rejections, seed) = verify_trial(cfg, strategy, noise_p, setup, i)?;
        let cert = if verdict.accepted && setup.uses_default_threshold {
            Some(certificate(&setup.plan, cfg.role, verdict.failures(), cfg.lambda, cfg.variant)?)
        } else {
            None
        };
        Ok(VerifyRow {
            master_seed: cfg.seed,
            trial: i,
            trial_seed: seed,
            n: setup.plan.n,
            k: setup.plan.k,
            strategy: strategy.label().to_string(),
            threshold: setup.threshold,
            k1: verdict.k1,
            k2: verdict.k2,
            accepted: verdict.accepted,
            fidelity_bound: cert.as_ref().map(|c| c.fidelity_bound),
            confidence_bound: cert.as_ref().map(|c| c.confidence_bound),
            vacuous: cert.as_ref().map(|c| c.vacuous),
            trap_flips,
            trap_rejections,
        })
    })
}

pub fn cmd_verify(cfg: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let setup = verify_setup(cfg, &cfg.graph)?;
    let rows = verify_rows(cfg, &cfg.strategy, cfg.noise.p, &setup)?;
    let accepted = rows.iter().filter(|r| r.accepted).count() as u64;
    let summary = VerifySummary {
        master_seed: cfg.seed,
        trials: cfg.trials,
        accepted,
        acceptance_rate: accepted as f64 / cfg.trials as f64,
        mean_failures: rows.iter().map(|r| (r.k1 + r.k2) as f64).sum::<f64>() / cfg.trials as f64,
    };
    emit(cfg.format, &rows, Some(&summary), out, err)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRow {
    pub master_seed: u64,
    pub trial: u64,
    pub trial_seed: u64,
    pub n: usize,
    pub k: usize,
    pub strategy: String,
    pub client_accepted: bool,
    pub k1: usize,
    pub k2: usize,
    pub arbiter_accepted: Option<bool>,
    pub arbiter_failures: Option<usize>,
    pub blame: Blame,
    pub copies_prepared: usize,
    pub qubits_transmitted: usize,
    pub local_measurements_client: usize,
    pub local_measurements_computation: usize,
    pub local_measurements_arbiter: usize,
    pub trap_flips: usize,
    pub trap_rejections: usize,
    pub client_fidelity_bound: Option<f64>,
    pub arbiter_fidelity_bound: Option<f64>,
    pub arbiter_confidence_bound: Option<f64>,
}

impl ProtocolRow {
    pub fn from_transcript(master_seed: u64, trial: u64, t: &ProtocolTranscript) -> Self {
        let c = &t.config;
        ProtocolRow {
            master_seed,
            trial,
            trial_seed: c.seed,
            n: c.plan.n,
            k: c.plan.k,
            strategy: c.strategy.kind.label().to_string(),
            client_accepted: t.client_verdict.accepted,
            k1: t.client_verdict.k1,
            k2: t.client_verdict.k2,
            arbiter_accepted: t.arbiter_accepted(),
            arbiter_failures: t.arbiter_verdict.as_ref().map(|v| v.failures()),
            blame: t.blame,
            copies_prepared: t.counters.copies_prepared,
            qubits_transmitted: t.counters.qubits_transmitted,
            local_measurements_client: t.counters.local_measurements_client,
            local_measurements_computation: t.counters.local_measurements_computation,
            local_measurements_arbiter: t.counters.local_measurements_arbiter,
            trap_flips: t.hops().map(|h| h.trap_flips).sum(),
            trap_rejections: t.hops().map(|h| h.trap_rejections).sum(),
            client_fidelity_bound: t.client_certificate.as_ref().map(|c| c.fidelity_bound),
            arbiter_fidelity_bound: t.arbiter_certificate.as_ref().map(|c| c.fidelity_bound),
            arbiter_confidence_bound: t.arbiter_certificate.as_ref().map(|c| c.confidence_bound),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct ProtocolSummary {
    master_seed: u64,
    trials: u64,
    acceptance_rate: f64,
    blame_none: u64,
    blame_bob: u64,
    blame_alice1: u64,
    mean_qubits_transmitted: f64,
    mean_local_measurements_client: f64,
    mean_local_measurements_arbiter: f64,
}

pub fn cmd_protocol(cfg: &ExperimentConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let pc = cfg.protocol_config(&cfg.graph)?;
    let results = par_trials(cfg.workers, cfg.first_trial, cfg.trials, |i| {
        let t = run_trial(&pc, i)?;
        Ok((ProtocolRow::from_transcript(cfg.seed, i, &t), t))
    })?;
    let trials = cfg.trials as f64;
    let count = |b: Blame| results.iter().filter(|(r, _)| r.blame == b).count() as u64;
    let mean = |f: fn(&ProtocolRow) -> usize| results.iter().map(|(r, _)| f(r) as f64).sum::<f64>() / trials;
    let summary = ProtocolSummary {
        master_seed: cfg.seed,
        trials: cfg.trials,
        acceptance_rate: results.iter().filter(|(r, _)| r.client_accepted).count() as f64 / trials,
        blame_none: count(Blame::None),
        blame_bob: count(Blame::Bob),
        blame_alice1: count(Blame::Alice1),
        mean_qubits_transmitted: mean(|r| r.qubits_transmitted),
        mean_local_measurements_client: mean(|r| r.local_measurements_client),
        mean_local_measurements_arbiter: mean(|r| r.local_measurements_arbiter),
    };
    match cfg.format {
        OutputFormat::JsonLines => {
            for (row, t) in &results {
                write_json(
                    out,
                    &WithTranscript {
                        record: "trial",
                        row,
                        transcript: t,
                    },
                )?;
            }
            write_json(out, &Tagged { record: "summary", row: &summary })
        }
        OutputFormat::Csv => {
            let rows: Vec<ProtocolRow> = results.into_iter().map(|(r, _)| r).collect();
            emit(cfg.format, &rows, Some(&summary), out, err)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Adversary error probability.
    Q,
    /// Channel noise.
    P,
    /// Register size.
    N,
    /// Acceptance threshold, re-deciding the same outcome records.
    C,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub master_seed: u64,
    pub n: usize,
    pub trials: u64,
    pub acceptance_rate: f64,
    pub mean_failures: f64,
    pub threshold: f64,
    pub fidelity_bound: Option<f64>,
    pub confidence_bound: Option<f64>,
    pub wall_time_ms: f64,
}

fn with_q(kind: &StrategyKind, q: f64) -> Result<StrategyKind, CliError> {
    match kind {
        StrategyKind::Honest => Ok(StrategyKind::IidPauli {
            q,
            error: ErrorType::Z,
            target: ErrorTarget::AllQubits,
        }),
        StrategyKind::IidPauli { error, target, .. } => Ok(StrategyKind::IidPauli {
            q,
            error: *error,
            target: *target,
        }),
        _ => Err(CliError::config("the q axis needs an honest or iid strategy")),
    }
}

fn sweep_row(
    cfg: &ExperimentConfig,
    axis: Axis,
    value: f64,
    setup: &VerifySetup,
    rows: &[VerifyRow],
    threshold: f64,
    started: Instant,
) -> Result<SweepRow, CliError> {
    let accepted = rows.iter().filter(|r| (r.k1 + r.k2) as f64 <= threshold).count();
    let cert = if setup.uses_default_threshold {
        Some(certificate(&setup.plan, cfg.role, 0, cfg.lambda, cfg.variant)?)
    } else {
        None
    };
    Ok(SweepRow {
        axis: format!("{axis:?}").to_lowercase(),
        value,
        master_seed: cfg.seed,
        n: setup.plan.n,
        trials: cfg.trials,
        acceptance_rate: accepted as f64 / rows.len() as f64,
        mean_failures: rows.iter().map(|r| (r.k1 + r.k2) as f64).sum::<f64>() / rows.len() as f64,
        threshold,
        fidelity_bound: cert.as_ref().map(|c| c.fidelity_bound),
        confidence_bound: cert.as_ref().map(|c| c.confidence_bound),
        wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = ExperimentConfig::resolve(&args.experiment)?;
    let mut table = Vec::new();
    if args.axis == Axis::C {
        let started = Instant::now();
        let setup = verify_setup(&cfg, &cfg.graph)?;
        let rows = verify_rows(&cfg, &cfg.strategy, cfg.noise.p, &setup)?;
        for &c in &args.values {
            let mut s = setup.clone();
            s.threshold = c;
            s.uses_default_threshold = false;
            table.push(sweep_row(&cfg, args.axis, c, &s, &rows, c, started)?);
        }
    } else {
        for &v in &args.values {
            let started = Instant::now();
            let mut strategy = cfg.strategy.clone();
            let mut noise_p = cfg.noise.p;
            let mut graph = cfg.graph.clone();
            match args.axis {
                Axis::Q => strategy = with_q(&cfg.strategy, v)?,
                Axis::P => noise_p = v,
                Axis::N => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return Err(CliError::config(format!("n axis value {v} is not a positive integer")));
                    }
                    graph = cfg.graph.with_n(v as usize)?;
                }
                Axis::C => unreachable!(),
            }
            let setup = verify_setup(&cfg, &graph)?;
            let rows = verify_rows(&cfg, &strategy, noise_p, &setup)?;
            table.push(sweep_row(&cfg, args.axis, v, &setup, &rows, setup.threshold, started)?);
        }
    }
    emit::<SweepRow, ()>(cfg.format, &table, None, out, err)
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(subcommand)]
    pub kind: BoundsKind,
    #[arg(long, value_enum, global = true)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Subcommand)]
pub enum BoundsKind {
    /// `K`, copy count and thresholds for `n` qubits.
    Plan {
        #[arg(long)]
        n: usize,
    },
    /// Sampling without replacement: `N` measured, `K` remaining.
    Serfling {
        #[arg(long)]
        sample: usize,
        #[arg(long)]
        remainder: usize,
        #[arg(long)]
        deviation: f64,
    },
    /// Sum of `m` independent variables in `[0, 1]`.
    Azuma {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        deviation: f64,
    },
    /// Fidelity certificate; both arbiter variants unless `--variant` is given.
    Certificate {
        #[arg(long, value_enum)]
        role: RoleArg,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        failures: usize,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
    /// Copies and measurements against the prior protocol's minimal parameters.
    Cost {
        #[arg(long)]
        n: usize,
        /// Report every size from `n` to `n_max`.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Trap threshold `r_th` and the noise it tolerates.
    Traps {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        p_th: f64,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
    },
}

#[derive(Debug, Serialize)]
struct BoundValue {
    bound: &'static str,
    value: f64,
}

#[derive(Debug, Serialize)]
struct TrapRow {
    k: usize,
    p_th: f64,
    confidence: f64,
    r_th: f64,
    noise_limit: f64,
}

#[derive(Debug, Serialize)]
struct CertificateRow {
    role: Role,
    variant: CertificateVariant,
    n: usize,
    k: usize,
    lambda: f64,
    failures: usize,
    fidelity_bound: f64,
    confidence_bound: f64,
    vacuous: bool,
}

impl From<FidelityCertificate> for CertificateRow {
    fn from(c: FidelityCertificate) -> Self {
        CertificateRow {
            role: c.role,
            variant: c.variant,
            n: c.n,
            k: c.k,
            lambda: c.lambda,
            failures: c.observed_failures,
            fidelity_bound: c.fidelity_bound,
            confidence_bound: c.confidence_bound,
            vacuous: c.vacuous,
        }
    }
}

fn emit_plain<T: Serialize>(format: OutputFormat, rows: &[T], out: &mut dyn Write) -> Result<(), CliError> {
    match format {
        OutputFormat::JsonLines => rows.iter().try_for_each(|r| write_json(out, r)),
        OutputFormat::Csv => write_csv(out, rows),
    }
}

pub fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let format = args.format.unwrap_or_default();
    match &args.kind {
        BoundsKind::Plan { n } => emit_plain(format, &[plan_parameters(*n)?], out),
        BoundsKind::Serfling {
            sample,
            remainder,
            deviation,
        } => {
            let value = serfling_bound(&SerflingParams {
                sample: *sample,
                remainder: *remainder,
                deviation: *deviation,
            })?;
            emit_plain(format, &[BoundValue { bound: "serfling", value }], out)
        }
        BoundsKind::Azuma { m, deviation } => {
            let value = azuma_hoeffding_bound(&AzumaParams::binary(*m, *deviation))?;
            emit_plain(format, &[BoundValue { bound: "azuma_hoeffding", value }], out)
        }
        BoundsKind::Certificate {
            role,
            n,
            lambda,
            failures,
            k,
            variant,
        } => {
            let k = match k {
                Some(k) => *k,
                None => plan_parameters(*n)?.k,
            };
            let rows: Vec<CertificateRow> = match role {
                RoleArg::Client => vec![client_certificate(*n, k, *failures, *lambda)?.into()],
                RoleArg::Arbiter => {
                    let variants = match variant {
                        Some(v) => vec![(*v).into()],
                        None => vec![CertificateVariant::Appendix, CertificateVariant::Theorem],
                    };
                    variants
                        .into_iter()
                        .map(|v| arbiter_certificate(*n, k, *failures, *lambda, v).map(Into::into))
                        .collect::<Result<_, _>>()?
                }
            };
            emit_plain(format, &rows, out)
        }
        BoundsKind::Cost { n, n_max } => {
            let last = n_max.unwrap_or(*n);
            if last < *n {
                return Err(CliError::config("--n-max is below --n"));
            }
            let rows: Vec<CostReport> = (*n..=last)
                .map(|m| cost_comparison(m, &SatoParams::minimal(m)))
                .collect::<Result<_, _>>()?;
            emit_plain(format, &rows, out)
        }
        BoundsKind::Traps { k, p_th, confidence } => {
            let cfg = TrapConfig::new(*k, TrapState::Zero, *p_th, *confidence)?;
            let r_th = trap_threshold(&cfg)?;
            emit_plain(
                format,
                &[TrapRow {
                    k: *k,
                    p_th: *p_th,
                    confidence: *confidence,
                    r_th,
                    noise_limit: cfg.noise_limit(),
                }],
                out,
            )
        }
    }
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSON-lines output of `protocol`, or one transcript per line.
    #[arg(long)]
    pub transcript: PathBuf,
}

#[derive(Debug, Serialize)]
struct ReplayRow {
    line: usize,
    trial_seed: u64,
    identical: bool,
}

pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let file = std::fs::File::open(&args.transcript)
        .map_err(|e| CliError::config(format!("cannot open {}: {e}", args.transcript.display())))?;
    let mut mismatches = 0;
    let mut replayed = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| CliError::config(format!("line {}: {e}", i + 1)))?;
        if value.get("record").and_then(|r| r.as_str()) == Some("summary") {
            continue;
        }
        if let Some(t) = value.get_mut("transcript") {
            value = t.take();
        }
        let transcript: ProtocolTranscript =
            serde_json::from_value(value).map_err(|e| CliError::config(format!("line {}: {e}", i + 1)))?;
        let identical = replay_matches(&transcript)?;
        mismatches += usize::from(!identical);
        replayed += 1;
        write_json(
            out,
            &ReplayRow {
                line: i + 1,
                trial_seed: transcript.config.seed,
                identical,
            },
        )?;
    }
    if replayed == 0 {
        return Err(CliError::config("no transcripts found"));
    }
    if mismatches > 0 {
        return Err(CliError {
            code: EXIT_INTERNAL,
            message: format!("{mismatches} of {replayed} transcripts did not replay identically"),
        });
    }
    Ok(())
}
