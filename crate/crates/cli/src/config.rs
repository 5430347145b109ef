//! Experiment configuration: command-line flags merged over an optional
//! JSON or TOML file with the same keys.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use pvbqc::bounds::{plan_parameters, plan_with_k, CertificateVariant, ProtocolPlan};
use pvbqc::graph::{build_colored_graph, standard_graph, GraphFile, StandardGraph};
use pvbqc::noisedetect::{trap_threshold, NoiseKind, PauliChannel, TrapConfig, TrapState};
use pvbqc::protocol::{AdversaryStrategy, DisputePolicy, ErrorTarget, ErrorType, ProtocolConfig, StrategyKind};
use pvbqc::ColoredGraph;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    JsonLines,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantArg {
    Appendix,
    Theorem,
}

impl From<VariantArg> for CertificateVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Appendix => CertificateVariant::Appendix,
            VariantArg::Theorem => CertificateVariant::Theorem,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleArg {
    Client,
    Arbiter,
}

/// Flags shared by the experiment subcommands. Every flag is optional so
/// that a config file can supply it.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// JSON or TOML file with the same keys as the flags (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `path`, `cycle`, `grid:RxC`, `path:N`, `cycle:N` or a JSON graph file.
    #[arg(long)]
    pub graph: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// honest, product_plus, product_zero, iid_x, iid_z or iid_depolarizing.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Restrict an i.i.d. adversary to one vertex (1-indexed).
    #[arg(long)]
    pub target_vertex: Option<usize>,
    #[arg(long)]
    pub noise_p: Option<f64>,
    #[arg(long, value_enum)]
    pub noise_kind: Option<NoiseKindArg>,
    #[arg(long)]
    pub traps_k: Option<usize>,
    #[arg(long)]
    pub p_th: Option<f64>,
    #[arg(long, value_enum)]
    pub trap_state: Option<TrapStateArg>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Index of the first trial; with `--trials 1` re-runs a single row.
    #[arg(long)]
    pub first_trial: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    #[arg(long)]
    pub c_override: Option<f64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum)]
    pub dispute: Option<DisputeArg>,
    #[arg(long)]
    pub pool_size: Option<usize>,
    #[arg(long, value_enum)]
    pub role: Option<RoleArg>,
    /// Override `K = ⌈n² ln n⌉`.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindArg {
    BitFlip,
    PhaseFlip,
    Depolarizing,
}

impl From<NoiseKindArg> for NoiseKind {
    fn from(k: NoiseKindArg) -> Self {
        match k {
            NoiseKindArg::BitFlip => NoiseKind::BitFlip,
            NoiseKindArg::PhaseFlip => NoiseKind::PhaseFlip,
            NoiseKindArg::Depolarizing => NoiseKind::Depolarizing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapStateArg {
    Zero,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisputeArg {
    AutoIfReject,
    Never,
    Always,
}

impl From<DisputeArg> for DisputePolicy {
    fn from(d: DisputeArg) -> Self {
        match d {
            DisputeArg::AutoIfReject => DisputePolicy::AutoIfReject,
            DisputeArg::Never => DisputePolicy::Never,
            DisputeArg::Always => DisputePolicy::Always,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum GraphEntry {
    Name(String),
    Inline(GraphFile),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum StrategyEntry {
    Name(String),
    Full(StrategyKind),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ExperimentFile {
    graph: Option<GraphEntry>,
    n: Option<usize>,
    strategy: Option<StrategyEntry>,
    q: Option<f64>,
    target_vertex: Option<usize>,
    noise_p: Option<f64>,
    noise_kind: Option<NoiseKindArg>,
    traps_k: Option<usize>,
    p_th: Option<f64>,
    trap_state: Option<TrapStateArg>,
    confidence: Option<f64>,
    trials: Option<u64>,
    first_trial: Option<u64>,
    seed: Option<u64>,
    format: Option<OutputFormat>,
    lambda: Option<f64>,
    variant: Option<VariantArg>,
    c_override: Option<f64>,
    workers: Option<usize>,
    dispute: Option<DisputeArg>,
    pool_size: Option<usize>,
    role: Option<RoleArg>,
    k: Option<usize>,
}

fn read_file(path: &Path) -> Result<ExperimentFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    if is_toml {
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Graph family, resized by `n` where that makes sense.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSpec {
    Path { n: usize },
    Cycle { n: usize },
    Grid { rows: usize, cols: usize },
    Explicit { n: usize, edges: Vec<[usize; 2]> },
}

impl GraphSpec {
    pub fn n(&self) -> usize {
        match self {
            GraphSpec::Path { n } | GraphSpec::Cycle { n } | GraphSpec::Explicit { n, .. } => *n,
            GraphSpec::Grid { rows, cols } => rows * cols,
        }
    }

    pub fn with_n(&self, n: usize) -> Result<GraphSpec, CliError> {
        match self {
            GraphSpec::Path { .. } => Ok(GraphSpec::Path { n }),
            GraphSpec::Cycle { .. } => Ok(GraphSpec::Cycle { n }),
            _ => Err(CliError::config("only path and cycle graphs can be resized by n")),
        }
    }

    pub fn build(&self) -> Result<ColoredGraph, CliError> {
        let g = match self {
            GraphSpec::Path { n } => standard_graph(StandardGraph::Path { n: *n }),
            GraphSpec::Cycle { n } => standard_graph(StandardGraph::EvenCycle { n: *n }),
            GraphSpec::Grid { rows, cols } => standard_graph(StandardGraph::Grid {
                rows: *rows,
                cols: *cols,
            }),
            GraphSpec::Explicit { n, edges } => {
                let e: Vec<(usize, usize)> = edges.iter().map(|[a, b]| (*a, *b)).collect();
                build_colored_graph(*n, &e)
            }
        };
        g.map_err(CliError::from)
    }

    fn parse(s: &str, n: Option<usize>) -> Result<GraphSpec, CliError> {
        let (family, arg) = match s.split_once(':') {
            Some((f, a)) => (f, Some(a)),
            None => (s, None),
        };
        let parse_n = |a: &str| {
            a.parse::<usize>()
                .map_err(|_| CliError::config(format!("bad vertex count in graph {s:?}")))
        };
        let spec = match (family, arg) {
            ("path", None) => GraphSpec::Path { n: n.unwrap_or(6) },
            ("cycle", None) => GraphSpec::Cycle { n: n.unwrap_or(6) },
            ("path", Some(a)) => GraphSpec::Path { n: parse_n(a)? },
            ("cycle", Some(a)) => GraphSpec::Cycle { n: parse_n(a)? },
            ("grid", Some(a)) => {
                let (r, c) = a
                    .split_once('x')
                    .ok_or_else(|| CliError::config(format!("grid needs RxC, got {a:?}")))?;
                GraphSpec::Grid {
                    rows: parse_n(r)?,
                    cols: parse_n(c)?,
                }
            }
            _ => {
                let path = Path::new(s);
                if !path.exists() {
                    return Err(CliError::config(format!("unknown graph {s:?}")));
                }
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read {s}: {e}")))?;
                let f: GraphFile =
                    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{s}: {e}")))?;
                GraphSpec::Explicit { n: f.n, edges: f.edges }
            }
        };
        if let Some(n) = n {
            if spec.n() != n {
                return Err(CliError::config(format!(
                    "--n {n} disagrees with graph {s:?} on {} vertices",
                    spec.n()
                )));
            }
        }
        Ok(spec)
    }
}

fn parse_strategy(name: &str, q: Option<f64>, target: Option<usize>) -> Result<StrategyKind, CliError> {
    let iid = |error| {
        let q = q.ok_or_else(|| CliError::config(format!("strategy {name} needs --q")))?;
        Ok(StrategyKind::IidPauli {
            q,
            error,
            target: target.map_or(ErrorTarget::AllQubits, ErrorTarget::Vertex),
        })
    };
    match name {
        "honest" => Ok(StrategyKind::Honest),
        "product_plus" => Ok(StrategyKind::ProductPlus),
        "product_zero" => Ok(StrategyKind::ProductZero),
        "iid_x" => iid(ErrorType::X),
        "iid_z" => iid(ErrorType::Z),
        "iid_depolarizing" => iid(ErrorType::Depolarizing),
        other => Err(CliError::config(format!("unknown strategy {other:?}"))),
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub strategy: StrategyKind,
    pub noise: PauliChannel,
    pub traps: Option<TrapConfig>,
    pub trials: u64,
    pub first_trial: u64,
    pub seed: u64,
    pub format: OutputFormat,
    pub lambda: Option<f64>,
    pub variant: CertificateVariant,
    pub c_override: Option<f64>,
    pub workers: Option<usize>,
    pub dispute: DisputePolicy,
    pub pool_size: Option<usize>,
    pub role: RoleArg,
    pub k: Option<usize>,
}

impl ExperimentConfig {
    pub fn resolve(args: &ExperimentArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => ExperimentFile::default(),
        };
        let n = args.n.or(file.n);
        let graph = match (&args.graph, &file.graph) {
            (Some(s), _) => GraphSpec::parse(s, n)?,
            (None, Some(GraphEntry::Name(s))) => GraphSpec::parse(s, n)?,
            (None, Some(GraphEntry::Inline(f))) => GraphSpec::Explicit {
                n: f.n,
                edges: f.edges.clone(),
            },
            (None, None) => GraphSpec::Cycle { n: n.unwrap_or(6) },
        };
        let q = args.q.or(file.q);
        let target = args.target_vertex.or(file.target_vertex);
        let strategy = match (&args.strategy, &file.strategy) {
            (Some(s), _) => parse_strategy(s, q, target)?,
            (None, Some(StrategyEntry::Name(s))) => parse_strategy(s, q, target)?,
            (None, Some(StrategyEntry::Full(k))) => k.clone(),
            (None, None) => StrategyKind::Honest,
        };
        let noise_kind = args.noise_kind.or(file.noise_kind).unwrap_or(NoiseKindArg::BitFlip);
        let noise = PauliChannel::new(noise_kind.into(), args.noise_p.or(file.noise_p).unwrap_or(0.0))?;
        let traps = match args.traps_k.or(file.traps_k) {
            None => None,
            Some(k) => {
                let p_th = args
                    .p_th
                    .or(file.p_th)
                    .ok_or_else(|| CliError::config("--traps-k needs --p-th"))?;
                let state = match args.trap_state.or(file.trap_state).unwrap_or(TrapStateArg::Zero) {
                    TrapStateArg::Zero => TrapState::Zero,
                    TrapStateArg::Plus => TrapState::Plus,
                };
                let cfg = TrapConfig::new(k, state, p_th, args.confidence.or(file.confidence).unwrap_or(0.99))?;
                trap_threshold(&cfg)?;
                Some(cfg)
            }
        };
        let trials = args.trials.or(file.trials).unwrap_or(1);
        if trials == 0 {
            return Err(CliError::config("--trials must be at least 1"));
        }
        let seed = args
            .seed
            .or(file.seed)
            .ok_or_else(|| CliError::config("--seed is required"))?;
        let workers = args.workers.or(file.workers);
        if workers == Some(0) {
            return Err(CliError::config("--workers must be at least 1"));
        }
        Ok(ExperimentConfig {
            graph,
            strategy,
            noise,
            traps,
            trials,
            first_trial: args.first_trial.or(file.first_trial).unwrap_or(0),
            seed,
            format: args.format.or(file.format).unwrap_or_default(),
            lambda: args.lambda.or(file.lambda),
            variant: args.variant.or(file.variant).map(Into::into).unwrap_or_default(),
            c_override: args.c_override.or(file.c_override),
            workers,
            dispute: args.dispute.or(file.dispute).map(Into::into).unwrap_or_default(),
            pool_size: args.pool_size.or(file.pool_size),
            role: args.role.or(file.role).unwrap_or(RoleArg::Client),
            k: args.k.or(file.k),
        })
    }

    pub fn plan(&self, n: usize) -> Result<ProtocolPlan, CliError> {
        let base = plan_parameters(n)?;
        Ok(match self.k {
            Some(k) if k >= 1 => plan_with_k(n, k),
            Some(_) => return Err(CliError::config("--k must be at least 1")),
            None => base,
        })
    }

    /// Protocol config for this experiment on `graph`, seeded with the
    /// master seed.
    pub fn protocol_config(&self, graph: &GraphSpec) -> Result<ProtocolConfig, CliError> {
        let g = graph.build()?;
        let plan = self.plan(g.n())?;
        let mut c = ProtocolConfig::new(g, self.seed)?;
        c.plan = plan;
        c.strategy = AdversaryStrategy::new(self.strategy.clone());
        c.noise = self.noise;
        c.traps = self.traps;
        c.dispute_policy = self.dispute;
        c.variant = self.variant;
        if let Some(l) = self.pool_size {
            c.client_pool_size = l;
        }
        match self.role {
            RoleArg::Client => c.lambda_client = self.lambda,
            RoleArg::Arbiter => c.lambda_arbiter = self.lambda,
        }
        c.validate()?;
        Ok(c)
    }
}
