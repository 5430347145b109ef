use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("graph is not 2-colorable (odd cycle through vertex {vertex})")]
    NotTwoColorable { vertex: usize },
    #[error("invalid edge ({0}, {1})")]
    InvalidEdge(usize, usize),
    #[error("invalid vertex {vertex} (graph has {n} vertices)")]
    InvalidVertex { vertex: usize, n: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{n} qubits exceeds the dense oracle cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("outcome domains do not match the graph partition")]
    DomainMismatch,
    #[error("verification needs an even, nonzero number of registers, got {0}")]
    OddBatch(usize),
    #[error("threshold {threshold} outside [0, {max}]")]
    ThresholdOutOfRange { threshold: f64, max: f64 },
    #[error("n = {0} is below the minimum of 6")]
    TooSmallN(usize),
    #[error("observed failures {failures} exceed the acceptance threshold {threshold}")]
    ThresholdExceeded { failures: usize, threshold: f64 },
    #[error("lambda {lambda} outside [{lo}, {hi}]")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trap positions do not match the received register")]
    PositionMismatch,
    #[error("expected a batch of {expected} registers, got {got}")]
    WrongBatchSize { expected: usize, got: usize },
    #[error("arbitration requested without a dispute")]
    NoDispute,
    #[error("qubit count mismatch: {expected} vs {got}")]
    QubitMismatch { expected: usize, got: usize },
}
