use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entries contain NaN or infinity")]
    NonFinite,
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("state vector norm is {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("{what} = {value} is outside the supported range {range}")]
    OutOfRange {
        what: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("design construction failed: {0}")]
    Construction(String),
    #[error("partition mismatch: table has {table}, POVM has {povm}")]
    PartitionMismatch { table: String, povm: String },
    #[error("regressor matrix is rank deficient: {0}")]
    RankDeficient(String),
    #[error("eigendecomposition did not converge")]
    NoConvergence,
    #[error("parse error at column {column}: {reason}")]
    Parse { column: usize, reason: String },
    #[error("node {node_id} did not report shot {shot_id}")]
    MissingRecord { shot_id: u64, node_id: usize },
    #[error("duplicate record for shot {shot_id} from node {node_id}")]
    DuplicateRecord { shot_id: u64, node_id: usize },
    #[error("transport failure: {0}")]
    Transport(String),
}
